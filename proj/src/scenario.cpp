#include "adatm/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "adatm/error.hpp"
#include "adatm/format.hpp"
#include "json.hpp"

namespace adatm::scenario {

using nlohmann::json;

atm::AirspaceConfig Scenario::airspace_config() const {
    atm::AirspaceConfig c;
    c.bucket_seconds = bucket_seconds;
    c.horizon_seconds = horizon_seconds;
    c.calm_capacity = calm_capacity;
    c.severe_capacity = severe_capacity;
    return c;
}

namespace {

template <typename F>
void within(const std::string& where, F&& check) {
    try {
        check();
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    } catch (const Error& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

} // namespace

void Scenario::validate() const {
    within("grid", [&] { grid.validate(); });
    if (bucket_seconds <= 0) throw ValidationError("bucket_seconds must be positive");
    if (!(horizon_seconds > 0) || !std::isfinite(horizon_seconds))
        throw ValidationError("horizon_seconds must be positive");
    if (calm_capacity < 0 || severe_capacity < 0) throw ValidationError("capacity values must be >= 0");
    if (severe_capacity > calm_capacity) throw ValidationError("capacity.severe exceeds capacity.calm");

    std::set<std::string> ids;
    for (std::size_t i = 0; i < flights.size(); ++i) {
        const auto& f = flights[i];
        within("flights[" + std::to_string(i) + "]", [&] { f.validate(grid); });
        if (f.flight_id.find_first_of(",;|/ \t\r\n") != std::string::npos)
            throw ValidationError("flights[" + std::to_string(i) + "]: id contains a reserved character");
        if (!ids.insert(f.flight_id).second) throw ValidationError("flights[" + std::to_string(i) + "]: duplicate flight id " + f.flight_id);
    }

    std::set<std::string> storm_ids;
    for (std::size_t i = 0; i < storms.size(); ++i) {
        within("storms[" + std::to_string(i) + "]", [&] { storms[i].validate(); });
        if (!storm_ids.insert(storms[i].id).second) throw ValidationError("storms[" + std::to_string(i) + "]: duplicate storm id " + storms[i].id);
    }

    for (std::size_t i = 0; i < closures.size(); ++i) {
        const auto where = "closures[" + std::to_string(i) + "]";
        if (!grid.valid(closures[i].cell)) throw ValidationError(where + ": subsector outside grid");
        within(where, [&] { closures[i].interval.validate(); });
    }

    std::set<std::string> obs_ids;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& o = observations[i];
        const auto where = "observations[" + std::to_string(i) + "]";
        if (!o.id.empty() && !obs_ids.insert(o.id).second) throw ValidationError(where + ": duplicate id " + o.id);
        if (!(o.confidence >= 0 && o.confidence <= 1)) throw ValidationError(where + ": confidence outside [0, 1]");
        if (o.payload.empty()) throw ValidationError(where + ": payload is empty");
        if (o.kind == kernel::NotionKind::Aggregate) throw ValidationError(where + ": kind Aggregate is not accepted");
        within(where, [&] {
            kernel::Metadata{o.source, o.observed_at, 0, "observation"}.validate();
            o.key.validate();
        });
        if (auto storm = o.payload.get("storm"); storm && !storm_ids.contains(*storm))
            throw ValidationError(where + ": unknown storm " + *storm);
    }

    std::set<std::string> sub_ids;
    for (std::size_t i = 0; i < subscriptions.size(); ++i) {
        const auto& s = subscriptions[i];
        const auto where = "subscriptions[" + std::to_string(i) + "]";
        if (s.id.empty()) throw ValidationError(where + ": id is empty");
        if (!sub_ids.insert(s.id).second) throw ValidationError(where + ": duplicate id " + s.id);
        if (!(s.min_confidence >= 0 && s.min_confidence <= 1))
            throw ValidationError(where + ": min_confidence outside [0, 1]");
        within(where, [&] { s.spec.validate(); });
    }

    std::set<std::string> rule_ids;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto where = "rules[" + std::to_string(i) + "]";
        within(where, [&] { rules[i].validate(); });
        if (!rule_ids.insert(rules[i].id).second) throw ValidationError(where + ": duplicate id " + rules[i].id);
    }
}

// --- reading --------------------------------------------------------------

namespace {

std::string at(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string at(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

const json& require(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) throw ParseError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(at(path, key), "missing required field");
    return *it;
}

const json* optional_field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) throw ParseError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

double number(const json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ParseError(path, "expected a number");
}

std::int64_t integer(const json& j, const std::string& path) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
    }
    throw ParseError(path, "expected an integer");
}

int small_integer(const json& j, const std::string& path) {
    const auto v = integer(j, path);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ParseError(path, "integer out of range");
    return static_cast<int>(v);
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw ParseError(path, "expected a string");
    return j.get<std::string>();
}

const json& array(const json& j, const std::string& path, std::optional<std::size_t> size = std::nullopt) {
    if (!j.is_array()) throw ParseError(path, "expected an array");
    if (size && j.size() != *size) throw ParseError(path, "expected " + std::to_string(*size) + " elements");
    return j;
}

nearness::TimeInterval read_interval(const json& j, const std::string& path) {
    array(j, path, 2);
    return {number(j[0], at(path, 0)), number(j[1], at(path, 1))};
}

nearness::PlanarBox read_box(const json& j, const std::string& path) {
    array(j, path, 4);
    return {number(j[0], at(path, 0)), number(j[1], at(path, 1)), number(j[2], at(path, 2)),
            number(j[3], at(path, 3))};
}

nearness::ConceptPath read_concept(const json& j, const std::string& path) {
    try {
        return nearness::ConceptPath::parse(text(j, path));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(path, e.what());
    }
}

nearness::NearnessKey read_key(const json& j, const std::string& path) {
    return {read_interval(require(j, path, "time"), at(path, "time")),
            read_box(require(j, path, "box"), at(path, "box")),
            read_concept(require(j, path, "concept"), at(path, "concept"))};
}

kernel::NotionKind read_kind(const json& j, const std::string& path) {
    try {
        return kernel::parse_notion_kind(text(j, path));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(path, e.what());
    }
}

std::map<std::string, std::string> read_fields(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path, "expected an object");
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : j.items()) {
        if (v.is_string()) out[k] = v.get<std::string>();
        else if (v.is_number()) out[k] = format_number(v.get<double>());
        else if (v.is_boolean()) out[k] = v.get<bool>() ? "true" : "false";
        else throw ParseError(at(path, k), "expected a string or number");
    }
    return out;
}

atm::Route read_route(const json& j, const std::string& path) {
    array(j, path);
    atm::Route out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto p = at(path, i);
        const auto& w = array(j[i], p);
        if (w.size() == 3) out.push_back({number(w[0], at(p, 0)), number(w[1], at(p, 1)), number(w[2], at(p, 2))});
        else if (w.size() == 4) out.push_back({number(w[0], at(p, 0)), number(w[1], at(p, 1)), number(w[3], at(p, 3))});
        else throw ParseError(p, "expected [x, y, t] or [x, y, alt, t]");
    }
    return out;
}

atm::FlightPlan read_flight(const json& j, const std::string& path) {
    atm::FlightPlan f;
    f.flight_id = text(require(j, path, "id"), at(path, "id"));
    f.waypoints = read_route(require(j, path, "waypoints"), at(path, "waypoints"));
    if (auto* a = optional_field(j, path, "alternates")) {
        const auto p = at(path, "alternates");
        array(*a, p);
        for (std::size_t i = 0; i < a->size(); ++i) f.alternates.push_back(read_route((*a)[i], at(p, i)));
    }
    if (auto* v = optional_field(j, path, "priority")) f.priority_rank = small_integer(*v, at(path, "priority"));
    if (auto* v = optional_field(j, path, "departure_delay"))
        f.departure_delay = number(*v, at(path, "departure_delay"));
    if (auto* v = optional_field(j, path, "max_delay")) f.max_delay = number(*v, at(path, "max_delay"));
    return f;
}

atm::StormCell read_storm(const json& j, const std::string& path) {
    atm::StormCell s;
    s.id = text(require(j, path, "id"), at(path, "id"));
    s.box = read_box(require(j, path, "box"), at(path, "box"));
    if (auto* v = optional_field(j, path, "velocity")) {
        const auto p = at(path, "velocity");
        array(*v, p, 2);
        s.vx = number((*v)[0], at(p, 0));
        s.vy = number((*v)[1], at(p, 1));
    }
    s.active = read_interval(require(j, path, "active"), at(path, "active"));
    if (auto* v = optional_field(j, path, "severity"); v && text(*v, at(path, "severity")) != "Severe")
        throw ParseError(at(path, "severity"), "only Severe is supported");
    return s;
}

Closure read_closure(const json& j, const std::string& path) {
    return {{small_integer(require(j, path, "col"), at(path, "col")),
             small_integer(require(j, path, "row"), at(path, "row"))},
            read_interval(require(j, path, "interval"), at(path, "interval"))};
}

Observation read_observation(const json& j, const std::string& path) {
    Observation o;
    if (auto* v = optional_field(j, path, "id")) o.id = text(*v, at(path, "id"));
    o.payload = kernel::Payload(read_fields(require(j, path, "payload"), at(path, "payload")));
    if (auto* v = optional_field(j, path, "kind")) o.kind = read_kind(*v, at(path, "kind"));
    o.source = text(require(j, path, "source"), at(path, "source"));
    o.confidence = number(require(j, path, "confidence"), at(path, "confidence"));
    if (auto* v = optional_field(j, path, "observed_at")) o.observed_at = number(*v, at(path, "observed_at"));
    o.key = read_key(require(j, path, "key"), at(path, "key"));
    return o;
}

std::size_t read_edges(const json& j, const std::string& path) {
    const double v = number(j, path);
    if (std::isinf(v) && v > 0) return nearness::kInfiniteEdges;
    if (!(v >= 0) || v != std::floor(v)) throw ParseError(path, "expected a non-negative edge count");
    return static_cast<std::size_t>(v);
}

SubscriptionDef read_subscription(const json& j, const std::string& path) {
    SubscriptionDef s;
    s.id = text(require(j, path, "id"), at(path, "id"));
    const auto mode = text(require(j, path, "mode"), at(path, "mode"));
    if (mode == "neighborhood") {
        const auto rp = at(path, "radii");
        const auto& r = require(j, path, "radii");
        nearness::Radii radii{number(require(r, rp, "time"), at(rp, "time")),
                              number(require(r, rp, "space"), at(rp, "space")),
                              read_edges(require(r, rp, "concept"), at(rp, "concept"))};
        s.spec = nearness::QuerySpec::neighborhood(read_key(require(j, path, "center"), at(path, "center")), radii);
    } else if (mode == "focused") {
        std::optional<nearness::TimeInterval> time;
        std::optional<nearness::PlanarBox> box;
        std::optional<nearness::ConceptPath> concept_prefix;
        if (auto* v = optional_field(j, path, "time")) time = read_interval(*v, at(path, "time"));
        if (auto* v = optional_field(j, path, "box")) box = read_box(*v, at(path, "box"));
        if (auto* v = optional_field(j, path, "concept")) concept_prefix = read_concept(*v, at(path, "concept"));
        s.spec = nearness::QuerySpec::focused(time, box, concept_prefix);
    } else {
        throw ParseError(at(path, "mode"), "expected \"neighborhood\" or \"focused\"");
    }
    if (auto* v = optional_field(j, path, "min_confidence")) s.min_confidence = number(*v, at(path, "min_confidence"));
    if (auto* v = optional_field(j, path, "kinds")) {
        const auto p = at(path, "kinds");
        array(*v, p);
        for (std::size_t i = 0; i < v->size(); ++i) s.kinds.insert(read_kind((*v)[i], at(p, i)));
    }
    return s;
}

kernel::HypothesisRule read_rule(const json& j, const std::string& path) {
    kernel::HypothesisRule r;
    r.id = text(require(j, path, "id"), at(path, "id"));
    const auto p = at(path, "premises");
    const auto& premises = array(require(j, path, "premises"), p);
    for (std::size_t i = 0; i < premises.size(); ++i) r.premises.push_back(read_fields(premises[i], at(p, i)));
    r.conclusion = read_fields(require(j, path, "conclusion"), at(path, "conclusion"));
    if (auto* v = optional_field(j, path, "kind")) r.conclusion_kind = read_kind(*v, at(path, "kind"));
    return r;
}

template <typename T, typename F>
std::vector<T> read_list(const json& root, const char* key, F&& read) {
    std::vector<T> out;
    if (auto* v = optional_field(root, "", key)) {
        const auto path = at(std::string{}, key);
        array(*v, path);
        for (std::size_t i = 0; i < v->size(); ++i) out.push_back(read((*v)[i], at(path, i)));
    }
    return out;
}

const std::set<std::string> kTopLevel{"grid",    "bucket_seconds", "horizon_seconds", "capacity",
                                      "flights", "storms",         "closures",        "observations",
                                      "subscriptions", "rules",    "seed"};

} // namespace

Scenario load_scenario(std::string_view input) {
    json root;
    try {
        root = json::parse(input);
    } catch (const json::parse_error& e) {
        throw ParseError("", std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) throw ParseError("", "expected a top-level object");
    for (const auto& [k, v] : root.items())
        if (!kTopLevel.contains(k)) throw ParseError("/" + k, "unknown field");

    Scenario s;
    const auto& g = require(root, "", "grid");
    const std::string gp = "/grid";
    if (auto* v = optional_field(g, gp, "x0")) s.grid.x0 = number(*v, at(gp, "x0"));
    if (auto* v = optional_field(g, gp, "y0")) s.grid.y0 = number(*v, at(gp, "y0"));
    s.grid.cols = small_integer(require(g, gp, "cols"), at(gp, "cols"));
    s.grid.rows = small_integer(require(g, gp, "rows"), at(gp, "rows"));
    s.grid.cell = number(require(g, gp, "cell"), at(gp, "cell"));
    if (auto* v = optional_field(g, gp, "sector_cols")) s.grid.sector_cols = small_integer(*v, at(gp, "sector_cols"));
    if (auto* v = optional_field(g, gp, "sector_rows")) s.grid.sector_rows = small_integer(*v, at(gp, "sector_rows"));

    if (auto* v = optional_field(root, "", "bucket_seconds")) s.bucket_seconds = integer(*v, "/bucket_seconds");
    if (auto* v = optional_field(root, "", "horizon_seconds")) s.horizon_seconds = number(*v, "/horizon_seconds");
    if (auto* c = optional_field(root, "", "capacity")) {
        if (auto* v = optional_field(*c, "/capacity", "calm")) s.calm_capacity = small_integer(*v, "/capacity/calm");
        if (auto* v = optional_field(*c, "/capacity", "severe"))
            s.severe_capacity = small_integer(*v, "/capacity/severe");
    }
    s.flights = read_list<atm::FlightPlan>(root, "flights", read_flight);
    s.storms = read_list<atm::StormCell>(root, "storms", read_storm);
    s.closures = read_list<Closure>(root, "closures", read_closure);
    s.observations = read_list<Observation>(root, "observations", read_observation);
    s.subscriptions = read_list<SubscriptionDef>(root, "subscriptions", read_subscription);
    s.rules = read_list<kernel::HypothesisRule>(root, "rules", read_rule);
    if (auto* v = optional_field(root, "", "seed")) s.seed = integer(*v, "/seed");

    s.validate();
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

// --- writing --------------------------------------------------------------

namespace {

json num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json interval(const nearness::TimeInterval& t) { return json::array({num(t.start), num(t.end)}); }
json box(const nearness::PlanarBox& b) { return json::array({num(b.x0), num(b.y0), num(b.x1), num(b.y1)}); }

json key(const nearness::NearnessKey& k) {
    return {{"time", interval(k.time)}, {"box", box(k.space)}, {"concept", k.concept_path.str()}};
}

json route(const atm::Route& r) {
    json out = json::array();
    for (const auto& w : r) out.push_back(json::array({num(w.x), num(w.y), num(w.t)}));
    return out;
}

json fields(const std::map<std::string, std::string>& m) {
    json out = json::object();
    for (const auto& [k, v] : m) out[k] = v;
    return out;
}

} // namespace

std::string dump_scenario(const Scenario& s) {
    json root;
    root["grid"] = {{"x0", num(s.grid.x0)},         {"y0", num(s.grid.y0)},
                    {"cols", s.grid.cols},          {"rows", s.grid.rows},
                    {"cell", num(s.grid.cell)},     {"sector_cols", s.grid.sector_cols},
                    {"sector_rows", s.grid.sector_rows}};
    root["bucket_seconds"] = s.bucket_seconds;
    root["horizon_seconds"] = num(s.horizon_seconds);
    root["capacity"] = {{"calm", s.calm_capacity}, {"severe", s.severe_capacity}};
    root["seed"] = s.seed;

    json flights = json::array();
    for (const auto& f : s.flights) {
        json alts = json::array();
        for (const auto& a : f.alternates) alts.push_back(route(a));
        json jf = {{"id", f.flight_id},
                   {"priority", f.priority_rank},
                   {"waypoints", route(f.waypoints)},
                   {"alternates", alts},
                   {"departure_delay", num(f.departure_delay)}};
        if (f.max_delay) jf["max_delay"] = num(*f.max_delay);
        flights.push_back(std::move(jf));
    }
    root["flights"] = std::move(flights);

    json storms = json::array();
    for (const auto& st : s.storms)
        storms.push_back({{"id", st.id},
                          {"box", box(st.box)},
                          {"velocity", json::array({num(st.vx), num(st.vy)})},
                          {"active", interval(st.active)}});
    root["storms"] = std::move(storms);

    json closures = json::array();
    for (const auto& c : s.closures)
        closures.push_back({{"col", c.cell.col}, {"row", c.cell.row}, {"interval", interval(c.interval)}});
    root["closures"] = std::move(closures);

    json observations = json::array();
    for (const auto& o : s.observations) {
        json jo = {{"payload", fields(o.payload.fields())},
                   {"kind", std::string(kernel::to_string(o.kind))},
                   {"source", o.source},
                   {"confidence", num(o.confidence)},
                   {"observed_at", num(o.observed_at)},
                   {"key", key(o.key)}};
        if (!o.id.empty()) jo["id"] = o.id;
        observations.push_back(std::move(jo));
    }
    root["observations"] = std::move(observations);

    json subs = json::array();
    for (const auto& sub : s.subscriptions) {
        json js = {{"id", sub.id}, {"min_confidence", num(sub.min_confidence)}};
        json kinds = json::array();
        for (auto k : sub.kinds) kinds.push_back(std::string(kernel::to_string(k)));
        js["kinds"] = std::move(kinds);
        const auto& q = sub.spec;
        if (q.mode == nearness::QueryMode::Neighborhood) {
            js["mode"] = "neighborhood";
            js["center"] = key(q.center);
            js["radii"] = {{"time", num(q.radii.time)},
                           {"space", num(q.radii.space)},
                           {"concept", q.radii.concept_edges == nearness::kInfiniteEdges
                                           ? json("inf")
                                           : json(q.radii.concept_edges)}};
        } else {
            js["mode"] = "focused";
            if (q.time) js["time"] = interval(*q.time);
            if (q.space) js["box"] = box(*q.space);
            if (q.concept_prefix) js["concept"] = q.concept_prefix->str();
        }
        subs.push_back(std::move(js));
    }
    root["subscriptions"] = std::move(subs);

    json rules = json::array();
    for (const auto& r : s.rules) {
        json premises = json::array();
        for (const auto& p : r.premises) premises.push_back(fields(p));
        rules.push_back({{"id", r.id},
                         {"premises", premises},
                         {"conclusion", fields(r.conclusion)},
                         {"kind", std::string(kernel::to_string(r.conclusion_kind))}});
    }
    root["rules"] = std::move(rules);

    return root.dump(2) + "\n";
}

} // namespace adatm::scenario
