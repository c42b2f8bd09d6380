#include "adatm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "adatm/error.hpp"

namespace adatm::kernel {

std::string_view to_string(NotionKind kind) {
    switch (kind) {
    case NotionKind::Assumption: return "Assumption";
    case NotionKind::Goal: return "Goal";
    case NotionKind::Hypothesis: return "Hypothesis";
    case NotionKind::Event: return "Event";
    case NotionKind::Aggregate: return "Aggregate";
    }
    return "?";
}

std::string_view to_string(StorageTier tier) {
    switch (tier) {
    case StorageTier::Hot: return "Hot";
    case StorageTier::Warm: return "Warm";
    case StorageTier::Cold: return "Cold";
    case StorageTier::Archived: return "Archived";
    case StorageTier::Deleted: return "Deleted";
    }
    return "?";
}

NotionKind parse_notion_kind(std::string_view text) {
    for (auto k : {NotionKind::Assumption, NotionKind::Goal, NotionKind::Hypothesis, NotionKind::Event,
                   NotionKind::Aggregate})
        if (to_string(k) == text) return k;
    throw ValidationError("unknown notion kind: " + std::string(text));
}

// --- Payload --------------------------------------------------------------

namespace {

void append_escaped(std::string& out, std::string_view s) {
    for (char c : s) {
        if (c == '\\' || c == '=' || c == ';') out += '\\';
        out += c;
    }
}

} // namespace

Payload::Payload(std::initializer_list<std::pair<const std::string, std::string>> fields) : fields_(fields) {
    for (const auto& [name, _] : fields_)
        if (name.empty()) throw ValidationError("payload field name is empty");
}

Payload::Payload(std::map<std::string, std::string> fields) : fields_(std::move(fields)) {
    for (const auto& [name, _] : fields_)
        if (name.empty()) throw ValidationError("payload field name is empty");
}

Payload Payload::from_canonical(std::string_view canonical) {
    std::map<std::string, std::string> fields;
    if (canonical.empty()) return Payload(fields);
    std::string name, value;
    bool in_value = false;
    auto flush = [&] {
        if (!in_value) throw ValidationError("canonical payload pair lacks '='");
        fields[name] = value;
        name.clear();
        value.clear();
        in_value = false;
    };
    for (std::size_t i = 0; i < canonical.size(); ++i) {
        char c = canonical[i];
        if (c == '\\') {
            if (++i == canonical.size()) throw ValidationError("dangling escape in canonical payload");
            (in_value ? value : name) += canonical[i];
        } else if (c == '=' && !in_value) {
            in_value = true;
        } else if (c == ';') {
            flush();
        } else {
            (in_value ? value : name) += c;
        }
    }
    flush();
    return Payload(std::move(fields));
}

std::optional<std::string> Payload::get(const std::string& name) const {
    auto it = fields_.find(name);
    if (it == fields_.end()) return std::nullopt;
    return it->second;
}

void Payload::set(std::string name, std::string value) {
    if (name.empty()) throw ValidationError("payload field name is empty");
    fields_[std::move(name)] = std::move(value);
}

std::string Payload::canonical() const {
    std::string out;
    bool first = true;
    for (const auto& [name, value] : fields_) {
        if (!first) out += ';';
        first = false;
        append_escaped(out, name);
        out += '=';
        append_escaped(out, value);
    }
    return out;
}

// --- Invariants -----------------------------------------------------------

void Metadata::validate() const {
    if (source_id.empty()) throw ValidationError("metadata source_id is empty");
    if (!(observed_at >= 0)) throw ValidationError("metadata observed_at must be >= 0");
}

namespace {

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::vector<std::string> sorted_union(std::initializer_list<const std::vector<std::string>*> lists) {
    std::set<std::string> all;
    for (const auto* l : lists) all.insert(l->begin(), l->end());
    return {all.begin(), all.end()};
}

void erase_all(std::vector<std::string>& from, const std::vector<std::string>& remove) {
    std::erase_if(from, [&](const std::string& s) {
        return std::find(remove.begin(), remove.end(), s) != remove.end();
    });
}

void add_unique(std::vector<std::string>& list, const std::string& id) {
    if (std::find(list.begin(), list.end(), id) == list.end()) list.push_back(id);
}

} // namespace

void Hyperdata::check_invariants() const {
    if (!in_range(truth, -1.0, 1.0)) throw RangeError("truth outside [-1, 1]");
    if (!in_range(confidence, 0.0, 1.0)) throw RangeError("confidence outside [0, 1]");
    if (!in_range(detail, 0.0, 1.0)) throw RangeError("detail outside [0, 1]");
    if (!in_range(exposure, 0.0, 1.0)) throw RangeError("exposure outside [0, 1]");
    if (updated_at < created_at) throw RangeError("updated_at precedes created_at");
    for (const auto& id : complementary)
        if (std::find(refuting.begin(), refuting.end(), id) != refuting.end())
            throw RangeError("id is both complementary and refuting: " + id);
}

void HypothesisRule::validate() const {
    if (id.empty()) throw ValidationError("rule id is empty");
    if (premises.empty()) throw ValidationError("rule " + id + " has no premises");
    std::set<std::string> bound;
    for (const auto& p : premises) {
        if (p.empty()) throw ValidationError("rule " + id + " has an empty premise pattern");
        for (const auto& [_, term] : p)
            if (term.starts_with('?')) bound.insert(term);
    }
    for (const auto& [_, term] : conclusion)
        if (term.starts_with('?') && !bound.contains(term))
            throw ValidationError("rule " + id + " conclusion uses unbound variable " + term);
}

// --- Operations -----------------------------------------------------------

double noisy_or(double a, double b) noexcept { return 1.0 - (1.0 - a) * (1.0 - b); }

ActiveDatum encapsulate(std::string id, Payload payload, NotionKind kind, Metadata metadata,
                        double source_confidence, nearness::NearnessKey key) {
    if (!in_range(source_confidence, 0.0, 1.0))
        throw RangeError("source confidence outside [0, 1]");
    if (id.empty()) throw ValidationError("datum id is empty");
    metadata.validate();
    key.validate();

    ActiveDatum d;
    d.id = std::move(id);
    d.kind = kind;
    d.payload = std::move(payload);
    d.key = std::move(key);
    d.hyperdata.truth = 1.0;
    d.hyperdata.confidence = source_confidence;
    d.hyperdata.detail = 0.5;
    d.hyperdata.exposure = 0.0;
    d.hyperdata.tier = StorageTier::Hot;
    d.hyperdata.created_at = metadata.observed_at;
    d.hyperdata.updated_at = metadata.observed_at;
    d.metadata = std::move(metadata);
    return d;
}

bool is_duplicate(const ActiveDatum& a, const ActiveDatum& b) {
    if (a.deleted() || b.deleted()) return false;
    return a.kind == b.kind && a.payload.canonical() == b.payload.canonical() &&
           nearness::keys_overlap(a.key, b.key);
}

ActiveDatum resolve(const ActiveDatum& a, const ActiveDatum& b) {
    if (!is_duplicate(a, b)) throw PreconditionError("resolve needs duplicates: " + a.id + ", " + b.id);

    const ActiveDatum& winner = a.id <= b.id ? a : b;
    const ActiveDatum& loser = a.id <= b.id ? b : a;
    const auto& hw = winner.hyperdata;
    const auto& hl = loser.hyperdata;

    ActiveDatum merged = winner;
    auto& h = merged.hyperdata;
    h.confidence = noisy_or(hw.confidence, hl.confidence);
    const double weight = hw.confidence + hl.confidence;
    h.truth = weight > 0 ? (hw.confidence * hw.truth + hl.confidence * hl.truth) / weight
                         : 0.5 * (hw.truth + hl.truth);
    h.truth = std::clamp(h.truth, -1.0, 1.0);
    h.detail = std::max(hw.detail, hl.detail);
    h.exposure = std::max(hw.exposure, hl.exposure);
    h.tier = std::min(hw.tier, hl.tier);
    h.refuting = sorted_union({&hw.refuting, &hl.refuting});
    h.complementary = sorted_union({&hw.complementary, &hl.complementary});
    if (loser.id != winner.id) add_unique(h.complementary, loser.id);
    std::erase(h.complementary, winner.id);
    std::sort(h.complementary.begin(), h.complementary.end());
    erase_all(h.complementary, h.refuting);
    h.missing = sorted_union({&hw.missing, &hl.missing});
    h.created_at = std::min(hw.created_at, hl.created_at);
    h.updated_at = std::max(hw.updated_at, hl.updated_at);
    return merged;
}

ActiveDatum apply_evidence(const ActiveDatum& d, const Evidence& e, double arrival_time) {
    if (d.deleted()) throw LifecycleError("evidence applied to deleted datum " + d.id);
    if (!in_range(e.strength, 0.0, 1.0)) throw RangeError("evidence strength outside [0, 1]");

    ActiveDatum out = d;
    auto& h = out.hyperdata;
    h.updated_at = std::max(h.updated_at, arrival_time);
    if (e.strength == 0.0) return out;

    h.confidence = noisy_or(h.confidence, e.strength);
    if (e.polarity == Polarity::Complementary) {
        if (!e.source_datum.empty()) {
            std::erase(h.refuting, e.source_datum);
            add_unique(h.complementary, e.source_datum);
        }
    } else {
        h.truth = std::clamp(h.truth - e.strength * (h.truth + 1.0), -1.0, 1.0);
        if (!e.source_datum.empty()) {
            std::erase(h.complementary, e.source_datum);
            add_unique(h.refuting, e.source_datum);
        }
    }
    return out;
}

ActiveDatum aggregate(std::span<const ActiveDatum> data, const std::string& group_field) {
    if (data.empty()) throw PreconditionError("aggregate over an empty set");

    std::map<std::string, std::set<std::string>> ids_by_value;
    std::vector<nearness::NearnessKey> keys;
    std::set<std::string> all_ids;
    double confidence = 1.0, detail = 0.0, exposure = 0.0, latest = 0.0;
    for (const auto& d : data) {
        if (d.deleted()) throw LifecycleError("aggregate over deleted datum " + d.id);
        if (d.kind != data.front().kind) throw PreconditionError("aggregate inputs differ in kind");
        auto value = d.payload.get(group_field);
        if (!value) throw PreconditionError("datum " + d.id + " lacks field " + group_field);
        ids_by_value[*value].insert(d.id);
        all_ids.insert(d.id);
        keys.push_back(d.key);
        confidence = std::min(confidence, d.hyperdata.confidence);
        detail = std::max(detail, d.hyperdata.detail);
        exposure = std::max(exposure, d.hyperdata.exposure);
        latest = std::max(latest, d.hyperdata.updated_at);
    }

    std::map<std::string, std::string> counts;
    for (const auto& [value, ids] : ids_by_value) {
        if (value.empty()) throw PreconditionError("aggregate group value is empty");
        counts[value] = std::to_string(ids.size());
    }

    ActiveDatum out;
    out.id = "agg/" + group_field + "/" + *all_ids.begin() + "/" + std::to_string(all_ids.size());
    out.kind = NotionKind::Aggregate;
    out.payload = Payload(std::move(counts));
    out.key = nearness::cover(keys);
    out.metadata = Metadata{"aggregate", latest, ids_by_value.size(), "aggregate:" + group_field};
    out.hyperdata.truth = 1.0;
    out.hyperdata.confidence = confidence;
    out.hyperdata.detail = detail;
    out.hyperdata.exposure = exposure;
    out.hyperdata.complementary.assign(all_ids.begin(), all_ids.end());
    out.hyperdata.created_at = latest;
    out.hyperdata.updated_at = latest;
    return out;
}

namespace {

using Bindings = std::map<std::string, std::string>;

// Extends `bindings` if `d` satisfies `pattern`; returns false and leaves
// `bindings` untouched otherwise.
bool match_pattern(const std::map<std::string, std::string>& pattern, const ActiveDatum& d, Bindings& bindings) {
    Bindings added;
    for (const auto& [field, term] : pattern) {
        auto value = d.payload.get(field);
        if (!value) return false;
        if (term.starts_with('?')) {
            auto bound = bindings.find(term);
            if (bound != bindings.end()) {
                if (bound->second != *value) return false;
            } else if (auto a = added.find(term); a != added.end()) {
                if (a->second != *value) return false;
            } else {
                added.emplace(term, *value);
            }
        } else if (term != *value) {
            return false;
        }
    }
    bindings.insert(added.begin(), added.end());
    return true;
}

std::vector<const ActiveDatum*> live_sorted(std::span<const ActiveDatum> candidates) {
    std::vector<const ActiveDatum*> out;
    for (const auto& d : candidates)
        if (!d.deleted()) out.push_back(&d);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
    return out;
}

struct MatchSearch {
    const HypothesisRule& rule;
    const std::vector<const ActiveDatum*>& pool;
    bool allow_skip;

    std::vector<const ActiveDatum*> current;
    std::vector<const ActiveDatum*> best;
    std::size_t best_count = 0;
    bool found_any = false;

    std::size_t matched(const std::vector<const ActiveDatum*>& v) const {
        return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](auto* p) { return p != nullptr; }));
    }

    bool used(const ActiveDatum* d) const { return std::find(current.begin(), current.end(), d) != current.end(); }

    // Returns true once a full match is found (search can stop).
    bool run(std::size_t premise, Bindings bindings) {
        if (premise == rule.premises.size()) {
            auto n = matched(current);
            if (!found_any || n > best_count) {
                best = current;
                best_count = n;
                found_any = true;
            }
            return n == rule.premises.size();
        }
        for (const ActiveDatum* d : pool) {
            if (used(d)) continue;
            Bindings next = bindings;
            if (!match_pattern(rule.premises[premise], *d, next)) continue;
            current.push_back(d);
            bool done = run(premise + 1, next);
            current.pop_back();
            if (done) return true;
        }
        if (allow_skip) {
            current.push_back(nullptr);
            bool done = run(premise + 1, bindings);
            current.pop_back();
            if (done) return true;
        }
        return false;
    }
};

Bindings bind_all(const HypothesisRule& rule, const std::vector<const ActiveDatum*>& premises) {
    Bindings b;
    for (std::size_t i = 0; i < premises.size(); ++i)
        if (premises[i]) match_pattern(rule.premises[i], *premises[i], b);
    return b;
}

} // namespace

std::optional<ActiveDatum> infer(const HypothesisRule& rule, std::span<const ActiveDatum> candidates) {
    rule.validate();
    auto pool = live_sorted(candidates);
    MatchSearch search{rule, pool, false, {}, {}};
    if (!search.run(0, {})) return std::nullopt;

    const auto& premises = search.best;
    Bindings bindings = bind_all(rule, premises);

    std::map<std::string, std::string> fields;
    for (const auto& [field, term] : rule.conclusion)
        fields[field] = term.starts_with('?') ? bindings.at(term) : term;

    std::vector<std::string> ids;
    std::vector<nearness::NearnessKey> keys;
    double confidence = 1.0, truth = 1.0, latest = 0.0;
    for (const ActiveDatum* p : premises) {
        ids.push_back(p->id);
        keys.push_back(p->key);
        confidence *= p->hyperdata.confidence;
        truth = std::min(truth, p->hyperdata.truth);
        latest = std::max(latest, p->hyperdata.updated_at);
    }

    ActiveDatum out;
    out.id = "hyp/" + rule.id + "/";
    for (std::size_t i = 0; i < ids.size(); ++i) out.id += (i ? "+" : "") + ids[i];
    out.kind = rule.conclusion_kind;
    out.payload = Payload(std::move(fields));
    try {
        out.key = nearness::cover(keys);
    } catch (const DomainError&) {
        out.key = keys.front();
    }
    out.metadata = Metadata{"rule:" + rule.id, latest, out.payload.fields().size(), "hypothesis"};
    out.hyperdata.truth = truth;
    out.hyperdata.confidence = confidence;
    std::sort(ids.begin(), ids.end());
    out.hyperdata.complementary = std::move(ids);
    out.hyperdata.created_at = latest;
    out.hyperdata.updated_at = latest;
    return out;
}

PartialMatch partial_match(const HypothesisRule& rule, std::span<const ActiveDatum> candidates) {
    rule.validate();
    auto pool = live_sorted(candidates);
    MatchSearch search{rule, pool, true, {}, {}};
    search.run(0, {});

    PartialMatch out;
    for (const ActiveDatum* p : search.best)
        if (p) out.bound_ids.push_back(p->id);
    if (search.best_count == 0 || search.best_count == rule.premises.size()) return out;
    for (std::size_t i = 0; i < rule.premises.size(); ++i)
        if (!search.best[i])
            out.gaps.push_back("rule:" + rule.id + ":premise" + std::to_string(i) + ":" +
                               Payload(rule.premises[i]).canonical());
    return out;
}

StorageTier tier_decision(const ActiveDatum& d, double now, const TierPolicy& policy) {
    if (d.deleted()) throw LifecycleError("tier decision on deleted datum " + d.id);
    const auto& h = d.hyperdata;
    if (h.truth <= policy.delete_truth_at_or_below && h.confidence >= policy.delete_confidence_at_or_above)
        return StorageTier::Deleted;
    const double age = now - h.updated_at;
    if (h.confidence >= policy.min_hot_confidence && age < policy.hot_age) return StorageTier::Hot;
    if (age < policy.warm_age) return StorageTier::Warm;
    if (age < policy.cold_age) return StorageTier::Cold;
    return StorageTier::Archived;
}

} // namespace adatm::kernel
