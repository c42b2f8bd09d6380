#include "adatm/report.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "adatm/error.hpp"
#include "adatm/format.hpp"
#include "json.hpp"

namespace adatm::scenario {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    if (name == "text") return ReportFormat::Text;
    throw UsageError("unknown report format: " + std::string(name));
}

namespace {

constexpr std::string_view kCsvHeader = "subsector_col,subsector_row,bucket_start,occupancy,capacity,congested,flight_ids";

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

atm::InsertOutcome::Kind parse_kind(const std::string& s) {
    if (s == "Accepted") return atm::InsertOutcome::Kind::Accepted;
    if (s == "Rerouted") return atm::InsertOutcome::Kind::Rerouted;
    if (s == "Rejected") return atm::InsertOutcome::Kind::Rejected;
    throw ParseError("/outcomes", "unknown outcome " + s);
}

json to_json(const Report& r) {
    json records = json::array();
    for (const auto& rec : r.records)
        records.push_back({{"col", rec.cell.col},
                           {"row", rec.cell.row},
                           {"bucket_start", rec.bucket_start},
                           {"occupancy", rec.occupancy},
                           {"capacity", rec.capacity},
                           {"congested", rec.congested()},
                           {"flight_ids", rec.flight_ids}});
    json outcomes = json::array();
    for (const auto& o : r.outcomes)
        outcomes.push_back({{"flight", o.flight_id},
                            {"outcome", std::string(atm::to_string(o.kind))},
                            {"reason", o.reason},
                            {"changed_flights", o.changed_flights},
                            {"route", o.route},
                            {"total_delay", o.total_delay}});
    json alerts = json::array();
    for (const auto& a : r.alerts)
        alerts.push_back({{"subscription", a.subscription_id},
                          {"datum", a.datum_id},
                          {"emitted_at", a.emitted_at},
                          {"payload", a.payload_text}});
    return {{"bucket_seconds", r.bucket_seconds},
            {"horizon_seconds", r.horizon_seconds},
            {"seed", r.seed},
            {"sector_cols", r.sector_cols},
            {"sector_rows", r.sector_rows},
            {"complete", r.complete},
            {"records", records},
            {"outcomes", outcomes},
            {"alerts", alerts},
            {"stats",
             {{"steps", r.stats.steps},
              {"alerts", r.stats.alerts},
              {"merges", r.stats.merges},
              {"deletions", r.stats.deletions},
              {"quiescent", r.stats.quiescent}}}};
}

Report from_json(const json& j) {
    Report r;
    try {
        r.bucket_seconds = j.at("bucket_seconds").get<std::int64_t>();
        r.horizon_seconds = j.at("horizon_seconds").get<double>();
        r.seed = j.at("seed").get<std::int64_t>();
        r.sector_cols = j.at("sector_cols").get<int>();
        r.sector_rows = j.at("sector_rows").get<int>();
        r.complete = j.at("complete").get<bool>();
        for (const auto& rec : j.at("records"))
            r.records.push_back({{rec.at("col").get<int>(), rec.at("row").get<int>()},
                                 rec.at("bucket_start").get<std::int64_t>(),
                                 rec.at("occupancy").get<int>(),
                                 rec.at("capacity").get<int>(),
                                 rec.at("flight_ids").get<std::vector<std::string>>()});
        for (const auto& o : j.at("outcomes"))
            r.outcomes.push_back({o.at("flight").get<std::string>(), parse_kind(o.at("outcome").get<std::string>()),
                                  o.at("reason").get<std::string>(),
                                  o.at("changed_flights").get<std::vector<std::string>>(), o.at("route").get<int>(),
                                  o.at("total_delay").get<double>()});
        for (const auto& a : j.at("alerts"))
            r.alerts.push_back({a.at("subscription").get<std::string>(), a.at("datum").get<std::string>(),
                                a.at("emitted_at").get<double>(), a.at("payload").get<std::string>()});
        const auto& s = j.at("stats");
        r.stats = {s.at("steps").get<std::size_t>(), s.at("alerts").get<std::size_t>(),
                   s.at("merges").get<std::size_t>(), s.at("deletions").get<std::size_t>(),
                   s.at("quiescent").get<bool>()};
    } catch (const json::exception& e) {
        throw ParseError("", std::string("malformed report: ") + e.what());
    }
    return r;
}

std::string render_text(const Report& r) {
    std::ostringstream out;
    std::size_t congested = 0;
    for (const auto& rec : r.records) congested += rec.congested() ? 1 : 0;
    out << "report: " << (r.complete ? "complete" : "incomplete") << ", bucket " << r.bucket_seconds
        << " s, horizon " << format_number(r.horizon_seconds) << " s, seed " << r.seed << "\n";
    out << "records: " << r.records.size() << ", congested: " << congested << "\n";

    struct SectorSummary {
        std::size_t records = 0, congested = 0;
        int peak = 0;
    };
    const int sc = std::max(1, r.sector_cols), sr = std::max(1, r.sector_rows);
    std::map<atm::CellIndex, SectorSummary> by_sector;
    for (const auto& rec : r.records) {
        auto& s = by_sector[{rec.cell.col / sc, rec.cell.row / sr}];
        ++s.records;
        s.congested += rec.congested() ? 1 : 0;
        s.peak = std::max(s.peak, rec.occupancy);
    }
    if (!by_sector.empty()) out << "sectors:\n";
    for (const auto& [sector, s] : by_sector)
        out << "  sector (" << sector.col << "," << sector.row << ") records " << s.records << ", congested "
            << s.congested << ", peak occupancy " << s.peak << "\n";

    if (congested) out << "congested buckets:\n";
    for (const auto& rec : r.records)
        if (rec.congested())
            out << "  (" << rec.cell.col << "," << rec.cell.row << ") t=" << rec.bucket_start << " " << rec.occupancy
                << "/" << rec.capacity << " [" << join(rec.flight_ids, ' ') << "]\n";

    out << "outcomes:\n";
    for (const auto& o : r.outcomes) {
        out << "  " << o.flight_id << " " << atm::to_string(o.kind);
        if (!o.reason.empty()) out << ": " << o.reason;
        out << "\n";
    }
    out << "alerts: " << r.alerts.size() << "\n";
    for (const auto& a : r.alerts)
        out << "  " << a.subscription_id << " <- " << a.datum_id << " at " << format_number(a.emitted_at) << "\n";
    out << "steps " << r.stats.steps << ", merges " << r.stats.merges << ", deletions " << r.stats.deletions
        << ", quiescent " << (r.stats.quiescent ? "yes" : "no") << "\n";
    return out.str();
}

Report parse_csv(std::string_view text) {
    std::vector<std::string> lines;
    for (auto& l : split(text, '\n')) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
        if (!l.empty()) lines.push_back(std::move(l));
    }
    if (lines.empty() || lines.front() != kCsvHeader) throw ParseError("csv:1", "missing report header");
    Report r;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto where = "csv:" + std::to_string(i + 1);
        auto cols = split(lines[i], ',');
        if (cols.size() != 7) throw ParseError(where, "expected 7 columns");
        try {
            atm::CongestionRecord rec{{std::stoi(cols[0]), std::stoi(cols[1])},
                                      std::stoll(cols[2]),
                                      std::stoi(cols[3]),
                                      std::stoi(cols[4]),
                                      {}};
            if (!cols[6].empty()) rec.flight_ids = split(cols[6], ';');
            if ((cols[5] == "true") != rec.congested()) throw ParseError(where, "congested flag disagrees with counts");
            r.records.push_back(std::move(rec));
        } catch (const std::logic_error&) {
            throw ParseError(where, "malformed number");
        }
    }
    return r;
}

} // namespace

std::string render_records_csv(const std::vector<atm::CongestionRecord>& records) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& rec : records) {
        out += std::to_string(rec.cell.col) + ',' + std::to_string(rec.cell.row) + ',' +
               std::to_string(rec.bucket_start) + ',' + std::to_string(rec.occupancy) + ',' +
               std::to_string(rec.capacity) + ',' + (rec.congested() ? "true" : "false") + ',' +
               join(rec.flight_ids, ';') + '\n';
    }
    return out;
}

std::string render_report(const Report& r, ReportFormat format) {
    switch (format) {
    case ReportFormat::Csv: return render_records_csv(r.records);
    case ReportFormat::Json: return to_json(r).dump(2) + "\n";
    case ReportFormat::Text: return render_text(r);
    }
    throw UsageError("unknown report format");
}

Report parse_report(std::string_view text) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError("", std::string("malformed JSON: ") + e.what());
        }
        return from_json(j);
    }
    return parse_csv(text);
}

std::string_view to_string(DiffEntry::Kind kind) {
    switch (kind) {
    case DiffEntry::Kind::OnlyInA: return "only-in-a";
    case DiffEntry::Kind::OnlyInB: return "only-in-b";
    case DiffEntry::Kind::Mismatch: return "mismatch";
    }
    return "?";
}

std::string DiffResult::text() const {
    std::string out;
    for (const auto& e : entries)
        out += std::string(to_string(e.kind)) + " (" + std::to_string(e.cell.col) + "," + std::to_string(e.cell.row) +
               ") t=" + std::to_string(e.bucket_start) + " " + e.detail + "\n";
    return out;
}

DiffResult diff_reports(const Report& a, const Report& b) {
    if (a.bucket_seconds && b.bucket_seconds && a.bucket_seconds != b.bucket_seconds)
        throw UsageError("reports use different bucket sizes (" + std::to_string(a.bucket_seconds) + " vs " +
                         std::to_string(b.bucket_seconds) + ")");

    using Key = std::tuple<std::int64_t, int, int>;
    auto index = [](const Report& r) {
        std::map<Key, const atm::CongestionRecord*> m;
        for (const auto& rec : r.records) m[{rec.bucket_start, rec.cell.col, rec.cell.row}] = &rec;
        return m;
    };
    auto describe = [](const atm::CongestionRecord& r) {
        return std::to_string(r.occupancy) + "/" + std::to_string(r.capacity) + " [" + join(r.flight_ids, ';') + "]";
    };
    const auto ia = index(a), ib = index(b);

    DiffResult out;
    auto ita = ia.begin();
    auto itb = ib.begin();
    while (ita != ia.end() || itb != ib.end()) {
        if (itb == ib.end() || (ita != ia.end() && ita->first < itb->first)) {
            const auto& r = *ita->second;
            out.entries.push_back({DiffEntry::Kind::OnlyInA, r.cell, r.bucket_start, describe(r)});
            ++ita;
        } else if (ita == ia.end() || itb->first < ita->first) {
            const auto& r = *itb->second;
            out.entries.push_back({DiffEntry::Kind::OnlyInB, r.cell, r.bucket_start, describe(r)});
            ++itb;
        } else {
            const auto &ra = *ita->second, &rb = *itb->second;
            if (!(ra == rb))
                out.entries.push_back(
                    {DiffEntry::Kind::Mismatch, ra.cell, ra.bucket_start, describe(ra) + " vs " + describe(rb)});
            ++ita;
            ++itb;
        }
    }
    return out;
}

} // namespace adatm::scenario
