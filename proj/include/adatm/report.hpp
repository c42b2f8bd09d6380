#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "adatm/airspace.hpp"
#include "adatm/scheduler.hpp"

namespace adatm::scenario {

/// Final disposition of one flight.
struct FlightOutcome {
    std::string flight_id;
    atm::InsertOutcome::Kind kind = atm::InsertOutcome::Kind::Accepted;
    std::string reason;
    std::vector<std::string> changed_flights;
    int route = -1;
    double total_delay = 0.0;

    friend bool operator==(const FlightOutcome&, const FlightOutcome&) = default;
};

struct Report {
    /// 0 when unknown (reports read back from CSV).
    std::int64_t bucket_seconds = 0;
    double horizon_seconds = 0.0;
    std::int64_t seed = 0;
    /// Subsectors per sector, used to aggregate the text summary.
    int sector_cols = 1;
    int sector_rows = 1;
    bool complete = true;
    std::vector<atm::CongestionRecord> records;
    std::vector<FlightOutcome> outcomes;  ///< sorted by flight id
    std::vector<sched::Alert> alerts;
    sched::RunStats stats;

    friend bool operator==(const Report&, const Report&) = default;
};

enum class ReportFormat { Csv, Json, Text };

/// Throws UsageError for anything but csv, json or text.
ReportFormat parse_report_format(std::string_view name);

std::string render_report(const Report& r, ReportFormat format);
std::string render_records_csv(const std::vector<atm::CongestionRecord>& records);

/// Reads a report rendered as JSON or CSV (detected from the content).
Report parse_report(std::string_view text);

struct DiffEntry {
    enum class Kind { OnlyInA, OnlyInB, Mismatch };

    Kind kind = Kind::Mismatch;
    atm::CellIndex cell;
    std::int64_t bucket_start = 0;
    std::string detail;

    friend bool operator==(const DiffEntry&, const DiffEntry&) = default;
};

std::string_view to_string(DiffEntry::Kind kind);

struct DiffResult {
    std::vector<DiffEntry> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::string text() const;
};

/// Compares the record sections. Throws UsageError when both reports declare
/// different bucket sizes.
DiffResult diff_reports(const Report& a, const Report& b);

} // namespace adatm::scenario
