#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "adatm/atm.hpp"
#include "adatm/event.hpp"

namespace adatm::atm {

/// A subsector during one time bucket. Orders by (bucket, col, row), the
/// order congestion records are reported in.
struct CellBucket {
    CellIndex cell;
    std::int64_t bucket_start = 0;

    friend bool operator==(const CellBucket&, const CellBucket&) = default;
    friend auto operator<=>(const CellBucket& a, const CellBucket& b) {
        if (auto c = a.bucket_start <=> b.bucket_start; c != 0) return c;
        return a.cell <=> b.cell;
    }
};

std::string describe(const CellBucket& cb);

struct AirspaceConfig {
    std::int64_t bucket_seconds = 60;
    double horizon_seconds = 14400.0;
    int calm_capacity = 6;
    int severe_capacity = 3;
    std::size_t max_changed_flights = 3;
    std::vector<double> delay_menu{300.0, 600.0, 900.0};

    void validate() const;
};

enum class InsertCase { Case1, Case2, Case3 };

std::string_view to_string(InsertCase c);

struct InsertClassification {
    InsertCase kind = InsertCase::Case1;
    /// Over-capacity buckets (Case2) or zero-capacity buckets (Case3).
    std::vector<CellBucket> conflicts;
};

struct InsertOutcome {
    enum class Kind { Accepted, Rerouted, Rejected };

    Kind kind = Kind::Accepted;
    std::vector<std::string> changed_flights;
    std::vector<FlightPlan> new_plans;
    std::string reason;
    std::optional<CellBucket> violated;

    static InsertOutcome accepted() { return {}; }

    friend bool operator==(const InsertOutcome&, const InsertOutcome&) = default;
};

std::string_view to_string(InsertOutcome::Kind k);

struct CongestionRecord {
    CellIndex cell;
    std::int64_t bucket_start = 0;
    int occupancy = 0;
    int capacity = 0;
    std::vector<std::string> flight_ids;

    bool congested() const noexcept { return occupancy > capacity; }

    friend bool operator==(const CongestionRecord&, const CongestionRecord&) = default;
};

/// One way a flight may deviate from its current plan during negotiation.
struct FlightOption {
    enum class Kind { Keep, Alternate, Delay };

    Kind kind = Kind::Keep;
    int route = -1;          ///< target route (-1 primary) for Alternate
    double added_delay = 0;  ///< for Delay

    friend bool operator==(const FlightOption&, const FlightOption&) = default;
};

struct FlightChange {
    std::string flight_id;
    FlightOption option;
    int route = -1;
    double total_delay = 0.0;
    std::vector<TrajectorySegment> segments;
    std::size_t changed_segments = 0;
};

struct Resolution {
    /// Only the flights that deviate from their current (or requested) plan.
    std::vector<FlightChange> changes;
    std::size_t total_changed_segments = 0;
};

/// Number of segments in one list without a same-span partner in the other,
/// summed over both directions.
std::size_t changed_segment_count(std::span<const TrajectorySegment> before,
                                  std::span<const TrajectorySegment> after);

/// Distinct (subsector, bucket) pairs a segment list overlaps.
std::vector<CellBucket> cell_buckets(std::span<const TrajectorySegment> segments, std::int64_t bucket_seconds);

class AirspaceState {
public:
    struct FlightEntry {
        FlightPlan requested;
        int route = -1;
        double delay = 0.0;
        int version = 0;
        std::vector<TrajectorySegment> segments;

        FlightPlan effective() const;
    };

    AirspaceState(GridSpec grid, AirspaceConfig config);

    const GridSpec& grid() const noexcept { return grid_; }
    const AirspaceConfig& config() const noexcept { return config_; }
    double now() const noexcept { return now_; }

    const Subsector& subsector(CellIndex c) const;
    void close(CellIndex c, TimeInterval interval);

    /// Registers a storm; it influences capacity once `now` reaches its start.
    void add_storm(StormCell storm);
    std::vector<StormCell> known_storms() const;
    const std::vector<StormCell>& all_storms() const noexcept { return storms_; }
    /// Storm start times strictly after `now`, ascending and unique.
    std::vector<double> pending_reveals() const;

    bool has_flight(const std::string& id) const { return flights_.contains(id); }
    const FlightEntry& flight(const std::string& id) const;
    const std::map<std::string, FlightEntry>& flights() const noexcept { return flights_; }
    bool en_route(const FlightEntry& f) const noexcept;

    int occupancy(CellIndex c, std::int64_t bucket_start) const;
    std::vector<std::string> occupants(const CellBucket& cb) const;
    int capacity(const CellBucket& cb) const;
    const std::map<CellBucket, std::set<std::string>>& occupancy_index() const noexcept { return occupancy_; }

    /// Future buckets of `cell` whose occupancy exceeds capacity.
    std::vector<CellBucket> overloaded(CellIndex cell) const;

    // Mutations; normally driven by try_insert / negotiation.
    void add_flight(const FlightPlan& requested, int route, double delay, int version);
    void remove_flight(const std::string& id);
    void set_now(double t) noexcept { now_ = t; }

    /// Datum id of segment `index` of a flight at a plan version.
    static std::string segment_datum_id(const std::string& flight_id, int version, std::size_t index);

private:
    void index_segments(const std::string& id, std::span<const TrajectorySegment> segs, int delta);

    GridSpec grid_;
    AirspaceConfig config_;
    std::vector<Subsector> subsectors_;
    std::vector<StormCell> storms_;
    std::map<std::string, FlightEntry> flights_;
    std::map<CellBucket, std::set<std::string>> occupancy_;
    double now_ = 0.0;
};

InsertClassification classify_insert(const AirspaceState& state, std::span<const TrajectorySegment> segments);

/// Searches the bounded plan-change space for the least global set of
/// changes that leaves every touched bucket within capacity. `arriving` is
/// the flight requesting insertion, or null for a re-evaluation among
/// residents.
std::optional<Resolution> negotiate(const AirspaceState& state, std::span<const CellBucket> conflicts,
                                    const FlightPlan* arriving);

/// Applies a resolution and, when given, inserts the arriving flight.
void apply_resolution(AirspaceState& state, const Resolution& resolution, const FlightPlan* arriving);

InsertOutcome try_insert(AirspaceState& state, const FlightPlan& plan);

/// Moves the clock forward, revealing storms that started in between.
/// Returns StormRevealed events and one WeatherChanged event per resident
/// segment in a bucket whose capacity dropped below its occupancy.
std::vector<RuntimeEvent> advance_weather(AirspaceState& state, double to_time);

struct WeatherReaction {
    std::vector<CellBucket> conflicts;
    std::optional<Resolution> resolution;
    /// Flights withdrawn because no feasible resolution existed, with the
    /// bucket each one was withdrawn from.
    std::vector<std::pair<std::string, CellBucket>> withdrawn;
};

/// Re-evaluates one subsector after a weather change: negotiates among its
/// residents and withdraws flights when nothing feasible exists.
WeatherReaction react_to_weather(AirspaceState& state, CellIndex cell);

std::vector<CongestionRecord> predict_congestion(const AirspaceState& state, double now,
                                                 double horizon = 14400.0, bool full = false);

} // namespace adatm::atm
