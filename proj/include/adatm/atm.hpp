#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adatm/nearness.hpp"

namespace adatm::atm {

using nearness::PlanarBox;
using nearness::TimeInterval;

struct CellIndex {
    int col = 0;
    int row = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Uniform grid of subsectors; sectors are exact sector_cols x sector_rows
/// blocks of subsectors.
struct GridSpec {
    double x0 = 0.0;
    double y0 = 0.0;
    int cols = 1;
    int rows = 1;
    double cell = 1.0;
    int sector_cols = 1;
    int sector_rows = 1;

    void validate() const;
    double x_max() const noexcept { return x0 + cols * cell; }
    double y_max() const noexcept { return y0 + rows * cell; }
    PlanarBox extent() const noexcept { return {x0, y0, x_max(), y_max()}; }
    PlanarBox bounds(CellIndex c) const noexcept;
    bool valid(CellIndex c) const noexcept { return c.col >= 0 && c.col < cols && c.row >= 0 && c.row < rows; }
    /// Closed bounds: points on the far edges are inside.
    bool inside(double x, double y) const noexcept;
    bool box_inside(const PlanarBox& b) const noexcept;
    CellIndex sector_of(CellIndex c) const noexcept { return {c.col / sector_cols, c.row / sector_rows}; }
    std::vector<CellIndex> cells() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;

    friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

using Route = std::vector<Waypoint>;

struct FlightPlan {
    std::string flight_id;
    Route waypoints;
    std::vector<Route> alternates;
    double departure_delay = 0.0;
    int priority_rank = 0;
    /// Upper bound on total departure delay; absent means unbounded.
    std::optional<double> max_delay;

    double departure() const { return waypoints.front().t + departure_delay; }
    double arrival() const { return waypoints.back().t + departure_delay; }
    /// -1 selects the primary route, otherwise an alternate.
    const Route& route(int index) const;
    void validate(const GridSpec& grid) const;

    friend bool operator==(const FlightPlan&, const FlightPlan&) = default;
};

struct TrajectorySegment {
    std::string flight_id;
    CellIndex cell;
    double entry = 0.0;
    double exit = 0.0;
    int plan_version = 0;

    /// Same subsector and time span, ignoring identity and version.
    bool same_span(const TrajectorySegment& o) const noexcept {
        return cell == o.cell && entry == o.entry && exit == o.exit;
    }

    friend bool operator==(const TrajectorySegment&, const TrajectorySegment&) = default;
};

/// Maximal half-open intervals of constant subsector membership along a
/// piecewise-linear route shifted by `delay`.
std::vector<TrajectorySegment> segment_route(std::span<const Waypoint> route, double delay, const GridSpec& grid,
                                             const std::string& flight_id, int plan_version = 0);

/// Segments the primary route (including the plan's departure delay).
std::vector<TrajectorySegment> segment_trajectory(const FlightPlan& plan, const GridSpec& grid);

struct DelayedPlan {
    FlightPlan plan;
    std::vector<TrajectorySegment> segments;
};

/// Shifts every waypoint time and segment bound by `delay` and bumps the
/// segment plan versions.
DelayedPlan propagate_delay(const FlightPlan& plan, std::span<const TrajectorySegment> segments, double delay);

// --- weather --------------------------------------------------------------

struct StormCell {
    std::string id;
    PlanarBox box;            ///< position at active.start
    double vx = 0.0;
    double vy = 0.0;
    TimeInterval active;

    PlanarBox box_at(double t) const noexcept;
    void validate() const;

    friend bool operator==(const StormCell&, const StormCell&) = default;
};

enum class Weather { Calm, Severe };

struct Subsector {
    CellIndex index;
    PlanarBox bounds;
    int calm_capacity = 6;
    int severe_capacity = 3;
    std::vector<TimeInterval> closed;
};

/// Open time window (lo, hi) during which the moving storm overlaps `area`,
/// clipped to the storm's active interval. Absent when they never overlap.
std::optional<TimeInterval> severe_window(const PlanarBox& area, const StormCell& storm);

Weather weather_at(const Subsector& s, double t, std::span<const StormCell> storms);
int capacity_at(const Subsector& s, double t, std::span<const StormCell> storms);

/// Capacity governing a whole bucket [start, start + length): 0 if any
/// closure overlaps it, severe if any storm overlaps the subsector at some
/// instant inside it, calm otherwise.
int bucket_capacity(const Subsector& s, double bucket_start, double bucket_length, std::span<const StormCell> storms);

} // namespace adatm::atm
