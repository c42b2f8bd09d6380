#include <algorithm>
#include <cmath>
#include <limits>

#include "adatm/atm.hpp"
#include "adatm/error.hpp"
#include "adatm/format.hpp"

namespace adatm::atm {

void GridSpec::validate() const {
    if (!std::isfinite(x0) || !std::isfinite(y0)) throw ValidationError("grid origin must be finite");
    if (cols < 1 || rows < 1) throw ValidationError("grid needs at least one column and row");
    if (!(cell > 0) || !std::isfinite(cell)) throw ValidationError("grid cell edge must be positive");
    if (sector_cols < 1 || sector_rows < 1) throw ValidationError("sector dimensions must be positive");
    if (cols % sector_cols != 0) throw ValidationError("grid cols not divisible by sector_cols");
    if (rows % sector_rows != 0) throw ValidationError("grid rows not divisible by sector_rows");
}

PlanarBox GridSpec::bounds(CellIndex c) const noexcept {
    return {x0 + c.col * cell, y0 + c.row * cell, x0 + (c.col + 1) * cell, y0 + (c.row + 1) * cell};
}

bool GridSpec::inside(double x, double y) const noexcept {
    return x >= x0 && x <= x_max() && y >= y0 && y <= y_max();
}

bool GridSpec::box_inside(const PlanarBox& b) const noexcept { return inside(b.x0, b.y0) && inside(b.x1, b.y1); }

std::vector<CellIndex> GridSpec::cells() const {
    std::vector<CellIndex> out;
    out.reserve(static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows));
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) out.push_back({c, r});
    return out;
}

const Route& FlightPlan::route(int index) const {
    if (index < 0) return waypoints;
    if (static_cast<std::size_t>(index) >= alternates.size())
        throw NotFoundError("flight " + flight_id + " has no alternate " + std::to_string(index));
    return alternates[static_cast<std::size_t>(index)];
}

namespace {

void validate_route(const Route& route, const GridSpec& grid, const std::string& where) {
    if (route.size() < 2) throw ValidationError(where + ": needs at least two waypoints");
    for (std::size_t i = 0; i < route.size(); ++i) {
        const auto& w = route[i];
        if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.t))
            throw ValidationError(where + ": waypoint " + std::to_string(i) + " is not finite");
        if (!grid.inside(w.x, w.y))
            throw DomainError(where + ": waypoint " + std::to_string(i) + " outside grid");
        if (i > 0 && !(w.t > route[i - 1].t))
            throw ValidationError(where + ": waypoint times must be strictly increasing");
    }
}

} // namespace

void FlightPlan::validate(const GridSpec& grid) const {
    if (flight_id.empty()) throw ValidationError("flight id is empty");
    validate_route(waypoints, grid, "flight " + flight_id + " waypoints");
    for (std::size_t a = 0; a < alternates.size(); ++a) {
        const auto where = "flight " + flight_id + " alternate " + std::to_string(a);
        validate_route(alternates[a], grid, where);
        const auto &first = alternates[a].front(), &last = alternates[a].back();
        if (first.x != waypoints.front().x || first.y != waypoints.front().y || last.x != waypoints.back().x ||
            last.y != waypoints.back().y)
            throw ValidationError(where + ": must share first and last waypoint positions");
    }
    if (!(departure_delay >= 0) || !std::isfinite(departure_delay))
        throw ValidationError("flight " + flight_id + " departure_delay must be >= 0");
    if (max_delay && !(*max_delay >= 0)) throw ValidationError("flight " + flight_id + " max_delay must be >= 0");
}

namespace {

struct ChangePoint {
    double t;
    CellIndex cell;
};

// Index of the cell occupied just after leaving `u` in direction `d` (grid
// units). Points on a boundary belong to the cell being entered.
int start_index(double u, double d, int count) {
    double f = std::floor(u);
    int idx = static_cast<int>(f);
    if (d < 0 && u == f) --idx;
    return std::clamp(idx, 0, count - 1);
}

double next_crossing(double u0, double du, int idx) {
    if (du > 0) return (static_cast<double>(idx + 1) - u0) / du;
    if (du < 0) return (static_cast<double>(idx) - u0) / du;
    return std::numeric_limits<double>::infinity();
}

void push_change(std::vector<ChangePoint>& points, double t, CellIndex cell) {
    if (!points.empty() && points.back().t >= t) {
        points.back().cell = cell;
        return;
    }
    points.push_back({t, cell});
}

} // namespace

std::vector<TrajectorySegment> segment_route(std::span<const Waypoint> route, double delay, const GridSpec& grid,
                                             const std::string& flight_id, int plan_version) {
    if (route.size() < 2) throw PreconditionError("route needs at least two waypoints");
    for (std::size_t i = 0; i < route.size(); ++i) {
        if (!grid.inside(route[i].x, route[i].y))
            throw DomainError("waypoint " + std::to_string(i) + " of " + flight_id + " outside grid");
        if (i > 0 && !(route[i].t > route[i - 1].t))
            throw PreconditionError("waypoint times of " + flight_id + " not strictly increasing");
    }

    std::vector<ChangePoint> points;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) {
        const Waypoint& a = route[i];
        const Waypoint& b = route[i + 1];
        const double t0 = a.t + delay;
        const double t1 = b.t + delay;
        const double u0 = (a.x - grid.x0) / grid.cell, v0 = (a.y - grid.y0) / grid.cell;
        const double du = (b.x - a.x) / grid.cell, dv = (b.y - a.y) / grid.cell;

        int col = start_index(u0, du, grid.cols);
        int row = start_index(v0, dv, grid.rows);
        push_change(points, t0, {col, row});

        double sx = next_crossing(u0, du, col);
        double sy = next_crossing(v0, dv, row);
        while (true) {
            const double s = std::min(sx, sy);
            if (!(s < 1.0)) break;
            const double t = t0 + s * (t1 - t0);
            if (t >= t1) break;
            if (sx == s) {
                col = std::clamp(col + (du > 0 ? 1 : -1), 0, grid.cols - 1);
                sx = next_crossing(u0, du, col);
            }
            if (sy == s) {
                row = std::clamp(row + (dv > 0 ? 1 : -1), 0, grid.rows - 1);
                sy = next_crossing(v0, dv, row);
            }
            push_change(points, t, {col, row});
        }
    }

    const double arrival = route.back().t + delay;
    std::vector<TrajectorySegment> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double end = i + 1 < points.size() ? points[i + 1].t : arrival;
        if (!out.empty() && out.back().cell == points[i].cell) {
            out.back().exit = end;
            continue;
        }
        out.push_back({flight_id, points[i].cell, points[i].t, end, plan_version});
    }
    return out;
}

std::vector<TrajectorySegment> segment_trajectory(const FlightPlan& plan, const GridSpec& grid) {
    return segment_route(plan.waypoints, plan.departure_delay, grid, plan.flight_id, 0);
}

DelayedPlan propagate_delay(const FlightPlan& plan, std::span<const TrajectorySegment> segments, double delay) {
    if (!(delay >= 0)) throw PreconditionError("delay must be >= 0");
    DelayedPlan out{plan, {segments.begin(), segments.end()}};
    for (auto& w : out.plan.waypoints) w.t += delay;
    for (auto& alt : out.plan.alternates)
        for (auto& w : alt) w.t += delay;
    for (auto& s : out.segments) {
        s.entry += delay;
        s.exit += delay;
        ++s.plan_version;
    }
    return out;
}

} // namespace adatm::atm
