#include <algorithm>
#include <cmath>
#include <limits>

#include "adatm/atm.hpp"
#include "adatm/error.hpp"

namespace adatm::atm {

PlanarBox StormCell::box_at(double t) const noexcept {
    const double dt = t - active.start;
    return {box.x0 + vx * dt, box.y0 + vy * dt, box.x1 + vx * dt, box.y1 + vy * dt};
}

void StormCell::validate() const {
    if (id.empty()) throw ValidationError("storm id is empty");
    box.validate();
    if (!(box.x0 < box.x1 && box.y0 < box.y1)) throw ValidationError("storm " + id + " box must have positive area");
    active.validate();
    if (!std::isfinite(vx) || !std::isfinite(vy)) throw ValidationError("storm " + id + " velocity must be finite");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Open interval of offsets tau with (lo + v*tau, hi + v*tau) overlapping
// (a_lo, a_hi). Empty intervals come back with lo >= hi.
std::pair<double, double> axis_overlap(double lo, double hi, double v, double a_lo, double a_hi) {
    if (v == 0) return (lo < a_hi && a_lo < hi) ? std::pair{-kInf, kInf} : std::pair{0.0, 0.0};
    const double enter = (a_lo - hi) / v;
    const double leave = (a_hi - lo) / v;
    return v > 0 ? std::pair{enter, leave} : std::pair{leave, enter};
}

} // namespace

std::optional<TimeInterval> severe_window(const PlanarBox& area, const StormCell& storm) {
    auto [xlo, xhi] = axis_overlap(storm.box.x0, storm.box.x1, storm.vx, area.x0, area.x1);
    auto [ylo, yhi] = axis_overlap(storm.box.y0, storm.box.y1, storm.vy, area.y0, area.y1);
    const double lo = std::max({xlo, ylo}) + storm.active.start;
    const double hi = std::min({xhi, yhi}) + storm.active.start;
    const double clipped_lo = std::max(lo, storm.active.start);
    const double clipped_hi = std::min(hi, storm.active.end);
    if (!(clipped_lo < clipped_hi)) return std::nullopt;
    return TimeInterval{clipped_lo, clipped_hi};
}

Weather weather_at(const Subsector& s, double t, std::span<const StormCell> storms) {
    for (const auto& storm : storms)
        if (storm.active.contains(t) && storm.box_at(t).intersects(s.bounds)) return Weather::Severe;
    return Weather::Calm;
}

int capacity_at(const Subsector& s, double t, std::span<const StormCell> storms) {
    for (const auto& c : s.closed)
        if (c.contains(t)) return 0;
    return weather_at(s, t, storms) == Weather::Severe ? s.severe_capacity : s.calm_capacity;
}

int bucket_capacity(const Subsector& s, double bucket_start, double bucket_length, std::span<const StormCell> storms) {
    const TimeInterval bucket{bucket_start, bucket_start + bucket_length};
    for (const auto& c : s.closed)
        if (c.intersects(bucket)) return 0;
    for (const auto& storm : storms) {
        auto w = severe_window(s.bounds, storm);
        if (w && std::max(w->start, bucket.start) < std::min(w->end, bucket.end)) return s.severe_capacity;
    }
    return s.calm_capacity;
}

} // namespace adatm::atm
