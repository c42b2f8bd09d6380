#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adatm/event.hpp"
#include "adatm/report.hpp"
#include "adatm/scenario.hpp"

namespace adatm::scenario {

struct SimulationOptions {
    std::size_t max_steps = 1'000'000;
    /// Merged observation confidence a storm needs before it counts.
    double storm_threshold = 0.75;
    /// Emit a record for every subsector and bucket, not only occupied ones.
    bool full = false;
};

struct SimulationResult {
    Report report;
    std::vector<RuntimeEvent> events;

    /// One `seq|event_type|datum_id|detail` line per event.
    std::string log_text() const;
};

/// Drives the scenario through the Active Data runtime: observations, flight
/// insertion in (departure, id) order, storm reveals, then prediction.
SimulationResult simulate(const Scenario& s, const SimulationOptions& options = {});
Report run_simulation(const Scenario& s, const SimulationOptions& options = {});

/// Centralised recomputation: every flight on its requested plan, occupancy
/// and capacity counted globally, no negotiation.
Report run_oracle(const Scenario& s, bool full = false, double storm_threshold = 0.75);

} // namespace adatm::scenario
