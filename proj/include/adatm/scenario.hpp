#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adatm/airspace.hpp"
#include "adatm/kernel.hpp"
#include "adatm/nearness.hpp"
#include "adatm/scheduler.hpp"

namespace adatm::scenario {

struct Closure {
    atm::CellIndex cell;
    nearness::TimeInterval interval;

    friend bool operator==(const Closure&, const Closure&) = default;
};

/// A raw report that becomes an Active Datum. A `storm` payload field ties
/// it to a storm cell.
struct Observation {
    std::string id;  ///< optional; generated when empty
    kernel::Payload payload;
    kernel::NotionKind kind = kernel::NotionKind::Event;
    std::string source;
    double confidence = 1.0;
    double observed_at = 0.0;
    nearness::NearnessKey key;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct SubscriptionDef {
    std::string id;
    nearness::QuerySpec spec;
    double min_confidence = 0.0;
    std::set<kernel::NotionKind> kinds;

    sched::Subscription to_subscription() const { return {id, spec, min_confidence, kinds}; }

    friend bool operator==(const SubscriptionDef&, const SubscriptionDef&) = default;
};

struct Scenario {
    atm::GridSpec grid;
    std::int64_t bucket_seconds = 60;
    double horizon_seconds = 14400.0;
    int calm_capacity = 6;
    int severe_capacity = 3;
    std::vector<atm::FlightPlan> flights;
    std::vector<atm::StormCell> storms;
    std::vector<Closure> closures;
    std::vector<Observation> observations;
    std::vector<SubscriptionDef> subscriptions;
    std::vector<kernel::HypothesisRule> rules;
    std::int64_t seed = 0;

    atm::AirspaceConfig airspace_config() const;
    /// Throws ValidationError naming the offending field.
    void validate() const;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Parses and validates. Schema problems raise ParseError with a JSON path.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);
std::string dump_scenario(const Scenario& s);

} // namespace adatm::scenario
