#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace adatm {

enum class EventType {
    // runtime
    Ingested,
    Admitted,
    Queued,
    Activated,
    Skipped,
    Revived,
    PeersFound,
    Merged,
    Deleted,
    EvidenceApplied,
    HypothesisInferred,
    GapRecorded,
    TierChanged,
    AlertPublished,
    Forked,
    Suspended,
    Resumed,
    MessageSent,
    Error,
    // airspace
    StormRevealed,
    StormGated,
    WeatherChanged,
    InsertAccepted,
    InsertRerouted,
    InsertRejected,
    NegotiationStarted,
    NegotiationResolved,
    NegotiationFailed,
    PlanChanged,
    FlightWithdrawn,
    NoConflict,
};

std::string_view to_string(EventType type);

struct RuntimeEvent {
    std::uint64_t seq = 0;
    EventType type = EventType::Error;
    std::string datum_id;
    std::string detail;

    /// `seq|event_type|datum_id|detail`
    std::string line() const;
};

} // namespace adatm
