#include "adatm/event.hpp"

namespace adatm {

std::string_view to_string(EventType type) {
    switch (type) {
    case EventType::Ingested: return "Ingested";
    case EventType::Admitted: return "Admitted";
    case EventType::Queued: return "Queued";
    case EventType::Activated: return "Activated";
    case EventType::Skipped: return "Skipped";
    case EventType::Revived: return "Revived";
    case EventType::PeersFound: return "PeersFound";
    case EventType::Merged: return "Merged";
    case EventType::Deleted: return "Deleted";
    case EventType::EvidenceApplied: return "EvidenceApplied";
    case EventType::HypothesisInferred: return "HypothesisInferred";
    case EventType::GapRecorded: return "GapRecorded";
    case EventType::TierChanged: return "TierChanged";
    case EventType::AlertPublished: return "AlertPublished";
    case EventType::Forked: return "Forked";
    case EventType::Suspended: return "Suspended";
    case EventType::Resumed: return "Resumed";
    case EventType::MessageSent: return "MessageSent";
    case EventType::Error: return "Error";
    case EventType::StormRevealed: return "StormRevealed";
    case EventType::StormGated: return "StormGated";
    case EventType::WeatherChanged: return "WeatherChanged";
    case EventType::InsertAccepted: return "InsertAccepted";
    case EventType::InsertRerouted: return "InsertRerouted";
    case EventType::InsertRejected: return "InsertRejected";
    case EventType::NegotiationStarted: return "NegotiationStarted";
    case EventType::NegotiationResolved: return "NegotiationResolved";
    case EventType::NegotiationFailed: return "NegotiationFailed";
    case EventType::PlanChanged: return "PlanChanged";
    case EventType::FlightWithdrawn: return "FlightWithdrawn";
    case EventType::NoConflict: return "NoConflict";
    }
    return "Unknown";
}

namespace {

std::string clean(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == '|') c = '/';
        else if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

} // namespace

std::string RuntimeEvent::line() const {
    return std::to_string(seq) + "|" + std::string(to_string(type)) + "|" + clean(datum_id) + "|" + clean(detail);
}

} // namespace adatm
