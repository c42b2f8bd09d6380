#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adatm/event.hpp"
#include "adatm/kernel.hpp"
#include "adatm/nearness.hpp"

namespace adatm::sched {

enum class LifecycleState { Raw, Encapsulated, Active, Suspended, Stored, Archived, Deleted };

std::string_view to_string(LifecycleState state);
bool legal_transition(LifecycleState from, LifecycleState to) noexcept;

enum class Reason { NewData, PeerArrived, WeatherChanged, TimerExpired };

std::string_view to_string(Reason reason);
/// NewData 10, PeerArrived 20, WeatherChanged 30, TimerExpired 40.
int default_priority(Reason reason) noexcept;

struct ActivationTask {
    std::string datum_id;
    int priority = 0;
    Reason reason = Reason::NewData;
    std::uint64_t enqueued_seq = 0;
};

struct Subscription {
    std::string id;
    nearness::QuerySpec spec;
    double min_confidence = 0.0;
    /// Empty means every kind.
    std::set<kernel::NotionKind> deliver_kinds;
};

struct Alert {
    std::string subscription_id;
    std::string datum_id;
    double emitted_at = 0.0;
    std::string payload_text;

    friend bool operator==(const Alert&, const Alert&) = default;
};

struct Message {
    std::string sender;
    std::string payload;

    friend bool operator==(const Message&, const Message&) = default;
};

struct RunStats {
    std::size_t steps = 0;
    std::size_t alerts = 0;
    std::size_t merges = 0;
    std::size_t deletions = 0;
    bool quiescent = true;

    friend bool operator==(const RunStats&, const RunStats&) = default;
};

struct RuntimeConfig {
    nearness::Radii peer_radii{900.0, 1.0, 0};
    double index_cell_size = 1.0;
    kernel::TierPolicy tier_policy;
};

class Runtime;

/// Domain reaction run inside an activation, after inference and before the
/// tier decision. It may emit events and mutate the runtime.
using ActivationHook = std::function<void(Runtime&, const ActivationTask&, const std::string& datum_id)>;

/// The single-threaded activation loop. Sole mutator of the datum store and
/// the nearness index.
class Runtime {
public:
    explicit Runtime(RuntimeConfig config = {});

    /// Encapsulates raw input (Raw -> Encapsulated -> Active) and queues a
    /// NewData activation. Returns the datum id (generated when absent).
    std::string ingest(kernel::Payload payload, kernel::NotionKind kind, kernel::Metadata metadata,
                       double source_confidence, nearness::NearnessKey key,
                       std::optional<std::string> id = std::nullopt);

    /// Admits an already encapsulated datum and queues it.
    void admit(kernel::ActiveDatum datum, Reason reason = Reason::NewData);
    /// Moves a datum to Deleted, dropping it from the index.
    void retire(const std::string& id, const std::string& why);
    void suspend(const std::string& id);
    void resume(const std::string& id);

    void add_rule(kernel::HypothesisRule rule);
    std::string subscribe(Subscription s);
    void set_activation_hook(ActivationHook hook) { hook_ = std::move(hook); }

    /// Queues a task. The runtime assigns `enqueued_seq`.
    void enqueue(ActivationTask task);
    void enqueue(const std::string& id, Reason reason);
    void submit_evidence(const std::string& id, kernel::Evidence evidence, double arrival_time);

    std::vector<RuntimeEvent> step();
    RunStats run_until_quiescent(std::size_t max_steps);

    std::pair<std::string, std::string> fork(const std::string& id);

    void send(const std::string& from, const std::string& to, std::string payload);
    std::optional<Message> receive(const std::string& owner);

    bool exists(const std::string& id) const { return records_.contains(id); }
    const kernel::ActiveDatum& datum(const std::string& id) const;
    LifecycleState state(const std::string& id) const;
    std::vector<std::string> ids() const;
    std::vector<std::string> live_ids() const;
    const nearness::NearnessIndex& index() const noexcept { return index_; }
    const std::map<std::string, Subscription>& subscriptions() const noexcept { return subscriptions_; }

    std::size_t pending() const noexcept { return queue_.size(); }
    double now() const noexcept { return now_; }
    void set_now(double t) noexcept { now_ = t; }

    /// Appends a domain event to the log (and to the current step's events).
    const RuntimeEvent& emit(EventType type, std::string datum_id, std::string detail);
    const std::vector<RuntimeEvent>& log() const noexcept { return log_; }
    std::string log_text() const;
    const std::vector<Alert>& alerts() const noexcept { return alerts_; }

    std::string next_id(const std::string& prefix);
    const RuntimeConfig& config() const noexcept { return config_; }

private:
    struct Record {
        kernel::ActiveDatum datum;
        LifecycleState state = LifecycleState::Raw;
        int last_priority = 0;
        std::string origin_rule;
        std::vector<std::pair<kernel::Evidence, double>> pending_evidence;
    };

    struct TaskOrder {
        bool operator()(const ActivationTask& a, const ActivationTask& b) const noexcept {
            if (a.priority != b.priority) return a.priority < b.priority;
            return a.enqueued_seq > b.enqueued_seq;
        }
    };

    Record& record(const std::string& id);
    const Record& record(const std::string& id) const;
    void transition(Record& r, LifecycleState to);
    void index_if_absent(const Record& r);
    void unindex(const Record& r);
    bool live(const Record& r) const noexcept;

    std::string activate(const ActivationTask& task);
    std::string resolve_duplicates(std::string current, const std::vector<std::string>& peers);
    void apply_pending(Record& r);
    void run_rules(const std::string& current, const std::vector<std::string>& peers);
    void apply_tier(Record& r);
    void publish_alerts(const Record& r);

    RuntimeConfig config_;
    nearness::NearnessIndex index_;
    std::map<std::string, Record> records_;
    std::map<std::string, kernel::HypothesisRule> rules_;
    std::map<std::string, Subscription> subscriptions_;
    std::map<std::string, std::deque<Message>> mailboxes_;
    std::priority_queue<ActivationTask, std::vector<ActivationTask>, TaskOrder> queue_;
    std::map<std::string, std::uint64_t> id_counters_;
    ActivationHook hook_;

    std::vector<RuntimeEvent> log_;
    std::vector<RuntimeEvent>* step_events_ = nullptr;
    std::vector<Alert> alerts_;
    std::uint64_t event_seq_ = 0;
    std::uint64_t task_seq_ = 0;
    double now_ = 0.0;
};

} // namespace adatm::sched
