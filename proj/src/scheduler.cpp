#include "adatm/scheduler.hpp"

#include <algorithm>
#include <cstdio>

#include "adatm/error.hpp"
#include "adatm/format.hpp"

namespace adatm::sched {

using kernel::ActiveDatum;

std::string_view to_string(LifecycleState state) {
    switch (state) {
    case LifecycleState::Raw: return "Raw";
    case LifecycleState::Encapsulated: return "Encapsulated";
    case LifecycleState::Active: return "Active";
    case LifecycleState::Suspended: return "Suspended";
    case LifecycleState::Stored: return "Stored";
    case LifecycleState::Archived: return "Archived";
    case LifecycleState::Deleted: return "Deleted";
    }
    return "?";
}

bool legal_transition(LifecycleState from, LifecycleState to) noexcept {
    using S = LifecycleState;
    switch (from) {
    case S::Raw: return to == S::Encapsulated;
    case S::Encapsulated: return to == S::Active;
    case S::Active: return to == S::Suspended || to == S::Stored || to == S::Archived || to == S::Deleted;
    case S::Suspended: return to == S::Active;
    case S::Stored: return to == S::Active;
    case S::Archived: return to == S::Active;
    case S::Deleted: return false;
    }
    return false;
}

std::string_view to_string(Reason reason) {
    switch (reason) {
    case Reason::NewData: return "NewData";
    case Reason::PeerArrived: return "PeerArrived";
    case Reason::WeatherChanged: return "WeatherChanged";
    case Reason::TimerExpired: return "TimerExpired";
    }
    return "?";
}

int default_priority(Reason reason) noexcept {
    switch (reason) {
    case Reason::NewData: return 10;
    case Reason::PeerArrived: return 20;
    case Reason::WeatherChanged: return 30;
    case Reason::TimerExpired: return 40;
    }
    return 0;
}

Runtime::Runtime(RuntimeConfig config) : config_(config), index_(config.index_cell_size) {}

// --- bookkeeping ----------------------------------------------------------

Runtime::Record& Runtime::record(const std::string& id) {
    auto it = records_.find(id);
    if (it == records_.end()) throw NotFoundError("unknown datum " + id);
    return it->second;
}

const Runtime::Record& Runtime::record(const std::string& id) const {
    auto it = records_.find(id);
    if (it == records_.end()) throw NotFoundError("unknown datum " + id);
    return it->second;
}

const ActiveDatum& Runtime::datum(const std::string& id) const { return record(id).datum; }

LifecycleState Runtime::state(const std::string& id) const { return record(id).state; }

std::vector<std::string> Runtime::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : records_) out.push_back(id);
    return out;
}

std::vector<std::string> Runtime::live_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, r] : records_)
        if (live(r)) out.push_back(id);
    return out;
}

bool Runtime::live(const Record& r) const noexcept { return r.state != LifecycleState::Deleted; }

void Runtime::transition(Record& r, LifecycleState to) {
    if (!legal_transition(r.state, to))
        throw LifecycleError("illegal transition " + std::string(to_string(r.state)) + "->" +
                             std::string(to_string(to)) + " for " + r.datum.id);
    r.state = to;
}

void Runtime::index_if_absent(const Record& r) {
    if (!index_.contains(r.datum.id)) index_.insert(r.datum.id, r.datum.key);
}

void Runtime::unindex(const Record& r) {
    if (index_.contains(r.datum.id)) index_.remove(r.datum.id);
}

std::string Runtime::next_id(const std::string& prefix) {
    while (true) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(++id_counters_[prefix]));
        std::string id = prefix + "-" + buf;
        if (!records_.contains(id)) return id;
    }
}

const RuntimeEvent& Runtime::emit(EventType type, std::string datum_id, std::string detail) {
    log_.push_back(RuntimeEvent{++event_seq_, type, std::move(datum_id), std::move(detail)});
    if (step_events_) step_events_->push_back(log_.back());
    return log_.back();
}

std::string Runtime::log_text() const {
    std::string out;
    for (const auto& e : log_) {
        out += e.line();
        out += '\n';
    }
    return out;
}

// --- lifecycle ------------------------------------------------------------

std::string Runtime::ingest(kernel::Payload payload, kernel::NotionKind kind, kernel::Metadata metadata,
                            double source_confidence, nearness::NearnessKey key, std::optional<std::string> id) {
    std::string datum_id = id ? *id : next_id("ad");
    if (records_.contains(datum_id)) throw ConflictError("datum id already exists: " + datum_id);

    auto datum = kernel::encapsulate(datum_id, std::move(payload), kind, std::move(metadata), source_confidence,
                                     std::move(key));
    Record r;
    r.datum.id = datum_id;
    emit(EventType::Ingested, datum_id, "source=" + datum.metadata.source_id);
    transition(r, LifecycleState::Encapsulated);
    r.datum = std::move(datum);
    transition(r, LifecycleState::Active);
    auto& stored = records_.emplace(datum_id, std::move(r)).first->second;
    index_if_absent(stored);
    emit(EventType::Admitted, datum_id, "kind=" + std::string(kernel::to_string(stored.datum.kind)));
    enqueue(datum_id, Reason::NewData);
    return datum_id;
}

void Runtime::admit(ActiveDatum datum, Reason reason) {
    if (datum.id.empty()) throw ValidationError("datum id is empty");
    if (records_.contains(datum.id)) throw ConflictError("datum id already exists: " + datum.id);
    if (datum.deleted()) throw LifecycleError("cannot admit deleted datum " + datum.id);
    datum.key.validate();
    Record r;
    r.state = LifecycleState::Encapsulated;
    r.datum = std::move(datum);
    transition(r, LifecycleState::Active);
    const std::string id = r.datum.id;
    auto& stored = records_.emplace(id, std::move(r)).first->second;
    index_if_absent(stored);
    emit(EventType::Admitted, id, "kind=" + std::string(kernel::to_string(stored.datum.kind)));
    enqueue(id, reason);
}

void Runtime::retire(const std::string& id, const std::string& why) {
    Record& r = record(id);
    if (r.state == LifecycleState::Deleted) return;
    if (r.state != LifecycleState::Active) transition(r, LifecycleState::Active);
    transition(r, LifecycleState::Deleted);
    r.datum.hyperdata.tier = kernel::StorageTier::Deleted;
    unindex(r);
    emit(EventType::Deleted, id, why);
}

void Runtime::suspend(const std::string& id) {
    Record& r = record(id);
    transition(r, LifecycleState::Suspended);
    emit(EventType::Suspended, id, "");
}

void Runtime::resume(const std::string& id) {
    Record& r = record(id);
    if (r.state != LifecycleState::Suspended) throw LifecycleError("datum not suspended: " + id);
    transition(r, LifecycleState::Active);
    emit(EventType::Resumed, id, "");
}

void Runtime::add_rule(kernel::HypothesisRule rule) {
    rule.validate();
    if (rules_.contains(rule.id)) throw ConflictError("rule id already exists: " + rule.id);
    rules_.emplace(rule.id, std::move(rule));
}

std::string Runtime::subscribe(Subscription s) {
    s.spec.validate();
    if (!(s.min_confidence >= 0 && s.min_confidence <= 1))
        throw ValidationError("subscription min_confidence outside [0, 1]");
    if (s.id.empty()) s.id = next_id("sub");
    if (subscriptions_.contains(s.id)) throw ValidationError("subscription id already exists: " + s.id);
    std::string id = s.id;
    subscriptions_.emplace(id, std::move(s));
    return id;
}

void Runtime::enqueue(ActivationTask task) {
    Record& r = record(task.datum_id);
    if (r.state == LifecycleState::Deleted) throw LifecycleError("cannot enqueue deleted datum " + task.datum_id);
    task.enqueued_seq = ++task_seq_;
    r.last_priority = task.priority;
    emit(EventType::Queued, task.datum_id,
         "reason=" + std::string(to_string(task.reason)) + " priority=" + std::to_string(task.priority) +
             " seq=" + std::to_string(task.enqueued_seq));
    queue_.push(std::move(task));
}

void Runtime::enqueue(const std::string& id, Reason reason) {
    enqueue(ActivationTask{id, default_priority(reason), reason, 0});
}

void Runtime::submit_evidence(const std::string& id, kernel::Evidence evidence, double arrival_time) {
    Record& r = record(id);
    if (r.state == LifecycleState::Deleted) throw LifecycleError("evidence for deleted datum " + id);
    if (!(evidence.strength >= 0 && evidence.strength <= 1)) throw RangeError("evidence strength outside [0, 1]");
    r.pending_evidence.emplace_back(std::move(evidence), arrival_time);
}

std::pair<std::string, std::string> Runtime::fork(const std::string& id) {
    Record& r = record(id);
    if (r.state != LifecycleState::Active) throw LifecycleError("fork needs an Active datum: " + id);

    ActiveDatum clone = r.datum;
    clone.id = next_id("ad");
    std::erase(clone.hyperdata.refuting, id);
    clone.hyperdata.complementary.push_back(id);

    Record c;
    c.state = LifecycleState::Encapsulated;
    c.origin_rule = r.origin_rule;
    c.datum = std::move(clone);
    const std::string clone_id = c.datum.id;
    const int priority = r.last_priority;
    transition(c, LifecycleState::Active);
    auto& stored = records_.emplace(clone_id, std::move(c)).first->second;
    index_if_absent(stored);
    emit(EventType::Forked, id, "clone=" + clone_id);
    enqueue(ActivationTask{clone_id, priority, Reason::NewData, 0});
    return {id, clone_id};
}

void Runtime::send(const std::string& from, const std::string& to, std::string payload) {
    record(from);
    Record& receiver = record(to);
    if (receiver.state == LifecycleState::Deleted) throw LifecycleError("receiver deleted: " + to);
    mailboxes_[to].push_back(Message{from, std::move(payload)});
    emit(EventType::MessageSent, to, "from=" + from);
}

std::optional<Message> Runtime::receive(const std::string& owner) {
    record(owner);
    auto it = mailboxes_.find(owner);
    if (it == mailboxes_.end() || it->second.empty()) return std::nullopt;
    Message m = std::move(it->second.front());
    it->second.pop_front();
    return m;
}

// --- activation -----------------------------------------------------------

std::vector<RuntimeEvent> Runtime::step() {
    if (queue_.empty()) return {};
    std::vector<RuntimeEvent> events;
    step_events_ = &events;
    ActivationTask task = queue_.top();
    queue_.pop();
    emit(EventType::Activated, task.datum_id,
         "reason=" + std::string(to_string(task.reason)) + " priority=" + std::to_string(task.priority) +
             " seq=" + std::to_string(task.enqueued_seq));
    try {
        activate(task);
    } catch (const std::exception& e) {
        emit(EventType::Error, task.datum_id, e.what());
    }
    step_events_ = nullptr;
    return events;
}

RunStats Runtime::run_until_quiescent(std::size_t max_steps) {
    if (max_steps < 1) throw PreconditionError("max_steps must be >= 1");
    RunStats stats;
    while (!queue_.empty() && stats.steps < max_steps) {
        for (const auto& e : step()) {
            if (e.type == EventType::AlertPublished) ++stats.alerts;
            else if (e.type == EventType::Merged) ++stats.merges;
            else if (e.type == EventType::Deleted) ++stats.deletions;
        }
        ++stats.steps;
    }
    stats.quiescent = queue_.empty();
    return stats;
}

std::string Runtime::activate(const ActivationTask& task) {
    auto it = records_.find(task.datum_id);
    if (it == records_.end()) {
        emit(EventType::Skipped, task.datum_id, "unknown");
        return task.datum_id;
    }
    Record& r = it->second;
    if (r.state == LifecycleState::Deleted || r.state == LifecycleState::Suspended) {
        emit(EventType::Skipped, task.datum_id, std::string(to_string(r.state)));
        return task.datum_id;
    }
    if (r.state == LifecycleState::Stored || r.state == LifecycleState::Archived) {
        transition(r, LifecycleState::Active);
        r.datum.hyperdata.tier = kernel::StorageTier::Hot;
        index_if_absent(r);
        emit(EventType::Revived, r.datum.id, "");
    }

    // (1) peers
    std::vector<std::string> peers;
    for (auto& id : index_.query(nearness::QuerySpec::neighborhood(r.datum.key, config_.peer_radii))) {
        if (id == r.datum.id) continue;
        const Record& p = records_.at(id);
        if (p.state == LifecycleState::Active || p.state == LifecycleState::Stored) peers.push_back(std::move(id));
    }
    emit(EventType::PeersFound, r.datum.id, "count=" + std::to_string(peers.size()));

    // (2) resolution, (3) evidence, (4) inference
    std::string current = resolve_duplicates(r.datum.id, peers);
    apply_pending(record(current));
    run_rules(current, peers);

    if (hook_) hook_(*this, task, current);

    // (5) storage tier, (6) alerts
    Record& cr = record(current);
    if (cr.state == LifecycleState::Active || cr.state == LifecycleState::Stored) {
        apply_tier(cr);
        if (cr.state == LifecycleState::Active || cr.state == LifecycleState::Stored) publish_alerts(cr);
    }
    return current;
}

namespace {

bool lists(const ActiveDatum& d, const std::string& id) {
    const auto& c = d.hyperdata.complementary;
    return std::find(c.begin(), c.end(), id) != c.end();
}

} // namespace

std::string Runtime::resolve_duplicates(std::string current, const std::vector<std::string>& peers) {
    for (const auto& peer_id : peers) {
        if (peer_id == current) continue;
        Record& peer = records_.at(peer_id);
        if (peer.state != LifecycleState::Active && peer.state != LifecycleState::Stored) continue;
        Record& self = records_.at(current);
        // Forks and already-merged lineage reference each other; they are
        // deliberately kept apart.
        if (lists(self.datum, peer_id) || lists(peer.datum, current)) continue;
        if (!kernel::is_duplicate(self.datum, peer.datum)) continue;

        ActiveDatum merged = kernel::resolve(self.datum, peer.datum);
        const std::string winner = merged.id;
        const std::string loser = winner == current ? peer_id : current;
        Record& w = records_.at(winner);
        Record& l = records_.at(loser);
        w.datum = std::move(merged);
        for (auto& ev : l.pending_evidence) w.pending_evidence.push_back(std::move(ev));
        l.pending_evidence.clear();
        emit(EventType::Merged, winner,
             "absorbed=" + loser + " confidence=" + format_number(w.datum.hyperdata.confidence));
        retire(loser, "merged into " + winner);
        current = winner;
    }
    return current;
}

void Runtime::apply_pending(Record& r) {
    for (const auto& [evidence, at] : r.pending_evidence) {
        r.datum = kernel::apply_evidence(r.datum, evidence, at);
        emit(EventType::EvidenceApplied, r.datum.id,
             std::string(evidence.polarity == kernel::Polarity::Complementary ? "complementary" : "refuting") +
                 " strength=" + format_number(evidence.strength) + " truth=" +
                 format_number(r.datum.hyperdata.truth) + " confidence=" +
                 format_number(r.datum.hyperdata.confidence));
    }
    r.pending_evidence.clear();
}

void Runtime::run_rules(const std::string& current, const std::vector<std::string>& peers) {
    for (const auto& [rule_id, rule] : rules_) {
        Record& self = records_.at(current);
        std::vector<ActiveDatum> candidates;
        if (self.origin_rule != rule_id) candidates.push_back(self.datum);
        for (const auto& p : peers) {
            if (p == current) continue;
            const Record& pr = records_.at(p);
            if (pr.state != LifecycleState::Active && pr.state != LifecycleState::Stored) continue;
            if (pr.origin_rule == rule_id) continue;
            candidates.push_back(pr.datum);
        }

        if (auto h = kernel::infer(rule, candidates)) {
            if (records_.contains(h->id)) continue;
            Record hr;
            hr.state = LifecycleState::Encapsulated;
            hr.origin_rule = rule_id;
            hr.datum = std::move(*h);
            const std::string hid = hr.datum.id;
            const double confidence = hr.datum.hyperdata.confidence;
            transition(hr, LifecycleState::Active);
            auto& stored = records_.emplace(hid, std::move(hr)).first->second;
            index_if_absent(stored);
            emit(EventType::HypothesisInferred, hid, "rule=" + rule_id + " confidence=" + format_number(confidence));
            enqueue(hid, Reason::NewData);
            continue;
        }

        auto partial = kernel::partial_match(rule, candidates);
        const auto& bound = partial.bound_ids;
        if (partial.gaps.empty() || std::find(bound.begin(), bound.end(), current) == bound.end()) continue;
        auto& missing = self.datum.hyperdata.missing;
        for (const auto& gap : partial.gaps) {
            if (std::find(missing.begin(), missing.end(), gap) != missing.end()) continue;
            missing.push_back(gap);
            emit(EventType::GapRecorded, current, gap);
        }
    }
}

void Runtime::apply_tier(Record& r) {
    using kernel::StorageTier;
    const StorageTier decided = kernel::tier_decision(r.datum, now_, config_.tier_policy);
    const StorageTier before = r.datum.hyperdata.tier;
    if (decided == before) return;

    if (decided == StorageTier::Deleted) {
        emit(EventType::TierChanged, r.datum.id,
             std::string(kernel::to_string(before)) + "->" + std::string(kernel::to_string(decided)));
        retire(r.datum.id, "confidently false");
        return;
    }
    r.datum.hyperdata.tier = decided;
    emit(EventType::TierChanged, r.datum.id,
         std::string(kernel::to_string(before)) + "->" + std::string(kernel::to_string(decided)));

    LifecycleState target = LifecycleState::Active;
    if (decided == StorageTier::Cold) target = LifecycleState::Stored;
    if (decided == StorageTier::Archived) target = LifecycleState::Archived;
    if (target == r.state) return;
    if (r.state != LifecycleState::Active) transition(r, LifecycleState::Active);
    if (target != LifecycleState::Active) transition(r, target);
    if (target == LifecycleState::Archived) unindex(r);
}

void Runtime::publish_alerts(const Record& r) {
    for (const auto& [sid, sub] : subscriptions_) {
        if (!sub.deliver_kinds.empty() && !sub.deliver_kinds.contains(r.datum.kind)) continue;
        if (r.datum.hyperdata.confidence < sub.min_confidence) continue;
        if (!nearness::matches(sub.spec, r.datum.key)) continue;
        alerts_.push_back(Alert{sid, r.datum.id, now_, r.datum.payload.canonical()});
        emit(EventType::AlertPublished, r.datum.id, "subscription=" + sid);
    }
}

} // namespace adatm::sched
