#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "adatm/error.hpp"
#include "adatm/scheduler.hpp"
#include "doctest.h"

using namespace adatm;
using namespace adatm::sched;
using kernel::NotionKind;
using kernel::Payload;
using nearness::ConceptPath;
using nearness::NearnessKey;

namespace {

NearnessKey key_at(double t0, double t1, double x = 0, const char* concept_path = "root/news") {
    return {{t0, t1}, {x, 0, x + 1, 1}, ConceptPath::parse(concept_path)};
}

kernel::Metadata meta(const std::string& src = "src") { return {src, 0.0, 1, "test"}; }

std::vector<std::string> activated(const std::vector<RuntimeEvent>& events) {
    std::vector<std::string> out;
    for (const auto& e : events)
        if (e.type == EventType::Activated) out.push_back(e.datum_id);
    return out;
}

std::size_t count(const std::vector<RuntimeEvent>& events, EventType type) {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const RuntimeEvent& e) { return e.type == type; }));
}

// Far apart keys so activations never see each other as peers.
std::string add_isolated(Runtime& rt, int i, double conf = 0.9) {
    return rt.ingest(Payload{{"n", std::to_string(i)}}, NotionKind::Event, meta(), conf,
                     key_at(i * 10000.0, i * 10000.0 + 1, i * 100.0), "d" + std::to_string(1000 + i));
}

} // namespace

TEST_CASE("default priorities") {
    CHECK(default_priority(Reason::NewData) == 10);
    CHECK(default_priority(Reason::PeerArrived) == 20);
    CHECK(default_priority(Reason::WeatherChanged) == 30);
    CHECK(default_priority(Reason::TimerExpired) == 40);
}

TEST_CASE("lifecycle transitions") {
    using S = LifecycleState;
    CHECK(legal_transition(S::Raw, S::Encapsulated));
    CHECK(legal_transition(S::Encapsulated, S::Active));
    CHECK(legal_transition(S::Active, S::Suspended));
    CHECK(legal_transition(S::Suspended, S::Active));
    CHECK(legal_transition(S::Active, S::Stored));
    CHECK(legal_transition(S::Archived, S::Active));
    CHECK_FALSE(legal_transition(S::Raw, S::Active));
    CHECK_FALSE(legal_transition(S::Deleted, S::Active));
    CHECK_FALSE(legal_transition(S::Suspended, S::Deleted));
}

TEST_CASE("higher priority runs first, ties by enqueue order") {
    Runtime rt;
    auto a = add_isolated(rt, 1);
    auto b = add_isolated(rt, 2);
    auto c = add_isolated(rt, 3);
    rt.run_until_quiescent(100);

    rt.enqueue(a, Reason::NewData);
    rt.enqueue(b, Reason::TimerExpired);
    rt.enqueue(c, Reason::WeatherChanged);
    rt.enqueue(a, Reason::TimerExpired);
    std::vector<std::string> order;
    while (rt.pending() > 0)
        for (auto& id : activated(rt.step())) order.push_back(id);
    CHECK(order == std::vector<std::string>{b, a, c, a});
}

TEST_CASE("queue order matches a stable sort over 100 random tasks") {
    Runtime rt;
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back(add_isolated(rt, i));
    rt.run_until_quiescent(1000);

    std::mt19937 rng(17);
    std::uniform_int_distribution<int> pri(0, 5);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    struct Task {
        std::string id;
        int priority;
        int order;
    };
    std::vector<Task> tasks;
    for (int i = 0; i < 100; ++i) {
        Task t{ids[pick(rng)], pri(rng), i};
        tasks.push_back(t);
        rt.enqueue(ActivationTask{t.id, t.priority, Reason::NewData, 0});
    }
    std::stable_sort(tasks.begin(), tasks.end(), [](const Task& x, const Task& y) { return x.priority > y.priority; });

    std::vector<std::string> got;
    while (rt.pending() > 0)
        for (auto& id : activated(rt.step())) got.push_back(id);
    REQUIRE(got.size() == tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) CHECK(got[i] == tasks[i].id);
}

TEST_CASE("duplicates merge into the smaller id with fused confidence") {
    Runtime rt;
    Payload story{{"story", "election results"}};
    rt.ingest(story, NotionKind::Event, meta("cnn"), 0.6, key_at(0, 100), "b-cnn");
    rt.ingest(story, NotionKind::Event, meta("msnbc"), 0.5, key_at(50, 150), "a-msnbc");
    auto stats = rt.run_until_quiescent(100);
    CHECK(stats.quiescent);
    CHECK(stats.merges == 1);
    CHECK(rt.state("a-msnbc") == LifecycleState::Active);
    CHECK(rt.state("b-cnn") == LifecycleState::Deleted);
    CHECK(rt.datum("a-msnbc").hyperdata.confidence == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rt.live_ids() == std::vector<std::string>{"a-msnbc"});
    CHECK_FALSE(rt.index().contains("b-cnn"));
}

TEST_CASE("subscriptions filter by confidence, kind and key") {
    Runtime rt;
    rt.subscribe({"loose", nearness::QuerySpec::focused(std::nullopt, std::nullopt, ConceptPath::parse("root/news")),
                  0.5, {}});
    rt.subscribe({"strict", nearness::QuerySpec::focused(std::nullopt, std::nullopt, ConceptPath::parse("root/news")),
                  0.7, {}});
    rt.subscribe({"goals", nearness::QuerySpec::focused(std::nullopt, std::nullopt, ConceptPath::parse("root")), 0.0,
                  {NotionKind::Goal}});
    rt.subscribe({"weather", nearness::QuerySpec::focused(std::nullopt, std::nullopt, ConceptPath::parse("root/weather")),
                  0.0, {}});

    rt.ingest(Payload::text("x"), NotionKind::Event, meta(), 0.6, key_at(0, 1), "x");
    rt.run_until_quiescent(10);
    REQUIRE(rt.alerts().size() == 1);
    CHECK(rt.alerts()[0].subscription_id == "loose");
    CHECK(rt.alerts()[0].datum_id == "x");
    CHECK(rt.alerts()[0].payload_text == "text=x");

    rt.ingest(Payload::text("y"), NotionKind::Goal, meta(), 0.9, key_at(5000, 5001, 500), "y");
    rt.run_until_quiescent(10);
    std::set<std::string> subs;
    for (const auto& a : rt.alerts())
        if (a.datum_id == "y") subs.insert(a.subscription_id);
    CHECK(subs == std::set<std::string>{"goals", "loose", "strict"});

    const auto any = nearness::QuerySpec::focused(nearness::TimeInterval{0, 1}, std::nullopt, std::nullopt);
    CHECK_THROWS_AS(rt.subscribe({"loose", any, 0.0, {}}), ValidationError);
    CHECK_THROWS_AS(rt.subscribe({"", any, 1.5, {}}), ValidationError);
    CHECK_THROWS_AS(rt.subscribe({"", {}, 0.0, {}}), ValidationError);
    CHECK(rt.subscribe({"", any, 0.0, {}}).starts_with("sub-"));
}

TEST_CASE("rules infer hypotheses from peers") {
    Runtime rt;
    rt.add_rule({"whereabouts",
                 {{{"aircraft", "?a"}, {"arrived", "?city"}}, {{"person", "?p"}, {"aboard", "?a"}}},
                 {{"person", "?p"}, {"location", "?city"}},
                 NotionKind::Hypothesis});
    rt.subscribe({"news", nearness::QuerySpec::focused(std::nullopt, std::nullopt, ConceptPath::parse("root/news")),
                  0.5, {NotionKind::Hypothesis}});

    rt.ingest(Payload{{"aircraft", "Air Force One"}, {"arrived", "Paris"}}, NotionKind::Event, meta(), 0.9,
              key_at(0, 10), "af1");
    rt.run_until_quiescent(10);
    CHECK_FALSE(rt.datum("af1").hyperdata.missing.empty());

    rt.ingest(Payload{{"person", "The US President"}, {"aboard", "Air Force One"}}, NotionKind::Event, meta(), 0.8,
              key_at(5, 15), "potus");
    auto stats = rt.run_until_quiescent(20);
    CHECK(stats.quiescent);
    REQUIRE(rt.alerts().size() == 1);
    const auto& h = rt.datum(rt.alerts()[0].datum_id);
    CHECK(h.kind == NotionKind::Hypothesis);
    CHECK(h.payload.get("location") == "Paris");
    CHECK(h.hyperdata.confidence == doctest::Approx(0.72).epsilon(1e-12));
    CHECK(count(rt.log(), EventType::HypothesisInferred) == 1);

    CHECK_THROWS_AS(rt.add_rule({"whereabouts", {{{"a", "1"}}}, {{"b", "1"}}, NotionKind::Hypothesis}), ConflictError);
}

TEST_CASE("confidently false data is deleted") {
    Runtime rt;
    rt.ingest(Payload::text("rumour"), NotionKind::Event, meta(), 0.95, key_at(0, 1), "r");
    rt.run_until_quiescent(10);
    rt.submit_evidence("r", {kernel::Polarity::Refuting, 1.0, "debunk"}, 1.0);
    rt.enqueue("r", Reason::NewData);
    auto stats = rt.run_until_quiescent(10);
    CHECK(stats.deletions == 1);
    CHECK(rt.state("r") == LifecycleState::Deleted);
    CHECK(rt.datum("r").hyperdata.truth == -1.0);
    CHECK_THROWS_AS(rt.enqueue("r", Reason::NewData), LifecycleError);
    CHECK_THROWS_AS(rt.submit_evidence("r", {kernel::Polarity::Refuting, 0.5, ""}, 2.0), LifecycleError);
}

TEST_CASE("age moves data down the tiers and activation revives it") {
    Runtime rt;
    rt.ingest(Payload::text("old"), NotionKind::Event, meta(), 0.9, key_at(0, 1), "o");
    rt.run_until_quiescent(10);
    CHECK(rt.datum("o").hyperdata.tier == kernel::StorageTier::Hot);

    rt.set_now(20000);
    rt.enqueue("o", Reason::TimerExpired);
    rt.run_until_quiescent(10);
    CHECK(rt.datum("o").hyperdata.tier == kernel::StorageTier::Cold);
    CHECK(rt.state("o") == LifecycleState::Stored);

    rt.set_now(100000);
    rt.enqueue("o", Reason::TimerExpired);
    rt.run_until_quiescent(10);
    CHECK(rt.state("o") == LifecycleState::Archived);
    CHECK_FALSE(rt.index().contains("o"));
}

TEST_CASE("forked clones are not merged back") {
    Runtime rt;
    rt.ingest(Payload::text("f"), NotionKind::Event, meta(), 0.5, key_at(0, 1), "f");
    rt.run_until_quiescent(10);
    auto [orig, clone] = rt.fork("f");
    CHECK(orig == "f");
    CHECK(clone != "f");
    CHECK(rt.datum(clone).payload == rt.datum("f").payload);
    CHECK(rt.datum(clone).hyperdata.complementary == std::vector<std::string>{"f"});
    auto stats = rt.run_until_quiescent(10);
    CHECK(stats.merges == 0);
    CHECK(rt.state("f") == LifecycleState::Active);
    CHECK(rt.state(clone) == LifecycleState::Active);

    rt.suspend("f");
    CHECK_THROWS_AS(rt.fork("f"), LifecycleError);
}

TEST_CASE("mailboxes are FIFO per receiver") {
    Runtime rt;
    add_isolated(rt, 1);
    add_isolated(rt, 2);
    rt.send("d1001", "d1002", "one");
    rt.send("d1001", "d1002", "two");
    CHECK_FALSE(rt.receive("d1001").has_value());
    CHECK(rt.receive("d1002") == Message{"d1001", "one"});
    CHECK(rt.receive("d1002") == Message{"d1001", "two"});
    CHECK_FALSE(rt.receive("d1002").has_value());
    CHECK_THROWS_AS(rt.send("d1001", "nobody", "x"), NotFoundError);
}

TEST_CASE("suspended data is skipped until resumed") {
    Runtime rt;
    auto id = add_isolated(rt, 1);
    rt.suspend(id);
    auto events = rt.step();
    CHECK(count(events, EventType::Skipped) == 1);
    CHECK_THROWS_AS(rt.suspend(id), LifecycleError);
    rt.resume(id);
    CHECK_THROWS_AS(rt.resume(id), LifecycleError);
    rt.enqueue(id, Reason::NewData);
    CHECK(count(rt.step(), EventType::PeersFound) == 1);
}

TEST_CASE("the activation hook runs once per activation") {
    Runtime rt;
    std::vector<std::string> seen;
    rt.set_activation_hook([&](Runtime& r, const ActivationTask& t, const std::string& id) {
        seen.push_back(id);
        r.emit(EventType::NoConflict, id, std::string(to_string(t.reason)));
    });
    add_isolated(rt, 1);
    add_isolated(rt, 2);
    rt.run_until_quiescent(10);
    CHECK(seen == std::vector<std::string>{"d1001", "d1002"});
    CHECK(count(rt.log(), EventType::NoConflict) == 2);

    rt.set_activation_hook([](Runtime&, const ActivationTask&, const std::string&) { throw RangeError("boom"); });
    rt.enqueue("d1001", Reason::NewData);
    auto events = rt.step();
    CHECK(count(events, EventType::Error) == 1);
    CHECK(rt.state("d1001") == LifecycleState::Active);
}

TEST_CASE("quiescence and the step budget") {
    Runtime rt;
    for (int i = 0; i < 25; ++i) add_isolated(rt, i);
    SUBCASE("isolated data need one activation each") {
        auto stats = rt.run_until_quiescent(1000);
        CHECK(stats.quiescent);
        CHECK(stats.steps == 25);
    }
    SUBCASE("a budget of one leaves work queued") {
        auto stats = rt.run_until_quiescent(1);
        CHECK_FALSE(stats.quiescent);
        CHECK(stats.steps == 1);
        CHECK(rt.pending() == 24);
    }
    SUBCASE("a zero budget is rejected") { CHECK_THROWS_AS(rt.run_until_quiescent(0), PreconditionError); }
}

TEST_CASE("ids and the event log are deterministic") {
    auto run = [] {
        Runtime rt;
        Payload story{{"story", "s"}};
        rt.ingest(story, NotionKind::Event, meta(), 0.6, key_at(0, 10));
        rt.ingest(story, NotionKind::Event, meta(), 0.5, key_at(5, 15));
        rt.ingest(Payload::text("other"), NotionKind::Event, meta(), 0.5, key_at(5, 15));
        rt.run_until_quiescent(100);
        return rt.log_text();
    };
    const auto a = run();
    CHECK(a == run());
    CHECK(a.find("|Merged|ad-00000001|") != std::string::npos);
    CHECK(a.starts_with("1|Ingested|ad-00000001|"));
}

TEST_CASE("random lifecycle operations keep the index consistent") {
    for (unsigned seed : {1u, 2u, 3u}) {
        Runtime rt;
        std::mt19937 rng(seed);
        std::vector<std::string> ids;
        for (int i = 0; i < 30; ++i) {
            const double t = std::uniform_real_distribution<double>(0, 500)(rng);
            ids.push_back(rt.ingest(Payload::text(std::to_string(i % 7)), NotionKind::Event, meta(),
                                    std::uniform_real_distribution<double>(0, 1)(rng), key_at(t, t + 50)));
        }
        std::uniform_int_distribution<int> op(0, 5);
        std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
        for (int k = 0; k < 2000; ++k) {
            const auto& id = ids[pick(rng)];
            try {
                switch (op(rng)) {
                case 0: rt.suspend(id); break;
                case 1: rt.resume(id); break;
                case 2: rt.enqueue(id, Reason::PeerArrived); break;
                case 3: rt.step(); break;
                case 4:
                    rt.submit_evidence(id, {kernel::Polarity::Refuting, 0.3, ""}, 0.0);
                    rt.enqueue(id, Reason::NewData);
                    break;
                case 5: rt.set_now(rt.now() + 3000); break;
                }
            } catch (const LifecycleError&) {
            }
        }
        rt.run_until_quiescent(100000);
        for (const auto& id : rt.ids()) {
            const auto s = rt.state(id);
            const bool indexed = rt.index().contains(id);
            if (s == LifecycleState::Deleted || s == LifecycleState::Archived) CHECK_FALSE(indexed);
            else CHECK(indexed);
            CHECK_NOTHROW(rt.datum(id).hyperdata.check_invariants());
        }
        CHECK(count(rt.log(), EventType::Error) == 0);
    }
}
