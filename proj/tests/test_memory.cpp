#include "support.hpp"

#include "twotsd/codec.hpp"
#include "twotsd/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <thread>

using namespace testing;

namespace {

std::vector<PerformanceRecord> brute_force(const std::vector<PerformanceRecord>& log, const HistoryQuery& q) {
    std::vector<std::pair<std::size_t, PerformanceRecord>> hits;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& r = log[i];
        if (r.collaborator != q.collaborator || r.task_type != q.task_type) continue;
        if (const auto* iv = std::get_if<TimeInterval>(&q.window); iv && (r.at < iv->from || r.at > iv->to)) continue;
        hits.emplace_back(i, r);
    }
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.second.at < b.second.at; });
    if (const auto* lk = std::get_if<LastK>(&q.window); lk && hits.size() > lk->k) {
        hits.erase(hits.begin(), hits.end() - static_cast<std::ptrdiff_t>(lk->k));
    }
    std::vector<PerformanceRecord> out;
    for (auto& h : hits) out.push_back(h.second);
    return out;
}

std::size_t shape_formula(const std::map<std::pair<TaskType, DeviceId>, TrustSemantics>& shadow) {
    std::set<TaskType> types;
    for (const auto& [k, _] : shadow) types.insert(k.first);
    return 1 + types.size() + 2 * shadow.size();
}

} // namespace

TEST_CASE("resource store overwrite and stale semantics") {
    ResourceStore store;
    store.upsert(profile("a_k", 2.91e9, 128.0, 100.0, 10));
    CHECK(store.size() == 1);
    store.upsert(profile("a_k", 3.0e9, 128.0, 100.0, 20));
    CHECK(store.size() == 1);
    CHECK(store.find(dev("a_k"))->cpu_cps == 3.0e9);
    try {
        store.upsert(profile("a_k", 1.0e9, 1.0, 1.0, 15));
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::stale_update);
    }
    CHECK(store.find(dev("a_k"))->cpu_cps == 3.0e9);
    CHECK_NOTHROW(store.upsert(profile("a_k", 4.0e9, 128.0, 100.0, 20)));
}

TEST_CASE("resource lookup keeps input order and reports unknowns") {
    ResourceStore store;
    store.upsert(profile("a_k", 1e10, 200, 100, 1));
    store.upsert(profile("a_j", 1e10, 200, 100, 1));
    auto both = store.get({dev("a_k"), dev("a_j")});
    REQUIRE(both.profiles.size() == 2);
    CHECK(both.profiles[0].device == dev("a_k"));
    CHECK(both.profiles[1].device == dev("a_j"));
    CHECK(store.get({}).profiles.empty());
    auto none = store.get({dev("unknown_x")});
    CHECK(none.profiles.empty());
    REQUIRE(none.missing.size() == 1);
    CHECK(none.missing[0] == dev("unknown_x"));
}

TEST_CASE("record ids are dense and duplicates rejected") {
    RecordStore store;
    auto p = record("a_i", "a_j", task_types::face_recognition, 100);
    p.record_id = "p_aj";
    CHECK(store.append(p) == 1);
    auto q = store.query({dev("a_j"), task_types::face_recognition, LastK{10}});
    REQUIRE(q.size() == 1);
    CHECK(q[0] == p);
    CHECK(store.append(record("a_i", "a_j", task_types::face_recognition, 50)) == 2);
    try {
        store.append(p);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_record);
    }
    CHECK(store.size() == 2);
}

TEST_CASE("last-K returns the newest records by timestamp") {
    RecordStore store;
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<Timestamp> t(0, 1'000'000);
    std::vector<PerformanceRecord> log;
    for (int i = 0; i < 1000; ++i) {
        log.push_back(record("a_i", "a_j", task_types::face_recognition, t(rng)));
        store.append(log.back());
    }
    const HistoryQuery q{dev("a_j"), task_types::face_recognition, LastK{20}};
    const auto got = store.query(q);
    REQUIRE(got.size() == 20);
    CHECK(got == brute_force(log, q));
    CHECK(std::is_sorted(got.begin(), got.end(), [](const auto& a, const auto& b) { return a.at < b.at; }));
}

TEST_CASE("query filters") {
    RecordStore store;
    for (int i = 0; i < 7; ++i) store.append(record("a_i", "a_j", task_types::face_recognition, i * 10));
    CHECK(store.query({dev("a_j"), task_types::face_recognition, LastK{20}}).size() == 7);
    CHECK(store.query({dev("a_j"), task_types::video_transcoding, LastK{20}}).empty());
    const auto iv = store.query({dev("a_j"), task_types::face_recognition, TimeInterval{20, 40}});
    REQUIRE(iv.size() == 3);
    CHECK(iv.front().at == 20);
    CHECK(iv.back().at == 40);
}

TEST_CASE("query_records equals a brute-force filter on random logs") {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> devices{"a", "b", "c", "d", "e"};
    const std::vector<TaskType> types{task_types::face_recognition, task_types::video_transcoding,
                                      task_types::text_word_count};
    std::uniform_int_distribution<std::size_t> pick(0, 4);
    std::uniform_int_distribution<std::size_t> pick_type(0, 2);
    std::uniform_int_distribution<Timestamp> t(0, 500);
    for (int round = 0; round < 20; ++round) {
        RecordStore store;
        std::vector<PerformanceRecord> log;
        for (int i = 0; i < 400; ++i) {
            const auto o = pick(rng);
            const auto c = (o + 1 + pick(rng) % 4) % 5;
            log.push_back(record(devices[o], devices[c], types[pick_type(rng)], t(rng)));
            store.append(log.back());
        }
        for (int k = 0; k < 50; ++k) {
            HistoryQuery q{dev(devices[pick(rng)]), types[pick_type(rng)], LastK{1 + pick(rng) * 7}};
            if (k % 2 == 0) {
                auto a = t(rng);
                auto b = t(rng);
                q.window = TimeInterval{std::min(a, b), std::max(a, b)};
            }
            REQUIRE(store.query(q) == brute_force(log, q));
        }
    }
}

TEST_CASE("pruning drops old records but keeps their tokens") {
    RecordStore store;
    auto old = record("a_i", "a_j", task_types::face_recognition, 5);
    old.record_id = "old";
    store.append(old);
    store.append(record("a_i", "a_j", task_types::face_recognition, 50));
    CHECK(store.prune_before(10) == 1);
    CHECK(store.size() == 1);
    CHECK_THROWS_AS(store.append(old), Error);
    CHECK(store.query({dev("a_j"), task_types::face_recognition, LastK{5}}).size() == 1);
}

TEST_CASE("tree insertion rules") {
    SemanticsTree tree;
    CHECK(tree.node_count() == 1);
    auto t = semantics("a_j", task_types::face_recognition, TrustState::trusted, 100);
    tree.upsert(t);
    CHECK(tree.node_count() == 4);
    auto t2 = t;
    t2.comm.throughput = Trend::decreasing;
    tree.upsert(t2);
    CHECK(tree.node_count() == 4);
    CHECK(tree.find(task_types::face_recognition, dev("a_j"))->comm.throughput == Trend::decreasing);
    tree.upsert(semantics("a_k", task_types::face_recognition, TrustState::trusted, 100));
    CHECK(tree.node_count() == 6);
    const auto fr = tree.by_task_type(task_types::face_recognition);
    REQUIRE(fr.size() == 2);
    CHECK(fr[0].device == dev("a_j"));
    CHECK(fr[1].device == dev("a_k"));
    CHECK(tree.by_task_type(task_types::text_word_count).empty());
    tree.check_invariants();
}

TEST_CASE("triplet view") {
    SemanticsTree tree;
    tree.upsert(semantics("a_j", task_types::face_recognition, TrustState::trusted, 100));
    const auto root = tree.triplet(SemanticsTree::root_id);
    CHECK_FALSE(root.parent);
    REQUIRE(root.children.size() == 1);
    const auto type = tree.triplet(root.children[0]);
    CHECK(type.parent == SemanticsTree::root_id);
    const auto device = tree.triplet(type.children.at(0));
    const auto leaf = tree.triplet(device.children.at(0));
    CHECK(leaf.children.empty());
    CHECK(leaf.parent == device.self);
}

TEST_CASE("random upserts keep shape, formula, single leaves, and idempotence") {
    std::mt19937_64 rng(99);
    const std::vector<TaskType> types{task_types::face_recognition, task_types::video_transcoding,
                                      task_types::text_word_count, TaskType("speech_to_text")};
    std::uniform_int_distribution<std::size_t> pick_type(0, types.size() - 1);
    std::uniform_int_distribution<int> pick_dev(0, 59);
    std::uniform_int_distribution<int> pick_state(0, 2);
    SemanticsTree tree;
    std::map<std::pair<TaskType, DeviceId>, TrustSemantics> shadow;
    for (int i = 0; i < 2000; ++i) {
        auto ts = semantics("d" + std::to_string(pick_dev(rng)), types[pick_type(rng)],
                            static_cast<TrustState>(pick_state(rng)), 1000 + i);
        if (ts.state != TrustState::insufficient_data) ts.comm.loss_rate = static_cast<Trend>(pick_state(rng));
        tree.upsert(ts);
        shadow[{ts.task_type, ts.device}] = ts;
        const auto before = tree.nodes();
        tree.upsert(ts);
        REQUIRE(tree.nodes() == before);
        REQUIRE(tree.node_count() == shape_formula(shadow));
    }
    tree.check_invariants();
    for (const auto& tt : types) {
        for (const auto& ts : tree.by_task_type(tt)) CHECK(ts == shadow.at({tt, ts.device}));
    }
}

TEST_CASE("concurrent upserts to different keys") {
    SemanticsTree tree;
    std::vector<std::thread> workers;
    for (int w = 0; w < 8; ++w) {
        workers.emplace_back([&tree, w] {
            for (int i = 0; i < 200; ++i) {
                tree.upsert(semantics("w" + std::to_string(w) + "-" + std::to_string(i % 25),
                                      i % 2 ? task_types::face_recognition : task_types::text_word_count,
                                      TrustState::trusted, i + 10));
            }
        });
    }
    for (auto& t : workers) t.join();
    tree.check_invariants();
    // each worker writes 25 devices under both types
    CHECK(tree.node_count() == 1 + 2 + 2 * (8 * 25 * 2));
}

TEST_CASE("snapshot round trip is exact") {
    MemoryModule mem;
    load_c2_scenario(mem, 1000);
    for (auto& r : c2_history(0)) mem.records.append(r);
    mem.tree.upsert(semantics("a_k", task_types::video_transcoding, TrustState::trusted, 9000));
    mem.tree.upsert(semantics("a_j", task_types::video_transcoding, TrustState::untrusted, 9000));
    mem.records.prune_before(1);

    const auto text = mem.snapshot_text();
    MemoryModule back;
    MemoryModule::load_snapshot_text(back, text);
    CHECK(back.snapshot_text() == text);
    CHECK(back.resources.all() == mem.resources.all());
    CHECK(back.records.log() == mem.records.log());
    CHECK(back.records.next_id() == mem.records.next_id());
    CHECK(back.tree.nodes() == mem.tree.nodes());
    auto dupe = c2_history(0).front();
    CHECK_THROWS_AS(back.records.append(dupe), Error);

    const auto path = std::filesystem::temp_directory_path() / "twotsd_snapshot_test.json";
    mem.save(path);
    MemoryModule from_file;
    MemoryModule::load(from_file, path);
    CHECK(from_file.snapshot_text() == text);
    std::filesystem::remove(path);
}

TEST_CASE("snapshot version and corruption errors") {
    MemoryModule mem;
    auto doc = nlohmann::json::parse(mem.snapshot_text());
    doc["version"] = 99;
    MemoryModule into;
    try {
        MemoryModule::load_snapshot_text(into, doc.dump());
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::version_mismatch);
    }
    CHECK_THROWS_AS(MemoryModule::load_snapshot_text(into, "{not json"), Error);
    CHECK_THROWS_AS(MemoryModule::load_snapshot_text(into, R"({"format":"other","version":1})"), Error);
}

TEST_CASE("a failed load leaves the module untouched") {
    MemoryModule mem;
    mem.resources.upsert(profile("a_k", 1e10, 200, 100, 5));
    auto doc = nlohmann::json::parse(mem.snapshot_text());
    doc["tree"]["nodes"][0]["kind"] = "device";
    MemoryModule into;
    into.resources.upsert(profile("keep", 1e9, 1, 1, 1));
    CHECK_THROWS_AS(MemoryModule::load_snapshot_text(into, doc.dump()), Error);
    CHECK(into.resources.size() == 1);
    CHECK(into.resources.find(dev("keep")));
}
