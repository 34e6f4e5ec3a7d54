#include "support.hpp"

#include "twotsd/codec.hpp"
#include "twotsd/error.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace testing;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::io;
}

} // namespace

TEST_CASE("task c1 and c2 validate") {
    auto c1 = validate_task(task("c1", "a_i", task_types::face_recognition, 100.0, 2339.0, 60.0));
    CHECK(c1.size_mb == 100.0);
    CHECK(c1.density_cpb == 2339.0);
    auto c2 = validate_task(task_c2());
    CHECK(c2.deadline_s == 50.0);
}

TEST_CASE("zero size is rejected with the field named") {
    auto t = task_c2();
    t.size_mb = 0.0;
    try {
        validate_task(t);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_field);
        CHECK(std::string(e.what()).find("size_mb must be > 0") != std::string::npos);
    }
}

TEST_CASE("nonpositive or nonfinite task numbers are rejected") {
    for (double bad : {-1.0, 0.0, std::numeric_limits<double>::infinity(), std::nan("")}) {
        auto t = task_c2();
        t.density_cpb = bad;
        CHECK_THROWS_AS(validate_task(t), Error);
        t = task_c2();
        t.deadline_s = bad;
        CHECK_THROWS_AS(validate_task(t), Error);
    }
}

TEST_CASE("empty identifiers are rejected") {
    CHECK_THROWS_AS(DeviceId(""), Error);
    CHECK_THROWS_AS(TaskType(""), Error);
}

TEST_CASE("record p_aj validates") {
    auto p = record("a_i", "a_j", task_types::face_recognition, 0, Verdict::satisfied, 100.0,
                    parse_fraction("1%"), 2.0, parse_fraction("98%"));
    auto ok = validate_record(p);
    CHECK(ok.loss_rate == doctest::Approx(0.01));
    CHECK(ok.accuracy == doctest::Approx(0.98));
}

TEST_CASE("self collaboration and out of range fields") {
    CHECK(code_of([] { validate_record(record("a_i", "a_i", task_types::face_recognition, 0)); }) ==
          Errc::self_collaboration);
    auto r = record("a_i", "a_j", task_types::face_recognition, 0);
    r.loss_rate = 1.5;
    CHECK(code_of([&] { validate_record(r); }) == Errc::out_of_range);
    r = record("a_i", "a_j", task_types::face_recognition, 0);
    r.accuracy = -0.1;
    CHECK(code_of([&] { validate_record(r); }) == Errc::out_of_range);
    r = record("a_i", "a_j", task_types::face_recognition, 0);
    r.throughput_mbps = -1;
    CHECK_THROWS_AS(validate_record(r), Error);
}

TEST_CASE("percent parsing") {
    CHECK(parse_fraction("1%") == doctest::Approx(0.01));
    CHECK(parse_fraction("98 %") == doctest::Approx(0.98));
    CHECK(parse_fraction("0.25") == doctest::Approx(0.25));
    CHECK_THROWS_AS(parse_fraction("abc"), Error);
    CHECK_THROWS_AS(parse_fraction(""), Error);
}

TEST_CASE("enum spellings round trip") {
    for (auto t : {Trend::increasing, Trend::decreasing, Trend::normal}) CHECK(parse_trend(to_string(t)) == t);
    for (auto s : {TrustState::trusted, TrustState::untrusted, TrustState::insufficient_data}) {
        CHECK(parse_trust_state(to_string(s)) == s);
    }
    for (auto m : all_metrics) CHECK(parse_metric(to_string(m)) == m);
    CHECK_THROWS_AS(parse_trend("rising"), Error);
}

TEST_CASE("semantics invariants") {
    auto ts = semantics("a_j", task_types::face_recognition, TrustState::insufficient_data);
    CHECK_NOTHROW(validate_semantics(ts));
    ts.comm.loss_rate = Trend::increasing;
    CHECK_THROWS_AS(validate_semantics(ts), Error);

    auto w = semantics("a_j", task_types::face_recognition, TrustState::trusted, 10000);
    w.window = TimeWindow{10, 5};
    CHECK_THROWS_AS(validate_semantics(w), Error);
}

TEST_CASE("device id order is lexicographic and total") {
    CHECK(dev("a_j") < dev("a_k"));
    CHECK(dev("dev-009") < dev("dev-010"));
    CHECK_FALSE(dev("x") < dev("x"));
}

TEST_CASE("trend accessors cover all metrics") {
    TrustSemantics ts;
    for (auto m : all_metrics) {
        ts.set_trend(m, Trend::increasing);
        CHECK(ts.trend(m) == Trend::increasing);
    }
    CHECK(ts.comm.throughput == Trend::increasing);
    CHECK(ts.comp.proc_speed == Trend::increasing);
}

TEST_CASE("codec accepts percent strings and keeps extensions") {
    nlohmann::json j = record("a_i", "a_j", task_types::face_recognition, 5);
    j["loss_rate"] = "1%";
    j["extra"] = {{"gpu", "adreno"}};
    auto back = j.get<PerformanceRecord>();
    CHECK(back.loss_rate == doctest::Approx(0.01));
    CHECK(back.extra.at("gpu") == "adreno");
    nlohmann::json again = back;
    CHECK(again.get<PerformanceRecord>() == back);
}

TEST_CASE("codec rejects unknown and missing fields") {
    nlohmann::json j = task_c2();
    auto extra = j;
    extra["surprise"] = 1;
    CHECK_THROWS_AS(extra.get<Task>(), Error);
    auto missing = j;
    missing.erase("deadline_s");
    CHECK_THROWS_AS(missing.get<Task>(), Error);
}
