#include "generators.hpp"

#include "twotsd/error.hpp"
#include "twotsd/teacher.hpp"

#include "twotsd/codec.hpp"

#include <doctest.h>

using namespace testing;

namespace {

Errc decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        decode(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("decoded");
    return Errc::io;
}

std::vector<std::uint8_t> frame_of(const std::string& body, std::uint8_t version = wire_version) {
    const auto n = body.size() + 1;
    std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                  static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n), version};
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

} // namespace

TEST_CASE("ack round trips") {
    const auto m = make_message(std::nullopt, Ack{"ok"}, "srv-1", 5, "req-1");
    CHECK(decode(encode(m)) == m);
}

TEST_CASE("task c2 round trips with exact numbers") {
    const auto m = make_message(dev("a_i"), task_c2(), "req-c2", 1234);
    const auto back = decode(encode(m));
    const auto& t = std::get<Task>(back.payload);
    CHECK(t.size_mb == 50.0);
    CHECK(t.density_cpb == 1000.0);
    CHECK(t.deadline_s == 50.0);
    CHECK(back == m);
}

TEST_CASE("frame layout") {
    const auto bytes = encode(make_message(std::nullopt, Ack{"x"}, "id", 0));
    const std::size_t n = (std::size_t{bytes[0]} << 24) | (std::size_t{bytes[1]} << 16) | (std::size_t{bytes[2]} << 8) | bytes[3];
    CHECK(n + 4 == bytes.size());
    CHECK(bytes[4] == wire_version);
    CHECK(bytes[5] == '{');
}

TEST_CASE("encoding is canonical") {
    MessageGen gen(1);
    for (int i = 0; i < 100; ++i) {
        const auto m = gen.message();
        CHECK(encode(m) == encode(decode(encode(m))));
    }
}

TEST_CASE("decode errors are distinguishable") {
    const auto good = encode(make_message(std::nullopt, Ack{"x"}, "id", 0));
    auto truncated = good;
    truncated.pop_back();
    CHECK(decode_error(truncated) == Errc::malformed);
    CHECK(decode_error({0, 0}) == Errc::malformed);
    auto future = good;
    future[4] = wire_version + 1;
    CHECK(decode_error(future) == Errc::version_mismatch);
    CHECK(decode_error(frame_of(
              R"({"kind":"gossip","sender":null,"msg_id":"a","sent_at":0,"reply_to":"","payload":{}})")) ==
          Errc::unknown_kind);
    CHECK(decode_error(frame_of(R"({"kind":"ack"})")) == Errc::malformed);
    CHECK(decode_error(frame_of(
              R"({"kind":"ack","sender":null,"msg_id":"a","sent_at":0,"reply_to":"","payload":{"note":1}})")) ==
          Errc::malformed);
    CHECK(decode_error(frame_of(
              R"({"kind":"ack","sender":null,"msg_id":"a","sent_at":0.5,"reply_to":"","payload":{"note":"x"}})")) ==
          Errc::malformed);
    CHECK(decode_error(frame_of(std::string(40, '[') + std::string(40, ']'))) == Errc::malformed);
    auto trailing = good;
    trailing.push_back('x');
    CHECK(decode_error(trailing) == Errc::malformed);
}

TEST_CASE("payloads that violate domain invariants are malformed") {
    auto t = nlohmann::json(task_c2());
    t["size_mb"] = 0;
    const nlohmann::json env{{"kind", "task_request"}, {"sender", "a_i"}, {"msg_id", "m"},
                             {"sent_at", 0},          {"reply_to", ""},   {"payload", t}};
    CHECK(decode_error(frame_of(env.dump())) == Errc::malformed);
}

TEST_CASE("encode refuses inconsistent messages") {
    auto m = make_message(std::nullopt, Ack{"x"}, "id", 0);
    m.kind = MessageKind::error;
    CHECK_THROWS_AS(encode(m), Error);
    m = make_message(std::nullopt, Ack{"x"}, "", 0);
    CHECK_THROWS_AS(encode(m), Error);
}

TEST_CASE("randomized round trip over every kind") {
    MessageGen gen(42);
    std::map<MessageKind, int> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto m = gen.message();
        ++seen[m.kind];
        REQUIRE(decode(encode(m)) == m);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("fuzzed frames never crash the decoder") {
    MessageGen gen(7);
    auto& rng = gen.rng();
    std::uniform_int_distribution<int> byte(0, 255);
    for (int i = 0; i < 3000; ++i) {
        auto bytes = encode(gen.message());
        const int flips = 1 + i % 4;
        for (int f = 0; f < flips; ++f) {
            const auto pos = std::uniform_int_distribution<std::size_t>(0, bytes.size() - 1)(rng);
            bytes[pos] = static_cast<std::uint8_t>(byte(rng));
        }
        if (i % 3 == 0) bytes.resize(std::uniform_int_distribution<std::size_t>(0, bytes.size())(rng));
        try {
            (void)decode(bytes);
        } catch (const Error& e) {
            const auto c = e.code();
            CHECK((c == Errc::malformed || c == Errc::unknown_kind || c == Errc::version_mismatch));
        }
    }
}

TEST_CASE("frame reader splits a byte stream at arbitrary boundaries") {
    MessageGen gen(3);
    std::vector<Message> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 50; ++i) {
        sent.push_back(gen.message());
        const auto b = encode(sent.back());
        stream.insert(stream.end(), b.begin(), b.end());
    }
    FrameReader reader;
    std::vector<Message> got;
    std::size_t pos = 0;
    std::uniform_int_distribution<std::size_t> chunk(1, 97);
    while (pos < stream.size()) {
        const auto n = std::min(chunk(gen.rng()), stream.size() - pos);
        reader.feed({stream.data() + pos, n});
        pos += n;
        while (auto m = reader.next()) got.push_back(*m);
    }
    CHECK(got == sent);
    CHECK(reader.buffered() == 0);
}

TEST_CASE("dispatcher replies carry the request id") {
    MemoryModule mem;
    Teacher teacher(mem, std::make_shared<DeterministicEngine>());
    Timestamp clock = 100'000;
    Dispatcher d(teacher, [&] { return clock; });

    const auto r1 = d.handle(make_message(dev("a_k"), profile("a_k", 1e10, 200, 100, clock), "r1", clock));
    CHECK(r1.kind == MessageKind::ack);
    CHECK(r1.reply_to == "r1");
    CHECK_FALSE(r1.sender);

    for (const auto& rec : c2_history(0)) d.handle(make_message(rec.owner, rec, "rec-" + rec.record_id, rec.at));
    load_c2_scenario(mem, clock);
    const auto r2 = d.handle(make_message(dev("a_i"), task_c2(), "ask", clock));
    REQUIRE(r2.kind == MessageKind::candidate_bundle);
    CHECK(std::get<CandidateBundle>(r2.payload).candidates.size() == 2);

    const auto dup = d.handle(make_message(dev("a_i"), c2_history(0)[0], "again", clock));
    REQUIRE(dup.kind == MessageKind::error);
    CHECK(std::get<ErrorPayload>(dup.payload).code == "duplicate_record");

    const auto wrong = d.handle(make_message(dev("a_i"), Ack{"hi"}, "odd", clock));
    CHECK(wrong.kind == MessageKind::error);
    CHECK(r1.msg_id != r2.msg_id);
}

TEST_CASE("in-process channel accounting") {
    MemoryModule mem;
    Teacher teacher(mem, std::make_shared<DeterministicEngine>());
    Dispatcher d(teacher, [] { return Timestamp{0}; });
    InProcessChannel ch(d, 0.05);
    ch.request(make_message(dev("a_i"), task_c2(), "q", 0));
    ch.request(make_message(dev("a_i"), task_c2(), "q2", 0));
    CHECK(ch.messages() == 4);
    CHECK(ch.elapsed_s() == doctest::Approx(0.2));
    CHECK(ch.by_kind().at(MessageKind::task_request) == 2);
    CHECK(ch.by_kind().at(MessageKind::candidate_bundle) == 2);
}
