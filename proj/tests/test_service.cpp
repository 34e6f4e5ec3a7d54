#include "support.hpp"

#include "twotsd/error.hpp"
#include "twotsd/service.hpp"
#include "twotsd/teacher.hpp"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <future>

using namespace testing;

namespace {

struct Rig {
    MemoryModule mem;
    Teacher teacher{mem, std::make_shared<DeterministicEngine>()};
    Dispatcher dispatcher{teacher, [] { return Timestamp{100'000}; }};
    TeacherServer server{dispatcher, "127.0.0.1", 0};
    Rig() { server.start(); }
};

} // namespace

TEST_CASE("server answers over tcp") {
    Rig rig;
    REQUIRE(rig.server.port() != 0);
    TeacherClient client("127.0.0.1", rig.server.port());
    const auto reply = client.call(make_message(dev("a_k"), profile("a_k", 1e10, 200, 100, 1), "p1", 1));
    CHECK(reply.kind == MessageKind::ack);
    CHECK(reply.reply_to == "p1");
}

TEST_CASE("c2 over the wire") {
    Rig rig;
    TeacherClient client("127.0.0.1", rig.server.port());
    for (const auto& rec : c2_history(0)) {
        CHECK(client.call(make_message(rec.owner, rec, "r-" + rec.record_id, rec.at)).kind == MessageKind::ack);
    }
    for (const auto& p : {profile("a_k", 1e10, 200, 100, 1), profile("a_j", 1.2e10, 500, 120, 1),
                          profile("a_l", 2.91e9, 200, 100, 1)}) {
        client.call(make_message(p.device, p, "p-" + p.device.str(), 1));
    }
    const auto reply = client.call(make_message(dev("a_i"), task_c2(), "ask", 2));
    REQUIRE(reply.kind == MessageKind::candidate_bundle);
    const auto& b = std::get<CandidateBundle>(reply.payload);
    REQUIRE(b.candidates.size() == 2);
    CHECK(b.candidates[0].semantics.device == dev("a_j"));
    CHECK(b.candidates[1].semantics.device == dev("a_k"));
}

TEST_CASE("pipelined requests are answered in order") {
    Rig rig;
    TeacherClient client("127.0.0.1", rig.server.port());
    for (int i = 0; i < 20; ++i) {
        client.send(make_message(dev("a_i"), task_c2(), "q" + std::to_string(i), 0));
    }
    for (int i = 0; i < 20; ++i) CHECK(client.receive().reply_to == "q" + std::to_string(i));
}

TEST_CASE("concurrent clients") {
    Rig rig;
    std::vector<std::future<int>> futs;
    for (int c = 0; c < 8; ++c) {
        futs.push_back(std::async(std::launch::async, [&, c] {
            TeacherClient client("127.0.0.1", rig.server.port());
            int acks = 0;
            for (int i = 0; i < 25; ++i) {
                PerformanceRecord r = record("o" + std::to_string(c), "c" + std::to_string(i % 5), TaskType("vt"), i * 1000,
                                             Verdict::satisfied, 100, 0.01, 50, 0.99);
                r.record_id = std::to_string(c) + "-" + std::to_string(i);
                acks += client.call(make_message(r.owner, r, r.record_id, r.at)).kind == MessageKind::ack;
            }
            return acks;
        }));
    }
    int total = 0;
    for (auto& f : futs) total += f.get();
    CHECK(total == 200);
    CHECK(rig.mem.records.size() == 200);
}

TEST_CASE("a corrupt frame yields an error reply and a closed connection") {
    Rig rig;
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(rig.server.port());
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    const std::uint8_t junk[] = {0, 0, 0, 3, wire_version, '{', '!'};
    REQUIRE(::send(fd, junk, sizeof junk, 0) == static_cast<ssize_t>(sizeof junk));

    FrameReader reader;
    std::uint8_t buf[4096];
    std::optional<Message> reply;
    bool closed = false;
    while (!closed) {
        const auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) {
            closed = true;
            break;
        }
        reader.feed({buf, static_cast<std::size_t>(n)});
        if (auto m = reader.next()) reply = m;
    }
    ::close(fd);
    REQUIRE(reply);
    CHECK(reply->kind == MessageKind::error);
    CHECK(std::get<ErrorPayload>(reply->payload).code == "malformed");
    CHECK(closed);
}

TEST_CASE("client reports a refused connection") {
    std::uint16_t port = 0;
    {
        Rig rig;
        port = rig.server.port();
    }
    CHECK_THROWS_AS(TeacherClient("127.0.0.1", port), Error);
}

TEST_CASE("stop is idempotent and unblocks connected clients") {
    Rig rig;
    TeacherClient client("127.0.0.1", rig.server.port());
    client.call(make_message(dev("a_i"), task_c2(), "q", 0));
    rig.server.stop();
    rig.server.stop();
    CHECK_THROWS_AS(client.receive(), Error);
}
