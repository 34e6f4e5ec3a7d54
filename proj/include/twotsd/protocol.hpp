#pragma once

#include "twotsd/bundle.hpp"
#include "twotsd/domain.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace twotsd {

class Teacher;

enum class MessageKind { resource_report, performance_record, task_request, candidate_bundle, ack, error };

std::string_view to_string(MessageKind k) noexcept;

struct Ack {
    std::string note;
    bool operator==(const Ack&) const = default;
};

struct ErrorPayload {
    std::string code; // an Errc spelling
    std::string message;
    bool operator==(const ErrorPayload&) const = default;
};

// Alternative index matches MessageKind.
using Payload = std::variant<ResourceProfile, PerformanceRecord, Task, CandidateBundle, Ack, ErrorPayload>;

struct Message {
    MessageKind kind = MessageKind::ack;
    std::optional<DeviceId> sender; // empty = server
    Payload payload = Ack{};
    std::string msg_id;
    Timestamp sent_at = 0;
    std::string reply_to; // msg_id of the request this answers; empty for requests

    bool operator==(const Message&) const = default;
};

Message make_message(std::optional<DeviceId> sender, Payload payload, std::string msg_id, Timestamp sent_at,
                     std::string reply_to = {});

// Wire frame (all integers big-endian):
//   u32 length   number of bytes that follow (version byte + body)
//   u8  version  wire_version
//   body         canonical JSON document, UTF-8, no trailing newline
inline constexpr std::uint8_t wire_version = 1;
inline constexpr std::size_t frame_header_bytes = 5;
inline constexpr std::size_t max_frame_bytes = 16u << 20;

std::vector<std::uint8_t> encode(const Message& msg);

// Decodes exactly one complete frame. Throws Error with code malformed,
// unknown_kind, or version_mismatch; never returns a partial message.
Message decode(std::span<const std::uint8_t> frame);

// Incremental splitter for a byte stream carrying back-to-back frames.
class FrameReader {
public:
    void feed(std::span<const std::uint8_t> bytes);
    // Next complete message, or empty if more bytes are needed.
    std::optional<Message> next();
    [[nodiscard]] std::size_t buffered() const noexcept { return buffer_.size(); }

private:
    std::vector<std::uint8_t> buffer_;
};

// Routes request messages to a teacher and builds the reply message.
class Dispatcher {
public:
    using Clock = std::function<Timestamp()>;

    Dispatcher(Teacher& teacher, Clock clock);

    Message handle(const Message& request);

private:
    Teacher& teacher_;
    Clock clock_;
    std::atomic<std::uint64_t> next_reply_{1};
};

// Simulation transport: no bytes, but the same message accounting as the
// socket service plus a fixed per-message latency.
class InProcessChannel {
public:
    InProcessChannel(Dispatcher& dispatcher, double latency_s);

    Message request(const Message& msg);

    [[nodiscard]] std::size_t messages() const noexcept { return messages_; }
    [[nodiscard]] const std::map<MessageKind, std::size_t>& by_kind() const noexcept { return by_kind_; }
    [[nodiscard]] double elapsed_s() const noexcept { return elapsed_s_; }

private:
    void count(const Message& m);

    Dispatcher& dispatcher_;
    double latency_s_;
    std::size_t messages_ = 0;
    std::map<MessageKind, std::size_t> by_kind_;
    double elapsed_s_ = 0.0;
};

} // namespace twotsd
