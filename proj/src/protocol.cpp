#include "twotsd/protocol.hpp"

#include "twotsd/codec.hpp"
#include "twotsd/error.hpp"
#include "twotsd/teacher.hpp"

namespace twotsd {

std::string_view to_string(MessageKind k) noexcept {
    switch (k) {
    case MessageKind::resource_report: return "resource_report";
    case MessageKind::performance_record: return "performance_record";
    case MessageKind::task_request: return "task_request";
    case MessageKind::candidate_bundle: return "candidate_bundle";
    case MessageKind::ack: return "ack";
    case MessageKind::error: return "error";
    }
    return "error";
}

namespace {

constexpr MessageKind kinds[] = {MessageKind::resource_report, MessageKind::performance_record,
                                 MessageKind::task_request,    MessageKind::candidate_bundle,
                                 MessageKind::ack,             MessageKind::error};

MessageKind kind_of(const Payload& p) { return kinds[p.index()]; }

// Documents nested deeper than any valid message are rejected before parsing.
constexpr int max_depth = 16;

bool nesting_within_limit(std::string_view body) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (char c : body) {
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            if (++depth > max_depth) return false;
        } else if (c == '}' || c == ']') {
            --depth;
        }
    }
    return true;
}

json payload_json(const Payload& p) {
    return std::visit(
        [](const auto& v) -> json {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Ack>) {
                return json{{"note", v.note}};
            } else if constexpr (std::is_same_v<V, ErrorPayload>) {
                return json{{"code", v.code}, {"message", v.message}};
            } else {
                return json(v);
            }
        },
        p);
}

std::string require_string(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_string()) {
        throw Error(Errc::malformed, std::string("message field '") + name + "' must be a string");
    }
    return it->get<std::string>();
}

Payload payload_from(MessageKind kind, const json& j) {
    if (!j.is_object()) throw Error(Errc::malformed, "payload must be an object");
    switch (kind) {
    case MessageKind::resource_report: return j.get<ResourceProfile>();
    case MessageKind::performance_record: return j.get<PerformanceRecord>();
    case MessageKind::task_request: return j.get<Task>();
    case MessageKind::candidate_bundle: return j.get<CandidateBundle>();
    case MessageKind::ack:
        if (j.size() != 1) throw Error(Errc::malformed, "ack payload has unexpected fields");
        return Ack{require_string(j, "note")};
    case MessageKind::error:
        if (j.size() != 2) throw Error(Errc::malformed, "error payload has unexpected fields");
        return ErrorPayload{require_string(j, "code"), require_string(j, "message")};
    }
    throw Error(Errc::unknown_kind, "unhandled kind");
}

} // namespace

Message make_message(std::optional<DeviceId> sender, Payload payload, std::string msg_id, Timestamp sent_at,
                     std::string reply_to) {
    Message m;
    m.kind = kind_of(payload);
    m.sender = std::move(sender);
    m.payload = std::move(payload);
    m.msg_id = std::move(msg_id);
    m.sent_at = sent_at;
    m.reply_to = std::move(reply_to);
    return m;
}

std::vector<std::uint8_t> encode(const Message& msg) {
    if (msg.kind != kind_of(msg.payload)) {
        throw Error(Errc::invalid_field, "message kind does not match its payload");
    }
    if (msg.msg_id.empty()) throw Error(Errc::invalid_field, "msg_id must be nonempty");

    const json doc{{"kind", std::string(to_string(msg.kind))},
                   {"sender", msg.sender ? json(*msg.sender) : json(nullptr)},
                   {"msg_id", msg.msg_id},
                   {"sent_at", msg.sent_at},
                   {"reply_to", msg.reply_to},
                   {"payload", payload_json(msg.payload)}};
    const auto body = doc.dump();
    const std::size_t n = body.size() + 1;
    if (n > max_frame_bytes) throw Error(Errc::invalid_field, "message exceeds the frame size limit");

    std::vector<std::uint8_t> out;
    out.reserve(frame_header_bytes + body.size());
    out.push_back(static_cast<std::uint8_t>(n >> 24));
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
    out.push_back(wire_version);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

Message decode(std::span<const std::uint8_t> frame) {
    if (frame.size() < frame_header_bytes) throw Error(Errc::malformed, "truncated frame header");
    const std::size_t n = (std::size_t{frame[0]} << 24) | (std::size_t{frame[1]} << 16) |
                          (std::size_t{frame[2]} << 8) | std::size_t{frame[3]};
    if (n < 1 || n > max_frame_bytes) throw Error(Errc::malformed, "frame length out of range");
    if (frame.size() != 4 + n) {
        throw Error(Errc::malformed, frame.size() < 4 + n ? "truncated frame" : "trailing bytes after frame");
    }
    if (frame[4] != wire_version) {
        throw Error(Errc::version_mismatch,
                    "wire version " + std::to_string(frame[4]) + ", expected " + std::to_string(wire_version));
    }
    const std::string_view body(reinterpret_cast<const char*>(frame.data() + 5), n - 1);
    if (!nesting_within_limit(body)) throw Error(Errc::malformed, "document nested too deeply");

    try {
        const auto doc = json::parse(body);
        if (!doc.is_object() || doc.size() != 6) throw Error(Errc::malformed, "message envelope shape");

        const auto kind_name = require_string(doc, "kind");
        std::optional<MessageKind> kind;
        for (auto k : kinds) {
            if (to_string(k) == kind_name) kind = k;
        }
        if (!kind) throw Error(Errc::unknown_kind, "unknown message kind '" + kind_name + "'");

        Message m;
        m.kind = *kind;
        const auto& sender = doc.at("sender");
        if (!sender.is_null()) m.sender = sender.get<DeviceId>();
        m.msg_id = require_string(doc, "msg_id");
        if (m.msg_id.empty()) throw Error(Errc::malformed, "msg_id must be nonempty");
        const auto& sent = doc.at("sent_at");
        if (!sent.is_number_integer()) throw Error(Errc::malformed, "sent_at must be an integer");
        m.sent_at = sent.get<Timestamp>();
        m.reply_to = require_string(doc, "reply_to");
        m.payload = payload_from(m.kind, doc.at("payload"));
        return m;
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::unknown_kind || e.code() == Errc::malformed) throw;
        throw Error(Errc::malformed, e.what());
    }
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
    if (buffer_.size() < 4) return std::nullopt;
    const std::size_t n = (std::size_t{buffer_[0]} << 24) | (std::size_t{buffer_[1]} << 16) |
                          (std::size_t{buffer_[2]} << 8) | std::size_t{buffer_[3]};
    if (n < 1 || n > max_frame_bytes) throw Error(Errc::malformed, "frame length out of range");
    if (buffer_.size() < 4 + n) return std::nullopt;
    std::vector<std::uint8_t> frame(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(4 + n));
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(4 + n));
    return decode(frame);
}

Dispatcher::Dispatcher(Teacher& teacher, Clock clock) : teacher_(teacher), clock_(std::move(clock)) {}

Message Dispatcher::handle(const Message& request) {
    const auto now = clock_();
    const auto reply_id = "srv-" + std::to_string(next_reply_++);
    auto reply = [&](Payload p) { return make_message(std::nullopt, std::move(p), reply_id, now, request.msg_id); };

    try {
        switch (request.kind) {
        case MessageKind::resource_report:
            teacher_.handle_resource_report(std::get<ResourceProfile>(request.payload));
            return reply(Ack{"resource profile stored"});
        case MessageKind::performance_record: {
            const auto ts = teacher_.handle_performance_record(std::get<PerformanceRecord>(request.payload), now);
            return reply(Ack{"semantics " + std::string(to_string(ts.state))});
        }
        case MessageKind::task_request:
            return reply(teacher_.handle_task_request(std::get<Task>(request.payload), now));
        default:
            return reply(ErrorPayload{std::string(to_string(Errc::invalid_field)),
                                      "server does not accept " + std::string(to_string(request.kind))});
        }
    } catch (const Error& e) {
        return reply(ErrorPayload{std::string(to_string(e.code())), e.what()});
    }
}

InProcessChannel::InProcessChannel(Dispatcher& dispatcher, double latency_s)
    : dispatcher_(dispatcher), latency_s_(latency_s) {}

void InProcessChannel::count(const Message& m) {
    ++messages_;
    ++by_kind_[m.kind];
    elapsed_s_ += latency_s_;
}

Message InProcessChannel::request(const Message& msg) {
    count(msg);
    auto response = dispatcher_.handle(msg);
    count(response);
    return response;
}

} // namespace twotsd
