#pragma once

#include "twotsd/protocol.hpp"

#include <atomic>
#include <cstdint>
#include <list>
#include <mutex>
#include <string>
#include <thread>

namespace twotsd {

// TCP front end for a Dispatcher. One thread per connection; frames on a
// connection are handled strictly in arrival order and answered in order.
class TeacherServer {
public:
    TeacherServer(Dispatcher& dispatcher, std::string host, std::uint16_t port);
    ~TeacherServer();

    TeacherServer(const TeacherServer&) = delete;
    TeacherServer& operator=(const TeacherServer&) = delete;

    // Binds and starts accepting. Port 0 picks an ephemeral port.
    void start();
    void stop();

    [[nodiscard]] std::uint16_t port() const noexcept { return port_; }
    [[nodiscard]] std::size_t connections_served() const noexcept { return served_.load(); }

private:
    void accept_loop();
    void serve_connection(int fd);

    Dispatcher& dispatcher_;
    std::string host_;
    std::uint16_t port_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::atomic<std::size_t> served_{0};
    std::thread acceptor_;
    std::mutex workers_mu_;
    std::list<std::thread> workers_;
    std::list<int> client_fds_;
};

class TeacherClient {
public:
    TeacherClient(const std::string& host, std::uint16_t port);
    ~TeacherClient();

    TeacherClient(const TeacherClient&) = delete;
    TeacherClient& operator=(const TeacherClient&) = delete;

    void send(const Message& msg);
    Message receive();
    Message call(const Message& msg) {
        send(msg);
        return receive();
    }

private:
    int fd_ = -1;
    FrameReader reader_;
};

} // namespace twotsd
