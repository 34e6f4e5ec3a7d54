#include "twotsd/service.hpp"

#include "twotsd/error.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace twotsd {

namespace {

bool write_all(int fd, std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

std::string errno_text() { return std::strerror(errno); }

} // namespace

TeacherServer::TeacherServer(Dispatcher& dispatcher, std::string host, std::uint16_t port)
    : dispatcher_(dispatcher), host_(std::move(host)), port_(port) {}

TeacherServer::~TeacherServer() { stop(); }

void TeacherServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(Errc::transport, "socket: " + errno_text());
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(Errc::config, "host must be an IPv4 address: " + host_);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(listen_fd_, 64) < 0) {
        const auto why = errno_text();
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(Errc::transport, "bind/listen " + host_ + ":" + std::to_string(port_) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void TeacherServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();

    std::list<std::thread> workers;
    {
        std::lock_guard lock(workers_mu_);
        for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
}

void TeacherServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            return; // listening socket closed
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(workers_mu_);
        if (!running_) {
            ::close(fd);
            return;
        }
        client_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void TeacherServer::serve_connection(int fd) {
    FrameReader reader;
    std::uint8_t buf[4096];
    bool open = true;
    while (open) {
        const auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        reader.feed({buf, static_cast<std::size_t>(n)});
        try {
            while (auto msg = reader.next()) {
                if (!write_all(fd, encode(dispatcher_.handle(*msg)))) {
                    open = false;
                    break;
                }
            }
        } catch (const Error& e) {
            // The stream cannot be resynchronised after a bad frame: report and close.
            auto err = make_message(std::nullopt, ErrorPayload{std::string(to_string(e.code())), e.what()},
                                    "srv-stream-error", 0);
            write_all(fd, encode(err));
            open = false;
        }
    }
    {
        std::lock_guard lock(workers_mu_);
        client_fds_.remove(fd);
    }
    ::close(fd);
    ++served_;
}

TeacherClient::TeacherClient(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
        throw Error(Errc::transport, "cannot resolve " + host);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) < 0) {
        const auto why = errno_text();
        ::freeaddrinfo(res);
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
        throw Error(Errc::transport, "connect " + host + ":" + std::to_string(port) + ": " + why);
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TeacherClient::~TeacherClient() {
    if (fd_ >= 0) ::close(fd_);
}

void TeacherClient::send(const Message& msg) {
    if (!write_all(fd_, encode(msg))) throw Error(Errc::transport, "send: " + errno_text());
}

Message TeacherClient::receive() {
    std::uint8_t buf[4096];
    for (;;) {
        if (auto msg = reader_.next()) return *msg;
        const auto n = ::recv(fd_, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw Error(Errc::transport, "connection closed by server");
        reader_.feed({buf, static_cast<std::size_t>(n)});
    }
}

} // namespace twotsd
