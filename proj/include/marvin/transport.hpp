#pragma once

// Datagram transports for the swarm messages, and the publish/subscribe and
// per-chaser command channels built on top of them.
//
// Delivery is at-most-once. Receivers tolerate loss, duplication and
// reordering: subscribers keep the newest message by timestamp, command
// receivers drop any seq that is not strictly newer than the last one.

#include "marvin/swarm_net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace marvin {

struct Endpoint {
    std::string host{"127.0.0.1"};
    std::uint16_t port{0};

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
    std::string str() const { return host + ":" + std::to_string(port); }
};

struct TransportStats {
    std::uint64_t sent{0};
    std::uint64_t delivered{0};
    std::uint64_t dropped{0};    // injected loss
    std::uint64_t duplicated{0}; // injected duplicates
    std::uint64_t errors{0};     // socket-level failures
    std::string last_error;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// Start listening on an endpoint. Must be called before datagrams to it can be received.
    virtual void bind(const Endpoint& ep) = 0;
    virtual void send(const Endpoint& to, const std::string& datagram) = 0;
    /// Datagrams received on `ep`, waiting up to `wait` for at least `expected` of them.
    virtual std::vector<std::string> drain(const Endpoint& ep, std::size_t expected,
                                           std::chrono::milliseconds wait) = 0;
    virtual TransportStats stats() const = 0;
};

/// Ideal transport: ordered, lossless, same thread.
class InProcessTransport final : public Transport {
public:
    void bind(const Endpoint& ep) override { queues_[ep.port]; }

    void send(const Endpoint& to, const std::string& datagram) override {
        ++stats_.sent;
        auto it = queues_.find(to.port);
        if (it == queues_.end()) return; // nobody listening: datagram is lost
        it->second.push_back(datagram);
    }

    std::vector<std::string> drain(const Endpoint& ep, std::size_t, std::chrono::milliseconds) override {
        std::vector<std::string> out;
        auto it = queues_.find(ep.port);
        if (it == queues_.end()) return out;
        out.assign(it->second.begin(), it->second.end());
        it->second.clear();
        stats_.delivered += out.size();
        return out;
    }

    TransportStats stats() const override { return stats_; }

private:
    std::map<std::uint16_t, std::deque<std::string>> queues_;
    TransportStats stats_;
};

/// Decorator that injects seeded loss and duplication on send.
class LossyTransport final : public Transport {
public:
    LossyTransport(Transport& inner, double loss, double duplicate, std::uint64_t seed)
        : inner_(inner), loss_(loss), duplicate_(duplicate), rng_(seed) {}

    void bind(const Endpoint& ep) override { inner_.bind(ep); }

    void send(const Endpoint& to, const std::string& datagram) override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng_) < loss_) {
            ++dropped_;
            return;
        }
        inner_.send(to, datagram);
        if (u(rng_) < duplicate_) {
            ++duplicated_;
            inner_.send(to, datagram);
        }
    }

    std::vector<std::string> drain(const Endpoint& ep, std::size_t expected, std::chrono::milliseconds wait) override {
        return inner_.drain(ep, expected, wait);
    }

    TransportStats stats() const override {
        TransportStats s = inner_.stats();
        s.dropped += dropped_;
        s.duplicated += duplicated_;
        return s;
    }

private:
    Transport& inner_;
    double loss_;
    double duplicate_;
    std::mt19937_64 rng_;
    std::uint64_t dropped_{0};
    std::uint64_t duplicated_{0};
};

/**
 * @brief UDP/IPv4 transport. Each bound endpoint owns a socket and a receiver
 * thread feeding a mailbox; the simulation thread only touches the mailbox.
 * Socket failures are counted and recorded, never thrown into the caller's
 * loop (bind failures excepted: those are configuration errors).
 */
class UdpTransport final : public Transport {
public:
    UdpTransport() {
        send_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (send_fd_ < 0) throw std::runtime_error(std::string("udp: socket: ") + std::strerror(errno));
    }

    ~UdpTransport() override {
        stop_ = true;
        for (auto& [port, l] : listeners_) {
            if (l->thread.joinable()) l->thread.join();
            ::close(l->fd);
        }
        if (send_fd_ >= 0) ::close(send_fd_);
    }

    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    void bind(const Endpoint& ep) override {
        if (listeners_.count(ep.port)) return;
        sockaddr_in addr = make_addr(ep);
        auto l = std::make_unique<Listener>();
        l->fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (l->fd < 0) throw std::runtime_error(std::string("udp: socket: ") + std::strerror(errno));
        int one = 1;
        ::setsockopt(l->fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        int rcvbuf = 1 << 20;
        ::setsockopt(l->fd, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
        if (::bind(l->fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            const std::string err = std::strerror(errno);
            ::close(l->fd);
            throw std::runtime_error("udp: bind " + ep.str() + ": " + err);
        }
        Listener* raw = l.get();
        l->thread = std::thread([this, raw] { receive_loop(*raw); });
        listeners_.emplace(ep.port, std::move(l));
    }

    void send(const Endpoint& to, const std::string& datagram) override {
        sockaddr_in addr = make_addr(to);
        const auto n = ::sendto(send_fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<sockaddr*>(&addr),
                                sizeof addr);
        std::lock_guard lock(stats_mu_);
        if (n < 0 || static_cast<std::size_t>(n) != datagram.size()) {
            ++stats_.errors;
            stats_.last_error = "sendto " + to.str() + ": " + std::strerror(errno);
            return;
        }
        ++stats_.sent;
    }

    std::vector<std::string> drain(const Endpoint& ep, std::size_t expected, std::chrono::milliseconds wait) override {
        auto it = listeners_.find(ep.port);
        if (it == listeners_.end()) return {};
        Listener& l = *it->second;
        std::unique_lock lock(l.mu);
        l.cv.wait_for(lock, wait, [&] { return l.inbox.size() >= expected; });
        std::vector<std::string> out(l.inbox.begin(), l.inbox.end());
        l.inbox.clear();
        lock.unlock();
        std::lock_guard slock(stats_mu_);
        stats_.delivered += out.size();
        return out;
    }

    TransportStats stats() const override {
        std::lock_guard lock(stats_mu_);
        return stats_;
    }

private:
    struct Listener {
        int fd{-1};
        std::thread thread;
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::string> inbox;
    };

    static sockaddr_in make_addr(const Endpoint& ep) {
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
            throw std::runtime_error("udp: bad IPv4 address '" + ep.host + "'");
        }
        return addr;
    }

    void receive_loop(Listener& l) {
        std::vector<char> buf(65536);
        while (!stop_) {
            pollfd pfd{l.fd, POLLIN, 0};
            const int r = ::poll(&pfd, 1, 20);
            if (r <= 0) {
                if (r < 0 && errno != EINTR) record_error("poll");
                continue;
            }
            const auto n = ::recv(l.fd, buf.data(), buf.size(), 0);
            if (n < 0) {
                if (errno != EAGAIN && errno != EINTR) record_error("recv");
                continue;
            }
            {
                std::lock_guard lock(l.mu);
                l.inbox.emplace_back(buf.data(), static_cast<std::size_t>(n));
            }
            l.cv.notify_all();
        }
    }

    void record_error(const char* what) {
        std::lock_guard lock(stats_mu_);
        ++stats_.errors;
        stats_.last_error = std::string(what) + ": " + std::strerror(errno);
    }

    int send_fd_{-1};
    std::atomic<bool> stop_{false};
    std::map<std::uint16_t, std::unique_ptr<Listener>> listeners_;
    mutable std::mutex stats_mu_;
    TransportStats stats_;
};

/// Default addresses; each may be overridden through the environment.
struct NetworkConfig {
    Endpoint detections{"127.0.0.1", 47001};
    Endpoint tracker{"127.0.0.1", 47002};
    std::string command_host{"127.0.0.1"};
    std::uint16_t command_base_port{48001};

    Endpoint command(std::size_t chaser_index) const {
        return {command_host, static_cast<std::uint16_t>(command_base_port + chaser_index)};
    }

    /// MARVIN_DETECTION_ADDR, MARVIN_TRACKER_ADDR (host:port), MARVIN_COMMAND_HOST, MARVIN_COMMAND_BASE_PORT.
    NetworkConfig with_env_overrides() const {
        NetworkConfig out = *this;
        auto parse_addr = [](const char* var, Endpoint& ep) {
            const char* v = std::getenv(var);
            if (!v || !*v) return;
            std::string s(v);
            const auto colon = s.rfind(':');
            if (colon == std::string::npos) throw std::runtime_error(std::string(var) + ": expected host:port");
            ep.host = s.substr(0, colon);
            ep.port = static_cast<std::uint16_t>(std::stoul(s.substr(colon + 1)));
        };
        parse_addr("MARVIN_DETECTION_ADDR", out.detections);
        parse_addr("MARVIN_TRACKER_ADDR", out.tracker);
        if (const char* h = std::getenv("MARVIN_COMMAND_HOST"); h && *h) out.command_host = h;
        if (const char* p = std::getenv("MARVIN_COMMAND_BASE_PORT"); p && *p) {
            out.command_base_port = static_cast<std::uint16_t>(std::stoul(p));
        }
        return out;
    }
};

template <class Msg>
class Publisher {
public:
    Publisher(Transport& t, Endpoint ep) : transport_(t), ep_(std::move(ep)) {}
    void publish(const Msg& m) { transport_.send(ep_, encode(m)); }
    const Endpoint& endpoint() const { return ep_; }

private:
    Transport& transport_;
    Endpoint ep_;
};

/// Latest-value subscriber for a timestamped topic.
template <class Msg>
class Subscription {
public:
    Subscription(Transport& t, Endpoint ep) : transport_(t), ep_(std::move(ep)) { transport_.bind(ep_); }

    /// Pull pending datagrams; returns true if a newer message arrived.
    bool poll(std::size_t expected = 0, std::chrono::milliseconds wait = std::chrono::milliseconds{0}) {
        bool fresh = false;
        for (const auto& bytes : transport_.drain(ep_, expected, wait)) {
            try {
                Msg m = decode<Msg>(bytes);
                if (!latest_ || m.timestamp_us > latest_->timestamp_us) {
                    latest_ = std::move(m);
                    fresh = true;
                } else {
                    ++stale_;
                }
            } catch (const std::exception&) {
                ++decode_errors_;
            }
        }
        return fresh;
    }

    const std::optional<Msg>& latest() const { return latest_; }
    std::uint64_t decode_errors() const { return decode_errors_; }
    std::uint64_t stale_dropped() const { return stale_; }

private:
    Transport& transport_;
    Endpoint ep_;
    std::optional<Msg> latest_;
    std::uint64_t decode_errors_{0};
    std::uint64_t stale_{0};
};

/// Guidance side of the per-chaser command channels; stamps a strictly increasing seq.
class CommandSender {
public:
    CommandSender(Transport& t, NetworkConfig net) : transport_(t), net_(std::move(net)) {}

    CommandMsg send(std::size_t chaser_index, const std::string& chaser_id, std::variant<MoveCommand, LandCommand> move) {
        CommandMsg m;
        m.seq = ++seq_[chaser_index];
        m.chaser_id = chaser_id;
        m.move = move;
        transport_.send(net_.command(chaser_index), encode(m));
        return m;
    }

private:
    Transport& transport_;
    NetworkConfig net_;
    std::map<std::size_t, std::int64_t> seq_;
};

/// Vehicle side of a command channel: executes each seq at most once, in order.
class CommandReceiver {
public:
    CommandReceiver(Transport& t, Endpoint ep, std::string chaser_id)
        : transport_(t), ep_(std::move(ep)), chaser_id_(std::move(chaser_id)) {
        transport_.bind(ep_);
    }

    /// Accept a decoded message if its seq is new; otherwise count it as dropped.
    bool accept(const CommandMsg& m) {
        if (m.chaser_id != chaser_id_) {
            ++misaddressed_;
            return false;
        }
        if (last_seq_ && m.seq <= *last_seq_) {
            ++dropped_;
            return false;
        }
        last_seq_ = m.seq;
        return true;
    }

    std::vector<CommandMsg> poll(std::size_t expected = 0, std::chrono::milliseconds wait = std::chrono::milliseconds{0}) {
        std::vector<CommandMsg> out;
        for (const auto& bytes : transport_.drain(ep_, expected, wait)) {
            try {
                CommandMsg m = decode<CommandMsg>(bytes);
                if (accept(m)) out.push_back(std::move(m));
            } catch (const std::exception&) {
                ++decode_errors_;
            }
        }
        return out;
    }

    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t decode_errors() const { return decode_errors_; }
    std::uint64_t misaddressed() const { return misaddressed_; }

private:
    Transport& transport_;
    Endpoint ep_;
    std::string chaser_id_;
    std::optional<std::int64_t> last_seq_;
    std::uint64_t dropped_{0};
    std::uint64_t decode_errors_{0};
    std::uint64_t misaddressed_{0};
};

} // namespace marvin
