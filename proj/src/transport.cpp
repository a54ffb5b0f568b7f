#include "dhr/transport.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dhr {

class SimNetwork::SimEndpoint : public Endpoint {
  public:
    SimEndpoint(SimNetwork& net, int side) : net_(net), side_(side) {}
    bool send(std::span<const uint8_t> datagram) override {
        net_.send_dir(side_, datagram);  // a (side 0) feeds direction a_to_b
        return true;
    }
    std::vector<std::vector<uint8_t>> poll_receive(uint64_t now_us) override {
        return net_.poll_dir(1 - side_, now_us);
    }

  private:
    SimNetwork& net_;
    int side_;
};

SimNetwork::~SimNetwork() = default;

Endpoint& SimNetwork::a() { return *a_; }
Endpoint& SimNetwork::b() { return *b_; }

SimNetwork::SimNetwork(const NetConditions& both_ways) : SimNetwork(both_ways, both_ways) {}

SimNetwork::SimNetwork(const NetConditions& ab, const NetConditions& ba) {
    dirs_[0].cond = ab;
    dirs_[1].cond = ba;
    // Independent streams derived from the a->b seed via a parent generator.
    SplitMix64 parent{ab.seed};
    dirs_[0].loss_rng.state = parent.next();
    dirs_[0].jitter_rng.state = parent.next();
    dirs_[1].loss_rng.state = parent.next();
    dirs_[1].jitter_rng.state = parent.next();
    a_ = std::make_unique<SimEndpoint>(*this, 0);
    b_ = std::make_unique<SimEndpoint>(*this, 1);
}

void SimNetwork::advance_to(uint64_t t_us) {
    if (t_us > now_us_) now_us_ = t_us;
}

std::optional<uint64_t> SimNetwork::next_delivery_us(Direction dir) const {
    const Dir& d = dirs_[dir];
    if (d.queue.empty()) return std::nullopt;
    return d.queue.top().deliver_us;
}

std::optional<uint64_t> SimNetwork::next_delivery_us() const {
    const auto x = next_delivery_us(a_to_b);
    const auto y = next_delivery_us(b_to_a);
    if (!x) return y;
    if (!y) return x;
    return std::min(*x, *y);
}

void SimNetwork::set_conditions(Direction dir, const NetConditions& cond) {
    dirs_[dir].cond = cond;
}

void SimNetwork::send_dir(int dir, std::span<const uint8_t> bytes) {
    Dir& d = dirs_[dir];
    ++d.stats.sent;
    if (bytes.size() > d.cond.mtu) {
        ++d.stats.dropped_mtu;  // no RNG consumed: MTU is not a random event
        return;
    }
    if (d.loss_rng.next_unit() < d.cond.loss_prob) {
        ++d.stats.dropped_loss;
        return;
    }
    const double delay_us =
        d.cond.latency_ms * 1000.0 + d.jitter_rng.next_unit() * d.cond.jitter_ms * 1000.0;
    Packet p;
    p.deliver_us = now_us_ + uint64_t(delay_us);
    p.seq = d.next_seq++;
    p.bytes.assign(bytes.begin(), bytes.end());
    d.queue.push(std::move(p));
}

std::vector<std::vector<uint8_t>> SimNetwork::poll_dir(int dir, uint64_t now_us) {
    advance_to(now_us);
    Dir& d = dirs_[dir];
    std::vector<std::vector<uint8_t>> out;
    while (!d.queue.empty() && d.queue.top().deliver_us <= now_us_) {
        out.push_back(d.queue.top().bytes);
        d.queue.pop();
        ++d.stats.delivered;
    }
    return out;
}

namespace {

// "host:port" / "[v6]:port" → getaddrinfo results.
void split_host_port(const std::string& addr, std::string& host, std::string& port) {
    if (!addr.empty() && addr.front() == '[') {
        const size_t close = addr.find(']');
        if (close == std::string::npos || close + 1 >= addr.size() || addr[close + 1] != ':')
            throw std::invalid_argument("bad address: " + addr);
        host = addr.substr(1, close - 1);
        port = addr.substr(close + 2);
        return;
    }
    const size_t colon = addr.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("bad address: " + addr);
    host = addr.substr(0, colon);
    port = addr.substr(colon + 1);
}

struct AddrInfo {
    addrinfo* res = nullptr;
    ~AddrInfo() {
        if (res) freeaddrinfo(res);
    }
};

void resolve(const std::string& addr, bool passive, AddrInfo& out) {
    std::string host, port;
    split_host_port(addr, host, port);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_DGRAM;
    hints.ai_flags = passive ? AI_PASSIVE : 0;
    const int rc =
        getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &out.res);
    if (rc != 0 || !out.res)
        throw std::runtime_error("cannot resolve " + addr + ": " + gai_strerror(rc));
}

}  // namespace

UdpEndpoint::UdpEndpoint(const std::string& bind_addr, const std::string& peer_addr) {
    AddrInfo bind_info, peer_info;
    if (!peer_addr.empty()) resolve(peer_addr, false, peer_info);

    if (!bind_addr.empty()) {
        resolve(bind_addr, true, bind_info);
        fd_ = socket(bind_info.res->ai_family, SOCK_DGRAM, 0);
    } else {
        fd_ = socket(peer_info.res ? peer_info.res->ai_family : AF_INET, SOCK_DGRAM, 0);
    }
    if (fd_ < 0) throw std::runtime_error("socket() failed");

    const int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (bind_info.res &&
        bind(fd_, bind_info.res->ai_addr, socklen_t(bind_info.res->ai_addrlen)) != 0) {
        close(fd_);
        throw std::runtime_error("bind failed on " + bind_addr);
    }
    sockaddr_storage local{};
    socklen_t local_len = sizeof local;
    if (getsockname(fd_, reinterpret_cast<sockaddr*>(&local), &local_len) == 0) {
        if (local.ss_family == AF_INET)
            bound_port_ = ntohs(reinterpret_cast<sockaddr_in*>(&local)->sin_port);
        else if (local.ss_family == AF_INET6)
            bound_port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&local)->sin6_port);
    }
    if (peer_info.res) {
        peer_sockaddr_.assign(
            reinterpret_cast<const uint8_t*>(peer_info.res->ai_addr),
            reinterpret_cast<const uint8_t*>(peer_info.res->ai_addr) + peer_info.res->ai_addrlen);
        have_peer_ = true;
    }
    const int flags = fcntl(fd_, F_GETFL, 0);
    fcntl(fd_, F_SETFL, flags | O_NONBLOCK);
}

UdpEndpoint::~UdpEndpoint() {
    if (fd_ >= 0) close(fd_);
}

bool UdpEndpoint::send(std::span<const uint8_t> datagram) {
    if (!have_peer_) {
        ++send_failures_;
        return false;
    }
    const ssize_t n =
        sendto(fd_, datagram.data(), datagram.size(), 0,
               reinterpret_cast<const sockaddr*>(peer_sockaddr_.data()),
               socklen_t(peer_sockaddr_.size()));
    if (n != ssize_t(datagram.size())) {
        ++send_failures_;  // surfaces as a counted drop, consistent with lossy semantics
        return false;
    }
    return true;
}

std::vector<std::vector<uint8_t>> UdpEndpoint::poll_receive(uint64_t) {
    std::vector<std::vector<uint8_t>> out;
    uint8_t buf[65536];
    for (;;) {
        sockaddr_storage from{};
        socklen_t from_len = sizeof from;
        const ssize_t n = recvfrom(fd_, buf, sizeof buf, 0,
                                   reinterpret_cast<sockaddr*>(&from), &from_len);
        if (n < 0) break;  // EWOULDBLOCK or transient error: nothing more now
        if (!have_peer_) {
            peer_sockaddr_.assign(reinterpret_cast<uint8_t*>(&from),
                                  reinterpret_cast<uint8_t*>(&from) + from_len);
            have_peer_ = true;
        }
        out.emplace_back(buf, buf + n);
    }
    return out;
}

bool UdpEndpoint::wait_readable_for(uint64_t duration_us) {
    pollfd p{fd_, POLLIN, 0};
    const int timeout_ms = int((duration_us + 999) / 1000);
    return poll(&p, 1, timeout_ms) > 0 && (p.revents & POLLIN);
}

}  // namespace dhr
