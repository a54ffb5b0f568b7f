#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace dhr {

// Fixed, documented generator with a stable cross-platform stream
// (Vigna's splitmix64). Stream stability is itself under test.
struct SplitMix64 {
    uint64_t state = 0;

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double next_unit() { return double(next() >> 11) * 0x1.0p-53; }  // [0, 1)
};

struct NetConditions {
    double latency_ms = 0.0;
    double jitter_ms = 0.0;  // uniform additive
    double loss_prob = 0.0;  // per datagram per direction
    uint16_t mtu = 1500;
    uint64_t seed = 42;
};

// Datagrams delivered whole or not at all.
class Endpoint {
  public:
    virtual ~Endpoint() = default;
    virtual bool send(std::span<const uint8_t> datagram) = 0;
    // Everything due by `now_us`, in delivery order. Non-blocking.
    virtual std::vector<std::vector<uint8_t>> poll_receive(uint64_t now_us) = 0;
};

struct DirectionStats {
    uint64_t sent = 0;
    uint64_t delivered = 0;
    uint64_t dropped_loss = 0;
    uint64_t dropped_mtu = 0;
};

// Two endpoints joined by a virtual-time lossy link. Delivery time =
// send + latency + U(0, jitter); per-direction independent loss and jitter
// RNG streams derived from the seed, so drop decisions in one direction
// never perturb the other. Oversize datagrams are dropped before the loss
// draw and consume no randomness.
class SimNetwork {
  public:
    enum Direction { a_to_b = 0, b_to_a = 1 };

    explicit SimNetwork(const NetConditions& both_ways);
    SimNetwork(const NetConditions& ab, const NetConditions& ba);
    ~SimNetwork();

    Endpoint& a();
    Endpoint& b();

    uint64_t now_us() const { return now_us_; }
    void advance_to(uint64_t t_us);

    std::optional<uint64_t> next_delivery_us() const;
    std::optional<uint64_t> next_delivery_us(Direction dir) const;

    // Mid-run override; RNG streams keep running (seed field ignored here).
    void set_conditions(Direction dir, const NetConditions& cond);
    const NetConditions& conditions(Direction dir) const { return dirs_[dir].cond; }
    const DirectionStats& stats(Direction dir) const { return dirs_[dir].stats; }

  private:
    struct Packet {
        uint64_t deliver_us;
        uint64_t seq;
        std::vector<uint8_t> bytes;
    };
    struct PacketLater {
        bool operator()(const Packet& x, const Packet& y) const {
            return x.deliver_us != y.deliver_us ? x.deliver_us > y.deliver_us : x.seq > y.seq;
        }
    };
    struct Dir {
        NetConditions cond;
        SplitMix64 loss_rng;
        SplitMix64 jitter_rng;
        std::priority_queue<Packet, std::vector<Packet>, PacketLater> queue;
        uint64_t next_seq = 0;
        DirectionStats stats;
    };

    class SimEndpoint;

    void send_dir(int dir, std::span<const uint8_t> bytes);
    std::vector<std::vector<uint8_t>> poll_dir(int dir, uint64_t now_us);

    Dir dirs_[2];
    uint64_t now_us_ = 0;
    std::unique_ptr<SimEndpoint> a_;
    std::unique_ptr<SimEndpoint> b_;
};

// Non-blocking UDP datagram socket behind the same contract. If `peer` is
// empty the endpoint adopts the source of the first received datagram
// (single-client server convention).
class UdpEndpoint : public Endpoint {
  public:
    // addr strings are "host:port" (IPv6 as "[host]:port"). Empty bind = any.
    UdpEndpoint(const std::string& bind_addr, const std::string& peer_addr);
    ~UdpEndpoint() override;
    UdpEndpoint(const UdpEndpoint&) = delete;
    UdpEndpoint& operator=(const UdpEndpoint&) = delete;

    bool send(std::span<const uint8_t> datagram) override;
    std::vector<std::vector<uint8_t>> poll_receive(uint64_t now_us) override;

    // Block until readable or the deadline (µs of the caller's clock,
    // compared against now_us they pass around); returns readability.
    bool wait_readable_for(uint64_t duration_us);

    uint16_t bound_port() const { return bound_port_; }
    uint64_t send_failures() const { return send_failures_; }

  private:
    int fd_ = -1;
    uint16_t bound_port_ = 0;
    bool have_peer_ = false;
    uint64_t send_failures_ = 0;
    // storage for sockaddr of peer, kept opaque to the header
    std::vector<uint8_t> peer_sockaddr_;
};

}  // namespace dhr
