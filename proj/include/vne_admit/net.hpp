#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vne_admit/rng.hpp"

namespace vne_admit {

using NodeId = std::size_t;

inline constexpr double speed_of_light = 299'792'458.0;  // m/s

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    bool operator==(const Vec3&) const = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

/// Axis-aligned room, origin at one corner. Meters.
struct RoomBox {
    double width = 3.0;
    double depth = 3.0;
    double height = 3.0;

    bool contains(const Vec3& p) const {
        return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= depth && p.z >= 0.0 && p.z <= height;
    }
};

struct Node {
    NodeId id = 0;
    Vec3 position;
    double capacity = 0.0;        // compute units
    double transmit_power = 0.0;  // W
    double noise_floor = 0.0;     // W
    bool operator==(const Node&) const = default;
};

/// Dense symmetric P x P channel gain matrix, entries in (0, 1].
class AttenuationMatrix {
public:
    AttenuationMatrix() = default;
    explicit AttenuationMatrix(std::size_t n, double fill = 1.0) : n_(n), gains_(n * n, fill) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(NodeId i, NodeId j) const { return gains_[i * n_ + j]; }
    double& operator()(NodeId i, NodeId j) { return gains_[i * n_ + j]; }

    bool operator==(const AttenuationMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> gains_;
};

/// Free-space path loss (c / (4 pi f d))^2 with d clamped below at min_distance and
/// the gain clamped above at 1.
inline AttenuationMatrix build_attenuation(std::span<const Node> nodes, double carrier_frequency,
                                           double min_distance) {
    if (nodes.size() < 2) throw std::invalid_argument("build_attenuation: need at least two nodes");
    if (!(carrier_frequency > 0.0)) throw std::invalid_argument("build_attenuation: carrier frequency must be > 0");
    if (!(min_distance > 0.0)) throw std::invalid_argument("build_attenuation: min distance must be > 0");

    const double wavelength_term = speed_of_light / (4.0 * std::numbers::pi * carrier_frequency);
    AttenuationMatrix gamma(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i; j < nodes.size(); ++j) {
            const double d = std::max(distance(nodes[i].position, nodes[j].position), min_distance);
            const double g = std::min(1.0, std::pow(wavelength_term / d, 2));
            gamma(i, j) = g;
            gamma(j, i) = g;
        }
    }
    return gamma;
}

class WirelessNetwork {
public:
    WirelessNetwork(std::vector<Node> nodes, AttenuationMatrix attenuation, double bandwidth, int slots_per_step)
        : nodes_(std::move(nodes)),
          attenuation_(std::move(attenuation)),
          bandwidth_(bandwidth),
          slots_(slots_per_step) {
        validate();
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const Node& node(NodeId p) const { return nodes_.at(p); }
    double gamma(NodeId i, NodeId j) const { return attenuation_(i, j); }
    const AttenuationMatrix& attenuation() const noexcept { return attenuation_; }
    double bandwidth() const noexcept { return bandwidth_; }
    int slots_per_step() const noexcept { return slots_; }

    bool operator==(const WirelessNetwork&) const = default;

private:
    void validate() const {
        if (nodes_.size() < 2) throw std::invalid_argument("network needs at least two nodes");
        if (attenuation_.size() != nodes_.size())
            throw std::invalid_argument("attenuation matrix size does not match node count");
        if (!(bandwidth_ > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
        if (slots_ < 1) throw std::invalid_argument("slots per step must be >= 1");
        for (std::size_t p = 0; p < nodes_.size(); ++p) {
            const auto& n = nodes_[p];
            if (n.id != p) throw std::invalid_argument("node ids must be 0..P-1 in order");
            if (!(n.capacity >= 0.0)) throw std::invalid_argument("node capacity must be >= 0");
            if (!(n.transmit_power > 0.0)) throw std::invalid_argument("transmit power must be > 0");
            if (!(n.noise_floor > 0.0)) throw std::invalid_argument("noise floor must be > 0");
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            for (std::size_t j = 0; j < nodes_.size(); ++j) {
                const double g = attenuation_(i, j);
                if (!(g > 0.0 && g <= 1.0)) throw std::invalid_argument("attenuation entries must lie in (0, 1]");
                if (g != attenuation_(j, i)) throw std::invalid_argument("attenuation must be symmetric");
            }
        }
    }

    std::vector<Node> nodes_;
    AttenuationMatrix attenuation_;
    double bandwidth_;
    int slots_;
};

/// Sum of gamma(p, receiver) * S^p over the co-slot senders, skipping `own_sender`.
inline double interference(const WirelessNetwork& net, NodeId receiver, std::span<const NodeId> co_slot_senders,
                           NodeId own_sender) {
    double total = 0.0;
    for (NodeId p : co_slot_senders) {
        if (p == own_sender) continue;
        total += net.gamma(p, receiver) * net.node(p).transmit_power;
    }
    return total;
}

inline double interference(const WirelessNetwork& net, NodeId receiver, std::span<const NodeId> co_slot_senders) {
    return interference(net, receiver, co_slot_senders, net.size());
}

/// Achievable rate (bit/s) for sender -> receiver in one TDMA slot while `co_slot_senders`
/// transmit simultaneously: BW/T * log2(1 + S gamma / (I + N0)).
inline double max_rate(const WirelessNetwork& net, NodeId sender, NodeId receiver,
                       std::span<const NodeId> co_slot_senders) {
    const double signal = net.node(sender).transmit_power * net.gamma(sender, receiver);
    const double noise = interference(net, receiver, co_slot_senders, sender) + net.node(receiver).noise_floor;
    return net.bandwidth() / static_cast<double>(net.slots_per_step()) * std::log2(1.0 + signal / noise);
}

inline double max_rate_alone(const WirelessNetwork& net, NodeId sender, NodeId receiver) {
    return max_rate(net, sender, receiver, {});
}

// ---------------------------------------------------------------------------
// Network construction from configuration

struct NetworkConfig {
    std::size_t node_count = 5;
    RoomBox room;
    double bandwidth_hz = 20e6;
    int slots_per_step = 8;
    double carrier_hz = 2.4e9;
    double min_distance_m = 0.1;
    double tx_power_dbm = 0.0;  // 1 mW
    double noise_dbm = -90.0;   // 1e-12 W
    double capacity = 6.0;
    std::uint64_t layout_seed = 7;
    std::vector<Vec3> positions;  // explicit layout; empty = uniform random in the room

    void validate() const {
        if (node_count < 2) throw std::invalid_argument("network.nodes must be >= 2");
        if (!(room.width > 0 && room.depth > 0 && room.height > 0))
            throw std::invalid_argument("network.room dimensions must be > 0");
        if (!(bandwidth_hz > 0)) throw std::invalid_argument("network.bw_hz must be > 0");
        if (slots_per_step < 1) throw std::invalid_argument("network.slots must be >= 1");
        if (!(carrier_hz > 0)) throw std::invalid_argument("network.carrier_hz must be > 0");
        if (!(min_distance_m > 0)) throw std::invalid_argument("network.min_distance_m must be > 0");
        if (!(capacity >= 0)) throw std::invalid_argument("network.capacity must be >= 0");
        if (!positions.empty()) {
            if (positions.size() != node_count)
                throw std::invalid_argument("network.positions must list exactly network.nodes points");
            for (const auto& p : positions)
                if (!room.contains(p)) throw std::invalid_argument("network.positions: point outside the room");
        }
    }
};

inline std::vector<Vec3> random_layout(std::size_t count, const RoomBox& room, Rng rng) {
    std::vector<Vec3> out(count);
    for (auto& p : out) {
        p.x = rng.uniform_real(0.0, room.width);
        p.y = rng.uniform_real(0.0, room.depth);
        p.z = rng.uniform_real(0.0, room.height);
    }
    return out;
}

inline WirelessNetwork make_network(const NetworkConfig& cfg) {
    cfg.validate();
    const auto positions =
        cfg.positions.empty() ? random_layout(cfg.node_count, cfg.room, Rng(cfg.layout_seed).split(Stream::layout))
                              : cfg.positions;
    std::vector<Node> nodes(cfg.node_count);
    for (std::size_t p = 0; p < nodes.size(); ++p) {
        nodes[p] = Node{p, positions[p], cfg.capacity, dbm_to_watts(cfg.tx_power_dbm), dbm_to_watts(cfg.noise_dbm)};
    }
    auto gamma = build_attenuation(nodes, cfg.carrier_hz, cfg.min_distance_m);
    return WirelessNetwork(std::move(nodes), std::move(gamma), cfg.bandwidth_hz, cfg.slots_per_step);
}

}  // namespace vne_admit
