#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vne_admit/net.hpp"
#include "vne_admit/rng.hpp"
#include "vne_admit/vnr.hpp"

namespace vne_admit {

struct TaskPlacement {
    TaskIndex task = 0;
    NodeId node = 0;
    bool operator==(const TaskPlacement&) const = default;
};

struct ScheduledHop {
    int slot = 0;
    NodeId sender = 0;
    NodeId receiver = 0;
    LinkIndex link = 0;
    bool operator==(const ScheduledHop&) const = default;
};

/// Placement, routing and TDMA schedule for one admitted request.
///
/// `routes[e]` is the node path of virtual link e from the host of its source task to the host
/// of its target task; a single-node path means both tasks share a host and no transmission is
/// needed. Every consecutive pair of a route appears exactly once in `schedule`.
struct Embedding {
    std::uint64_t vnr_uid = 0;
    int template_id = 0;
    std::vector<TaskPlacement> placement;
    std::vector<std::vector<NodeId>> routes;
    std::vector<ScheduledHop> schedule;

    std::optional<NodeId> host_of(TaskIndex task) const {
        for (const auto& tp : placement)
            if (tp.task == task) return tp.node;
        return std::nullopt;
    }

    int slots_used() const {
        std::set<int> slots;
        for (const auto& h : schedule) slots.insert(h.slot);
        return static_cast<int>(slots.size());
    }

    bool operator==(const Embedding&) const = default;
};

struct Transmission {
    NodeId sender = 0;
    NodeId receiver = 0;
    std::uint64_t vnr_uid = 0;
    LinkIndex link = 0;
    double required_rate = 0.0;
    bool operator==(const Transmission&) const = default;
};

using SlotLoad = std::vector<Transmission>;

struct ActiveVnr {
    VnrInstance vnr;
    Embedding embedding;
    bool operator==(const ActiveVnr&) const = default;
};

// ---------------------------------------------------------------------------
// Violations

enum class ViolationKind {
    unknown_template,
    duplicate_vnr,
    placement,       // each task on exactly one node
    capacity,        // node load <= C^p
    rate,            // r_req <= r_max under co-slot interference
    half_duplex,     // a node never sends and receives in one slot
    duplicate_sender,
    route,           // path continuity
    schedule,        // hop <-> schedule bijection and slot range
};

inline const char* to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::unknown_template: return "unknown_template";
        case ViolationKind::duplicate_vnr: return "duplicate_vnr";
        case ViolationKind::placement: return "placement";
        case ViolationKind::capacity: return "capacity";
        case ViolationKind::rate: return "rate";
        case ViolationKind::half_duplex: return "half_duplex";
        case ViolationKind::duplicate_sender: return "duplicate_sender";
        case ViolationKind::route: return "route";
        case ViolationKind::schedule: return "schedule";
    }
    return "?";
}

struct Violation {
    ViolationKind kind;
    std::string detail;
};

using Violations = std::vector<Violation>;

inline bool has_violation(const Violations& vs, ViolationKind k) {
    return std::any_of(vs.begin(), vs.end(), [k](const Violation& v) { return v.kind == k; });
}

inline std::string describe(const Violations& vs) {
    std::ostringstream os;
    for (const auto& v : vs) os << to_string(v.kind) << ": " << v.detail << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Network state

class NetworkState;
Violations validate(const NetworkState& state, const Embedding& embedding);
Violations validate_state(const NetworkState& state);

/// Physical network plus the set of running requests, with cached residual capacities and
/// per-slot transmission lists. Single owner; mutate only through commit/release/advance_time.
class NetworkState {
public:
    NetworkState(WirelessNetwork network, std::shared_ptr<const TemplateRegistry> templates)
        : network_(std::move(network)), templates_(std::move(templates)) {
        if (!templates_) throw std::invalid_argument("NetworkState: template registry required");
        reset();
    }

    const WirelessNetwork& network() const noexcept { return network_; }
    const TemplateRegistry& templates() const noexcept { return *templates_; }
    const std::shared_ptr<const TemplateRegistry>& template_registry() const noexcept { return templates_; }
    const std::vector<ActiveVnr>& active() const noexcept { return active_; }
    const std::vector<double>& residuals() const noexcept { return residual_; }
    double residual(NodeId p) const { return residual_.at(p); }
    const std::vector<SlotLoad>& slots() const noexcept { return slots_; }
    const SlotLoad& slot(int t) const { return slots_.at(static_cast<std::size_t>(t)); }

    bool is_active(std::uint64_t uid) const {
        return std::any_of(active_.begin(), active_.end(), [uid](const ActiveVnr& a) { return a.vnr.uid == uid; });
    }

    int slots_in_use() const {
        return static_cast<int>(std::count_if(slots_.begin(), slots_.end(), [](const SlotLoad& s) { return !s.empty(); }));
    }

    double used_capacity() const {
        double used = 0.0;
        for (std::size_t p = 0; p < residual_.size(); ++p) used += network_.node(p).capacity - residual_[p];
        return used;
    }

    void reset() {
        active_.clear();
        slots_.assign(static_cast<std::size_t>(network_.slots_per_step()), {});
        recompute_residuals();
    }

    /// Adds an admitted request. The embedding must validate against the current state.
    void commit(const VnrInstance& vnr, Embedding embedding) {
        if (embedding.vnr_uid != vnr.uid || embedding.template_id != vnr.template_id)
            throw std::logic_error("commit: embedding does not belong to this VNR");
        if (vnr.expired()) throw std::logic_error("commit: VNR has no remaining lifetime");
        if (auto vs = validate(*this, embedding); !vs.empty())
            throw std::logic_error("commit: invalid embedding\n" + describe(vs));

        const auto& tmpl = templates_->at(vnr.template_id);
        for (const auto& h : embedding.schedule) {
            slots_[static_cast<std::size_t>(h.slot)].push_back(
                Transmission{h.sender, h.receiver, vnr.uid, h.link, tmpl.links[h.link].rate});
        }
        active_.push_back(ActiveVnr{vnr, std::move(embedding)});
        recompute_residuals();
    }

    /// Removes a running request and returns its resources. Returns false if it was not active.
    bool release(std::uint64_t uid) {
        auto it = std::find_if(active_.begin(), active_.end(), [uid](const ActiveVnr& a) { return a.vnr.uid == uid; });
        if (it == active_.end()) return false;
        active_.erase(it);
        for (auto& slot : slots_)
            std::erase_if(slot, [uid](const Transmission& tx) { return tx.vnr_uid == uid; });
        recompute_residuals();
        return true;
    }

    /// Ticks every running request and releases the ones whose lifetime reached zero.
    std::vector<VnrInstance> advance_time() {
        std::vector<VnrInstance> expired;
        for (auto& a : active_) {
            a.vnr = tick(a.vnr);
            if (a.vnr.expired()) expired.push_back(a.vnr);
        }
        for (const auto& v : expired) release(v.uid);
        return expired;
    }

    bool operator==(const NetworkState& o) const {
        return network_ == o.network_ && active_ == o.active_ && residual_ == o.residual_ && slots_ == o.slots_;
    }

private:
    // Residuals are rebuilt from the active list so that commit followed by release restores
    // bit-identical values.
    void recompute_residuals() {
        residual_.resize(network_.size());
        for (std::size_t p = 0; p < network_.size(); ++p) residual_[p] = network_.node(p).capacity;
        for (const auto& a : active_) {
            const auto& tmpl = templates_->at(a.vnr.template_id);
            for (const auto& tp : a.embedding.placement) residual_[tp.node] -= tmpl.task_demands[tp.task];
        }
    }

    WirelessNetwork network_;
    std::shared_ptr<const TemplateRegistry> templates_;
    std::vector<ActiveVnr> active_;
    std::vector<double> residual_;
    std::vector<SlotLoad> slots_;
};

// ---------------------------------------------------------------------------
// Validator. Rebuilds loads and slot contents from the embeddings themselves rather than from
// the state's caches, so it checks the heuristic independently.

namespace detail {

inline constexpr double capacity_tolerance = 1e-9;

struct SlotEntry {
    NodeId sender;
    NodeId receiver;
    double rate;
    std::uint64_t uid;
    LinkIndex link;
};

inline void check_structure(const WirelessNetwork& net, const VnrTemplate& tmpl, const Embedding& emb,
                            Violations& out) {
    const auto tag = "vnr " + std::to_string(emb.vnr_uid) + ": ";
    const std::size_t P = net.size();

    std::vector<int> placed(tmpl.task_count(), 0);
    for (const auto& tp : emb.placement) {
        if (tp.task >= tmpl.task_count()) {
            out.push_back({ViolationKind::placement, tag + "placement of unknown task " + std::to_string(tp.task)});
            continue;
        }
        if (tp.node >= P) {
            out.push_back({ViolationKind::placement, tag + "task " + std::to_string(tp.task) + " on unknown node"});
            continue;
        }
        ++placed[tp.task];
    }
    for (std::size_t b = 0; b < placed.size(); ++b) {
        if (placed[b] != 1)
            out.push_back({ViolationKind::placement,
                           tag + "task " + std::to_string(b) + " placed " + std::to_string(placed[b]) + " times"});
    }

    // Route continuity.
    std::vector<std::vector<std::pair<NodeId, NodeId>>> hops(tmpl.links.size());
    if (emb.routes.size() != tmpl.links.size()) {
        out.push_back({ViolationKind::route, tag + "route count does not match link count"});
    } else {
        for (std::size_t e = 0; e < tmpl.links.size(); ++e) {
            const auto& path = emb.routes[e];
            const auto le = tag + "link " + std::to_string(e) + ": ";
            if (path.empty()) {
                out.push_back({ViolationKind::route, le + "empty route"});
                continue;
            }
            if (std::any_of(path.begin(), path.end(), [P](NodeId n) { return n >= P; })) {
                out.push_back({ViolationKind::route, le + "route visits unknown node"});
                continue;
            }
            const auto src = emb.host_of(tmpl.links[e].source);
            const auto dst = emb.host_of(tmpl.links[e].target);
            if (src && path.front() != *src) out.push_back({ViolationKind::route, le + "route does not start at source host"});
            if (dst && path.back() != *dst) out.push_back({ViolationKind::route, le + "route does not end at target host"});
            for (std::size_t k = 1; k < path.size(); ++k) {
                if (path[k - 1] == path[k]) {
                    out.push_back({ViolationKind::route, le + "route repeats a node on consecutive hops"});
                    continue;
                }
                hops[e].emplace_back(path[k - 1], path[k]);
            }
        }
    }

    // Hop <-> schedule bijection.
    std::vector<std::vector<int>> hop_hits(hops.size());
    for (std::size_t e = 0; e < hops.size(); ++e) hop_hits[e].assign(hops[e].size(), 0);
    for (const auto& h : emb.schedule) {
        if (h.slot < 0 || h.slot >= net.slots_per_step()) {
            out.push_back({ViolationKind::schedule, tag + "slot " + std::to_string(h.slot) + " out of range"});
            continue;
        }
        if (h.link >= hops.size()) {
            out.push_back({ViolationKind::schedule, tag + "schedule entry for unknown link"});
            continue;
        }
        bool matched = false;
        for (std::size_t k = 0; k < hops[h.link].size(); ++k) {
            if (hops[h.link][k] == std::pair{h.sender, h.receiver}) {
                ++hop_hits[h.link][k];
                matched = true;
                break;
            }
        }
        if (!matched)
            out.push_back({ViolationKind::schedule, tag + "scheduled transmission " + std::to_string(h.sender) + "->" +
                                                        std::to_string(h.receiver) + " is not a hop of link " +
                                                        std::to_string(h.link)});
    }
    for (std::size_t e = 0; e < hops.size(); ++e) {
        for (std::size_t k = 0; k < hops[e].size(); ++k) {
            if (hop_hits[e][k] != 1)
                out.push_back({ViolationKind::schedule, tag + "hop " + std::to_string(k) + " of link " +
                                                            std::to_string(e) + " scheduled " +
                                                            std::to_string(hop_hits[e][k]) + " times"});
        }
    }
}

inline void check_joint(const WirelessNetwork& net, const TemplateRegistry& templates,
                        const std::vector<const Embedding*>& embeddings, Violations& out) {
    const std::size_t P = net.size();
    std::vector<double> load(P, 0.0);
    std::vector<std::vector<SlotEntry>> slots(static_cast<std::size_t>(net.slots_per_step()));

    for (const Embedding* emb : embeddings) {
        const auto& tmpl = templates.at(emb->template_id);
        for (const auto& tp : emb->placement)
            if (tp.task < tmpl.task_count() && tp.node < P) load[tp.node] += tmpl.task_demands[tp.task];
        for (const auto& h : emb->schedule) {
            if (h.slot < 0 || h.slot >= net.slots_per_step() || h.link >= tmpl.links.size()) continue;
            if (h.sender >= P || h.receiver >= P) continue;
            slots[static_cast<std::size_t>(h.slot)].push_back(
                {h.sender, h.receiver, tmpl.links[h.link].rate, emb->vnr_uid, h.link});
        }
    }

    for (std::size_t p = 0; p < P; ++p) {
        const double cap = net.node(p).capacity;
        if (load[p] > cap + capacity_tolerance * std::max(1.0, cap)) {
            std::ostringstream os;
            os << "node " << p << " load " << load[p] << " exceeds capacity " << cap;
            out.push_back({ViolationKind::capacity, os.str()});
        }
    }

    for (std::size_t t = 0; t < slots.size(); ++t) {
        const auto& entries = slots[t];
        std::vector<NodeId> senders;
        std::vector<NodeId> receivers;
        for (const auto& en : entries) {
            senders.push_back(en.sender);
            receivers.push_back(en.receiver);
        }
        std::sort(senders.begin(), senders.end());
        std::sort(receivers.begin(), receivers.end());
        for (std::size_t k = 1; k < senders.size(); ++k) {
            if (senders[k] == senders[k - 1])
                out.push_back({ViolationKind::duplicate_sender,
                               "slot " + std::to_string(t) + ": node " + std::to_string(senders[k]) + " sends twice"});
        }
        for (NodeId s : senders) {
            if (std::binary_search(receivers.begin(), receivers.end(), s))
                out.push_back({ViolationKind::half_duplex,
                               "slot " + std::to_string(t) + ": node " + std::to_string(s) + " sends and receives"});
        }
        for (const auto& en : entries) {
            const double r_max = max_rate(net, en.sender, en.receiver, senders);
            if (en.rate > r_max) {
                std::ostringstream os;
                os << "slot " << t << ": vnr " << en.uid << " link " << en.link << " " << en.sender << "->"
                   << en.receiver << " needs " << en.rate << " bit/s, achievable " << r_max;
                out.push_back({ViolationKind::rate, os.str()});
            }
        }
    }
}

}  // namespace detail

/// Checks `embedding` as an addition to `state`: exactly-once placement, node capacities over all
/// running requests, per-slot rate requirements under joint interference, half-duplex, route
/// continuity and the hop/schedule bijection. Returns every violation found.
inline Violations validate(const NetworkState& state, const Embedding& embedding) {
    Violations out;
    const auto& templates = state.templates();
    if (embedding.template_id < 0 || static_cast<std::size_t>(embedding.template_id) >= templates.size()) {
        out.push_back({ViolationKind::unknown_template, "template " + std::to_string(embedding.template_id)});
        return out;
    }
    if (state.is_active(embedding.vnr_uid)) {
        out.push_back({ViolationKind::duplicate_vnr, "vnr " + std::to_string(embedding.vnr_uid) + " already running"});
        return out;
    }
    detail::check_structure(state.network(), templates.at(embedding.template_id), embedding, out);

    std::vector<const Embedding*> all;
    for (const auto& a : state.active()) all.push_back(&a.embedding);
    all.push_back(&embedding);
    detail::check_joint(state.network(), templates, all, out);
    return out;
}

/// Re-checks every running request plus consistency of the cached residuals and slot loads.
inline Violations validate_state(const NetworkState& state) {
    Violations out;
    const auto& net = state.network();
    std::vector<const Embedding*> all;
    std::vector<double> load(net.size(), 0.0);
    for (const auto& a : state.active()) {
        const auto& tmpl = state.templates().at(a.vnr.template_id);
        detail::check_structure(net, tmpl, a.embedding, out);
        all.push_back(&a.embedding);
        for (const auto& tp : a.embedding.placement) load[tp.node] += tmpl.task_demands[tp.task];
    }
    detail::check_joint(net, state.templates(), all, out);

    for (std::size_t p = 0; p < net.size(); ++p) {
        const double expect = net.node(p).capacity - load[p];
        if (std::abs(state.residual(p) - expect) > 1e-9 * std::max(1.0, net.node(p).capacity))
            out.push_back({ViolationKind::capacity, "residual cache mismatch at node " + std::to_string(p)});
    }
    std::size_t cached = 0;
    for (const auto& s : state.slots()) cached += s.size();
    std::size_t scheduled = 0;
    for (const auto& a : state.active()) scheduled += a.embedding.schedule.size();
    if (cached != scheduled) out.push_back({ViolationKind::schedule, "slot cache size mismatch"});
    return out;
}

// ---------------------------------------------------------------------------
// First-fit constructive heuristic

enum class EmbedFailure { none, placement, routing, scheduling };

inline const char* to_string(EmbedFailure f) {
    switch (f) {
        case EmbedFailure::none: return "none";
        case EmbedFailure::placement: return "placement";
        case EmbedFailure::routing: return "routing";
        case EmbedFailure::scheduling: return "scheduling";
    }
    return "?";
}

struct EmbedResult {
    std::optional<Embedding> embedding;
    EmbedFailure failure = EmbedFailure::none;

    bool feasible() const noexcept { return embedding.has_value(); }
    explicit operator bool() const noexcept { return feasible(); }
};

inline constexpr int default_retry_budget = 10;

/// Fewest-hop path from `from` to `to` over directed pairs whose interference-free rate can
/// carry `rate`. Neighbors are expanded in ascending id order. Empty if unreachable.
inline std::vector<NodeId> shortest_route(const WirelessNetwork& net, NodeId from, NodeId to, double rate) {
    if (from == to) return {from};
    const std::size_t P = net.size();
    std::vector<NodeId> parent(P, P);
    std::vector<bool> seen(P, false);
    std::queue<NodeId> frontier;
    frontier.push(from);
    seen[from] = true;
    while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        for (NodeId v = 0; v < P; ++v) {
            if (seen[v] || v == u || max_rate_alone(net, u, v) < rate) continue;
            seen[v] = true;
            parent[v] = u;
            if (v == to) {
                std::vector<NodeId> path{to};
                for (NodeId n = to; n != from;) {
                    n = parent[n];
                    path.push_back(n);
                }
                std::reverse(path.begin(), path.end());
                return path;
            }
            frontier.push(v);
        }
    }
    return {};
}

namespace detail {

struct PendingTx {
    NodeId sender;
    NodeId receiver;
    double rate;
};

/// Whether `tx` can join `slot` without breaking half-duplex, sender uniqueness or the rate
/// requirement of any transmission in the slot (including its own).
inline bool fits_in_slot(const WirelessNetwork& net, const std::vector<PendingTx>& slot, const PendingTx& tx) {
    for (const auto& o : slot) {
        if (o.sender == tx.sender || o.receiver == tx.sender || o.sender == tx.receiver) return false;
    }
    std::vector<NodeId> senders;
    senders.reserve(slot.size() + 1);
    for (const auto& o : slot) senders.push_back(o.sender);
    senders.push_back(tx.sender);
    std::sort(senders.begin(), senders.end());
    if (max_rate(net, tx.sender, tx.receiver, senders) < tx.rate) return false;
    for (const auto& o : slot)
        if (max_rate(net, o.sender, o.receiver, senders) < o.rate) return false;
    return true;
}

}  // namespace detail

/// One first-fit embedding attempt for `vnr` on top of `state`. Does not modify the state.
///
/// Tasks are placed in order on uniformly random nodes with enough residual capacity (each task
/// gets `retry_budget` resamples), links are routed over fewest-hop paths, then hops are assigned
/// in topological link order to the lowest slot that keeps every co-slot transmission feasible.
inline EmbedResult try_embed(const NetworkState& state, const VnrInstance& vnr, Rng& rng,
                             int retry_budget = default_retry_budget) {
    if (state.is_active(vnr.uid)) throw std::logic_error("try_embed: VNR already running");
    const auto& net = state.network();
    const auto& tmpl = state.templates().at(vnr.template_id);
    const std::size_t P = net.size();

    Embedding emb;
    emb.vnr_uid = vnr.uid;
    emb.template_id = vnr.template_id;

    std::vector<double> residual = state.residuals();
    std::vector<NodeId> host(tmpl.task_count(), P);
    for (TaskIndex b = 0; b < tmpl.task_count(); ++b) {
        const double need = tmpl.task_demands[b];
        for (int attempt = 0; attempt <= retry_budget; ++attempt) {
            const NodeId p = rng.uniform_int<NodeId>(0, P - 1);
            if (residual[p] >= need) {
                host[b] = p;
                residual[p] -= need;
                break;
            }
        }
        if (host[b] == P) return {std::nullopt, EmbedFailure::placement};
        emb.placement.push_back({b, host[b]});
    }

    emb.routes.resize(tmpl.links.size());
    for (LinkIndex e = 0; e < tmpl.links.size(); ++e) {
        const auto& link = tmpl.links[e];
        emb.routes[e] = shortest_route(net, host[link.source], host[link.target], link.rate);
        if (emb.routes[e].empty()) return {std::nullopt, EmbedFailure::routing};
    }

    std::vector<std::vector<detail::PendingTx>> slots(static_cast<std::size_t>(net.slots_per_step()));
    for (int t = 0; t < net.slots_per_step(); ++t)
        for (const auto& tx : state.slot(t)) slots[static_cast<std::size_t>(t)].push_back({tx.sender, tx.receiver, tx.required_rate});

    for (LinkIndex e : tmpl.topological_links()) {
        const auto& path = emb.routes[e];
        for (std::size_t k = 1; k < path.size(); ++k) {
            const detail::PendingTx tx{path[k - 1], path[k], tmpl.links[e].rate};
            bool assigned = false;
            for (int t = 0; t < net.slots_per_step(); ++t) {
                auto& slot = slots[static_cast<std::size_t>(t)];
                if (!detail::fits_in_slot(net, slot, tx)) continue;
                slot.push_back(tx);
                emb.schedule.push_back({t, tx.sender, tx.receiver, e});
                assigned = true;
                break;
            }
            if (!assigned) return {std::nullopt, EmbedFailure::scheduling};
        }
    }
    return {std::move(emb), EmbedFailure::none};
}

}  // namespace vne_admit
