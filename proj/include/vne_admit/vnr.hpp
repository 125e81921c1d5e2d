#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vne_admit/rng.hpp"

namespace vne_admit {

using TaskIndex = std::size_t;
using LinkIndex = std::size_t;

struct VirtualLink {
    TaskIndex source = 0;
    TaskIndex target = 0;
    double rate = 0.0;  // required bit/s

    bool operator==(const VirtualLink&) const = default;
};

/// Fixed topology of a request type: task demands plus rate-constrained links forming a DAG.
struct VnrTemplate {
    int id = 0;
    std::vector<double> task_demands;
    std::vector<VirtualLink> links;

    std::size_t task_count() const noexcept { return task_demands.size(); }
    double total_demand() const { return std::accumulate(task_demands.begin(), task_demands.end(), 0.0); }

    /// Links in topological order of their source tasks; ties keep declaration order.
    /// Throws if the link graph has a cycle.
    std::vector<LinkIndex> topological_links() const {
        const std::size_t n = task_count();
        std::vector<std::size_t> indegree(n, 0);
        for (const auto& l : links) ++indegree[l.target];
        std::vector<std::size_t> task_rank(n, n);
        std::vector<bool> done(n, false);
        for (std::size_t rank = 0; rank < n; ++rank) {
            std::size_t pick = n;
            for (std::size_t b = 0; b < n; ++b) {
                if (!done[b] && indegree[b] == 0) {
                    pick = b;
                    break;
                }
            }
            if (pick == n) throw std::invalid_argument("template " + std::to_string(id) + ": link graph has a cycle");
            done[pick] = true;
            task_rank[pick] = rank;
            for (const auto& l : links)
                if (l.source == pick) --indegree[l.target];
        }
        std::vector<LinkIndex> order(links.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](LinkIndex a, LinkIndex b) {
            return task_rank[links[a].source] < task_rank[links[b].source];
        });
        return order;
    }

    void validate() const {
        const auto where = "template " + std::to_string(id) + ": ";
        if (task_demands.empty()) throw std::invalid_argument(where + "needs at least one task");
        for (double c : task_demands)
            if (!(c > 0.0)) throw std::invalid_argument(where + "task demands must be > 0");
        for (const auto& l : links) {
            if (l.source >= task_count() || l.target >= task_count())
                throw std::invalid_argument(where + "link endpoint out of range");
            if (l.source == l.target) throw std::invalid_argument(where + "self-loop link");
            if (!(l.rate > 0.0)) throw std::invalid_argument(where + "link rates must be > 0");
        }
        (void)topological_links();
    }

    bool operator==(const VnrTemplate&) const = default;
};

/// The three-task service chain K -> L -> M.
inline VnrTemplate chain_template(int id = 0, double task_demand = 3.0, double link_rate = 2e6) {
    return VnrTemplate{id, {task_demand, task_demand, task_demand}, {{0, 1, link_rate}, {1, 2, link_rate}}};
}

class TemplateRegistry {
public:
    TemplateRegistry() = default;
    explicit TemplateRegistry(std::vector<VnrTemplate> templates) : templates_(std::move(templates)) {
        for (std::size_t k = 0; k < templates_.size(); ++k) {
            templates_[k].validate();
            if (templates_[k].id != static_cast<int>(k))
                throw std::invalid_argument("template ids must be 0..N-1 in registration order");
        }
    }

    std::size_t size() const noexcept { return templates_.size(); }
    bool empty() const noexcept { return templates_.empty(); }
    const VnrTemplate& at(int id) const { return templates_.at(static_cast<std::size_t>(id)); }
    const std::vector<VnrTemplate>& all() const noexcept { return templates_; }

    std::size_t max_links() const {
        std::size_t m = 0;
        for (const auto& t : templates_) m = std::max(m, t.links.size());
        return m;
    }

    double min_total_demand() const {
        double m = 0.0;
        for (const auto& t : templates_) m = (m == 0.0) ? t.total_demand() : std::min(m, t.total_demand());
        return m;
    }

private:
    std::vector<VnrTemplate> templates_;
};

struct VnrInstance {
    std::uint64_t uid = 0;  // arrival index within a run; unique per run
    int template_id = 0;
    int lifetime = 0;       // remaining time steps
    int priority = 0;
    std::int64_t arrival_step = 0;

    bool expired() const noexcept { return lifetime <= 0; }
    bool operator==(const VnrInstance&) const = default;
};

struct VnrGenConfig {
    int lifetime_min = 2;
    int lifetime_max = 30;
    int priority_min = 1;
    int priority_max = 10;
    std::vector<double> template_weights{1.0};

    void validate(std::size_t template_count) const {
        if (lifetime_min < 1 || lifetime_min > lifetime_max)
            throw std::invalid_argument("vnr lifetimes must satisfy 1 <= delta_min <= delta_max");
        if (priority_min > priority_max) throw std::invalid_argument("vnr priorities must satisfy min <= max");
        if (template_weights.size() != template_count)
            throw std::invalid_argument("vnr.template_weights must have one weight per template");
        double sum = 0.0;
        for (double w : template_weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("template weights must be >= 0");
            sum += w;
        }
        if (!(sum > 0.0)) throw std::invalid_argument("template weights must not all be zero");
    }
};

/// Draws one arrival. Consumes only `rng`.
inline VnrInstance generate(const VnrGenConfig& cfg, Rng& rng, std::uint64_t uid = 0, std::int64_t arrival_step = 0) {
    VnrInstance v;
    v.uid = uid;
    v.arrival_step = arrival_step;
    if (cfg.template_weights.size() == 1) {
        v.template_id = 0;
    } else {
        std::discrete_distribution<int> pick(cfg.template_weights.begin(), cfg.template_weights.end());
        v.template_id = pick(rng.engine());
    }
    v.lifetime = rng.uniform_int(cfg.lifetime_min, cfg.lifetime_max);
    v.priority = rng.uniform_int(cfg.priority_min, cfg.priority_max);
    return v;
}

/// One time step of lifetime bookkeeping. Ticking an expired request is a lifecycle bug.
inline VnrInstance tick(VnrInstance v) {
    if (v.lifetime < 1) throw std::logic_error("tick on expired VNR " + std::to_string(v.uid));
    --v.lifetime;
    return v;
}

}  // namespace vne_admit
