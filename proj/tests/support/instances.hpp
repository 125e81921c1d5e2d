#pragma once

// Random networks, templates and partially loaded states for property tests.

#include <memory>
#include <vector>

#include "vne_admit/embedder.hpp"

namespace vne_admit::testing {

struct Instance {
    std::shared_ptr<const TemplateRegistry> templates;
    NetworkState state;
    VnrInstance vnr;
};

/// Random DAG template: links only go from lower to higher task index.
inline VnrTemplate random_template(int id, Rng& rng, std::size_t max_tasks, std::size_t max_links, double min_rate,
                                   double max_rate) {
    VnrTemplate t;
    t.id = id;
    const auto n = rng.uniform_int<std::size_t>(1, max_tasks);
    for (std::size_t b = 0; b < n; ++b) t.task_demands.push_back(rng.uniform_real(0.5, 4.0));
    if (n >= 2) {
        const auto links = rng.uniform_int<std::size_t>(0, max_links);
        for (std::size_t e = 0; e < links; ++e) {
            const auto a = rng.uniform_int<std::size_t>(0, n - 2);
            const auto b = rng.uniform_int<std::size_t>(a + 1, n - 1);
            t.links.push_back({a, b, rng.uniform_real(min_rate, max_rate)});
        }
    }
    return t;
}

inline WirelessNetwork random_network(Rng& rng, std::size_t min_nodes, std::size_t max_nodes, int min_slots,
                                      int max_slots) {
    NetworkConfig cfg;
    cfg.node_count = rng.uniform_int(min_nodes, max_nodes);
    const double side = rng.uniform_real(1.0, 80.0);
    cfg.room = {side, side, rng.uniform_real(1.0, 10.0)};
    cfg.slots_per_step = rng.uniform_int(min_slots, max_slots);
    cfg.capacity = rng.uniform_real(2.0, 10.0);
    cfg.layout_seed = rng.engine()();
    return make_network(cfg);
}

/// Admits random requests through the heuristic until `attempts` arrivals have been tried.
inline void load_state(NetworkState& state, Rng& rng, int attempts, std::uint64_t& next_uid) {
    VnrGenConfig gen;
    gen.template_weights.assign(state.templates().size(), 1.0);
    for (int k = 0; k < attempts; ++k) {
        auto v = generate(gen, rng, next_uid++, k);
        auto res = try_embed(state, v, rng);
        if (res) state.commit(v, std::move(*res.embedding));
    }
}

/// Default-scale-like instance with varied geometry, slot count and templates.
inline Instance random_instance(Rng& rng) {
    auto net = random_network(rng, 3, 8, 1, 8);
    std::vector<VnrTemplate> ts;
    const int n_templates = rng.uniform_int(1, 3);
    for (int k = 0; k < n_templates; ++k) ts.push_back(random_template(k, rng, 4, 4, 0.5e6, 20e6));
    auto reg = std::make_shared<const TemplateRegistry>(ts);
    NetworkState state(std::move(net), reg);
    std::uint64_t uid = 0;
    load_state(state, rng, rng.uniform_int(0, 12), uid);
    VnrGenConfig gen;
    gen.template_weights.assign(reg->size(), 1.0);
    auto v = generate(gen, rng, uid, 0);
    return {reg, std::move(state), v};
}

/// Tiny instance for exhaustive search: at most 4 nodes, 2 slots, 1-link requests.
inline Instance tiny_instance(Rng& rng, int min_slots = 1, int max_slots = 2) {
    auto net = random_network(rng, 2, 4, min_slots, max_slots);
    std::vector<VnrTemplate> ts;
    const int n_templates = rng.uniform_int(1, 2);
    for (int k = 0; k < n_templates; ++k) {
        VnrTemplate t;
        t.id = k;
        t.task_demands = {rng.uniform_real(0.5, 4.0), rng.uniform_real(0.5, 4.0)};
        t.links = {{0, 1, rng.uniform_real(0.5e6, 20e6)}};
        ts.push_back(t);
    }
    auto reg = std::make_shared<const TemplateRegistry>(ts);
    NetworkState state(std::move(net), reg);
    std::uint64_t uid = 0;
    load_state(state, rng, rng.uniform_int(0, 4), uid);
    VnrGenConfig gen;
    gen.template_weights.assign(reg->size(), 1.0);
    auto v = generate(gen, rng, uid, 0);
    return {reg, std::move(state), v};
}

}  // namespace vne_admit::testing
