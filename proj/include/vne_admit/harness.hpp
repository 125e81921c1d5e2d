#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "vne_admit/agents.hpp"
#include "vne_admit/env.hpp"
#include "vne_admit/rng.hpp"

namespace vne_admit {

// ---------------------------------------------------------------------------
// Formatting helpers

/// Shortest decimal text that parses back to exactly `v`; "nan" for NaN.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Parallel execution

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(0..count-1) on up to `jobs` threads. Results must be written by index so the outcome
/// does not depend on scheduling. The first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Metrics

struct RunMetrics {
    std::size_t run_id = 0;
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double acceptance_rate = 0.0;
    double fn_rate = 0.0;
    double mean_reward = 0.0;
    double mean_tp_priority = std::numeric_limits<double>::quiet_NaN();
    double mean_fn_priority = std::numeric_limits<double>::quiet_NaN();
};

/// Component-wise medians over runs. Priorities skip runs that had no TP (resp. FN).
struct MedianMetrics {
    std::size_t runs = 0;
    double steps = 0, tp = 0, fp = 0, fn = 0, tn = 0;
    double acceptance_rate = 0.0;
    double fn_rate = 0.0;
    double mean_reward = 0.0;
    double mean_tp_priority = std::numeric_limits<double>::quiet_NaN();
    double mean_fn_priority = std::numeric_limits<double>::quiet_NaN();
};

inline double median(std::vector<double> xs) {
    std::erase_if(xs, [](double x) { return std::isnan(x); });
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline MedianMetrics median_of(const std::vector<RunMetrics>& runs) {
    auto col = [&](auto getter) {
        std::vector<double> v;
        v.reserve(runs.size());
        for (const auto& r : runs) v.push_back(static_cast<double>(getter(r)));
        return median(std::move(v));
    };
    MedianMetrics m;
    m.runs = runs.size();
    m.steps = col([](const RunMetrics& r) { return r.steps; });
    m.tp = col([](const RunMetrics& r) { return r.tp; });
    m.fp = col([](const RunMetrics& r) { return r.fp; });
    m.fn = col([](const RunMetrics& r) { return r.fn; });
    m.tn = col([](const RunMetrics& r) { return r.tn; });
    m.acceptance_rate = col([](const RunMetrics& r) { return r.acceptance_rate; });
    m.fn_rate = col([](const RunMetrics& r) { return r.fn_rate; });
    m.mean_reward = col([](const RunMetrics& r) { return r.mean_reward; });
    m.mean_tp_priority = col([](const RunMetrics& r) { return r.mean_tp_priority; });
    m.mean_fn_priority = col([](const RunMetrics& r) { return r.mean_fn_priority; });
    return m;
}

/// TP / FN counts over the (lifetime, priority) grid.
class Heatmap {
public:
    Heatmap() = default;
    Heatmap(int lifetime_min, int lifetime_max, int priority_min, int priority_max)
        : dmin_(lifetime_min), dmax_(lifetime_max), lmin_(priority_min), lmax_(priority_max),
          tp_(cells(), 0), fn_(cells(), 0) {}

    static Heatmap for_config(const EnvConfig& cfg) {
        return Heatmap(cfg.vnr.lifetime_min, cfg.vnr.lifetime_max, cfg.vnr.priority_min, cfg.vnr.priority_max);
    }

    void record(int lifetime, int priority, DecisionLabel label) {
        if (label != DecisionLabel::true_positive && label != DecisionLabel::false_negative) return;
        const auto k = index(lifetime, priority);
        (label == DecisionLabel::true_positive ? tp_ : fn_)[k] += 1;
    }

    void merge(const Heatmap& o) {
        if (o.dmin_ != dmin_ || o.dmax_ != dmax_ || o.lmin_ != lmin_ || o.lmax_ != lmax_)
            throw std::invalid_argument("Heatmap::merge: grids differ");
        for (std::size_t k = 0; k < tp_.size(); ++k) {
            tp_[k] += o.tp_[k];
            fn_[k] += o.fn_[k];
        }
    }

    std::int64_t tp(int lifetime, int priority) const { return tp_[index(lifetime, priority)]; }
    std::int64_t fn(int lifetime, int priority) const { return fn_[index(lifetime, priority)]; }
    std::int64_t total_tp() const { return std::accumulate(tp_.begin(), tp_.end(), std::int64_t{0}); }
    std::int64_t total_fn() const { return std::accumulate(fn_.begin(), fn_.end(), std::int64_t{0}); }

    int lifetime_min() const noexcept { return dmin_; }
    int lifetime_max() const noexcept { return dmax_; }
    int priority_min() const noexcept { return lmin_; }
    int priority_max() const noexcept { return lmax_; }

    /// `delta,lambda,tp_count,fn_count`, one row per grid cell.
    void write_csv(std::ostream& os) const {
        os << "delta,lambda,tp_count,fn_count\n";
        for (int d = dmin_; d <= dmax_; ++d)
            for (int l = lmin_; l <= lmax_; ++l) os << d << ',' << l << ',' << tp(d, l) << ',' << fn(d, l) << '\n';
    }

private:
    std::size_t cells() const {
        return static_cast<std::size_t>(dmax_ - dmin_ + 1) * static_cast<std::size_t>(lmax_ - lmin_ + 1);
    }
    std::size_t index(int d, int l) const {
        if (d < dmin_ || d > dmax_ || l < lmin_ || l > lmax_) throw std::out_of_range("Heatmap: cell outside grid");
        return static_cast<std::size_t>(d - dmin_) * static_cast<std::size_t>(lmax_ - lmin_ + 1) +
               static_cast<std::size_t>(l - lmin_);
    }

    int dmin_ = 0, dmax_ = -1, lmin_ = 0, lmax_ = -1;
    std::vector<std::int64_t> tp_;
    std::vector<std::int64_t> fn_;
};

struct RunResult {
    RunMetrics metrics;
    Heatmap heatmap;
};

/// One evaluation run of a frozen policy.
inline RunResult run_episode(const Policy& policy, const EnvConfig& cfg, std::int64_t steps, std::uint64_t seed,
                             std::size_t run_id = 0, std::ostream* trace = nullptr) {
    EnvConfig c = cfg;
    c.episode_steps = static_cast<int>(steps);
    Environment env(c);
    if (trace) env.set_trace(trace);
    env.reset(seed);

    RunResult out{RunMetrics{}, Heatmap::for_config(c)};
    auto& m = out.metrics;
    m.run_id = run_id;
    m.seed = seed;
    m.steps = steps;
    double reward = 0.0, tp_priority = 0.0, fn_priority = 0.0;
    while (!env.done()) {
        const auto o = env.step(policy.decide(env.observation()));
        reward += o.reward;
        out.heatmap.record(o.info.vnr.lifetime, o.info.vnr.priority, o.label);
        switch (o.label) {
            case DecisionLabel::true_positive:
                ++m.tp;
                tp_priority += o.info.vnr.priority;
                break;
            case DecisionLabel::false_positive: ++m.fp; break;
            case DecisionLabel::false_negative:
                ++m.fn;
                fn_priority += o.info.vnr.priority;
                break;
            case DecisionLabel::true_negative: ++m.tn; break;
        }
    }
    const double n = static_cast<double>(steps);
    m.acceptance_rate = static_cast<double>(m.tp) / n;
    m.fn_rate = static_cast<double>(m.fn) / n;
    m.mean_reward = reward / n;
    if (m.tp > 0) m.mean_tp_priority = tp_priority / static_cast<double>(m.tp);
    if (m.fn > 0) m.mean_fn_priority = fn_priority / static_cast<double>(m.fn);
    return out;
}

struct EvalReport {
    std::vector<RunMetrics> runs;
    MedianMetrics median;
    Heatmap heatmap;  // summed over runs
};

inline std::uint64_t run_seed(std::uint64_t base_seed, std::size_t run) { return derive_seed(base_seed, run); }

/// `runs` independent runs; run k is seeded from (base_seed, k) and the result does not depend
/// on `jobs`.
inline EvalReport evaluate(const Policy& policy, const EnvConfig& cfg, std::size_t runs, std::int64_t steps,
                           std::uint64_t base_seed, unsigned jobs = 1) {
    if (runs == 0) throw std::invalid_argument("evaluate: runs must be >= 1");
    if (steps < 1) throw std::invalid_argument("evaluate: steps must be >= 1");
    cfg.validate();
    std::vector<RunResult> results(runs);
    parallel_for(runs, jobs, [&](std::size_t k) { results[k] = run_episode(policy, cfg, steps, run_seed(base_seed, k), k); });

    EvalReport rep;
    rep.heatmap = Heatmap::for_config(cfg);
    for (auto& r : results) {
        rep.runs.push_back(r.metrics);
        rep.heatmap.merge(r.heatmap);
    }
    rep.median = median_of(rep.runs);
    return rep;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* run_csv_header =
    "run_id,seed,steps,tp,fp,fn,tn,acceptance_rate,fn_rate,mean_reward,mean_tp_priority,mean_fn_priority";

inline void write_run_csv(std::ostream& os, const std::vector<RunMetrics>& runs) {
    os << run_csv_header << '\n';
    for (const auto& r : runs) {
        os << r.run_id << ',' << r.seed << ',' << r.steps << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << r.tn
           << ',' << format_number(r.acceptance_rate) << ',' << format_number(r.fn_rate) << ','
           << format_number(r.mean_reward) << ',' << format_number(r.mean_tp_priority) << ','
           << format_number(r.mean_fn_priority) << '\n';
    }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

/// Inverse of write_run_csv.
inline std::vector<RunMetrics> read_run_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != run_csv_header) throw std::invalid_argument("run CSV: unexpected header");
    std::vector<RunMetrics> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 12) throw std::invalid_argument("run CSV: expected 12 fields, got " + std::to_string(f.size()));
        RunMetrics r;
        r.run_id = std::stoull(f[0]);
        r.seed = std::stoull(f[1]);
        r.steps = std::stoll(f[2]);
        r.tp = std::stoll(f[3]);
        r.fp = std::stoll(f[4]);
        r.fn = std::stoll(f[5]);
        r.tn = std::stoll(f[6]);
        r.acceptance_rate = parse_double(f[7]);
        r.fn_rate = parse_double(f[8]);
        r.mean_reward = parse_double(f[9]);
        r.mean_tp_priority = parse_double(f[10]);
        r.mean_fn_priority = parse_double(f[11]);
        out.push_back(r);
    }
    return out;
}

inline std::string summary_line(const MedianMetrics& m) {
    std::ostringstream os;
    os << "median acceptance: " << format_fixed(100.0 * m.acceptance_rate, 1) << "%"
       << "  median FN rate: " << format_fixed(100.0 * m.fn_rate, 1) << "%"
       << "  median TP/FP/FN/TN: " << format_number(m.tp) << '/' << format_number(m.fp) << '/' << format_number(m.fn)
       << '/' << format_number(m.tn) << "  runs: " << m.runs;
    return os.str();
}

}  // namespace vne_admit
