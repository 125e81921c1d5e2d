#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "vne_admit/agents.hpp"
#include "vne_admit/error.hpp"
#include "vne_admit/harness.hpp"

namespace vne_admit {

// ---------------------------------------------------------------------------
// Digests

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
    return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << bytes;
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline std::string file_digest(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

// ---------------------------------------------------------------------------
// Sweep specification

enum class SweepVariable { c_d, c_p, train_dmax };

inline std::string to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::c_d: return "c_d";
        case SweepVariable::c_p: return "c_p";
        case SweepVariable::train_dmax: return "train_dmax";
    }
    return "?";
}

inline SweepVariable parse_sweep_variable(const std::string& s) {
    if (s == "c_d") return SweepVariable::c_d;
    if (s == "c_p") return SweepVariable::c_p;
    if (s == "train_dmax") return SweepVariable::train_dmax;
    throw ConfigError("sweep.variable must be c_d, c_p or train_dmax (got '" + s + "')");
}

struct SweepSpec {
    EnvConfig env;  // fixed parameters; the swept variable overrides one field per agent
    QLearnerConfig learner;
    SweepVariable variable = SweepVariable::c_d;
    std::vector<double> values;
    std::vector<int> eval_dmax{12, 16, 20, 24, 30, 35, 40, 45, 50};
    std::size_t runs = 100;
    std::int64_t steps = 1000;
    std::uint64_t base_seed = 1;
    std::int64_t train_steps = 200'000;
    bool heatmaps = false;
    bool baseline = true;
    std::string spec_text;  // effective spec, stored alongside the results

    void validate() const {
        if (values.empty()) throw ConfigError("sweep.values must not be empty");
        if (eval_dmax.empty()) throw ConfigError("sweep.eval_dmax must not be empty");
        if (runs < 1) throw ConfigError("harness.runs must be >= 1");
        if (steps < 1) throw ConfigError("harness.steps must be >= 1");
        if (train_steps < 0) throw ConfigError("harness.train_steps must be >= 0");
        for (std::size_t i = 0; i < values.size(); ++i) {
            try {
                agent_env(i).validate();
                for (int d : eval_dmax) eval_env(agent_env(i), d).validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("sweep: ") + e.what());
            }
        }
        if (variable == SweepVariable::train_dmax)
            for (double v : values)
                if (v != std::floor(v)) throw ConfigError("sweep.values must be integers for train_dmax");
        try {
            learner.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    /// Training environment of agent i.
    EnvConfig agent_env(std::size_t i) const {
        EnvConfig c = env;
        switch (variable) {
            case SweepVariable::c_d: c.c_d = values.at(i); break;
            case SweepVariable::c_p: c.c_p = values.at(i); break;
            case SweepVariable::train_dmax: c.vnr.lifetime_max = static_cast<int>(values.at(i)); break;
        }
        return c;
    }

    static EnvConfig eval_env(EnvConfig c, int dmax) {
        c.vnr.lifetime_max = dmax;
        return c;
    }

    std::size_t rows() const { return values.size() + (baseline ? 1 : 0); }
    std::string row_label(std::size_t row) const {
        return row < values.size() ? format_number(values[row]) : std::string("baseline");
    }
    std::string row_header() const { return variable == SweepVariable::train_dmax ? "trained_dmax" : to_string(variable); }

    std::uint64_t train_seed(std::size_t agent) const { return derive_seed(base_seed, {1, agent}); }
    std::uint64_t eval_seed(std::size_t row, std::size_t col) const { return derive_seed(base_seed, {2, row, col}); }
};

// ---------------------------------------------------------------------------
// Manifest

inline constexpr const char* manifest_format = "vne-admit-sweep-manifest";
inline constexpr int manifest_format_version = 1;
inline constexpr const char* manifest_name = "manifest.json";
inline constexpr const char* spec_file_name = "spec.cfg";

enum class CellStatus { pending, done, failed };

inline std::string to_string(CellStatus s) {
    switch (s) {
        case CellStatus::pending: return "pending";
        case CellStatus::done: return "done";
        case CellStatus::failed: return "failed";
    }
    return "?";
}

inline CellStatus parse_cell_status(const std::string& s) {
    if (s == "done") return CellStatus::done;
    if (s == "failed") return CellStatus::failed;
    return CellStatus::pending;
}

struct FileEntry {
    std::string path;  // relative to the sweep directory
    std::string digest;
};

struct Cell {
    std::string id;
    std::string kind;  // "train" or "eval"
    std::size_t row = 0;
    std::optional<std::size_t> col;  // eval cells only
    std::uint64_t seed = 0;
    CellStatus status = CellStatus::pending;
    std::string error;
    std::vector<FileEntry> files;
};

struct Manifest {
    std::string spec_digest;
    std::vector<Cell> cells;
    std::vector<FileEntry> reports;

    Cell* find(const std::string& id) {
        for (auto& c : cells)
            if (c.id == id) return &c;
        return nullptr;
    }
    bool complete() const {
        return std::all_of(cells.begin(), cells.end(), [](const Cell& c) { return c.status == CellStatus::done; });
    }
};

inline nlohmann::json to_json(const FileEntry& f) { return {{"path", f.path}, {"sha256", f.digest}}; }

inline nlohmann::json to_json(const SweepSpec& spec, const Manifest& m) {
    using nlohmann::json;
    json cells = json::array();
    for (const auto& c : m.cells) {
        json j = {{"id", c.id}, {"kind", c.kind}, {"row", spec.row_label(c.row)}, {"seed", c.seed}, {"status", to_string(c.status)}};
        if (c.col) j["eval_dmax"] = spec.eval_dmax[*c.col];
        if (!c.error.empty()) j["error"] = c.error;
        json files = json::array();
        for (const auto& f : c.files) files.push_back(to_json(f));
        j["files"] = files;
        cells.push_back(j);
    }
    json reports = json::array();
    for (const auto& f : m.reports) reports.push_back(to_json(f));
    return {{"format", manifest_format},
            {"version", manifest_format_version},
            {"spec", {{"path", spec_file_name}, {"sha256", m.spec_digest}}},
            {"variable", to_string(spec.variable)},
            {"base_seed", spec.base_seed},
            {"cells", cells},
            {"reports", reports}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != manifest_format || j.value("version", 0) != manifest_format_version)
        throw std::runtime_error("not a sweep manifest (unknown format or version)");
    Manifest m;
    m.spec_digest = j.at("spec").at("sha256").get<std::string>();
    for (const auto& jc : j.at("cells")) {
        Cell c;
        c.id = jc.at("id").get<std::string>();
        c.kind = jc.at("kind").get<std::string>();
        c.seed = jc.at("seed").get<std::uint64_t>();
        c.status = parse_cell_status(jc.at("status").get<std::string>());
        c.error = jc.value("error", "");
        for (const auto& f : jc.at("files")) c.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
        m.cells.push_back(std::move(c));
    }
    for (const auto& f : j.at("reports")) m.reports.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
    return m;
}

inline Manifest read_manifest(const std::filesystem::path& dir) {
    try {
        return manifest_from_json(nlohmann::json::parse(read_file(dir / manifest_name)));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt manifest in " + dir.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Layout of a sweep directory

inline std::string policy_path(std::size_t agent) { return "policies/agent_" + std::to_string(agent) + ".json"; }
inline std::string train_log_path(std::size_t agent) { return "policies/agent_" + std::to_string(agent) + ".log.csv"; }

inline std::string row_stem(const SweepSpec& spec, std::size_t row) {
    return row < spec.values.size() ? "agent_" + std::to_string(row) : std::string("baseline");
}
inline std::string runs_path(const SweepSpec& spec, std::size_t row, std::size_t col) {
    return "runs/" + row_stem(spec, row) + "_dmax" + std::to_string(spec.eval_dmax[col]) + ".csv";
}
inline std::string heatmap_path(const SweepSpec& spec, std::size_t row, std::size_t col) {
    return "heatmaps/" + row_stem(spec, row) + "_dmax" + std::to_string(spec.eval_dmax[col]) + ".csv";
}

inline std::string train_cell_id(std::size_t agent) { return "train/" + std::to_string(agent); }
inline std::string eval_cell_id(const SweepSpec& spec, std::size_t row, std::size_t col) {
    return "eval/" + row_stem(spec, row) + "/" + std::to_string(spec.eval_dmax[col]);
}

inline std::string train_log_csv(const std::vector<TrainLogEntry>& log) {
    std::ostringstream os;
    os << "step,mean_reward,tp,fp,fn,tn,epsilon,loss\n";
    for (const auto& e : log)
        os << e.step << ',' << format_number(e.mean_reward) << ',' << e.tp << ',' << e.fp << ',' << e.fn << ',' << e.tn
           << ',' << format_number(e.epsilon) << ',' << format_number(e.loss) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Reports

struct SweepTable {
    std::vector<std::string> row_labels;
    std::vector<int> eval_dmax;
    std::vector<std::vector<MedianMetrics>> cells;  // [row][col]
};

inline std::string matrix_csv(const SweepSpec& spec, const SweepTable& t, double MedianMetrics::*field) {
    std::ostringstream os;
    os << spec.row_header();
    for (int d : t.eval_dmax) os << ',' << d;
    os << '\n';
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        os << t.row_labels[r];
        for (const auto& m : t.cells[r]) os << ',' << format_fixed(100.0 * (m.*field), 1);
        os << '\n';
    }
    return os.str();
}

inline std::string summary_csv(const SweepSpec& spec, const SweepTable& t) {
    std::ostringstream os;
    os << spec.row_header()
       << ",eval_dmax,runs,acceptance_rate,fn_rate,mean_reward,mean_tp_priority,mean_fn_priority,tp,fp,fn,tn\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r)
        for (std::size_t c = 0; c < t.eval_dmax.size(); ++c) {
            const auto& m = t.cells[r][c];
            os << t.row_labels[r] << ',' << t.eval_dmax[c] << ',' << m.runs << ',' << format_number(m.acceptance_rate)
               << ',' << format_number(m.fn_rate) << ',' << format_number(m.mean_reward) << ','
               << format_number(m.mean_tp_priority) << ',' << format_number(m.mean_fn_priority) << ','
               << format_number(m.tp) << ',' << format_number(m.fp) << ',' << format_number(m.fn) << ','
               << format_number(m.tn) << '\n';
        }
    return os.str();
}

/// Median table rebuilt from the stored per-run CSVs only.
inline SweepTable load_table(const SweepSpec& spec, const std::filesystem::path& dir) {
    SweepTable t;
    t.eval_dmax = spec.eval_dmax;
    for (std::size_t r = 0; r < spec.rows(); ++r) {
        t.row_labels.push_back(spec.row_label(r));
        std::vector<MedianMetrics> row;
        for (std::size_t c = 0; c < spec.eval_dmax.size(); ++c) {
            std::istringstream in(read_file(dir / runs_path(spec, r, c)));
            row.push_back(median_of(read_run_csv(in)));
        }
        t.cells.push_back(std::move(row));
    }
    return t;
}

/// Writes matrix.csv, fn_matrix.csv and summary.csv; returns their manifest entries.
inline std::vector<FileEntry> write_reports(const SweepSpec& spec, const std::filesystem::path& dir) {
    const auto t = load_table(spec, dir);
    const std::vector<std::pair<std::string, std::string>> outputs{
        {"matrix.csv", matrix_csv(spec, t, &MedianMetrics::acceptance_rate)},
        {"fn_matrix.csv", matrix_csv(spec, t, &MedianMetrics::fn_rate)},
        {"summary.csv", summary_csv(spec, t)},
    };
    std::vector<FileEntry> out;
    for (const auto& [name, text] : outputs) {
        write_file(dir / name, text);
        out.push_back({name, sha256_hex(text)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Running a sweep

struct SweepOptions {
    unsigned jobs = 1;
    bool resume = false;
    std::function<void(const std::string&)> progress;  // called once per finished cell
};

struct SweepOutcome {
    Manifest manifest;
    bool complete() const { return manifest.complete(); }
};

inline bool cell_intact(const Cell& c, const std::filesystem::path& dir) {
    if (c.status != CellStatus::done) return false;
    for (const auto& f : c.files) {
        if (!std::filesystem::exists(dir / f.path) || file_digest(dir / f.path) != f.digest) return false;
    }
    return true;
}

/// Trains one agent per sweep value, evaluates every agent (and the baseline) at every eval
/// lifetime bound, and writes per-run CSVs, optional heatmaps, reports and the manifest.
/// Cell failures are recorded in the manifest rather than thrown.
inline SweepOutcome run_sweep(const SweepSpec& spec, const std::filesystem::path& dir, const SweepOptions& opt = {}) {
    spec.validate();
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    const std::string spec_digest = sha256_hex(spec.spec_text);
    Manifest previous;
    if (opt.resume && fs::exists(dir / manifest_name)) {
        previous = read_manifest(dir);
        if (previous.spec_digest != spec_digest)
            throw ConfigError("cannot resume " + dir.string() + ": the sweep spec differs from the one it was started with");
    }
    write_file(dir / spec_file_name, spec.spec_text);

    Manifest m;
    m.spec_digest = spec_digest;
    for (std::size_t i = 0; i < spec.values.size(); ++i)
        m.cells.push_back(Cell{train_cell_id(i), "train", i, std::nullopt, spec.train_seed(i), CellStatus::pending, {}, {}});
    for (std::size_t r = 0; r < spec.rows(); ++r)
        for (std::size_t c = 0; c < spec.eval_dmax.size(); ++c)
            m.cells.push_back(Cell{eval_cell_id(spec, r, c), "eval", r, c, spec.eval_seed(r, c), CellStatus::pending, {}, {}});

    if (opt.resume) {
        for (auto& c : m.cells) {
            const Cell* old = previous.find(c.id);
            if (old && old->seed == c.seed && cell_intact(*old, dir)) {
                c.status = CellStatus::done;
                c.files = old->files;
            }
        }
    }

    std::mutex progress_mutex;
    auto report = [&](const Cell& c) {
        if (!opt.progress) return;
        std::lock_guard lock(progress_mutex);
        opt.progress(c.id + ": " + to_string(c.status) + (c.error.empty() ? "" : " (" + c.error + ")"));
    };
    auto save_text = [&](const std::string& rel, const std::string& text) {
        write_file(dir / rel, text);
        return FileEntry{rel, sha256_hex(text)};
    };

    // Training cells: agents in parallel, each trained sequentially.
    std::vector<Cell*> train_cells;
    for (auto& c : m.cells)
        if (c.kind == "train" && c.status != CellStatus::done) train_cells.push_back(&c);
    parallel_for(train_cells.size(), opt.jobs, [&](std::size_t k) {
        Cell& c = *train_cells[k];
        try {
            auto res = train(spec.agent_env(c.row), spec.learner, spec.train_steps, c.seed);
            c.files = {save_text(policy_path(c.row), to_json(*res.policy).dump()),
                       save_text(train_log_path(c.row), train_log_csv(res.log))};
            c.status = CellStatus::done;
        } catch (const std::exception& e) {
            c.status = CellStatus::failed;
            c.error = e.what();
        }
        report(c);
    });

    // Evaluation cells.
    std::vector<std::unique_ptr<QLearner>> agents(spec.values.size());
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        const Cell* tc = m.find(train_cell_id(i));
        if (tc->status == CellStatus::done) agents[i] = load_policy((dir / policy_path(i)).string());
    }
    const AlwaysAccept baseline;
    std::vector<Cell*> eval_cells;
    for (auto& c : m.cells)
        if (c.kind == "eval" && c.status != CellStatus::done) eval_cells.push_back(&c);
    parallel_for(eval_cells.size(), opt.jobs, [&](std::size_t k) {
        Cell& c = *eval_cells[k];
        const std::size_t col = *c.col;
        try {
            const bool is_agent = c.row < spec.values.size();
            if (is_agent && !agents[c.row]) throw std::runtime_error("agent " + std::to_string(c.row) + " was not trained");
            const Policy& policy = is_agent ? static_cast<const Policy&>(*agents[c.row]) : baseline;
            const EnvConfig env = SweepSpec::eval_env(is_agent ? spec.agent_env(c.row) : spec.env, spec.eval_dmax[col]);
            const auto rep = evaluate(policy, env, spec.runs, spec.steps, c.seed, 1);
            std::ostringstream runs;
            write_run_csv(runs, rep.runs);
            c.files = {save_text(runs_path(spec, c.row, col), runs.str())};
            if (spec.heatmaps) {
                std::ostringstream hm;
                rep.heatmap.write_csv(hm);
                c.files.push_back(save_text(heatmap_path(spec, c.row, col), hm.str()));
            }
            c.status = CellStatus::done;
            c.error.clear();
        } catch (const std::exception& e) {
            c.status = CellStatus::failed;
            c.error = e.what();
        }
        report(c);
    });

    if (m.complete()) m.reports = write_reports(spec, dir);
    write_file(dir / manifest_name, to_json(spec, m).dump(2) + "\n");
    return SweepOutcome{std::move(m)};
}

/// Raised when a stored artifact no longer matches its manifest digest.
struct DigestMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Checks every file listed in the manifest (and the stored spec) against its digest.
inline void verify_digests(const Manifest& m, const std::filesystem::path& dir) {
    auto check = [&](const FileEntry& f) {
        if (!std::filesystem::exists(dir / f.path)) throw DigestMismatch("missing file " + f.path);
        if (file_digest(dir / f.path) != f.digest) throw DigestMismatch("digest changed for " + f.path);
    };
    check({spec_file_name, m.spec_digest});
    for (const auto& c : m.cells)
        for (const auto& f : c.files) check(f);
}

}  // namespace vne_admit
