#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "feddp/datagen.hpp"
#include "feddp/pipeline.hpp"
#include "json.hpp"

// Experiment harness: config parsing, budget sweeps over a (eps, T) grid with
// a seed pool, Pareto-front extraction, elbow scans for choosing k, and
// deterministic CSV/JSON serialization.

namespace feddp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- Config file --------------------------------------------------------
//
// Key/value text with [section] headers, '#' or ';' comments, and
// comma-separated lists. See README for the schema.

using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const std::string t = trim(cell);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + what + ": '" + s + "'");
    }
}

inline long to_long(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + what + ": '" + s + "'");
    }
}

}  // namespace detail

inline ConfigSections parse_config_text(std::istream& is) {
    ConfigSections sections;
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: unterminated section header at line " +
                                  std::to_string(lineno));
            current = detail::trim(line.substr(1, line.size() - 2));
            if (current.empty()) throw ConfigError("config: empty section name");
            sections[current];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        if (current.empty()) throw ConfigError("config: key outside any section");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
        sections[current][key] = value;
    }
    return sections;
}

struct DataConfig {
    std::string kind = "mixture";  // mixture | import
    std::string profile = "desk";  // desk | reference | custom
    std::size_t n = 10000;
    std::size_t clients = 20;
    std::size_t k_true = 5;
    std::size_t d = 20;
    double sigma = 0.25;
    PartitionScheme scheme = PartitionScheme::kIid;
    std::size_t server_per_component = 20;
    std::size_t server_ood = 100;
    std::size_t missing = 0;
    std::string path;
    MatrixFileFormat format = MatrixFileFormat::kCsv;
};

struct ExperimentConfig {
    DataConfig data;
    Method method = Method::kFedDpKmeans;
    std::size_t k = 5;
    int restarts = 10;
    std::size_t kfed_local = 0;
    PrivacyUnit unit = PrivacyUnit::kDataPoint;
    double delta_total = 1e-6;
    bool noise = true;
    double init_fraction = 2.0 / 3.0;
    double lloyds_gauss_fraction = 0.75;
    std::optional<std::array<double, 4>> proportions;
    std::optional<InitClipBounds> client_clip;  // unset: calibrated on server data
    std::vector<double> grid_eps{0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
    std::vector<int> grid_t{0, 1, 2};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "out";
    std::string out_format = "csv";  // csv | json | both
};

inline ExperimentConfig experiment_config_from_sections(const ConfigSections& sections) {
    ExperimentConfig cfg;
    const auto known = [&](const std::string& name, std::initializer_list<const char*> keys) {
        const auto it = sections.find(name);
        if (it == sections.end()) return;
        for (const auto& [k, v] : it->second) {
            (void)v;
            if (std::find_if(keys.begin(), keys.end(),
                             [&](const char* s) { return k == s; }) == keys.end())
                throw ConfigError("config: unknown key '" + k + "' in section [" + name + "]");
        }
    };
    known("data", {"kind", "profile", "n", "clients", "k_true", "d", "sigma", "scheme",
                   "server_per_component", "server_ood", "missing", "path", "format"});
    known("method", {"name", "k", "restarts", "k_local"});
    known("privacy", {"unit", "delta", "noise", "init_fraction", "lloyds_gauss_fraction",
                      "proportions", "clip_outer", "clip_weights", "clip_mean", "clip_hist"});
    known("grid", {"eps", "t"});
    known("seeds", {"list"});
    known("output", {"dir", "format"});
    for (const auto& [name, _] : sections) {
        (void)_;
        static const char* ok[] = {"data", "method", "privacy", "grid", "seeds", "output"};
        if (std::find_if(std::begin(ok), std::end(ok),
                         [&](const char* s) { return name == s; }) == std::end(ok))
            throw ConfigError("config: unknown section [" + name + "]");
    }

    const auto get = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
        const auto s = sections.find(sec);
        if (s == sections.end()) return std::nullopt;
        const auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        return k->second;
    };

    if (auto v = get("data", "kind")) cfg.data.kind = *v;
    if (cfg.data.kind != "mixture" && cfg.data.kind != "import")
        throw ConfigError("config: data.kind must be mixture or import");
    if (auto v = get("data", "profile")) cfg.data.profile = *v;
    if (cfg.data.profile != "desk" && cfg.data.profile != "reference" && cfg.data.profile != "custom")
        throw ConfigError("config: data.profile must be desk, reference or custom");
    if (auto v = get("data", "n")) cfg.data.n = static_cast<std::size_t>(detail::to_long(*v, "data.n"));
    if (auto v = get("data", "clients"))
        cfg.data.clients = static_cast<std::size_t>(detail::to_long(*v, "data.clients"));
    if (auto v = get("data", "k_true"))
        cfg.data.k_true = static_cast<std::size_t>(detail::to_long(*v, "data.k_true"));
    if (auto v = get("data", "d")) cfg.data.d = static_cast<std::size_t>(detail::to_long(*v, "data.d"));
    if (auto v = get("data", "sigma")) cfg.data.sigma = detail::to_double(*v, "data.sigma");
    if (auto v = get("data", "scheme")) {
        if (*v == "iid") cfg.data.scheme = PartitionScheme::kIid;
        else if (*v == "by_size") cfg.data.scheme = PartitionScheme::kBySize;
        else throw ConfigError("config: data.scheme must be iid or by_size");
    }
    if (auto v = get("data", "server_per_component"))
        cfg.data.server_per_component =
            static_cast<std::size_t>(detail::to_long(*v, "data.server_per_component"));
    if (auto v = get("data", "server_ood"))
        cfg.data.server_ood = static_cast<std::size_t>(detail::to_long(*v, "data.server_ood"));
    if (auto v = get("data", "missing"))
        cfg.data.missing = static_cast<std::size_t>(detail::to_long(*v, "data.missing"));
    if (auto v = get("data", "path")) cfg.data.path = *v;
    if (auto v = get("data", "format")) {
        if (*v == "csv") cfg.data.format = MatrixFileFormat::kCsv;
        else if (*v == "binary") cfg.data.format = MatrixFileFormat::kBinaryF64;
        else throw ConfigError("config: data.format must be csv or binary");
    }
    if (cfg.data.kind == "import" && cfg.data.path.empty())
        throw ConfigError("config: data.path required when data.kind = import");

    if (auto v = get("method", "name")) {
        try {
            cfg.method = method_from_name(*v);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (auto v = get("method", "k")) cfg.k = static_cast<std::size_t>(detail::to_long(*v, "method.k"));
    if (cfg.k < 1) throw ConfigError("config: method.k must be >= 1");
    if (auto v = get("method", "restarts"))
        cfg.restarts = static_cast<int>(detail::to_long(*v, "method.restarts"));
    if (auto v = get("method", "k_local"))
        cfg.kfed_local = static_cast<std::size_t>(detail::to_long(*v, "method.k_local"));

    if (auto v = get("privacy", "unit")) {
        if (*v == "datapoint") cfg.unit = PrivacyUnit::kDataPoint;
        else if (*v == "client") cfg.unit = PrivacyUnit::kClient;
        else throw ConfigError("config: privacy.unit must be datapoint or client");
    }
    if (auto v = get("privacy", "delta")) cfg.delta_total = detail::to_double(*v, "privacy.delta");
    if (!(cfg.delta_total > 0.0 && cfg.delta_total < 1.0))
        throw ConfigError("config: privacy.delta must lie in (0, 1)");
    if (auto v = get("privacy", "noise")) {
        if (*v == "on") cfg.noise = true;
        else if (*v == "off") cfg.noise = false;
        else throw ConfigError("config: privacy.noise must be on or off");
    }
    if (auto v = get("privacy", "init_fraction"))
        cfg.init_fraction = detail::to_double(*v, "privacy.init_fraction");
    if (auto v = get("privacy", "lloyds_gauss_fraction"))
        cfg.lloyds_gauss_fraction = detail::to_double(*v, "privacy.lloyds_gauss_fraction");
    if (auto v = get("privacy", "proportions")) {
        const auto parts = detail::split_list(*v);
        if (parts.size() != 4) throw ConfigError("config: privacy.proportions needs 4 entries");
        std::array<double, 4> p{};
        for (std::size_t i = 0; i < 4; ++i) p[i] = detail::to_double(parts[i], "privacy.proportions");
        cfg.proportions = p;
    }
    {
        const auto co = get("privacy", "clip_outer");
        const auto cw = get("privacy", "clip_weights");
        const auto cm = get("privacy", "clip_mean");
        const auto ch = get("privacy", "clip_hist");
        const int given = co.has_value() + cw.has_value() + cm.has_value() + ch.has_value();
        if (given != 0 && given != 4)
            throw ConfigError("config: give all four clip_* bounds or none");
        if (given == 4) {
            InitClipBounds b;
            b.outer_product = detail::to_double(*co, "privacy.clip_outer");
            b.weight_histogram = detail::to_double(*cw, "privacy.clip_weights");
            b.cluster_mean = detail::to_double(*cm, "privacy.clip_mean");
            b.cluster_histogram = detail::to_double(*ch, "privacy.clip_hist");
            cfg.client_clip = b;
        }
    }

    if (auto v = get("grid", "eps")) {
        cfg.grid_eps.clear();
        for (const std::string& s : detail::split_list(*v))
            cfg.grid_eps.push_back(detail::to_double(s, "grid.eps"));
    }
    if (cfg.grid_eps.empty()) throw ConfigError("config: grid.eps must be nonempty");
    if (auto v = get("grid", "t")) {
        cfg.grid_t.clear();
        for (const std::string& s : detail::split_list(*v))
            cfg.grid_t.push_back(static_cast<int>(detail::to_long(s, "grid.t")));
    }
    if (cfg.grid_t.empty()) throw ConfigError("config: grid.t must be nonempty");

    if (auto v = get("seeds", "list")) {
        cfg.seeds.clear();
        for (const std::string& s : detail::split_list(*v))
            cfg.seeds.push_back(static_cast<std::uint64_t>(detail::to_long(s, "seeds.list")));
    }
    if (cfg.seeds.empty()) throw ConfigError("config: seeds.list must be nonempty");
    std::vector<std::uint64_t> sorted = cfg.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("config: seeds must be distinct");

    if (auto v = get("output", "dir")) cfg.out_dir = *v;
    if (auto v = get("output", "format")) cfg.out_format = *v;
    if (cfg.out_format != "csv" && cfg.out_format != "json" && cfg.out_format != "both")
        throw ConfigError("config: output.format must be csv, json or both");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    ConfigSections sections = parse_config_text(is);
    return experiment_config_from_sections(sections);
}

// Canonical textual form of a config, hashed into every run record.
inline std::string canonical_config_string(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "kind=" << c.data.kind << ";profile=" << c.data.profile << ";n=" << c.data.n
       << ";m=" << c.data.clients << ";k_true=" << c.data.k_true << ";d=" << c.data.d
       << ";sigma=" << c.data.sigma
       << ";scheme=" << (c.data.scheme == PartitionScheme::kIid ? "iid" : "by_size")
       << ";spc=" << c.data.server_per_component << ";ood=" << c.data.server_ood
       << ";missing=" << c.data.missing << ";path=" << c.data.path
       << ";method=" << method_name(c.method) << ";k=" << c.k << ";restarts=" << c.restarts
       << ";unit=" << (c.unit == PrivacyUnit::kDataPoint ? "datapoint" : "client")
       << ";delta=" << c.delta_total << ";noise=" << (c.noise ? "on" : "off")
       << ";init_fraction=" << c.init_fraction << ";gauss_fraction=" << c.lloyds_gauss_fraction
       << ";eps=";
    for (double e : c.grid_eps) os << e << ",";
    os << ";t=";
    for (int t : c.grid_t) os << t << ",";
    return os.str();
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
    return hash_label(canonical_config_string(c));
}

// ---- Run records and the Pareto front -----------------------------------

struct RunRecord {
    std::string method;
    std::uint64_t seed = 0;
    double grid_eps = 0.0;
    int grid_t = 0;
    double eps_total = 0.0;  // +inf marks non-private methods
    double delta = 0.0;
    double cost = 0.0;  // normalized k-means cost on the full client data
    int rounds = 0;
    bool non_private = false;
    std::uint64_t config_hash = 0;
    double wall_ms = 0.0;  // diagnostic only; never serialized
    // Per-mechanism charges behind eps_total; serialized in the JSON records
    // so the reported total can be recomputed from the record alone.
    std::vector<BudgetLedger::Entry> ledger;

    friend bool operator==(const RunRecord& a, const RunRecord& b) {
        return a.method == b.method && a.seed == b.seed && a.grid_eps == b.grid_eps &&
               a.grid_t == b.grid_t && a.eps_total == b.eps_total && a.delta == b.delta &&
               a.cost == b.cost && a.rounds == b.rounds && a.non_private == b.non_private &&
               a.config_hash == b.config_hash;
    }
};

// Non-dominated subset under (eps_total smaller-better, cost smaller-better),
// ordered by ascending eps_total. Records tied on both coordinates are all
// kept, since neither strictly dominates the other.
inline std::vector<RunRecord> pareto_front(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("pareto_front: empty input");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].eps_total != records[b].eps_total)
            return records[a].eps_total < records[b].eps_total;
        return records[a].cost < records[b].cost;
    });

    std::vector<RunRecord> front;
    double best_prev_eps = std::numeric_limits<double>::infinity();  // min cost at strictly smaller eps
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() &&
               records[order[j]].eps_total == records[order[i]].eps_total)
            ++j;
        const double group_min = records[order[i]].cost;
        for (std::size_t r = i; r < j; ++r) {
            const RunRecord& rec = records[order[r]];
            const bool dominated_across = best_prev_eps <= rec.cost;
            const bool dominated_within = rec.cost > group_min;
            if (!dominated_across && !dominated_within) front.push_back(rec);
        }
        best_prev_eps = std::min(best_prev_eps, group_min);
        i = j;
    }
    return front;
}

// ---- Parallel work pool ---------------------------------------------------

inline int pool_thread_count() {
    if (const char* env = std::getenv("FEDDP_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

template <typename Fn>
inline void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (count == 0) return;
    threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        workers.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (std::thread& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

// ---- Experiment execution -------------------------------------------------

struct ExperimentData {
    ClientPartition partition;
    Points server;
    Points all_points;  // evaluation set (original, unclipped)
};

inline ExperimentData build_experiment_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    ExperimentData data;
    RngStream root(seed);
    if (cfg.data.kind == "import") {
        const Points pts = import_matrix(cfg.data.path, cfg.data.format);
        std::vector<int> labels(pts.size(), 0);
        auto part = partition_clients(pts, labels, cfg.data.clients, cfg.data.scheme,
                                      root.substream("partition"));
        data.partition = std::move(part.partition);
        data.server = pts;  // importer mode reuses the dataset as server data
        data.all_points = pts;
        return data;
    }

    MixtureSpec spec;
    if (cfg.data.profile == "desk") {
        spec = desk_mixture_spec(root.substream("spec"), cfg.data.n, cfg.data.sigma);
    } else if (cfg.data.profile == "reference") {
        spec = reference_mixture_spec(root.substream("spec"));
    } else {
        spec.k = cfg.data.k_true;
        spec.d = cfg.data.d;
        spec.covariance_scale = cfg.data.sigma;
        spec.weights.assign(spec.k, 1.0 / static_cast<double>(spec.k));
        RngStream means = root.substream("spec").substream("means");
        for (std::size_t j = 0; j < spec.k; ++j) {
            Vec mu(spec.d);
            for (double& c : mu) c = means.uniform01();
            spec.means.push_back(std::move(mu));
        }
    }

    const LabeledPoints lp = generate_mixture(spec, cfg.data.n, root.substream("clients"));
    auto part = partition_clients(lp.points, lp.labels, cfg.data.clients, cfg.data.scheme,
                                  root.substream("partition"));
    ScenarioSpec scenario;
    scenario.clients = cfg.data.clients;
    scenario.server_in_dist_per_component = cfg.data.server_per_component;
    scenario.server_ood_count = cfg.data.server_ood;
    for (std::size_t c = 0; c < cfg.data.missing && c < spec.k; ++c)
        scenario.missing_components.push_back(c);
    data.server = make_server_data(spec, scenario, root.substream("server"));
    data.partition = std::move(part.partition);
    data.all_points = data.partition.flatten();
    return data;
}

inline PipelineConfig pipeline_config_for(const ExperimentConfig& cfg, double eps, int t) {
    PipelineConfig pc;
    pc.method = cfg.method;
    pc.k = cfg.k;
    pc.unit = cfg.unit;
    pc.noise_enabled = cfg.noise;
    pc.eps_total = eps;
    pc.delta_total = cfg.delta_total;
    pc.lloyds_rounds = t;
    pc.init_fraction = cfg.init_fraction;
    pc.lloyds_gauss_fraction = cfg.lloyds_gauss_fraction;
    pc.init_proportions = cfg.proportions.value_or(default_budget_proportions(cfg.unit));
    pc.restarts = cfg.restarts;
    pc.kfed_local = cfg.kfed_local;
    pc.client_bounds = cfg.client_clip;
    return pc;
}

inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    struct GridPoint {
        double eps;
        int t;
    };
    std::vector<GridPoint> grid;
    for (double e : cfg.grid_eps)
        for (int t : cfg.grid_t) grid.push_back({e, t});
    // Non-private methods ignore the budget grid entirely; one run per seed.
    const bool non_private_method = cfg.method == Method::kOptimal || cfg.method == Method::kKFed;
    if (non_private_method) grid = {GridPoint{0.0, 0}};

    const std::uint64_t hash = config_hash(cfg);
    std::vector<RunRecord> records(grid.size() * cfg.seeds.size());
    parallel_for(records.size(), pool_thread_count(), [&](std::size_t job) {
        const std::size_t gi = job / cfg.seeds.size();
        const std::size_t si = job % cfg.seeds.size();
        const std::uint64_t seed = cfg.seeds[si];
        const auto t0 = std::chrono::steady_clock::now();

        const ExperimentData data = build_experiment_data(cfg, seed);
        PipelineConfig pc = pipeline_config_for(cfg, grid[gi].eps, grid[gi].t);
        const std::uint64_t algo_seed =
            RngStream(seed).substream("algo").substream(gi).next_u64();
        const PipelineResult result = run_pipeline(data.partition, data.server, pc, algo_seed);

        RunRecord rec;
        rec.method = method_name(cfg.method);
        rec.seed = seed;
        rec.grid_eps = grid[gi].eps;
        rec.grid_t = grid[gi].t;
        rec.non_private = result.non_private;
        if (result.non_private) {
            rec.eps_total = std::numeric_limits<double>::infinity();
            rec.delta = 0.0;
        } else if (result.ledger.empty()) {
            rec.eps_total = 0.0;  // never touched client data with noise
            rec.delta = 0.0;
        } else {
            const PrivacyParams total = compose_report(result.ledger, 0.1 * cfg.delta_total);
            rec.eps_total = total.epsilon;
            rec.delta = total.delta;
        }
        rec.ledger = result.ledger.entries();
        rec.cost = normalized_kmeans_cost(data.all_points, result.centers);
        rec.rounds = result.rounds;
        rec.config_hash = hash;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        records[job] = std::move(rec);
    });
    return records;
}

// ---- Elbow scan -----------------------------------------------------------

struct ElbowPoint {
    std::size_t k = 0;
    double cost = 0.0;  // weighted proxy cost
};

// Runs the projector + importance-weight prefix once with rank k_prime, then
// clusters the weighted proxy for every k in [k_min, k_max] at no extra
// privacy cost.
inline std::vector<ElbowPoint> elbow_scan(const Points& server_data,
                                          const ClientPartition& partition, std::size_t k_prime,
                                          std::size_t k_min, std::size_t k_max, double eps1,
                                          double eps2, double delta, bool noise_enabled,
                                          std::uint64_t seed, int restarts = 10) {
    if (k_min < 1 || k_min > k_max) throw std::invalid_argument("elbow_scan: invalid k range");
    if (k_prime < k_max) throw std::invalid_argument("elbow_scan: k_prime must be >= k_max");
    RngStream root(seed);
    const double delta_clip = server_data_radius(server_data);
    FederatedRun run(clip_partition(partition, delta_clip), PrivacyUnit::kDataPoint, noise_enabled,
                     root.substream(rng_tags::kNoise));
    // Projector rank is capped by the ambient dimension.
    const std::size_t rank = std::min(k_prime, partition.dim());
    const ProjectionMatrix projector =
        step1_private_projector(run, delta_clip, PrivacyParams{eps1, delta}, rank);
    const WeightedPoints proxy = step2_importance_weights(run, projector, server_data, eps2);

    std::vector<ElbowPoint> curve;
    RngStream kmeans_rng = root.substream(rng_tags::kInitKmeans);
    for (std::size_t k = k_min; k <= k_max; ++k) {
        RngStream stream = kmeans_rng.substream(k);
        const CenterSet centers = weighted_kmeans(proxy, k, restarts, stream);
        curve.push_back(ElbowPoint{k, weighted_cost(clamp_weights(proxy), centers)});
    }
    return curve;
}

// k at the largest relative cost drop from its predecessor.
inline std::size_t elbow_locate(const std::vector<ElbowPoint>& curve) {
    if (curve.size() < 2) throw std::invalid_argument("elbow_locate: need at least two points");
    std::size_t best_k = curve[1].k;
    double best_drop = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double prev = curve[i - 1].cost;
        if (!(prev > 0.0)) continue;
        const double drop = (prev - curve[i].cost) / prev;
        if (drop > best_drop) {
            best_drop = drop;
            best_k = curve[i].k;
        }
    }
    return best_k;
}

// ---- Serialization --------------------------------------------------------

inline const char* kRecordCsvHeader =
    "method,seed,grid_eps,grid_t,eps_total,delta,cost,rounds,non_private,config_hash";

namespace detail {

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double_field(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

}  // namespace detail

inline void write_records_csv(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << kRecordCsvHeader << '\n';
    for (const RunRecord& r : records) {
        os << r.method << ',' << r.seed << ',' << detail::format_double(r.grid_eps) << ','
           << r.grid_t << ',' << detail::format_double(r.eps_total) << ','
           << detail::format_double(r.delta) << ',' << detail::format_double(r.cost) << ','
           << r.rounds << ',' << (r.non_private ? 1 : 0) << ',' << r.config_hash << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

inline std::vector<RunRecord> read_records_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty records file: " + path);
    if (detail::trim(line) != kRecordCsvHeader) throw IoError("unexpected header in " + path);
    std::vector<RunRecord> records;
    while (std::getline(is, line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 10) throw IoError("malformed record row in " + path);
        RunRecord r;
        r.method = cells[0];
        r.seed = static_cast<std::uint64_t>(std::stoull(cells[1]));
        r.grid_eps = detail::parse_double_field(cells[2]);
        r.grid_t = std::stoi(cells[3]);
        r.eps_total = detail::parse_double_field(cells[4]);
        r.delta = detail::parse_double_field(cells[5]);
        r.cost = detail::parse_double_field(cells[6]);
        r.rounds = std::stoi(cells[7]);
        r.non_private = cells[8] == "1";
        r.config_hash = std::stoull(cells[9]);
        records.push_back(std::move(r));
    }
    return records;
}

namespace detail {

inline nlohmann::ordered_json record_to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["seed"] = r.seed;
    j["grid_eps"] = r.grid_eps;
    j["grid_t"] = r.grid_t;
    j["eps_total"] = std::isinf(r.eps_total) ? nlohmann::ordered_json("inf")
                                             : nlohmann::ordered_json(r.eps_total);
    j["delta"] = r.delta;
    j["cost"] = r.cost;
    j["rounds"] = r.rounds;
    j["non_private"] = r.non_private;
    j["config_hash"] = r.config_hash;
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& e : r.ledger) {
        nlohmann::ordered_json je;
        je["label"] = e.label;
        je["epsilon"] = e.params.epsilon;
        je["delta"] = e.params.delta;
        entries.push_back(std::move(je));
    }
    j["ledger"] = std::move(entries);
    return j;
}

}  // namespace detail

// Writes records, front, and a machine-readable manifest into `dir`.
// Output is byte-for-byte reproducible for a fixed config and seed set, so
// wall times never appear in any file.
inline void export_results(const std::vector<RunRecord>& records,
                           const std::vector<RunRecord>& front, const ExperimentConfig& cfg,
                           const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
    const bool csv = cfg.out_format == "csv" || cfg.out_format == "both";
    const bool json = cfg.out_format == "json" || cfg.out_format == "both";

    if (csv) {
        write_records_csv(records, dir + "/records.csv");
        write_records_csv(front, dir + "/front.csv");
    }
    if (json) {
        nlohmann::ordered_json jr = nlohmann::ordered_json::array();
        for (const RunRecord& r : records) jr.push_back(detail::record_to_json(r));
        nlohmann::ordered_json jf = nlohmann::ordered_json::array();
        for (const RunRecord& r : front) jf.push_back(detail::record_to_json(r));
        std::ofstream osr(dir + "/records.json");
        std::ofstream osf(dir + "/front.json");
        if (!osr || !osf) throw IoError("cannot open json outputs in " + dir);
        osr << jr.dump(2) << '\n';
        osf << jf.dump(2) << '\n';
    }

    nlohmann::ordered_json manifest;
    manifest["version"] = "0.1.0";
    manifest["config"] = canonical_config_string(cfg);
    manifest["config_hash"] = config_hash(cfg);
    manifest["seeds"] = cfg.seeds;
    manifest["record_count"] = records.size();
    manifest["front_count"] = front.size();
    manifest["columns"] = kRecordCsvHeader;
    std::ofstream osm(dir + "/manifest.json");
    if (!osm) throw IoError("cannot open manifest in " + dir);
    osm << manifest.dump(2) << '\n';
    if (!osm) throw IoError("write failed for manifest in " + dir);
}

}  // namespace feddp
