#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddp/baselines.hpp"
#include "feddp/fed.hpp"
#include "feddp/init.hpp"
#include "feddp/lloyds.hpp"

// End-to-end drivers tying initialization and federated refinement together
// under one seed. All randomness derives from documented substream tags so a
// run can be replayed (or mirrored by a reference implementation) exactly.

namespace feddp {

namespace rng_tags {
inline constexpr std::uint64_t kNoise = 1;        // mechanism noise inside FederatedRun
inline constexpr std::uint64_t kInitKmeans = 2;   // server-side weighted clustering
inline constexpr std::uint64_t kMethod = 3;       // baseline-specific randomness
}  // namespace rng_tags

enum class Method {
    kFedDpKmeans,
    kServerKmeansPp,
    kServerLloyds,
    kSpherePacking,
    kKFed,
    kOptimal,
};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::kFedDpKmeans: return "FedDPKMeans";
        case Method::kServerKmeansPp: return "ServerKMeansPP";
        case Method::kServerLloyds: return "ServerLloyds";
        case Method::kSpherePacking: return "SpherePacking";
        case Method::kKFed: return "KFed";
        case Method::kOptimal: return "Optimal";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    for (Method m : {Method::kFedDpKmeans, Method::kServerKmeansPp, Method::kServerLloyds,
                     Method::kSpherePacking, Method::kKFed, Method::kOptimal}) {
        if (name == method_name(m)) return m;
    }
    throw std::invalid_argument("unknown method: " + name);
}

// Recommended fractions of eps_init per initialization step.
inline std::array<double, 4> default_budget_proportions(PrivacyUnit unit) {
    if (unit == PrivacyUnit::kDataPoint) return {0.2, 0.2, 0.45, 0.15};
    return {0.35, 0.1, 0.45, 0.1};
}

// Client-level clip bounds calibrated on the server's own data: the 90th
// percentile of each statistic's norm over a pseudo-partition of the server
// points, so calibration costs no privacy budget.
inline InitClipBounds default_client_clip_bounds(const Points& server_data,
                                                 std::size_t num_clients, std::size_t k) {
    if (server_data.empty())
        throw std::invalid_argument("default_client_clip_bounds: empty server data");
    InitClipBounds bounds;
    bounds.outer_product = default_clip_bound(
        [](const Points& chunk) { return outer_product(chunk).data; }, server_data, num_clients);
    bounds.weight_histogram = default_clip_bound(
        [&server_data](const Points& chunk) {
            Vec counts(server_data.size(), 0.0);
            for (const Vec& p : chunk) {
                double best = squared_distance(p, server_data[0]);
                std::size_t best_j = 0;
                for (std::size_t j = 1; j < server_data.size(); ++j) {
                    const double d = squared_distance(p, server_data[j]);
                    if (d < best) {
                        best = d;
                        best_j = j;
                    }
                }
                counts[best_j] += 1.0;
            }
            return counts;
        },
        server_data, num_clients);

    const std::size_t kk = std::min<std::size_t>(k, server_data.size());
    RngStream rng(hash_label("clip.defaults"));
    const CenterSet centers = weighted_kmeans(unit_weights(server_data), kk, 5, rng);
    const std::size_t d = server_data.front().size();
    const auto local_means = [centers, kk, d](const Points& chunk) {
        Vec out(kk * d, 0.0);
        Vec cnt(kk, 0.0);
        const std::vector<int> labels = assign(chunk, centers);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            cnt[labels[i]] += 1.0;
            for (std::size_t c = 0; c < d; ++c) out[labels[i] * d + c] += chunk[i][c];
        }
        for (std::size_t r = 0; r < kk; ++r) {
            if (cnt[r] > 0.0)
                for (std::size_t c = 0; c < d; ++c) out[r * d + c] /= cnt[r];
        }
        return out;
    };
    bounds.cluster_mean = default_clip_bound(local_means, server_data, num_clients);
    const auto indicator = [centers, kk](const Points& chunk) {
        Vec out(kk, 0.0);
        for (int r : assign(chunk, centers)) out[static_cast<std::size_t>(r)] = 1.0;
        return out;
    };
    bounds.cluster_histogram = default_clip_bound(indicator, server_data, num_clients);
    return bounds;
}

inline InitBudget split_init_budget(double eps_init, const std::array<double, 4>& proportions,
                                    double delta_per_gaussian) {
    InitBudget b;
    b.eps1 = eps_init * proportions[0];
    b.eps2 = eps_init * proportions[1];
    b.eps3G = eps_init * proportions[2];
    b.eps3L = eps_init * proportions[3];
    b.delta = delta_per_gaussian;
    return b;
}

struct PipelineConfig {
    Method method = Method::kFedDpKmeans;
    std::size_t k = 2;
    PrivacyUnit unit = PrivacyUnit::kDataPoint;
    bool noise_enabled = true;

    // Total privacy target; how it is divided between the phases.
    double eps_total = 1.0;
    double delta_total = 1e-6;
    int lloyds_rounds = 0;
    double init_fraction = 2.0 / 3.0;   // share of eps_total for the init when T > 0
    double lloyds_gauss_fraction = 0.75;
    std::array<double, 4> init_proportions{0.2, 0.2, 0.45, 0.15};

    std::optional<double> delta_clip;  // defaults to the server-data radius
    int restarts = 10;
    int optimal_restarts = 25;
    std::size_t kfed_local = 0;  // 0 means k
    LloydOptions lloyd{};
    // Client-level clip bounds; unset means calibrate on the server data.
    std::optional<InitClipBounds> client_bounds;
};

struct PipelineResult {
    CenterSet centers;
    Trajectory trajectory;
    std::optional<InitResult> init;
    BudgetLedger ledger;
    int rounds = 0;
    bool non_private = false;
};

// Number of delta-consuming mechanisms in a run: the two init Gaussians plus
// the refinement phase when it runs. The per-mechanism delta divides the
// run-level target evenly among them.
inline double delta_per_mechanism(Method method, double delta_total, int lloyds_rounds) {
    int consumers = 0;
    if (method == Method::kFedDpKmeans) consumers += 2;
    if (lloyds_rounds > 0) consumers += 1;
    return consumers > 0 ? delta_total / static_cast<double>(consumers) : delta_total;
}

inline PipelineResult run_pipeline(const ClientPartition& partition, const Points& server_data,
                                   const PipelineConfig& cfg, std::uint64_t seed) {
    if (server_data.empty() && cfg.method != Method::kOptimal && cfg.method != Method::kKFed)
        throw std::invalid_argument("run_pipeline: empty server data");
    RngStream root(seed);
    const double delta_clip = cfg.delta_clip.value_or(server_data_radius(server_data));

    PipelineResult result;

    // Fully non-private references never touch the federated runtime.
    if (cfg.method == Method::kOptimal) {
        RngStream rng = root.substream(rng_tags::kMethod);
        auto [centers, cost] = optimal_reference(partition.flatten(), cfg.k, rng,
                                                 cfg.optimal_restarts, cfg.lloyd);
        (void)cost;
        result.centers = centers;
        result.trajectory.centers.push_back(std::move(centers));
        result.non_private = true;
        return result;
    }
    if (cfg.method == Method::kKFed) {
        RngStream rng = root.substream(rng_tags::kMethod);
        const std::size_t k_local = cfg.kfed_local == 0 ? cfg.k : cfg.kfed_local;
        CenterSet centers = kfed(partition, cfg.k, k_local, rng, cfg.restarts, cfg.lloyd);
        result.centers = centers;
        result.trajectory.centers.push_back(std::move(centers));
        result.non_private = true;
        return result;
    }

    FederatedRun run(clip_partition(partition, delta_clip), cfg.unit, cfg.noise_enabled,
                     root.substream(rng_tags::kNoise));

    const bool client_mode = cfg.unit == PrivacyUnit::kClient;
    InitClipBounds bounds;
    if (client_mode)
        bounds = cfg.client_bounds.value_or(
            default_client_clip_bounds(server_data, partition.num_clients(), cfg.k));

    const bool spends_init_budget = cfg.method == Method::kFedDpKmeans;
    const double delta_each = delta_per_mechanism(cfg.method, cfg.delta_total, cfg.lloyds_rounds);
    const double eps_init =
        cfg.lloyds_rounds > 0 && spends_init_budget ? cfg.eps_total * cfg.init_fraction
                                                    : (spends_init_budget ? cfg.eps_total : 0.0);
    const double eps_lloyds = cfg.eps_total - eps_init;

    CenterSet init_centers;
    switch (cfg.method) {
        case Method::kFedDpKmeans: {
            InitOptions opts;
            opts.delta_clip = delta_clip;
            opts.restarts = cfg.restarts;
            opts.lloyd = cfg.lloyd;
            opts.client_bounds = bounds;
            const InitBudget budget =
                split_init_budget(eps_init, cfg.init_proportions, delta_each);
            result.init = run_feddp_init(run, server_data, cfg.k, budget, opts,
                                         root.substream(rng_tags::kInitKmeans));
            init_centers = result.init->centers;
            break;
        }
        case Method::kServerKmeansPp: {
            RngStream rng = root.substream(rng_tags::kMethod);
            init_centers = server_kmeanspp(server_data, cfg.k, rng);
            break;
        }
        case Method::kServerLloyds: {
            RngStream rng = root.substream(rng_tags::kMethod);
            init_centers = server_lloyds(server_data, cfg.k, rng, cfg.lloyd);
            break;
        }
        case Method::kSpherePacking: {
            RngStream rng = root.substream(rng_tags::kMethod);
            SpherePackingParams params;
            params.delta_est = delta_clip;
            init_centers = sphere_packing_init(params, cfg.k, partition.dim(), rng).centers;
            break;
        }
        default:
            throw std::logic_error("run_pipeline: unhandled method");
    }

    LloydsConfig lcfg;
    lcfg.rounds = cfg.lloyds_rounds;
    lcfg.delta_clip = delta_clip;
    lcfg.client_mean_bound = bounds.cluster_mean;
    lcfg.client_hist_bound = bounds.cluster_histogram;
    if (cfg.lloyds_rounds > 0) {
        lcfg.epsG = eps_lloyds * cfg.lloyds_gauss_fraction;
        lcfg.epsL = eps_lloyds * (1.0 - cfg.lloyds_gauss_fraction);
        lcfg.delta = delta_each;
    }
    result.trajectory = run_feddp_lloyds(run, init_centers, lcfg);

    result.centers = result.trajectory.final_centers();
    result.ledger = run.ledger();
    result.rounds = run.rounds();
    return result;
}

}  // namespace feddp
