#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/fed.hpp"
#include "feddp/kmeans.hpp"
#include "feddp/linalg.hpp"

// Three-step private federated initialization: (1) noisy projector onto the
// top-k eigenvectors of the aggregated outer product, (2) noisy importance
// weights turning the projected server points into a proxy dataset, (3)
// weighted clustering of the proxy followed by one projected assign/mean
// exchange with the clients. Exactly three communication rounds.

namespace feddp {

struct InitBudget {
    double eps1 = 0.0;
    double eps2 = 0.0;
    double eps3G = 0.0;
    double eps3L = 0.0;
    double delta = 0.0;  // charged by each Gaussian invocation (steps 1 and 3G)

    void validate() const {
        if (!(eps1 > 0.0 && eps2 > 0.0 && eps3G > 0.0 && eps3L > 0.0))
            throw std::invalid_argument("InitBudget: all epsilons must be > 0");
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("InitBudget: delta must lie in (0, 1)");
    }
};

// Client-level clip bounds, one per aggregation query.
struct InitClipBounds {
    double outer_product = 1.0;
    double weight_histogram = 1.0;
    double cluster_mean = 1.0;
    double cluster_histogram = 1.0;
};

struct InitOptions {
    std::optional<double> delta_clip;  // defaults to the server-data radius
    int restarts = 10;
    LloydOptions lloyd{};
    InitClipBounds client_bounds{};
};

struct InitResult {
    CenterSet centers;
    ProjectionMatrix projector;
    WeightedPoints proxy;  // projected server points with noisy weights
};

inline double server_data_radius(const Points& server_data) {
    double r = 0.0;
    for (const Vec& q : server_data) r = std::max(r, norm(q));
    return r;
}

inline ProjectionMatrix step1_private_projector(FederatedRun& run, double delta_clip,
                                                PrivacyParams budget, std::size_t k,
                                                std::optional<double> client_clip = std::nullopt) {
    const std::size_t d = run.partition().dim();
    if (k > d) throw std::invalid_argument("step1_private_projector: k exceeds data dimension");
    const Matrix noisy = run.aggregate_outer_products("init.step1.outer", budget, delta_clip,
                                                      client_clip);
    return top_k_projector(noisy, k);
}

// Nearest projected server point per projected client point, lowest index on
// ties; one noisy count per server point.
inline std::vector<int> nearest_projected_labels(const ProjectionMatrix& projector,
                                                 const Points& targets_projected,
                                                 const Points& raw_points) {
    std::vector<int> labels(raw_points.size(), 0);
    for (std::size_t i = 0; i < raw_points.size(); ++i) {
        const Vec p = projector.apply(raw_points[i]);
        double best = squared_distance(p, targets_projected[0]);
        int best_j = 0;
        for (std::size_t j = 1; j < targets_projected.size(); ++j) {
            const double dist = squared_distance(p, targets_projected[j]);
            if (dist < best) {
                best = dist;
                best_j = static_cast<int>(j);
            }
        }
        labels[i] = best_j;
    }
    return labels;
}

inline WeightedPoints step2_importance_weights(FederatedRun& run, const ProjectionMatrix& projector,
                                               const Points& server_data, double eps2,
                                               std::optional<double> client_clip = std::nullopt) {
    if (server_data.empty())
        throw std::invalid_argument("step2_importance_weights: empty server data");
    const Points projected_server = project(projector, server_data);

    AggregationQuery q;
    q.label = "init.step2.weights";
    q.statistic = [projector, projected_server](const Points& client) {
        Vec counts(projected_server.size(), 0.0);
        if (!client.empty()) {
            const std::vector<int> labels =
                nearest_projected_labels(projector, projected_server, client);
            for (int r : labels) counts[static_cast<std::size_t>(r)] += 1.0;
        }
        return counts;
    };
    q.sensitivity = Sensitivity{1.0, NormKind::kL1};
    q.mechanism = Mechanism::kLaplace;
    q.budget = PrivacyParams{eps2, 0.0};
    q.clip_bound = client_clip;

    WeightedPoints proxy;
    proxy.weights = run.secure_aggregate(q);
    proxy.points = projected_server;
    return proxy;
}

inline CenterSet step3_initial_centers(FederatedRun& run, const ProjectionMatrix& projector,
                                       const WeightedPoints& proxy, std::size_t k, double eps3G,
                                       double eps3L, double delta, double delta_clip,
                                       const InitOptions& opts, RngStream server_rng) {
    const WeightedPoints clamped = clamp_weights(proxy);
    double weight_total = 0.0;
    for (double w : clamped.weights) weight_total += w;
    if (!(weight_total > 0.0))
        throw std::invalid_argument("step3_initial_centers: proxy has no positive weight");

    const CenterSet xi = weighted_kmeans(clamped, k, opts.restarts, server_rng, opts.lloyd);
    const auto labeler = [projector, xi](const Points& client) {
        return nearest_projected_labels(projector, xi, client);
    };

    CenterSet centers(k);
    if (run.unit() == PrivacyUnit::kDataPoint) {
        const auto sc = run.sums_and_counts_aggregate(labeler, k, delta_clip,
                                                      PrivacyParams{eps3G, delta},
                                                      PrivacyParams{eps3L, 0.0}, "init.step3");
        for (std::size_t r = 0; r < k; ++r) {
            centers[r] = sc.sums[r];
            scale_in_place(centers[r], 1.0 / std::max(sc.counts[r], 1.0));
        }
    } else {
        const auto mm = run.mean_of_means_aggregate(labeler, k, opts.client_bounds.cluster_mean,
                                                    opts.client_bounds.cluster_histogram,
                                                    PrivacyParams{eps3G, delta},
                                                    PrivacyParams{eps3L, 0.0}, "init.step3");
        for (std::size_t r = 0; r < k; ++r) {
            centers[r] = mm.mean_sums[r];
            scale_in_place(centers[r], 1.0 / std::max(mm.indicator_sums[r], 1.0));
        }
    }
    return centers;
}

inline InitResult run_feddp_init(FederatedRun& run, const Points& server_data, std::size_t k,
                                 const InitBudget& budget, const InitOptions& opts,
                                 RngStream server_rng) {
    budget.validate();
    if (server_data.empty()) throw std::invalid_argument("run_feddp_init: empty server data");
    const double delta_clip = opts.delta_clip.value_or(server_data_radius(server_data));
    const bool client_mode = run.unit() == PrivacyUnit::kClient;

    InitResult result;
    result.projector = step1_private_projector(
        run, delta_clip, PrivacyParams{budget.eps1, budget.delta}, k,
        client_mode ? std::optional<double>(opts.client_bounds.outer_product) : std::nullopt);
    result.proxy = step2_importance_weights(
        run, result.projector, server_data, budget.eps2,
        client_mode ? std::optional<double>(opts.client_bounds.weight_histogram) : std::nullopt);
    result.centers = step3_initial_centers(run, result.projector, result.proxy, k, budget.eps3G,
                                           budget.eps3L, budget.delta, delta_clip, opts,
                                           server_rng);
    return result;
}

}  // namespace feddp
