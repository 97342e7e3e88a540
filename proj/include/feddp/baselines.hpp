#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/fed.hpp"
#include "feddp/kmeans.hpp"
#include "feddp/rng.hpp"

// Comparison initializations: server-data k-means++ / full k-means, the
// data-independent sphere-packing construction, the non-private one-shot
// federated scheme, and the centralized non-private reference. None of these
// touch the privacy ledger; the federated refinement that may follow them is
// where any budget is spent.

namespace feddp {

// k-means++ seeding on the server data only, no Lloyd refinement.
inline CenterSet server_kmeanspp(const Points& server_data, std::size_t k, RngStream& rng) {
    if (server_data.empty()) throw std::invalid_argument("server_kmeanspp: empty server data");
    return weighted_kmeans_pp_seed(unit_weights(server_data), k, rng);
}

// Full k-means (k-means++ seed + Lloyd to convergence) on the server data.
inline CenterSet server_lloyds(const Points& server_data, std::size_t k, RngStream& rng,
                               const LloydOptions& opts = {}) {
    if (server_data.empty()) throw std::invalid_argument("server_lloyds: empty server data");
    const WeightedPoints data = unit_weights(server_data);
    CenterSet seed = weighted_kmeans_pp_seed(data, k, rng);
    return weighted_lloyd(data, std::move(seed), opts);
}

struct SpherePackingParams {
    double delta_est = 1.0;  // data radius estimated from the server data
    int attempts_per_center = 1000;
    int binary_search_iters = 30;

    void validate() const {
        if (!(delta_est > 0.0))
            throw std::invalid_argument("SpherePackingParams: delta_est must be > 0");
        if (attempts_per_center < 1 || binary_search_iters < 1)
            throw std::invalid_argument("SpherePackingParams: counts must be >= 1");
    }
};

// Squared distance from x to the nearest corner of [-delta, delta]^d,
// computed per coordinate: sum_i (delta - |x_i|)^2.
inline double squared_corner_distance(const Vec& x, double delta) {
    double s = 0.0;
    for (double xi : x) {
        const double g = delta - std::abs(xi);
        s += g * g;
    }
    return s;
}

namespace detail {

// Tries to place k centers in [-delta, delta]^d at pairwise distance >= 2a
// and corner distance >= a, with a bounded number of attempts per center.
inline bool try_sphere_packing(double a, std::size_t k, std::size_t d,
                               const SpherePackingParams& params, RngStream rng,
                               CenterSet* out) {
    CenterSet centers;
    const double delta = params.delta_est;
    for (std::size_t i = 0; i < k; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < params.attempts_per_center; ++attempt) {
            Vec candidate(d);
            for (double& c : candidate) c = (2.0 * rng.uniform01() - 1.0) * delta;
            if (squared_corner_distance(candidate, delta) < a * a) continue;
            bool far_enough = true;
            for (const Vec& prev : centers) {
                if (squared_distance(candidate, prev) < 4.0 * a * a) {
                    far_enough = false;
                    break;
                }
            }
            if (!far_enough) continue;
            centers.push_back(std::move(candidate));
            placed = true;
            break;
        }
        if (!placed) return false;
    }
    *out = std::move(centers);
    return true;
}

}  // namespace detail

// Data-independent initialization: binary search for the largest packing
// radius a in (0, delta * sqrt(d)] that still lets all k centers be sampled,
// and return the centers from the largest feasible radius.
struct SpherePackingResult {
    CenterSet centers;
    double radius = 0.0;  // the feasible a the centers satisfy
};

inline SpherePackingResult sphere_packing_init(const SpherePackingParams& params, std::size_t k,
                                               std::size_t d, RngStream& rng) {
    params.validate();
    if (k < 1 || d < 1) throw std::invalid_argument("sphere_packing_init: k and d must be >= 1");

    SpherePackingResult result;
    double lo = 0.0;
    double hi = params.delta_est * std::sqrt(static_cast<double>(d));

    // a -> 0 is always feasible: the corner constraint vanishes and distinct
    // random points satisfy any small pairwise bound.
    CenterSet candidate;
    for (int iter = 0; iter < params.binary_search_iters; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (detail::try_sphere_packing(mid, k, d, params,
                                       rng.substream(static_cast<std::uint64_t>(iter)),
                                       &candidate)) {
            result.centers = candidate;
            result.radius = mid;
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (result.centers.empty()) {
        // No midpoint succeeded; fall back to an arbitrarily small radius.
        double a = hi;
        std::uint64_t tag = 1u << 20;
        while (!detail::try_sphere_packing(a, k, d, params, rng.substream(tag++), &candidate)) {
            a *= 0.5;
            if (a < 1e-12) throw std::runtime_error("sphere_packing_init: could not place centers");
        }
        result.centers = candidate;
        result.radius = a;
    }
    return result;
}

// Non-private one-shot federated scheme: each client clusters locally into
// k_local centers, then the server clusters the pooled centers weighted by
// their local cluster sizes. No privacy ledger entries; callers must label
// the output non-private.
inline CenterSet kfed(const ClientPartition& partition, std::size_t k, std::size_t k_local,
                      RngStream& rng, int server_restarts = 10, const LloydOptions& opts = {},
                      int local_restarts = 5) {
    if (partition.num_clients() == 0) throw std::invalid_argument("kfed: empty partition");
    WeightedPoints pooled;
    for (std::size_t j = 0; j < partition.num_clients(); ++j) {
        const Points& client = partition.clients[j];
        if (client.empty()) continue;
        const std::size_t kj = std::min<std::size_t>(k_local, client.size());
        RngStream local = rng.substream("kfed.client").substream(j);
        const WeightedPoints data = unit_weights(client);
        const CenterSet local_centers = weighted_kmeans(data, kj, local_restarts, local, opts);
        const std::vector<int> labels = assign(client, local_centers);
        Vec sizes(kj, 0.0);
        for (int r : labels) sizes[static_cast<std::size_t>(r)] += 1.0;
        for (std::size_t r = 0; r < kj; ++r) {
            pooled.points.push_back(local_centers[r]);
            pooled.weights.push_back(sizes[r]);
        }
    }
    if (pooled.points.empty()) throw std::invalid_argument("kfed: no client data");
    RngStream server = rng.substream("kfed.server");
    return weighted_kmeans(pooled, k, server_restarts, server, opts);
}

// Centralized non-private k-means, best of R restarts; the cost lower bound
// all other methods are compared against.
inline std::pair<CenterSet, double> optimal_reference(const Points& all_points, std::size_t k,
                                                      RngStream& rng, int restarts = 25,
                                                      const LloydOptions& opts = {}) {
    if (all_points.empty()) throw std::invalid_argument("optimal_reference: no points");
    const CenterSet centers = weighted_kmeans(unit_weights(all_points), k, restarts, rng, opts);
    return {centers, kmeans_cost(all_points, centers)};
}

}  // namespace feddp
