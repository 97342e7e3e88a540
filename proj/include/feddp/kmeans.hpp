#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/rng.hpp"

// Non-private weighted k-means: cost evaluation, nearest-center assignment,
// weighted k-means++ seeding, Lloyd iterations, and an exhaustive optimum
// oracle for small instances.

namespace feddp {

struct WeightedPoints {
    Points points;
    Vec weights;

    void validate() const {
        if (points.size() != weights.size())
            throw std::invalid_argument("WeightedPoints: points/weights length mismatch");
        for (double w : weights) {
            if (!std::isfinite(w)) throw std::invalid_argument("WeightedPoints: non-finite weight");
        }
    }
};

inline WeightedPoints unit_weights(Points points) {
    WeightedPoints wp;
    wp.weights.assign(points.size(), 1.0);
    wp.points = std::move(points);
    return wp;
}

// Negative weights (possible after noisy counting) clamp to zero before
// clustering so the objective stays valid.
inline WeightedPoints clamp_weights(WeightedPoints wp) {
    for (double& w : wp.weights) w = std::max(w, 0.0);
    return wp;
}

// Nearest-center labels; ties go to the lowest center index.
inline std::vector<int> assign(const Points& points, const CenterSet& centers) {
    if (centers.empty()) throw std::invalid_argument("assign: empty center set");
    std::vector<int> labels(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = squared_distance(points[i], centers[0]);
        int best_j = 0;
        for (std::size_t j = 1; j < centers.size(); ++j) {
            const double d = squared_distance(points[i], centers[j]);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        labels[i] = best_j;
    }
    return labels;
}

// Unnormalized objective: sum over points of the squared distance to the
// nearest center.
inline double kmeans_cost(const Points& points, const CenterSet& centers) {
    if (centers.empty()) throw std::invalid_argument("kmeans_cost: empty center set");
    double total = 0.0;
    for (const Vec& p : points) {
        double best = squared_distance(p, centers[0]);
        for (std::size_t j = 1; j < centers.size(); ++j)
            best = std::min(best, squared_distance(p, centers[j]));
        total += best;
    }
    return total;
}

// Cost scaled by 1/n, the form used for reporting.
inline double normalized_kmeans_cost(const Points& points, const CenterSet& centers) {
    if (points.empty()) return 0.0;
    return kmeans_cost(points, centers) / static_cast<double>(points.size());
}

inline double weighted_cost(const WeightedPoints& data, const CenterSet& centers) {
    if (centers.empty()) throw std::invalid_argument("weighted_cost: empty center set");
    double total = 0.0;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        double best = squared_distance(data.points[i], centers[0]);
        for (std::size_t j = 1; j < centers.size(); ++j)
            best = std::min(best, squared_distance(data.points[i], centers[j]));
        total += data.weights[i] * best;
    }
    return total;
}

namespace detail {

inline std::size_t sample_index(const Vec& mass, double total, RngStream& rng) {
    const double u = rng.uniform_open01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        acc += mass[i];
        if (u <= acc && mass[i] > 0.0) return i;
    }
    for (std::size_t i = mass.size(); i-- > 0;) {
        if (mass[i] > 0.0) return i;
    }
    throw std::invalid_argument("sample_index: no positive mass");
}

}  // namespace detail

// Weighted k-means++: the first center is drawn proportional to weight, each
// subsequent one proportional to weight times squared distance to the
// nearest chosen center. Duplicates arise only when fewer than k distinct
// positive-weight points exist.
inline CenterSet weighted_kmeans_pp_seed(const WeightedPoints& data, std::size_t k,
                                         RngStream& rng) {
    data.validate();
    const std::size_t n = data.points.size();
    if (n == 0) throw std::invalid_argument("weighted_kmeans_pp_seed: no points");
    Vec w(n);
    double wtotal = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::max(data.weights[i], 0.0);
        wtotal += w[i];
    }
    if (!(wtotal > 0.0))
        throw std::invalid_argument("weighted_kmeans_pp_seed: all weights are zero");

    CenterSet centers;
    centers.push_back(data.points[detail::sample_index(w, wtotal, rng)]);
    Vec d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(data.points[i], centers[0]);

    while (centers.size() < k) {
        Vec mass(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mass[i] = w[i] * d2[i];
            total += mass[i];
        }
        std::size_t pick;
        if (total > 0.0) {
            pick = detail::sample_index(mass, total, rng);
        } else {
            // Every positive-weight point is already a center; duplicate.
            pick = detail::sample_index(w, wtotal, rng);
        }
        centers.push_back(data.points[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(data.points[i], centers.back()));
    }
    return centers;
}

struct LloydOptions {
    int max_iters = 100;
    double tol = 1e-6;  // relative center movement
};

// Weighted Lloyd iterations. Clusters whose total weight is zero keep their
// previous center. The weighted cost never increases across iterations; an
// optional trace records it after each assignment.
inline CenterSet weighted_lloyd(const WeightedPoints& data, CenterSet centers,
                                const LloydOptions& opts = {},
                                std::vector<double>* cost_trace = nullptr) {
    data.validate();
    if (centers.empty()) throw std::invalid_argument("weighted_lloyd: empty init");
    const std::size_t n = data.points.size();
    const std::size_t k = centers.size();
    const std::size_t d = centers.front().size();

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        const std::vector<int> labels = assign(data.points, centers);
        if (cost_trace) cost_trace->push_back(weighted_cost(data, centers));

        Points acc(k, Vec(d, 0.0));
        Vec wsum(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = data.weights[i];
            if (w <= 0.0) continue;
            const int r = labels[i];
            wsum[r] += w;
            for (std::size_t c = 0; c < d; ++c) acc[r][c] += w * data.points[i][c];
        }

        double scale = 1.0;
        for (const Vec& c : centers) scale = std::max(scale, norm(c));
        double moved = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            if (wsum[r] > 0.0) {
                Vec next(d);
                for (std::size_t c = 0; c < d; ++c) next[c] = acc[r][c] / wsum[r];
                moved = std::max(moved, distance(next, centers[r]));
                centers[r] = std::move(next);
            }
        }
        if (moved <= opts.tol * scale) break;
    }
    if (cost_trace) cost_trace->push_back(weighted_cost(data, centers));
    return centers;
}

// k-means++ seed plus Lloyd, best final weighted cost over `restarts` tries.
inline CenterSet weighted_kmeans(const WeightedPoints& raw, std::size_t k, int restarts,
                                 RngStream& rng, const LloydOptions& opts = {}) {
    const WeightedPoints data = clamp_weights(raw);
    CenterSet best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        RngStream stream = rng.substream(static_cast<std::uint64_t>(r));
        CenterSet c = weighted_kmeans_pp_seed(data, k, stream);
        c = weighted_lloyd(data, std::move(c), opts);
        const double cost = weighted_cost(data, c);
        if (cost < best_cost) {
            best_cost = cost;
            best = std::move(c);
        }
    }
    return best;
}

// Exact optimum by enumerating every assignment of n points to k clusters;
// guarded to n <= 12, k <= 3. Centers of empty clusters are pinned to the
// first point so the returned set stays finite.
inline std::pair<CenterSet, double> brute_force_kmeans(const Points& points, std::size_t k) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("brute_force_kmeans: no points");
    if (n > 12 || k > 3) throw std::invalid_argument("brute_force_kmeans: size guard (n<=12, k<=3)");
    const std::size_t d = points.front().size();

    std::vector<int> labels(n, 0);
    std::vector<int> best_labels;
    double best_cost = std::numeric_limits<double>::infinity();
    const auto evaluate = [&]() {
        Points acc(k, Vec(d, 0.0));
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++cnt[labels[i]];
            for (std::size_t c = 0; c < d; ++c) acc[labels[i]][c] += points[i][c];
        }
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int r = labels[i];
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = points[i][c] - acc[r][c] / static_cast<double>(cnt[r]);
                cost += diff * diff;
            }
        }
        if (cost < best_cost) {
            best_cost = cost;
            best_labels = labels;
        }
    };

    while (true) {
        evaluate();
        std::size_t pos = 0;
        while (pos < n && labels[pos] == static_cast<int>(k) - 1) {
            labels[pos] = 0;
            ++pos;
        }
        if (pos == n) break;
        ++labels[pos];
    }

    CenterSet centers(k, points.front());
    Points acc(k, Vec(d, 0.0));
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++cnt[best_labels[i]];
        for (std::size_t c = 0; c < d; ++c) acc[best_labels[i]][c] += points[i][c];
    }
    for (std::size_t r = 0; r < k; ++r) {
        if (cnt[r] == 0) continue;
        for (std::size_t c = 0; c < d; ++c) centers[r][c] = acc[r][c] / static_cast<double>(cnt[r]);
    }
    return {centers, best_cost};
}

}  // namespace feddp
