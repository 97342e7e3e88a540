#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/fed.hpp"
#include "feddp/kmeans.hpp"

// T rounds of private federated Lloyd refinement in the original data space.
// Each round spends (epsG/T, delta/T) on the sums and (epsL/T, 0) on the
// counts, so the whole phase composes to (epsG + epsL, delta).

namespace feddp {

struct LloydsConfig {
    int rounds = 0;  // T
    double epsG = 1.0;
    double epsL = 1.0;
    double delta = 1e-6;
    double delta_clip = 1.0;  // point norm bound used for the Gaussian sums
    // Client-level mode (mean-of-means per round):
    double client_mean_bound = 1.0;
    double client_hist_bound = 1.0;

    void validate() const {
        if (rounds < 0) throw std::invalid_argument("LloydsConfig: rounds must be >= 0");
        if (rounds == 0) return;
        if (!(epsG > 0.0 && epsL > 0.0))
            throw std::invalid_argument("LloydsConfig: epsilons must be > 0");
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("LloydsConfig: delta must lie in (0, 1)");
    }
};

// Center history across rounds (length T + 1, initialization included) plus
// an optional noise-free diagnostic cost per entry.
struct Trajectory {
    std::vector<CenterSet> centers;
    std::vector<double> costs;  // empty unless eval_points was provided

    const CenterSet& final_centers() const { return centers.back(); }
};

inline Trajectory run_feddp_lloyds(FederatedRun& run, const CenterSet& init,
                                   const LloydsConfig& cfg, const Points* eval_points = nullptr) {
    cfg.validate();
    if (init.empty()) throw std::invalid_argument("run_feddp_lloyds: empty initialization");
    for (const Vec& c : init) {
        if (!all_finite(c)) throw std::invalid_argument("run_feddp_lloyds: non-finite init center");
    }
    const std::size_t k = init.size();
    const double t = static_cast<double>(std::max(cfg.rounds, 1));

    Trajectory traj;
    traj.centers.push_back(init);
    if (eval_points) traj.costs.push_back(normalized_kmeans_cost(*eval_points, init));

    for (int round = 0; round < cfg.rounds; ++round) {
        const CenterSet current = traj.centers.back();
        const auto labeler = [current](const Points& client) { return assign(client, current); };
        const std::string prefix = "lloyds.round" + std::to_string(round);
        const PrivacyParams gauss{cfg.epsG / t, cfg.delta / t};
        const PrivacyParams lap{cfg.epsL / t, 0.0};

        CenterSet next(k);
        if (run.unit() == PrivacyUnit::kDataPoint) {
            const auto sc =
                run.sums_and_counts_aggregate(labeler, k, cfg.delta_clip, gauss, lap, prefix);
            for (std::size_t r = 0; r < k; ++r) {
                next[r] = sc.sums[r];
                scale_in_place(next[r], 1.0 / std::max(sc.counts[r], 1.0));
            }
        } else {
            const auto mm = run.mean_of_means_aggregate(labeler, k, cfg.client_mean_bound,
                                                        cfg.client_hist_bound, gauss, lap, prefix);
            for (std::size_t r = 0; r < k; ++r) {
                next[r] = mm.mean_sums[r];
                scale_in_place(next[r], 1.0 / std::max(mm.indicator_sums[r], 1.0));
            }
        }
        traj.centers.push_back(std::move(next));
        if (eval_points) traj.costs.push_back(normalized_kmeans_cost(*eval_points, traj.centers.back()));
    }
    return traj;
}

// True iff the two label sequences induce the same partition of the index
// set, i.e. they agree up to a relabeling of cluster ids.
inline bool exact_recovery_check(const std::vector<int>& predicted,
                                 const std::vector<int>& ground_truth) {
    if (predicted.size() != ground_truth.size())
        throw std::invalid_argument("exact_recovery_check: label length mismatch");
    std::map<int, std::vector<std::size_t>> by_pred, by_truth;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        by_pred[predicted[i]].push_back(i);
        by_truth[ground_truth[i]].push_back(i);
    }
    std::vector<std::vector<std::size_t>> a, b;
    for (auto& [_, members] : by_pred) a.push_back(std::move(members));
    for (auto& [_, members] : by_truth) b.push_back(std::move(members));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

}  // namespace feddp
