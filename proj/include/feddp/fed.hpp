#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/dp.hpp"
#include "feddp/kmeans.hpp"
#include "feddp/linalg.hpp"
#include "feddp/rng.hpp"

// Federated simulation fabric. Clients hold data partitions; the server only
// ever sees per-round aggregates with mechanism noise applied once at the
// aggregate, which models secure aggregation as a trusted summation point.

namespace feddp {

struct ClientPartition {
    std::vector<Points> clients;

    std::size_t num_clients() const { return clients.size(); }

    std::size_t total_points() const {
        std::size_t n = 0;
        for (const Points& c : clients) n += c.size();
        return n;
    }

    std::size_t dim() const {
        for (const Points& c : clients) {
            if (!c.empty()) return c.front().size();
        }
        return 0;
    }

    Points flatten() const {
        Points all;
        all.reserve(total_points());
        for (const Points& c : clients)
            for (const Vec& p : c) all.push_back(p);
        return all;
    }
};

inline ClientPartition clip_partition(const ClientPartition& partition, double bound) {
    ClientPartition out;
    out.clients.reserve(partition.num_clients());
    for (const Points& c : partition.clients) {
        Points clipped;
        clipped.reserve(c.size());
        for (const Vec& p : c) clipped.push_back(clip_l2(p, bound));
        out.clients.push_back(std::move(clipped));
    }
    return out;
}

enum class PrivacyUnit { kDataPoint, kClient };
enum class Mechanism { kGaussian, kLaplace, kNone };

// One aggregation query: a per-client statistic, the mechanism protecting the
// aggregate, and its budget. In client-level mode every contribution is
// clipped to `clip_bound` before summation and the noise is calibrated to
// that bound instead of `sensitivity`.
struct AggregationQuery {
    std::string label;
    std::function<Vec(const Points&)> statistic;
    Sensitivity sensitivity;
    Mechanism mechanism = Mechanism::kNone;
    PrivacyParams budget;
    std::optional<double> clip_bound;
};

class FederatedRun {
public:
    FederatedRun(ClientPartition partition, PrivacyUnit unit, bool noise_enabled,
                 RngStream noise_rng)
        : partition_(std::move(partition)),
          unit_(unit),
          noise_enabled_(noise_enabled),
          noise_rng_(noise_rng) {
        if (partition_.num_clients() == 0)
            throw std::invalid_argument("FederatedRun: need at least one client");
    }

    const ClientPartition& partition() const { return partition_; }
    PrivacyUnit unit() const { return unit_; }
    bool noise_enabled() const { return noise_enabled_; }
    const BudgetLedger& ledger() const { return ledger_; }
    int rounds() const { return rounds_; }

    // Executes a batch of queries in a single communication round. Per-client
    // statistics are summed in a canonical (lexicographically sorted) order so
    // the reduction is exact under any client permutation, then one mechanism
    // draw per query is applied to the aggregate.
    std::vector<Vec> aggregate_round(std::span<const AggregationQuery> queries) {
        for (const AggregationQuery& q : queries) register_query(q);
        const int round_index = rounds_;

        std::vector<Vec> results;
        results.reserve(queries.size());
        for (std::size_t qi = 0; qi < queries.size(); ++qi) {
            const AggregationQuery& q = queries[qi];
            std::vector<Vec> contributions;
            contributions.reserve(partition_.num_clients());
            for (const Points& client : partition_.clients) {
                Vec stat = q.statistic(client);
                if (unit_ == PrivacyUnit::kClient) stat = clip_l2(std::move(stat), *q.clip_bound);
                contributions.push_back(std::move(stat));
            }
            std::sort(contributions.begin(), contributions.end());

            Vec agg(contributions.front().size(), 0.0);
            for (const Vec& c : contributions) add_in_place(agg, c);

            if (noise_enabled_ && q.mechanism != Mechanism::kNone) {
                RngStream stream = noise_stream(round_index, qi);
                const double s = effective_sensitivity(q);
                if (q.mechanism == Mechanism::kGaussian) {
                    const double sigma = gaussian_sigma(q.budget, Sensitivity{s, NormKind::kL2});
                    agg = add_gaussian_noise(std::move(agg), sigma, stream);
                } else {
                    const double b = laplace_scale(q.budget.epsilon, Sensitivity{s, NormKind::kL1});
                    agg = add_laplace_noise(std::move(agg), b, stream);
                }
            }
            results.push_back(std::move(agg));
        }
        ++rounds_;
        return results;
    }

    Vec secure_aggregate(const AggregationQuery& query) {
        return aggregate_round(std::span<const AggregationQuery>(&query, 1)).front();
    }

    // Sums the per-client outer-product matrices and perturbs the aggregate
    // with a symmetric Gaussian matrix (upper triangle iid). Data-point
    // sensitivity is the squared clip radius; client mode clips the whole
    // matrix in Frobenius norm.
    Matrix aggregate_outer_products(const std::string& label, PrivacyParams budget,
                                    double point_norm_bound,
                                    std::optional<double> clip_bound = std::nullopt) {
        AggregationQuery q;
        q.label = label;
        q.statistic = [](const Points& client) { return outer_product(client).data; };
        q.sensitivity = Sensitivity{point_norm_bound * point_norm_bound, NormKind::kL2};
        q.mechanism = Mechanism::kGaussian;
        q.budget = budget;
        q.clip_bound = clip_bound;

        register_query(q);
        const int round_index = rounds_;
        const std::size_t d = partition_.dim();

        std::vector<Vec> contributions;
        contributions.reserve(partition_.num_clients());
        for (const Points& client : partition_.clients) {
            Vec stat = client.empty() ? Vec(d * d, 0.0) : q.statistic(client);
            if (unit_ == PrivacyUnit::kClient) stat = clip_l2(std::move(stat), *q.clip_bound);
            contributions.push_back(std::move(stat));
        }
        std::sort(contributions.begin(), contributions.end());

        Matrix m(d, d);
        for (const Vec& c : contributions) {
            for (std::size_t i = 0; i < c.size(); ++i) m.data[i] += c[i];
        }
        if (noise_enabled_) {
            RngStream stream = noise_stream(round_index, 0);
            const double sigma = gaussian_sigma(q.budget,
                                                Sensitivity{effective_sensitivity(q), NormKind::kL2});
            const Matrix e = symmetric_gaussian_matrix(d, sigma, stream);
            for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] += e.data[i];
        }
        ++rounds_;
        return m;
    }

    // One round carrying the per-cluster point sums (Gaussian, L2 sensitivity
    // = point norm bound) and counts (Laplace, L1 sensitivity 1). Data-point
    // privacy unit only; client mode goes through mean_of_means_aggregate.
    struct SumsAndCounts {
        Points sums;  // k vectors of dimension d
        Vec counts;   // k
    };

    SumsAndCounts sums_and_counts_aggregate(const std::function<std::vector<int>(const Points&)>& labeler,
                                            std::size_t k, double point_norm_bound,
                                            PrivacyParams gaussian_budget,
                                            PrivacyParams laplace_budget,
                                            const std::string& label_prefix) {
        if (unit_ != PrivacyUnit::kDataPoint)
            throw std::invalid_argument(
                "sums_and_counts_aggregate: requires data-point privacy unit");
        const std::size_t d = partition_.dim();

        AggregationQuery sum_q;
        sum_q.label = label_prefix + ".sum";
        sum_q.statistic = [labeler, k, d](const Points& client) {
            Vec out(k * d, 0.0);
            const std::vector<int> labels = labeler(client);
            for (std::size_t i = 0; i < client.size(); ++i) {
                const std::size_t r = static_cast<std::size_t>(labels[i]);
                for (std::size_t c = 0; c < d; ++c) out[r * d + c] += client[i][c];
            }
            return out;
        };
        sum_q.sensitivity = Sensitivity{point_norm_bound, NormKind::kL2};
        sum_q.mechanism = Mechanism::kGaussian;
        sum_q.budget = gaussian_budget;

        AggregationQuery count_q;
        count_q.label = label_prefix + ".count";
        count_q.statistic = [labeler, k](const Points& client) {
            Vec out(k, 0.0);
            for (int r : labeler(client)) out[static_cast<std::size_t>(r)] += 1.0;
            return out;
        };
        count_q.sensitivity = Sensitivity{1.0, NormKind::kL1};
        count_q.mechanism = Mechanism::kLaplace;
        count_q.budget = laplace_budget;

        const AggregationQuery qs[2] = {std::move(sum_q), std::move(count_q)};
        std::vector<Vec> out = aggregate_round(std::span<const AggregationQuery>(qs, 2));

        SumsAndCounts sc;
        sc.sums.assign(k, Vec(d, 0.0));
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < d; ++c) sc.sums[r][c] = out[0][r * d + c];
        sc.counts = std::move(out[1]);
        return sc;
    }

    // Client-level pathway: each client reports its per-cluster local means
    // (zero for empty clusters) clipped to mean_bound, plus a nonempty-cluster
    // indicator histogram clipped to hist_bound. Returns the noisy sums of
    // both; one round, two ledger entries.
    struct MeanOfMeans {
        Points mean_sums;  // k vectors: noisy sum over clients of local means
        Vec indicator_sums;
    };

    MeanOfMeans mean_of_means_aggregate(const std::function<std::vector<int>(const Points&)>& labeler,
                                        std::size_t k, double mean_bound, double hist_bound,
                                        PrivacyParams gaussian_budget, PrivacyParams laplace_budget,
                                        const std::string& label_prefix) {
        if (unit_ != PrivacyUnit::kClient)
            throw std::invalid_argument("mean_of_means_aggregate: requires client privacy unit");
        const std::size_t d = partition_.dim();

        AggregationQuery mean_q;
        mean_q.label = label_prefix + ".mean";
        mean_q.statistic = [labeler, k, d](const Points& client) {
            Vec out(k * d, 0.0);
            Vec cnt(k, 0.0);
            const std::vector<int> labels = labeler(client);
            for (std::size_t i = 0; i < client.size(); ++i) {
                const std::size_t r = static_cast<std::size_t>(labels[i]);
                cnt[r] += 1.0;
                for (std::size_t c = 0; c < d; ++c) out[r * d + c] += client[i][c];
            }
            for (std::size_t r = 0; r < k; ++r) {
                if (cnt[r] > 0.0)
                    for (std::size_t c = 0; c < d; ++c) out[r * d + c] /= cnt[r];
            }
            return out;
        };
        mean_q.sensitivity = Sensitivity{mean_bound, NormKind::kL2};
        mean_q.mechanism = Mechanism::kGaussian;
        mean_q.budget = gaussian_budget;
        mean_q.clip_bound = mean_bound;

        AggregationQuery hist_q;
        hist_q.label = label_prefix + ".hist";
        hist_q.statistic = [labeler, k](const Points& client) {
            Vec cnt(k, 0.0);
            for (int r : labeler(client)) cnt[static_cast<std::size_t>(r)] = 1.0;
            return cnt;
        };
        hist_q.sensitivity = Sensitivity{hist_bound, NormKind::kL1};
        hist_q.mechanism = Mechanism::kLaplace;
        hist_q.budget = laplace_budget;
        hist_q.clip_bound = hist_bound;

        const AggregationQuery qs[2] = {std::move(mean_q), std::move(hist_q)};
        std::vector<Vec> out = aggregate_round(std::span<const AggregationQuery>(qs, 2));

        MeanOfMeans mm;
        mm.mean_sums.assign(k, Vec(d, 0.0));
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < d; ++c) mm.mean_sums[r][c] = out[0][r * d + c];
        mm.indicator_sums = std::move(out[1]);
        return mm;
    }

private:
    void register_query(const AggregationQuery& q) {
        if (!q.statistic) throw std::invalid_argument("AggregationQuery: missing statistic");
        if ((unit_ == PrivacyUnit::kClient) != q.clip_bound.has_value())
            throw std::invalid_argument(
                "AggregationQuery: clip_bound is present iff the privacy unit is client");
        if (q.clip_bound.has_value() && !(*q.clip_bound > 0.0))
            throw std::invalid_argument("AggregationQuery: clip_bound must be > 0");
        if (q.mechanism != Mechanism::kNone) {
            q.budget.validate();
            if (q.mechanism == Mechanism::kLaplace && q.budget.delta != 0.0)
                throw std::invalid_argument("AggregationQuery: Laplace budgets carry delta = 0");
            ledger_.append(q.label, q.budget);
        }
    }

    double effective_sensitivity(const AggregationQuery& q) const {
        if (unit_ == PrivacyUnit::kClient) return *q.clip_bound;
        q.sensitivity.validate();
        return q.sensitivity.value;
    }

    RngStream noise_stream(int round_index, std::size_t query_index) {
        return noise_rng_.substream(static_cast<std::uint64_t>(round_index))
            .substream(query_index + 1);
    }

    ClientPartition partition_;
    PrivacyUnit unit_;
    bool noise_enabled_;
    RngStream noise_rng_;
    BudgetLedger ledger_;
    int rounds_ = 0;
};

// Default client-level clip bound: the 90th percentile of the statistic's
// norm over a pseudo-partition of the server's own data, so no client data is
// touched while calibrating.
inline double default_clip_bound(const std::function<Vec(const Points&)>& statistic,
                                 const Points& server_data, std::size_t num_clients) {
    if (server_data.empty()) throw std::invalid_argument("default_clip_bound: empty server data");
    const std::size_t m = std::max<std::size_t>(1, std::min(num_clients, server_data.size()));
    std::vector<Points> chunks(m);
    for (std::size_t i = 0; i < server_data.size(); ++i) chunks[i % m].push_back(server_data[i]);
    Vec norms;
    norms.reserve(m);
    for (const Points& c : chunks) norms.push_back(norm(statistic(c)));
    std::sort(norms.begin(), norms.end());
    const std::size_t idx = std::min(norms.size() - 1,
                                     static_cast<std::size_t>(0.9 * static_cast<double>(norms.size())));
    const double b = norms[idx];
    return b > 0.0 ? b : 1.0;
}

}  // namespace feddp
