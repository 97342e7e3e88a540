#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/fed.hpp"
#include "feddp/init.hpp"

// Theory-side preprocessing, feature-flagged and off by default in the
// practical pipeline: iterative server-data simplification (freeze heavy
// points, halve the light ones) and the diameter-reduction transform that
// translates far-apart components next to each other with an exact inverse.

namespace feddp {

struct FrozenSet {
    std::vector<std::size_t> frozen;        // indices into the server data
    std::vector<std::size_t> active_final;  // survivors still light after the last round
    int iterations = 0;
    double round_eps = 0.0;  // eps / T charged per iteration
};

inline int simplify_iteration_count(std::size_t server_count, double eps, double w_min) {
    const double q = static_cast<double>(std::max<std::size_t>(server_count, 2));
    const double inner = 4.0 * std::log(q) / (eps * w_min);
    if (!(inner > 1.0)) return 1;
    return std::max(1, static_cast<int>(std::ceil(10.0 * std::log(inner))));
}

// Iteratively freezes server points whose noisy assignment weight exceeds
// 2 ln(n)/eps and subsamples the remaining light points at rate 1/2. Every
// iteration is one communication round charging eps/T; all T iterations run
// even if the active set empties early so the round count is deterministic.
inline FrozenSet simplify_server_data(FederatedRun& run, const Points& server_data,
                                      const ProjectionMatrix& projector, double eps,
                                      double w_min_est, RngStream rng,
                                      std::optional<int> iterations_override = std::nullopt) {
    if (server_data.empty()) throw std::invalid_argument("simplify_server_data: empty server data");
    if (!(eps > 0.0)) throw std::invalid_argument("simplify_server_data: eps must be > 0");
    if (!(w_min_est > 0.0))
        throw std::invalid_argument("simplify_server_data: w_min_est must be > 0");

    const double n = static_cast<double>(run.partition().total_points());
    const int t_total = iterations_override.value_or(
        simplify_iteration_count(server_data.size(), eps, w_min_est));
    const double threshold = 2.0 * std::log(std::max(n, 2.0)) / eps;
    const Points projected_server = project(projector, server_data);

    std::vector<std::size_t> frozen;
    std::vector<std::size_t> active(server_data.size());
    std::iota(active.begin(), active.end(), 0);

    for (int t = 0; t < t_total; ++t) {
        std::vector<std::size_t> members = frozen;
        members.insert(members.end(), active.begin(), active.end());
        std::sort(members.begin(), members.end());

        Points targets;
        targets.reserve(members.size());
        for (std::size_t idx : members) targets.push_back(projected_server[idx]);

        AggregationQuery q;
        q.label = "simplify.iter" + std::to_string(t);
        q.statistic = [&projector, targets](const Points& client) {
            Vec counts(targets.size(), 0.0);
            if (!client.empty()) {
                const std::vector<int> labels = nearest_projected_labels(projector, targets, client);
                for (int r : labels) counts[static_cast<std::size_t>(r)] += 1.0;
            }
            return counts;
        };
        q.sensitivity = Sensitivity{1.0, NormKind::kL1};
        q.mechanism = Mechanism::kLaplace;
        q.budget = PrivacyParams{eps / static_cast<double>(t_total), 0.0};
        const Vec weights = run.secure_aggregate(q);

        std::vector<std::size_t> light;
        for (std::size_t m = 0; m < members.size(); ++m) {
            const std::size_t idx = members[m];
            const bool already_frozen =
                std::find(frozen.begin(), frozen.end(), idx) != frozen.end();
            if (already_frozen) continue;
            if (weights[m] > threshold) {
                frozen.push_back(idx);
            } else {
                light.push_back(idx);
            }
        }
        std::sort(frozen.begin(), frozen.end());

        std::vector<std::size_t> next_active;
        for (std::size_t idx : light) {
            if (rng.uniform01() < 0.5) next_active.push_back(idx);
        }
        active = std::move(next_active);
    }

    FrozenSet out;
    out.frozen = std::move(frozen);
    out.active_final = std::move(active);
    out.iterations = t_total;
    out.round_eps = eps / static_cast<double>(t_total);
    return out;
}

struct DiameterParams {
    double distance = 1.0;               // D: ball radius and edge threshold
    double freeze_count_threshold = 1.0; // server points within D to mark q dense
    double prune_count_threshold = 1.0;  // noisy client mass below which light points drop

    void validate() const {
        if (!(distance > 0.0)) throw std::invalid_argument("DiameterParams: distance must be > 0");
    }
};

struct ComponentGraph {
    std::vector<std::size_t> survivors;               // original server indices
    std::vector<std::vector<std::size_t>> components; // original indices per component
    std::vector<Vec> translations;                    // applied per component
    std::vector<int> survivor_component;              // component id per survivor
    double max_component_diameter = 0.0;              // D'
};

struct DiameterReduction {
    Points server_points;                     // surviving server points, translated
    ClientPartition partition;                // all client points, translated
    ClientPartition source_partition;         // untouched input coordinates
    std::vector<std::vector<int>> point_components;  // per client, per point
    ComponentGraph graph;

    // Inverse translation for novel points (e.g. centers computed in the
    // transformed space); exact up to one rounding of the translation.
    Vec to_original(const Vec& p, int component) const {
        Vec out = p;
        for (std::size_t c = 0; c < out.size(); ++c) out[c] -= graph.translations[component][c];
        return out;
    }

    // Exact round trip for the data points themselves.
    const Vec& original_point(std::size_t client, std::size_t index) const {
        return source_partition.clients[client][index];
    }

    // Maps an arbitrary transformed-space point (e.g. a final center) back by
    // the component of its nearest transformed server point.
    Vec map_back(const Vec& p) const {
        double best = squared_distance(p, server_points[0]);
        std::size_t best_i = 0;
        for (std::size_t i = 1; i < server_points.size(); ++i) {
            const double d = squared_distance(p, server_points[i]);
            if (d < best) {
                best = d;
                best_i = i;
            }
        }
        return to_original(p, graph.survivor_component[best_i]);
    }
};

// Prunes light non-frozen server points with one noisy-count round, builds
// the distance-D graph on the survivors, and translates component i so its
// representative (lowest surviving index) sits at (100 D' i, 0, ..., 0).
inline DiameterReduction reduce_diameter(FederatedRun& run, const Points& server_data, double eps,
                                         const DiameterParams& params) {
    params.validate();
    if (server_data.empty()) throw std::invalid_argument("reduce_diameter: empty server data");
    if (!(eps > 0.0)) throw std::invalid_argument("reduce_diameter: eps must be > 0");
    const double d_ball = params.distance;
    const std::size_t q_count = server_data.size();

    // Dense server points by server-side ball counts (no privacy cost).
    std::vector<bool> dense(q_count, false);
    for (std::size_t i = 0; i < q_count; ++i) {
        double cnt = 0.0;
        for (std::size_t j = 0; j < q_count; ++j) {
            if (squared_distance(server_data[i], server_data[j]) <= d_ball * d_ball) cnt += 1.0;
        }
        dense[i] = cnt >= params.freeze_count_threshold;
    }

    // One round of noisy client assignment counts over the server points.
    AggregationQuery q;
    q.label = "diam.counts";
    q.statistic = [server_data](const Points& client) {
        Vec counts(server_data.size(), 0.0);
        for (const Vec& p : client) {
            double best = squared_distance(p, server_data[0]);
            std::size_t best_j = 0;
            for (std::size_t j = 1; j < server_data.size(); ++j) {
                const double dist = squared_distance(p, server_data[j]);
                if (dist < best) {
                    best = dist;
                    best_j = j;
                }
            }
            counts[best_j] += 1.0;
        }
        return counts;
    };
    q.sensitivity = Sensitivity{1.0, NormKind::kL1};
    q.mechanism = Mechanism::kLaplace;
    q.budget = PrivacyParams{eps, 0.0};
    const Vec noisy_counts = run.secure_aggregate(q);

    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < q_count; ++i) {
        double ball_mass = 0.0;
        for (std::size_t j = 0; j < q_count; ++j) {
            if (squared_distance(server_data[i], server_data[j]) <= d_ball * d_ball)
                ball_mass += noisy_counts[j];
        }
        if (dense[i] || ball_mass >= params.prune_count_threshold) survivors.push_back(i);
    }
    if (survivors.empty()) throw std::runtime_error("reduce_diameter: no surviving server points");

    // Components of the distance-D graph on survivors (union-find).
    std::vector<std::size_t> parent(survivors.size());
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < survivors.size(); ++a) {
        for (std::size_t b = a + 1; b < survivors.size(); ++b) {
            if (squared_distance(server_data[survivors[a]], server_data[survivors[b]]) <=
                d_ball * d_ball)
                parent[find(a)] = find(b);
        }
    }
    std::vector<int> comp_of(survivors.size(), -1);
    std::vector<std::vector<std::size_t>> components;
    for (std::size_t a = 0; a < survivors.size(); ++a) {
        const std::size_t root = find(a);
        if (comp_of[root] < 0) {
            comp_of[root] = static_cast<int>(components.size());
            components.emplace_back();
        }
        comp_of[a] = comp_of[root];
        components[comp_of[a]].push_back(survivors[a]);
    }

    double d_prime = 0.0;
    for (const auto& comp : components) {
        for (std::size_t a = 0; a < comp.size(); ++a)
            for (std::size_t b = a + 1; b < comp.size(); ++b)
                d_prime = std::max(d_prime, distance(server_data[comp[a]], server_data[comp[b]]));
    }
    // All-singleton components would otherwise collapse onto one target.
    const double spacing = 100.0 * (d_prime > 0.0 ? d_prime : d_ball);

    const std::size_t dim = server_data.front().size();
    std::vector<Vec> translations;
    for (std::size_t c = 0; c < components.size(); ++c) {
        const Vec& rep = server_data[components[c].front()];
        Vec t(dim, 0.0);
        t[0] = spacing * static_cast<double>(c) - rep[0];
        for (std::size_t i = 1; i < dim; ++i) t[i] = -rep[i];
        translations.push_back(std::move(t));
    }

    DiameterReduction out;
    out.graph.survivors = survivors;
    out.graph.components = components;
    out.graph.translations = translations;
    out.graph.max_component_diameter = d_prime;
    out.graph.survivor_component.resize(survivors.size());
    for (std::size_t a = 0; a < survivors.size(); ++a) out.graph.survivor_component[a] = comp_of[a];

    out.server_points.reserve(survivors.size());
    for (std::size_t a = 0; a < survivors.size(); ++a) {
        Vec p = server_data[survivors[a]];
        add_in_place(p, translations[comp_of[a]]);
        out.server_points.push_back(std::move(p));
    }

    const ClientPartition& partition = run.partition();
    out.source_partition = partition;
    out.partition.clients.resize(partition.num_clients());
    out.point_components.resize(partition.num_clients());
    for (std::size_t j = 0; j < partition.num_clients(); ++j) {
        for (const Vec& p : partition.clients[j]) {
            double best = squared_distance(p, server_data[survivors[0]]);
            std::size_t best_a = 0;
            for (std::size_t a = 1; a < survivors.size(); ++a) {
                const double dist = squared_distance(p, server_data[survivors[a]]);
                if (dist < best) {
                    best = dist;
                    best_a = a;
                }
            }
            const int c = comp_of[best_a];
            Vec moved = p;
            add_in_place(moved, translations[c]);
            out.partition.clients[j].push_back(std::move(moved));
            out.point_components[j].push_back(c);
        }
    }
    return out;
}

}  // namespace feddp
