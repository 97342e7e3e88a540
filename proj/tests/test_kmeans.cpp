#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "feddp/kmeans.hpp"
#include "feddp/rng.hpp"

using namespace feddp;

namespace {

Points random_points(std::size_t n, std::size_t d, RngStream& rng, double range = 1.0) {
    Points pts(n, Vec(d));
    for (Vec& p : pts)
        for (double& x : p) x = range * rng.uniform01();
    return pts;
}

// Independent cost route: full pairwise-distance matrix, then row minima.
double cost_via_distance_matrix(const Points& points, const CenterSet& centers) {
    std::vector<std::vector<double>> dist(points.size(), std::vector<double>(centers.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < centers.size(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < points[i].size(); ++c) {
                const double diff = points[i][c] - centers[j][c];
                s += diff * diff;
            }
            dist[i][j] = s;
        }
    double total = 0.0;
    for (const auto& row : dist) total += *std::min_element(row.begin(), row.end());
    return total;
}

}  // namespace

TEST_CASE("kmeans cost basics", "[kmeans]") {
    const Points pts{{0.0}, {10.0}};
    REQUIRE(kmeans_cost(pts, pts) == 0.0);
    REQUIRE(kmeans_cost(pts, {{5.0}}) == 50.0);
    REQUIRE(normalized_kmeans_cost(pts, {{5.0}}) == 25.0);
    REQUIRE_THROWS_AS(kmeans_cost(pts, CenterSet{}), std::invalid_argument);

    RngStream rng(21);
    const Points points = random_points(20, 3, rng);
    const CenterSet centers = random_points(4, 3, rng);
    REQUIRE(kmeans_cost(points, centers) ==
            Catch::Approx(cost_via_distance_matrix(points, centers)).margin(1e-9));
}

TEST_CASE("assignment ties break to the lowest index", "[kmeans]") {
    const CenterSet centers{{0.0}, {2.0}};
    REQUIRE(assign({{1.0}}, centers)[0] == 0);  // equidistant
    REQUIRE(assign({{2.0}}, centers)[0] == 1);  // coincides with center 1

    RngStream rng(22);
    const Points points = random_points(50, 2, rng);
    const CenterSet cs = random_points(5, 2, rng);
    const std::vector<int> got = assign(points, cs);
    for (std::size_t i = 0; i < points.size(); ++i) {
        // Exhaustive scan oracle.
        int best = 0;
        double bd = squared_distance(points[i], cs[0]);
        for (std::size_t j = 1; j < cs.size(); ++j) {
            const double d = squared_distance(points[i], cs[j]);
            if (d < bd) {
                bd = d;
                best = static_cast<int>(j);
            }
        }
        REQUIRE(got[i] == best);
    }
}

TEST_CASE("seeding support rules", "[kmeans]") {
    WeightedPoints data;
    data.points = {{0.0}, {1.0}, {5.0}, {9.0}};
    data.weights = {1.0, 0.0, 2.0, 1.0};  // three distinct positive-weight points

    RngStream rng(23);
    const CenterSet all = weighted_kmeans_pp_seed(data, 3, rng);
    std::vector<double> chosen;
    for (const Vec& c : all) chosen.push_back(c[0]);
    std::sort(chosen.begin(), chosen.end());
    REQUIRE(chosen == std::vector<double>{0.0, 5.0, 9.0});

    WeightedPoints lone;
    lone.points = {{3.0}, {4.0}};
    lone.weights = {1.0, 0.0};
    REQUIRE(weighted_kmeans_pp_seed(lone, 1, rng)[0] == Vec{3.0});

    WeightedPoints zeros;
    zeros.points = {{1.0}};
    zeros.weights = {0.0};
    REQUIRE_THROWS_AS(weighted_kmeans_pp_seed(zeros, 1, rng), std::invalid_argument);
}

TEST_CASE("seeding law matches analytic probabilities", "[kmeans][slow]") {
    // Three 1-D points; k = 2. First pick is proportional to w, second to
    // w * D^2 given the first.
    WeightedPoints data;
    data.points = {{0.0}, {1.0}, {3.0}};
    data.weights = {1.0, 2.0, 1.0};
    const double w[3] = {1.0, 2.0, 1.0};
    const double wsum = 4.0;
    double analytic[3][3] = {};
    for (int f = 0; f < 3; ++f) {
        double mass[3];
        double total = 0.0;
        for (int s = 0; s < 3; ++s) {
            const double d = data.points[s][0] - data.points[f][0];
            mass[s] = w[s] * d * d;
            total += mass[s];
        }
        for (int s = 0; s < 3; ++s) analytic[f][s] = (w[f] / wsum) * (mass[s] / total);
    }

    RngStream rng(24);
    const int trials = 100000;
    double counts[3][3] = {};
    for (int t = 0; t < trials; ++t) {
        RngStream stream = rng.substream(static_cast<std::uint64_t>(t));
        const CenterSet centers = weighted_kmeans_pp_seed(data, 2, stream);
        int f = -1, s = -1;
        for (int i = 0; i < 3; ++i) {
            if (data.points[i] == centers[0]) f = i;
            if (data.points[i] == centers[1]) s = i;
        }
        counts[f][s] += 1.0;
    }
    for (int f = 0; f < 3; ++f)
        for (int s = 0; s < 3; ++s)
            REQUIRE(counts[f][s] / trials == Catch::Approx(analytic[f][s]).margin(0.01));
}

TEST_CASE("lloyd fixed points and hand cases", "[kmeans]") {
    // Weighted mean: {0, 10} with weights {3, 1} and k = 1 -> 2.5.
    WeightedPoints data;
    data.points = {{0.0}, {10.0}};
    data.weights = {3.0, 1.0};
    const CenterSet one = weighted_lloyd(data, {{7.0}});
    REQUIRE(one[0][0] == Catch::Approx(2.5));

    // Init at the optimum returns unchanged.
    WeightedPoints four;
    four.points = {{0.0}, {1.0}, {9.0}, {10.0}};
    four.weights = {1.0, 1.0, 1.0, 1.0};
    const CenterSet opt{{0.5}, {9.5}};
    REQUIRE(weighted_lloyd(four, opt) == opt);

    // Empty clusters keep their previous center.
    const CenterSet kept = weighted_lloyd(four, {{5.0}, {100.0}});
    REQUIRE(kept[1][0] == 100.0);
}

TEST_CASE("lloyd cost is non-increasing", "[kmeans]") {
    RngStream rng(26);
    for (int trial = 0; trial < 10; ++trial) {
        WeightedPoints data;
        data.points = random_points(40, 2, rng, 5.0);
        data.weights.assign(40, 1.0);
        for (double& w : data.weights) w = rng.uniform01() * 2.0;
        RngStream seed_rng = rng.substream(static_cast<std::uint64_t>(trial));
        CenterSet init = weighted_kmeans_pp_seed(data, 3, seed_rng);
        std::vector<double> trace;
        weighted_lloyd(data, init, {}, &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] <= trace[i - 1] + 1e-12);
    }
}

TEST_CASE("brute force oracle", "[kmeans]") {
    const auto [c2, cost2] = brute_force_kmeans({{0.0}, {4.0}}, 2);
    REQUIRE(cost2 == 0.0);

    const auto [centers, cost] = brute_force_kmeans({{0.0}, {1.0}, {9.0}, {10.0}}, 2);
    REQUIRE(cost == Catch::Approx(1.0));
    std::vector<double> flat{centers[0][0], centers[1][0]};
    std::sort(flat.begin(), flat.end());
    REQUIRE(flat[0] == Catch::Approx(0.5));
    REQUIRE(flat[1] == Catch::Approx(9.5));

    REQUIRE_THROWS_AS(brute_force_kmeans(Points(13, Vec{0.0}), 2), std::invalid_argument);
    REQUIRE_THROWS_AS(brute_force_kmeans({{0.0}}, 4), std::invalid_argument);
}

TEST_CASE("oracle dominates lloyd on random instances", "[kmeans]") {
    RngStream rng(27);
    for (int trial = 0; trial < 15; ++trial) {
        const Points pts = random_points(8, 2, rng);
        const auto [oc, ocost] = brute_force_kmeans(pts, 2);
        (void)oc;
        RngStream stream = rng.substream(static_cast<std::uint64_t>(trial));
        const CenterSet lloyd = weighted_kmeans(unit_weights(pts), 2, 5, stream);
        REQUIRE(ocost <= kmeans_cost(pts, lloyd) + 1e-12);
    }
}

TEST_CASE("scaling points by 2 scales cost by 4 exactly", "[kmeans]") {
    RngStream rng(28);
    const Points pts = random_points(12, 3, rng);
    const CenterSet centers = random_points(2, 3, rng);
    Points scaled_pts = pts;
    CenterSet scaled_centers = centers;
    for (Vec& p : scaled_pts) scale_in_place(p, 2.0);
    for (Vec& c : scaled_centers) scale_in_place(c, 2.0);
    REQUIRE(kmeans_cost(scaled_pts, scaled_centers) == 4.0 * kmeans_cost(pts, centers));
}

TEST_CASE("negative weights clamp to zero before clustering", "[kmeans]") {
    WeightedPoints data;
    data.points = {{0.0}, {10.0}};
    data.weights = {1.0, -5.0};
    RngStream rng(29);
    const CenterSet c = weighted_kmeans(data, 1, 3, rng);
    REQUIRE(c[0][0] == Catch::Approx(0.0));  // the negative-weight point vanishes
}
