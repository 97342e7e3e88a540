#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "feddp/dp.hpp"

using namespace feddp;

TEST_CASE("gaussian sigma closed form", "[dp]") {
    // sqrt(2 ln(1.25/delta)) * S / eps, evaluated independently.
    REQUIRE(gaussian_sigma({1.0, 1e-5}, {1.0, NormKind::kL2}) ==
            Catch::Approx(4.844805262605389).epsilon(1e-12));
    REQUIRE(gaussian_sigma({1.0, 1e-6}, {2.0, NormKind::kL2}) ==
            Catch::Approx(10.597605053700947).epsilon(1e-12));

    // Homogeneity: doubling S doubles sigma, doubling eps halves it.
    const double base = gaussian_sigma({0.7, 1e-6}, {1.3, NormKind::kL2});
    REQUIRE(gaussian_sigma({0.7, 1e-6}, {2.6, NormKind::kL2}) == Catch::Approx(2 * base));
    REQUIRE(gaussian_sigma({1.4, 1e-6}, {1.3, NormKind::kL2}) == Catch::Approx(base / 2));
}

TEST_CASE("gaussian sigma rejects bad inputs", "[dp]") {
    REQUIRE_THROWS_AS(gaussian_sigma({1.0, 0.0}, {1.0, NormKind::kL2}), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_sigma({0.0, 1e-5}, {1.0, NormKind::kL2}), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_sigma({-1.0, 1e-5}, {1.0, NormKind::kL2}), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_sigma({1.0, 1e-5}, {0.0, NormKind::kL2}), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_sigma({1.0, 1e-5}, {1.0, NormKind::kL1}), std::invalid_argument);
}

TEST_CASE("laplace scale", "[dp]") {
    REQUIRE(laplace_scale(0.5, {1.0, NormKind::kL1}) == 2.0);
    REQUIRE(laplace_scale(2.0, {1.0, NormKind::kL1}) == 0.5);
    REQUIRE(laplace_scale(1.0, {3.0, NormKind::kL1}) == 3.0);
    REQUIRE_THROWS_AS(laplace_scale(0.0, {1.0, NormKind::kL1}), std::invalid_argument);
    REQUIRE_THROWS_AS(laplace_scale(1.0, {0.0, NormKind::kL1}), std::invalid_argument);
    REQUIRE_THROWS_AS(laplace_scale(1.0, {1.0, NormKind::kL2}), std::invalid_argument);
}

TEST_CASE("gaussian noise: disabled mode, determinism, calibration", "[dp]") {
    RngStream rng(5);
    const Vec v{1.0, -2.0, 3.5};
    REQUIRE(add_gaussian_noise(v, 0.0, rng) == v);
    REQUIRE_THROWS_AS(add_gaussian_noise(v, -1.0, rng), std::invalid_argument);

    RngStream a(17), b(17);
    REQUIRE(add_gaussian_noise(v, 2.0, a) == add_gaussian_noise(v, 2.0, b));

    // Monte Carlo variance of 10^6 draws at sigma = 1 within 2%, three seeds.
    for (std::uint64_t seed : {101u, 202u, 303u}) {
        RngStream r(seed);
        const int n = 1000000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = r.normal();
            sum += x;
            sq += x * x;
        }
        const double var = sq / n - (sum / n) * (sum / n);
        REQUIRE(var > 0.99);
        REQUIRE(var < 1.01);
    }
}

TEST_CASE("laplace noise: disabled mode, calibration, symmetry", "[dp]") {
    RngStream rng(6);
    REQUIRE(add_laplace_noise(4.2, 0.0, rng) == 4.2);
    REQUIRE_THROWS_AS(add_laplace_noise(0.0, -0.5, rng), std::invalid_argument);

    for (std::uint64_t seed : {11u, 22u, 33u}) {
        RngStream r(seed);
        const int n = 1000000;
        double sum = 0.0, sq = 0.0;
        std::vector<double> draws;
        draws.reserve(n);
        for (int i = 0; i < n; ++i) {
            const double x = r.laplace(1.0);
            draws.push_back(x);
            sum += x;
            sq += x * x;
        }
        const double var = sq / n - (sum / n) * (sum / n);
        REQUIRE(var == Catch::Approx(2.0).epsilon(0.02));  // Var Lap(b) = 2 b^2

        std::nth_element(draws.begin(), draws.begin() + n / 2, draws.end());
        REQUIRE(std::abs(draws[n / 2]) < 0.01);  // median at the location parameter
    }
}

TEST_CASE("symmetric gaussian matrix", "[dp]") {
    RngStream rng(8);
    const Matrix one = symmetric_gaussian_matrix(1, 2.0, rng);
    REQUIRE(one.rows == 1);

    const Matrix m = symmetric_gaussian_matrix(15, 1.5, rng);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) REQUIRE(m(i, j) == m(j, i));

    REQUIRE_THROWS_AS(symmetric_gaussian_matrix(0, 1.0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(symmetric_gaussian_matrix(3, 0.0, rng), std::invalid_argument);
}

TEST_CASE("clip_l2", "[dp]") {
    REQUIRE(clip_l2({3.0, 4.0}, 10.0) == Vec{3.0, 4.0});
    const Vec clipped = clip_l2({3.0, 4.0}, 1.0);
    REQUIRE(clipped[0] == Catch::Approx(0.6));
    REQUIRE(clipped[1] == Catch::Approx(0.8));
    REQUIRE(clip_l2({0.0, 0.0}, 0.5) == Vec{0.0, 0.0});
    REQUIRE_THROWS_AS(clip_l2({1.0}, 0.0), std::invalid_argument);

    // Idempotence and the norm bound, over random vectors.
    RngStream rng(9);
    for (int i = 0; i < 200; ++i) {
        Vec v(7);
        for (double& x : v) x = 10.0 * (rng.uniform01() - 0.5);
        const double bound = 0.1 + 3.0 * rng.uniform01();
        const Vec once = clip_l2(v, bound);
        REQUIRE(norm(once) <= bound);
        REQUIRE(clip_l2(once, bound) == once);
    }
}

TEST_CASE("basic composition", "[dp]") {
    BudgetLedger ledger;
    ledger.append("a", {0.1, 1e-7});
    ledger.append("b", {0.1, 1e-7});
    ledger.append("c", {0.1, 1e-7});
    const PrivacyParams total = compose_basic(ledger);
    REQUIRE(total.epsilon == Catch::Approx(0.3).epsilon(1e-12));
    REQUIRE(total.delta == Catch::Approx(3e-7).epsilon(1e-12));

    BudgetLedger single;
    single.append("x", {0.7, 1e-6});
    REQUIRE(compose_basic(single).epsilon == 0.7);
    REQUIRE(compose_basic(single).delta == 1e-6);

    // Permutation invariance.
    BudgetLedger fwd, rev;
    const double eps[] = {0.3, 0.11, 0.27, 0.05};
    for (int i = 0; i < 4; ++i) fwd.append("e" + std::to_string(i), {eps[i], 1e-8});
    for (int i = 3; i >= 0; --i) rev.append("e" + std::to_string(i), {eps[i], 1e-8});
    REQUIRE(compose_basic(fwd).epsilon == Catch::Approx(compose_basic(rev).epsilon).epsilon(1e-14));

    REQUIRE_THROWS_AS(compose_basic(BudgetLedger{}), std::invalid_argument);
}

TEST_CASE("ledger rejects duplicate labels", "[dp]") {
    BudgetLedger ledger;
    ledger.append("q", {0.1, 0.0});
    REQUIRE_THROWS_AS(ledger.append("q", {0.2, 0.0}), std::invalid_argument);
}

TEST_CASE("advanced composition", "[dp]") {
    BudgetLedger ledger;
    for (int i = 0; i < 10; ++i) ledger.append("e" + std::to_string(i), {0.1, 1e-7});
    const PrivacyParams adv = compose_advanced(ledger, 1e-6);
    // sqrt(2 * 10 * ln 1e6) * 0.1 + 10 * 0.1 * (e^0.1 - 1), frozen.
    REQUIRE(adv.epsilon == Catch::Approx(1.767429054344758).epsilon(1e-12));
    REQUIRE(adv.delta == Catch::Approx(10e-7 + 1e-6).epsilon(1e-12));

    BudgetLedger hetero;
    hetero.append("a", {0.1, 0.0});
    hetero.append("b", {0.2, 0.0});
    REQUIRE_THROWS_AS(compose_advanced(hetero, 1e-6), std::invalid_argument);
    REQUIRE(compose_report(hetero, 1e-6).epsilon ==
            Catch::Approx(compose_basic(hetero).epsilon));

    // Single entry: reported total is min(basic, advanced) = basic.
    BudgetLedger single;
    single.append("x", {0.5, 1e-7});
    REQUIRE(compose_report(single, 1e-6).epsilon == compose_basic(single).epsilon);

    // Advanced beats basic at s = 100, eps = 0.05.
    BudgetLedger many;
    for (int i = 0; i < 100; ++i) many.append("m" + std::to_string(i), {0.05, 1e-8});
    const PrivacyParams rep = compose_report(many, 1e-6);
    REQUIRE(rep.epsilon == Catch::Approx(2.8846163667585865).epsilon(1e-12));
    REQUIRE(rep.epsilon < compose_basic(many).epsilon);
}

TEST_CASE("reported budget never exceeds basic epsilon", "[dp]") {
    RngStream rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        BudgetLedger ledger;
        const int s = 1 + static_cast<int>(rng.uniform01() * 20);
        const double eps = 0.01 + rng.uniform01();
        for (int i = 0; i < s; ++i) ledger.append("t" + std::to_string(i), {eps, 1e-8});
        REQUIRE(compose_report(ledger, 1e-7).epsilon <= compose_basic(ledger).epsilon + 1e-15);
    }
}
