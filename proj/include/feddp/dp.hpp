#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/rng.hpp"

// Differential-privacy primitives: calibrated Gaussian/Laplace mechanisms,
// L2 clipping, and a composition ledger with basic and advanced accounting.

namespace feddp {

struct PrivacyParams {
    double epsilon = 0.0;
    double delta = 0.0;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("PrivacyParams: epsilon must be > 0");
        if (!(delta >= 0.0 && delta < 1.0))
            throw std::invalid_argument("PrivacyParams: delta must lie in [0, 1)");
    }
};

enum class NormKind { kL1, kL2 };

struct Sensitivity {
    double value = 0.0;
    NormKind norm = NormKind::kL2;

    void validate() const {
        if (!(value >= 0.0)) throw std::invalid_argument("Sensitivity: value must be >= 0");
    }
};

// Append-only record of per-mechanism budget charges. Labels are unique
// within a run so a serialized ledger identifies every noisy query.
class BudgetLedger {
public:
    struct Entry {
        std::string label;
        PrivacyParams params;
    };

    void append(std::string label, PrivacyParams params) {
        params.validate();
        for (const Entry& e : entries_) {
            if (e.label == label)
                throw std::invalid_argument("BudgetLedger: duplicate label '" + label + "'");
        }
        entries_.push_back(Entry{std::move(label), params});
    }

    const std::vector<Entry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<Entry> entries_;
};

// Gaussian mechanism noise level: sigma = sqrt(2 ln(1.25/delta)) * S / eps.
inline double gaussian_sigma(const PrivacyParams& params, const Sensitivity& s) {
    params.validate();
    if (!(params.delta > 0.0))
        throw std::invalid_argument("gaussian_sigma: Gaussian mechanism requires delta > 0");
    if (s.norm != NormKind::kL2)
        throw std::invalid_argument("gaussian_sigma: requires an L2 sensitivity");
    if (!(s.value > 0.0)) throw std::invalid_argument("gaussian_sigma: sensitivity must be > 0");
    return std::sqrt(2.0 * std::log(1.25 / params.delta)) * s.value / params.epsilon;
}

// Laplace mechanism scale: b = S / eps.
inline double laplace_scale(double epsilon, const Sensitivity& s) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("laplace_scale: epsilon must be > 0");
    if (s.norm != NormKind::kL1)
        throw std::invalid_argument("laplace_scale: requires an L1 sensitivity");
    if (!(s.value > 0.0)) throw std::invalid_argument("laplace_scale: sensitivity must be > 0");
    return s.value / epsilon;
}

// Adds iid N(0, sigma^2) to each coordinate. sigma == 0 is the disabled-noise
// mode: the input is returned unchanged and no randomness is consumed.
inline Vec add_gaussian_noise(Vec v, double sigma, RngStream& rng) {
    if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    if (sigma == 0.0) return v;
    for (double& x : v) x += sigma * rng.normal();
    return v;
}

// Adds Lap(0, b); b == 0 is the disabled-noise mode.
inline double add_laplace_noise(double x, double b, RngStream& rng) {
    if (b < 0.0) throw std::invalid_argument("add_laplace_noise: scale must be >= 0");
    if (b == 0.0) return x;
    return x + rng.laplace(b);
}

inline Vec add_laplace_noise(Vec v, double b, RngStream& rng) {
    if (b < 0.0) throw std::invalid_argument("add_laplace_noise: scale must be >= 0");
    if (b == 0.0) return v;
    for (double& x : v) x += rng.laplace(b);
    return v;
}

// Symmetric d x d matrix whose upper triangle (diagonal included) is iid
// N(0, sigma^2); the lower triangle mirrors it bit-exactly.
inline Matrix symmetric_gaussian_matrix(std::size_t d, double sigma, RngStream& rng) {
    if (d < 1) throw std::invalid_argument("symmetric_gaussian_matrix: d must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("symmetric_gaussian_matrix: sigma must be > 0");
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            const double x = sigma * rng.normal();
            m(i, j) = x;
            m(j, i) = x;
        }
    }
    return m;
}

// Rescales v onto the L2 ball of the given radius; vectors inside the ball
// pass through unchanged. The rescale repeats if rounding left the norm a
// hair above the bound, so the result satisfies ||v|| <= bound exactly and
// clipping is idempotent.
inline Vec clip_l2(Vec v, double bound) {
    if (!(bound > 0.0)) throw std::invalid_argument("clip_l2: bound must be > 0");
    double n = norm(v);
    while (n > bound) {
        scale_in_place(v, bound / n);
        n = norm(v);
    }
    return v;
}

// Basic composition: (sum eps, sum delta).
inline PrivacyParams compose_basic(const BudgetLedger& ledger) {
    if (ledger.empty()) throw std::invalid_argument("compose_basic: empty ledger");
    PrivacyParams total{0.0, 0.0};
    for (const auto& e : ledger.entries()) {
        total.epsilon += e.params.epsilon;
        total.delta += e.params.delta;
    }
    return total;
}

inline bool ledger_is_homogeneous(const BudgetLedger& ledger) {
    if (ledger.empty()) return false;
    const PrivacyParams& first = ledger.entries().front().params;
    for (const auto& e : ledger.entries()) {
        if (e.params.epsilon != first.epsilon || e.params.delta != first.delta) return false;
    }
    return true;
}

// Advanced composition for s identical (eps, delta) entries:
//   eps_total = sqrt(2 s ln(1/slack)) eps + s eps (e^eps - 1),
//   delta_total = s delta + slack.
inline PrivacyParams compose_advanced(const BudgetLedger& ledger, double delta_slack) {
    if (ledger.empty()) throw std::invalid_argument("compose_advanced: empty ledger");
    if (!(delta_slack > 0.0))
        throw std::invalid_argument("compose_advanced: delta_slack must be > 0");
    if (!ledger_is_homogeneous(ledger))
        throw std::invalid_argument("compose_advanced: heterogeneous ledger entries");
    const double s = static_cast<double>(ledger.size());
    const double eps = ledger.entries().front().params.epsilon;
    const double delta = ledger.entries().front().params.delta;
    PrivacyParams total;
    total.epsilon = std::sqrt(2.0 * s * std::log(1.0 / delta_slack)) * eps +
                    s * eps * (std::exp(eps) - 1.0);
    total.delta = s * delta + delta_slack;
    return total;
}

// Reported total: min(basic, advanced) by epsilon, falling back to basic
// composition when the entries are heterogeneous.
inline PrivacyParams compose_report(const BudgetLedger& ledger, double delta_slack) {
    const PrivacyParams basic = compose_basic(ledger);
    if (!ledger_is_homogeneous(ledger)) return basic;
    const PrivacyParams advanced = compose_advanced(ledger, delta_slack);
    return advanced.epsilon < basic.epsilon ? advanced : basic;
}

}  // namespace feddp
