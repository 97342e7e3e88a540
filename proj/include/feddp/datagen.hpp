#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddp/core.hpp"
#include "feddp/fed.hpp"
#include "feddp/rng.hpp"

// Synthetic Gaussian-mixture construction with ground-truth labels,
// separation/assumption checkers, client partitioning, server-data scenarios
// (including deliberately missing components), and a generic matrix importer
// for external data. Sampling uses the fixed algorithms documented in
// rng.hpp, so datasets are reproducible across platforms.

namespace feddp {

struct MixtureSpec {
    std::size_t k = 0;
    std::size_t d = 0;
    Points means;                  // k vectors of dimension d
    double covariance_scale = 1.0; // per-coordinate standard deviation (isotropic)
    Vec weights;                   // k nonnegative entries summing to 1
    double mean_range = 1.0;       // means (and the OOD cube) live in [0, mean_range]^d

    void validate() const {
        if (k == 0 || d == 0) throw std::invalid_argument("MixtureSpec: k and d must be >= 1");
        if (means.size() != k || weights.size() != k)
            throw std::invalid_argument("MixtureSpec: means/weights must have k entries");
        for (const Vec& m : means) {
            if (m.size() != d) throw std::invalid_argument("MixtureSpec: mean dimension mismatch");
        }
        if (!(covariance_scale > 0.0))
            throw std::invalid_argument("MixtureSpec: covariance_scale must be > 0");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("MixtureSpec: negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("MixtureSpec: weights must sum to 1");
    }

    // Directional variance, the quantity the separation and assumption
    // checkers plug in as sigma_max.
    double sigma_max() const { return covariance_scale * covariance_scale; }
};

struct LabeledPoints {
    Points points;
    std::vector<int> labels;
};

inline LabeledPoints generate_mixture(const MixtureSpec& spec, std::size_t n, RngStream rng) {
    spec.validate();
    Vec cdf(spec.k, 0.0);
    double acc = 0.0;
    for (std::size_t j = 0; j < spec.k; ++j) {
        acc += spec.weights[j];
        cdf[j] = acc;
    }
    cdf.back() = 1.0;

    LabeledPoints out;
    out.points.reserve(n);
    out.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        std::size_t comp = 0;
        while (comp + 1 < spec.k && u > cdf[comp]) ++comp;
        Vec p(spec.d);
        for (std::size_t c = 0; c < spec.d; ++c)
            p[c] = spec.means[comp][c] + spec.covariance_scale * rng.normal();
        out.points.push_back(std::move(p));
        out.labels.push_back(static_cast<int>(comp));
    }
    return out;
}

struct SeparationReport {
    bool separated = false;
    double margin = 0.0;  // worst (distance - bound) over ordered pairs
};

// Pairwise mean-separation check: for every ordered pair (i, j),
// ||mu_i - mu_j|| >= c sqrt(k / w_i) sigma_max ln(n).
inline SeparationReport check_separation(const MixtureSpec& spec, std::size_t n, double c = 1.0) {
    spec.validate();
    SeparationReport report;
    report.margin = std::numeric_limits<double>::infinity();
    const double log_n = std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
    for (std::size_t i = 0; i < spec.k; ++i) {
        for (std::size_t j = 0; j < spec.k; ++j) {
            if (i == j) continue;
            const double lhs = distance(spec.means[i], spec.means[j]);
            const double bound = c * std::sqrt(static_cast<double>(spec.k) /
                                               std::max(spec.weights[i], 1e-300)) *
                                 spec.sigma_max() * log_n;
            report.margin = std::min(report.margin, lhs - bound);
        }
    }
    if (spec.k == 1) report.margin = 0.0;
    report.separated = report.margin >= 0.0;
    return report;
}

struct AssumptionReport {
    double radius = 0.0;        // max point norm of the client dataset
    double diameter_bound = 0.0;
    bool diameter_ok = false;
    double server_count = 0.0;
    double server_bound = 0.0;
    bool server_ok = false;
};

// Evaluates the two preprocessing assumptions with all constants set to 1:
// (1) radius <= k ln^2(n) sqrt(d) sigma_max / (eps w_min), and
// (2) |Q| <= eps n k ln(n) sigma_max^2 / radius^2.
// The radius is the clip bound actually used by the pipeline: the server-data
// radius when server data exists (points get clipped to it), otherwise the
// raw dataset radius.
inline AssumptionReport check_assumptions(const Points& dataset, const Points& server_data,
                                          double eps, std::size_t k, double sigma_max_est,
                                          double w_min_est) {
    AssumptionReport rep;
    const double n = static_cast<double>(std::max<std::size_t>(dataset.size(), 2));
    const double d = static_cast<double>(dataset.empty() ? 1 : dataset.front().size());
    const Points& radius_source = server_data.empty() ? dataset : server_data;
    for (const Vec& p : radius_source) rep.radius = std::max(rep.radius, norm(p));
    const double log_n = std::log(n);

    rep.diameter_bound = static_cast<double>(k) * log_n * log_n * std::sqrt(d) * sigma_max_est /
                         (eps * w_min_est);
    rep.diameter_ok = rep.radius <= rep.diameter_bound;

    rep.server_count = static_cast<double>(server_data.size());
    rep.server_bound = eps * n * static_cast<double>(k) * log_n * sigma_max_est * sigma_max_est /
                       (rep.radius * rep.radius);
    rep.server_ok = rep.server_count <= rep.server_bound;
    return rep;
}

enum class PartitionScheme { kIid, kBySize };

struct PartitionedData {
    ClientPartition partition;
    std::vector<std::vector<int>> labels;  // aligned with partition.clients

    std::vector<int> flat_labels() const {
        std::vector<int> out;
        for (const auto& l : labels) out.insert(out.end(), l.begin(), l.end());
        return out;
    }
};

// Disjoint cover of all points across m clients. The iid scheme shuffles and
// splits evenly; by_size gives client j a share proportional to j + 1.
inline PartitionedData partition_clients(const Points& points, const std::vector<int>& labels,
                                         std::size_t m, PartitionScheme scheme, RngStream rng) {
    const std::size_t n = points.size();
    if (m == 0 || m > n) throw std::invalid_argument("partition_clients: need 1 <= m <= n");
    if (labels.size() != n) throw std::invalid_argument("partition_clients: label length mismatch");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    std::vector<std::size_t> sizes(m, 0);
    if (scheme == PartitionScheme::kIid) {
        for (std::size_t j = 0; j < m; ++j) sizes[j] = n / m + (j < n % m ? 1 : 0);
    } else {
        const double total_rank = static_cast<double>(m * (m + 1)) / 2.0;
        std::size_t assigned = 0;
        for (std::size_t j = 0; j < m; ++j) {
            sizes[j] = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(static_cast<double>(n) *
                                                       static_cast<double>(j + 1) / total_rank)));
            assigned += sizes[j];
        }
        std::size_t j = m;
        while (assigned > n) {  // trim from the largest clients
            --j;
            if (j == static_cast<std::size_t>(-1)) j = m - 1;
            if (sizes[j] > 1) {
                --sizes[j];
                --assigned;
            }
        }
        while (assigned < n) {
            sizes[m - 1] += 1;
            ++assigned;
        }
    }

    PartitionedData out;
    out.partition.clients.resize(m);
    out.labels.resize(m);
    std::size_t pos = 0;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t s = 0; s < sizes[j]; ++s, ++pos) {
            out.partition.clients[j].push_back(points[order[pos]]);
            out.labels[j].push_back(labels[order[pos]]);
        }
    }
    return out;
}

struct ScenarioSpec {
    std::size_t clients = 1;
    std::size_t points_per_client = 1;
    std::size_t server_in_dist_per_component = 20;
    std::size_t server_ood_count = 100;
    std::vector<std::size_t> missing_components;  // components absent from the server data
    PartitionScheme scheme = PartitionScheme::kIid;
};

// Server data: per non-missing component, `server_in_dist_per_component`
// mixture samples, plus `server_ood_count` points uniform over the mean cube.
inline Points make_server_data(const MixtureSpec& spec, const ScenarioSpec& scenario,
                               RngStream rng) {
    spec.validate();
    for (std::size_t miss : scenario.missing_components) {
        if (miss >= spec.k) throw std::invalid_argument("make_server_data: missing component out of range");
    }
    Points server;
    for (std::size_t comp = 0; comp < spec.k; ++comp) {
        const bool missing = std::find(scenario.missing_components.begin(),
                                       scenario.missing_components.end(),
                                       comp) != scenario.missing_components.end();
        if (missing) continue;
        RngStream comp_rng = rng.substream("server.comp").substream(comp);
        for (std::size_t i = 0; i < scenario.server_in_dist_per_component; ++i) {
            Vec p(spec.d);
            for (std::size_t c = 0; c < spec.d; ++c)
                p[c] = spec.means[comp][c] + spec.covariance_scale * comp_rng.normal();
            server.push_back(std::move(p));
        }
    }
    RngStream ood_rng = rng.substream("server.ood");
    for (std::size_t i = 0; i < scenario.server_ood_count; ++i) {
        Vec p(spec.d);
        for (std::size_t c = 0; c < spec.d; ++c) p[c] = spec.mean_range * ood_rng.uniform01();
        server.push_back(std::move(p));
    }
    return server;
}

// Reference mixture used throughout: d=100, k=10, equal weights, means
// uniform over the unit cube, per-coordinate variance 0.5.
inline MixtureSpec reference_mixture_spec(RngStream rng) {
    MixtureSpec spec;
    spec.k = 10;
    spec.d = 100;
    spec.covariance_scale = std::sqrt(0.5);
    spec.weights.assign(spec.k, 1.0 / static_cast<double>(spec.k));
    RngStream means = rng.substream("means");
    for (std::size_t j = 0; j < spec.k; ++j) {
        Vec mu(spec.d);
        for (double& c : mu) c = means.uniform01();
        spec.means.push_back(std::move(mu));
    }
    spec.mean_range = 1.0;
    return spec;
}

// Fast CI-scale mixture: k=5, d=20, sigma=0.25. Means are sampled uniformly
// and then scaled outward just enough to satisfy the separation check at
// c = 1 for the given n; the OOD cube grows with them.
inline MixtureSpec desk_mixture_spec(RngStream rng, std::size_t n = 10000, double sigma = 0.25) {
    MixtureSpec spec;
    spec.k = 5;
    spec.d = 20;
    spec.covariance_scale = sigma;
    spec.weights.assign(spec.k, 1.0 / static_cast<double>(spec.k));
    RngStream means = rng.substream("means");
    for (std::size_t j = 0; j < spec.k; ++j) {
        Vec mu(spec.d);
        for (double& c : mu) c = means.uniform01();
        spec.means.push_back(std::move(mu));
    }
    spec.mean_range = 1.0;

    double min_pairwise = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.k; ++i)
        for (std::size_t j = i + 1; j < spec.k; ++j)
            min_pairwise = std::min(min_pairwise, distance(spec.means[i], spec.means[j]));
    const double required = std::sqrt(static_cast<double>(spec.k) / spec.weights[0]) *
                            spec.sigma_max() * std::log(static_cast<double>(n));
    const double scale = std::max(1.0, 1.05 * required / min_pairwise);
    for (Vec& mu : spec.means) scale_in_place(mu, scale);
    spec.mean_range = scale;
    return spec;
}

// ---- Matrix file I/O ----------------------------------------------------
//
// CSV: comma-separated, one point per row, optional single header line.
// Binary: magic "FDKM", u32 n, u32 d, then n*d little-endian doubles.

enum class MatrixFileFormat { kCsv, kBinaryF64 };

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("matrix file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("matrix file: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline bool parse_csv_row(const std::string& line, Vec* out) {
    out->clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const std::size_t a = cell.find_first_not_of(" \t\r");
        if (a == std::string::npos) return false;
        const std::size_t b = cell.find_last_not_of(" \t\r");
        std::size_t consumed = 0;
        double v = 0.0;
        try {
            v = std::stod(cell.substr(a, b - a + 1), &consumed);
        } catch (const std::exception&) {
            return false;
        }
        if (consumed != b - a + 1) return false;
        out->push_back(v);
    }
    return !out->empty();
}

}  // namespace detail

inline void export_matrix(const Points& points, const std::string& path,
                          MatrixFileFormat format) {
    check_uniform_dimension(points, "export_matrix");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("export_matrix: cannot open " + path);
    if (format == MatrixFileFormat::kCsv) {
        char buf[64];
        for (const Vec& p : points) {
            for (std::size_t c = 0; c < p.size(); ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", p[c]);
                os << (c ? "," : "") << buf;
            }
            os << '\n';
        }
    } else {
        os.write("FDKM", 4);
        detail::put_u32_le(os, static_cast<std::uint32_t>(points.size()));
        detail::put_u32_le(os, static_cast<std::uint32_t>(dimension_of(points)));
        for (const Vec& p : points)
            for (double v : p) detail::put_f64_le(os, v);
    }
    if (!os) throw std::runtime_error("export_matrix: write failed for " + path);
}

inline Points import_matrix(const std::string& path, MatrixFileFormat format) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("import_matrix: cannot open " + path);
    Points points;

    if (format == MatrixFileFormat::kCsv) {
        std::string line;
        bool first = true;
        while (std::getline(is, line)) {
            if (line.empty() || line == "\r") continue;
            Vec row;
            if (!detail::parse_csv_row(line, &row)) {
                if (first) {  // a single header line is allowed
                    first = false;
                    continue;
                }
                throw std::runtime_error("import_matrix: malformed row in " + path);
            }
            first = false;
            points.push_back(std::move(row));
        }
    } else {
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, "FDKM", 4) != 0)
            throw std::runtime_error("import_matrix: bad magic in " + path);
        const std::uint32_t n = detail::get_u32_le(is);
        const std::uint32_t d = detail::get_u32_le(is);
        points.assign(n, Vec(d));
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t c = 0; c < d; ++c) points[i][c] = detail::get_f64_le(is);
    }

    if (points.empty()) throw std::runtime_error("import_matrix: no data in " + path);
    const std::size_t d = points.front().size();
    for (const Vec& p : points) {
        if (p.size() != d) throw std::runtime_error("import_matrix: inconsistent row width");
        if (!all_finite(p)) throw std::runtime_error("import_matrix: non-finite value");
    }
    return points;
}

}  // namespace feddp
