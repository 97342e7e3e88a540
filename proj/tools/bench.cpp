// Command-line experiment runner.
//
//   bench run      --config <file>          sweep the budget grid, write results
//   bench pareto   --in <csv> --out <csv>   extract the Pareto front of a records file
//   bench elbow    --config <file>          cost-vs-k curve on the weighted proxy
//   bench gen-data --profile <p> --out <f>  write a synthetic dataset to disk
//
// Exit codes: 0 success, 2 config error, 3 I/O error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "feddp/feddp.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    const feddp::ExperimentConfig cfg = feddp::load_experiment_config(config_path);
    const auto records = feddp::run_experiment(cfg);
    const auto front = feddp::pareto_front(records);
    feddp::export_results(records, front, cfg, cfg.out_dir);
    double wall = 0.0;
    for (const auto& r : records) wall += r.wall_ms;
    std::cout << "ran " << records.size() << " jobs (" << front.size()
              << " on the Pareto front), total job time " << wall / 1000.0 << " s\n"
              << "results written to " << cfg.out_dir << "/\n";
    return 0;
}

int cmd_pareto(const std::string& in_path, const std::string& out_path) {
    const auto records = feddp::read_records_csv(in_path);
    if (records.empty()) throw feddp::ConfigError("pareto: no records in " + in_path);
    const auto front = feddp::pareto_front(records);
    feddp::write_records_csv(front, out_path);
    std::cout << front.size() << " of " << records.size() << " records on the front -> "
              << out_path << "\n";
    return 0;
}

int cmd_elbow(const std::string& config_path, std::size_t k_prime, std::size_t k_min,
              std::size_t k_max, double eps1, double eps2, const std::string& out_path) {
    const feddp::ExperimentConfig cfg = feddp::load_experiment_config(config_path);
    std::ofstream os(out_path);
    if (!os) throw feddp::IoError("cannot open " + out_path);
    os << "seed,k,cost\n";
    for (std::uint64_t seed : cfg.seeds) {
        const feddp::ExperimentData data = feddp::build_experiment_data(cfg, seed);
        const auto curve =
            feddp::elbow_scan(data.server, data.partition, k_prime, k_min, k_max, eps1, eps2,
                              cfg.delta_total / 2.0, cfg.noise, seed, cfg.restarts);
        for (const auto& pt : curve) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", pt.cost);
            os << seed << ',' << pt.k << ',' << buf << '\n';
        }
        std::cout << "seed " << seed << ": largest relative drop at k = "
                  << feddp::elbow_locate(curve) << "\n";
    }
    if (!os) throw feddp::IoError("write failed: " + out_path);
    std::cout << "curve written to " << out_path << "\n";
    return 0;
}

// Generates the dataset a sweep over the same spec file would see for the
// given seed (the [data] section drives the mixture, labels follow the
// generating components).
int cmd_gen_data(const std::string& spec_path, std::uint64_t seed_override, bool seed_given,
                 const std::string& out_path, const std::string& format,
                 const std::string& labels_path) {
    const feddp::ExperimentConfig cfg = feddp::load_experiment_config(spec_path);
    if (cfg.data.kind != "mixture")
        throw feddp::ConfigError("gen-data: the spec must describe a mixture dataset");
    const std::uint64_t seed = seed_given ? seed_override : cfg.seeds.front();
    feddp::RngStream root(seed);
    feddp::MixtureSpec spec;
    if (cfg.data.profile == "desk") {
        spec = feddp::desk_mixture_spec(root.substream("spec"), cfg.data.n, cfg.data.sigma);
    } else if (cfg.data.profile == "reference") {
        spec = feddp::reference_mixture_spec(root.substream("spec"));
    } else {
        spec.k = cfg.data.k_true;
        spec.d = cfg.data.d;
        spec.covariance_scale = cfg.data.sigma;
        spec.weights.assign(spec.k, 1.0 / static_cast<double>(spec.k));
        feddp::RngStream means = root.substream("spec").substream("means");
        for (std::size_t j = 0; j < spec.k; ++j) {
            feddp::Vec mu(spec.d);
            for (double& c : mu) c = means.uniform01();
            spec.means.push_back(std::move(mu));
        }
    }
    const feddp::MatrixFileFormat fmt = format == "binary" ? feddp::MatrixFileFormat::kBinaryF64
                                                           : feddp::MatrixFileFormat::kCsv;
    if (format != "csv" && format != "binary")
        throw feddp::ConfigError("gen-data: format must be csv or binary");
    const feddp::LabeledPoints lp =
        feddp::generate_mixture(spec, cfg.data.n, root.substream("clients"));
    feddp::export_matrix(lp.points, out_path, fmt);
    if (!labels_path.empty()) {
        std::ofstream os(labels_path);
        if (!os) throw feddp::IoError("cannot open " + labels_path);
        for (int l : lp.labels) os << l << '\n';
        if (!os) throw feddp::IoError("write failed: " + labels_path);
    }
    std::cout << "wrote " << cfg.data.n << " points (d=" << spec.d << ", seed " << seed
              << ") to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private federated k-means benchmark harness"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path, format = "csv", labels_path;
    std::size_t k_prime = 10, k_min = 1, k_max = 10;
    double eps1 = 0.5, eps2 = 0.5;
    std::uint64_t seed = 1;

    CLI::App* run = app.add_subcommand("run", "run a budget sweep from a config file");
    run->add_option("--config", config_path, "experiment config file")->required();

    CLI::App* pareto = app.add_subcommand("pareto", "extract the Pareto front of a records CSV");
    pareto->add_option("--in", in_path, "records CSV")->required();
    pareto->add_option("--out", out_path, "front CSV")->required();

    CLI::App* elbow = app.add_subcommand("elbow", "cost-vs-k curve on the weighted proxy");
    elbow->add_option("--config", config_path, "experiment config file")->required();
    elbow->add_option("--k-prime", k_prime, "rank used for the projector prefix");
    elbow->add_option("--k-min", k_min, "smallest k scanned");
    elbow->add_option("--k-max", k_max, "largest k scanned");
    elbow->add_option("--eps1", eps1, "projector budget");
    elbow->add_option("--eps2", eps2, "weights budget");
    elbow->add_option("--out", out_path, "curve CSV")->default_val("elbow.csv");

    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
    CLI::Option* gen_spec = gen->add_option("--spec", config_path, "dataset spec file")->required();
    CLI::Option* gen_seed = gen->add_option("--seed", seed, "override the generation seed");
    gen->add_option("--out", out_path, "output file")->required();
    gen->add_option("--format", format, "csv | binary");
    gen->add_option("--labels-out", labels_path, "optional ground-truth labels file");
    (void)gen_spec;

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(config_path);
        if (pareto->parsed()) return cmd_pareto(in_path, out_path);
        if (elbow->parsed()) return cmd_elbow(config_path, k_prime, k_min, k_max, eps1, eps2,
                                              out_path.empty() ? "elbow.csv" : out_path);
        if (gen->parsed())
            return cmd_gen_data(config_path, seed, gen_seed->count() > 0, out_path, format,
                                labels_path);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const feddp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const feddp::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
