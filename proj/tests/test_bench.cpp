#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "feddp/bench.hpp"

using namespace feddp;

namespace {

RunRecord rec(double eps, double cost, const std::string& method = "m", std::uint64_t seed = 1) {
    RunRecord r;
    r.method = method;
    r.seed = seed;
    r.eps_total = eps;
    r.cost = cost;
    return r;
}

// Quadratic dominance oracle.
std::vector<RunRecord> brute_front(const std::vector<RunRecord>& records) {
    std::vector<RunRecord> front;
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < records.size() && !dominated; ++j) {
            if (i == j) continue;
            const bool leq = records[j].eps_total <= records[i].eps_total &&
                             records[j].cost <= records[i].cost;
            const bool strict = records[j].eps_total < records[i].eps_total ||
                                records[j].cost < records[i].cost;
            dominated = leq && strict;
        }
        if (!dominated) front.push_back(records[i]);
    }
    std::stable_sort(front.begin(), front.end(), [](const RunRecord& a, const RunRecord& b) {
        if (a.eps_total != b.eps_total) return a.eps_total < b.eps_total;
        return a.cost < b.cost;
    });
    return front;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* kTinyConfig = R"(
# comment
[data]
kind = mixture
profile = custom
n = 240
clients = 4
k_true = 2
d = 3
sigma = 0.2

[method]
name = ServerLloyds
k = 2
restarts = 3

[privacy]
unit = datapoint
delta = 1e-6
noise = on

[grid]
eps = 0.5,1.0
t = 1

[seeds]
list = 1,2

[output]
dir = OUTDIR
format = both
)";

}  // namespace

TEST_CASE("pareto front basics", "[bench]") {
    const std::vector<RunRecord> single{rec(1.0, 5.0)};
    REQUIRE(pareto_front(single).size() == 1);

    const std::vector<RunRecord> three{rec(1.0, 5.0), rec(2.0, 4.0), rec(3.0, 6.0)};
    const auto front = pareto_front(three);
    REQUIRE(front.size() == 2);
    REQUIRE(front[0].eps_total == 1.0);
    REQUIRE(front[1].eps_total == 2.0);

    REQUIRE_THROWS_AS(pareto_front({}), std::invalid_argument);
}

TEST_CASE("pareto front agrees with the quadratic oracle", "[bench]") {
    RngStream rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<RunRecord> records;
        const int n = 1 + static_cast<int>(rng.uniform01() * 40);
        for (int i = 0; i < n; ++i) {
            // Coarse values make ties likely.
            const double eps = std::floor(rng.uniform01() * 5.0);
            const double cost = std::floor(rng.uniform01() * 5.0);
            records.push_back(rec(eps, cost));
        }
        const auto fast = pareto_front(records);
        const auto slow = brute_front(records);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            REQUIRE(fast[i].eps_total == slow[i].eps_total);
            REQUIRE(fast[i].cost == slow[i].cost);
        }
        // Idempotence.
        const auto again = pareto_front(fast);
        REQUIRE(again.size() == fast.size());
    }
}

TEST_CASE("config parsing", "[bench]") {
    SECTION("full round trip") {
        std::stringstream ss(kTinyConfig);
        const ConfigSections sections = parse_config_text(ss);
        const ExperimentConfig cfg = experiment_config_from_sections(sections);
        REQUIRE(cfg.data.n == 240);
        REQUIRE(cfg.data.clients == 4);
        REQUIRE(cfg.method == Method::kServerLloyds);
        REQUIRE(cfg.grid_eps == std::vector<double>{0.5, 1.0});
        REQUIRE(cfg.grid_t == std::vector<int>{1});
        REQUIRE(cfg.seeds == std::vector<std::uint64_t>{1, 2});
        REQUIRE(cfg.out_format == "both");
    }

    SECTION("unknown keys and sections rejected") {
        std::stringstream bad1("[data]\nkindd = mixture\n");
        REQUIRE_THROWS_AS(experiment_config_from_sections(parse_config_text(bad1)), ConfigError);
        std::stringstream bad2("[wat]\nx = 1\n");
        REQUIRE_THROWS_AS(experiment_config_from_sections(parse_config_text(bad2)), ConfigError);
    }

    SECTION("bad values rejected") {
        std::stringstream bad("[grid]\neps = 0.5,zebra\n");
        REQUIRE_THROWS_AS(experiment_config_from_sections(parse_config_text(bad)), ConfigError);
        std::stringstream dup("[seeds]\nlist = 3,3\n");
        REQUIRE_THROWS_AS(experiment_config_from_sections(parse_config_text(dup)), ConfigError);
        std::stringstream loose("x = 1\n");
        REQUIRE_THROWS_AS(parse_config_text(loose), ConfigError);
        std::stringstream noeq("[data]\nkind mixture\n");
        REQUIRE_THROWS_AS(parse_config_text(noeq), ConfigError);
    }

    SECTION("missing file is an i/o error") {
        REQUIRE_THROWS_AS(load_experiment_config("/nonexistent/nope.ini"), IoError);
    }
}

TEST_CASE("records csv round trip", "[bench]") {
    const auto dir = std::filesystem::temp_directory_path() / "feddp_bench_csv";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "records.csv").string();

    std::vector<RunRecord> records;
    RunRecord a = rec(0.5, 1.25, "FedDPKMeans", 7);
    a.grid_eps = 0.5;
    a.grid_t = 2;
    a.delta = 1e-6;
    a.rounds = 5;
    a.config_hash = 12345;
    RunRecord b = rec(std::numeric_limits<double>::infinity(), 0.9, "Optimal", 7);
    b.non_private = true;
    records = {a, b};

    write_records_csv(records, path);
    const auto back = read_records_csv(path);
    REQUIRE(back.size() == 2);
    REQUIRE(back[0] == records[0]);
    REQUIRE(back[1] == records[1]);
    REQUIRE(std::isinf(back[1].eps_total));

    write_records_csv({}, path);
    REQUIRE(read_records_csv(path).empty());  // header-only file

    std::filesystem::remove_all(dir);
}

TEST_CASE("tiny sweep: records, determinism, export", "[bench][slow]") {
    const auto dir = std::filesystem::temp_directory_path() / "feddp_bench_sweep";
    std::filesystem::remove_all(dir);

    std::string text = kTinyConfig;
    const std::string outdir = (dir / "a").string();
    text.replace(text.find("OUTDIR"), 6, outdir);
    std::stringstream ss(text);
    ExperimentConfig cfg = experiment_config_from_sections(parse_config_text(ss));

    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 2 * 2);  // two grid eps x one t x two seeds
    for (const auto& r : records) {
        REQUIRE(r.method == "ServerLloyds");
        REQUIRE(!r.non_private);
        REQUIRE(r.rounds == 1);             // baseline init + one refinement round
        REQUIRE(r.eps_total > 0.0);
        REQUIRE(std::isfinite(r.cost));
    }
    const auto front = pareto_front(records);
    export_results(records, front, cfg, cfg.out_dir);
    REQUIRE(std::filesystem::exists(outdir + "/records.csv"));
    REQUIRE(std::filesystem::exists(outdir + "/front.csv"));
    REQUIRE(std::filesystem::exists(outdir + "/records.json"));
    REQUIRE(std::filesystem::exists(outdir + "/manifest.json"));

    // Byte-for-byte reproducibility of a second identical sweep.
    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = (dir / "b").string();
    const auto records2 = run_experiment(cfg2);
    export_results(records2, pareto_front(records2), cfg2, cfg2.out_dir);
    REQUIRE(slurp(outdir + "/records.csv") == slurp(cfg2.out_dir + "/records.csv"));
    REQUIRE(slurp(outdir + "/front.csv") == slurp(cfg2.out_dir + "/front.csv"));

    std::filesystem::remove_all(dir);
}

TEST_CASE("json exports carry the documented fields", "[bench]") {
    const auto dir = std::filesystem::temp_directory_path() / "feddp_bench_json";
    std::filesystem::remove_all(dir);

    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 150;
    cfg.data.clients = 3;
    cfg.data.k_true = 2;
    cfg.data.d = 2;
    cfg.data.sigma = 0.1;
    cfg.method = Method::kFedDpKmeans;
    cfg.k = 2;
    cfg.grid_eps = {0.8};
    cfg.grid_t = {1};
    cfg.seeds = {12};
    cfg.out_dir = (dir / "o").string();
    cfg.out_format = "json";
    const auto records = run_experiment(cfg);
    export_results(records, pareto_front(records), cfg, cfg.out_dir);

    std::ifstream is(cfg.out_dir + "/records.json");
    const nlohmann::json parsed = nlohmann::json::parse(is);
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 1);
    for (const char* key : {"method", "seed", "grid_eps", "grid_t", "eps_total", "delta", "cost",
                            "rounds", "non_private", "config_hash", "ledger"})
        REQUIRE(parsed[0].contains(key));
    REQUIRE(parsed[0]["ledger"].is_array());
    REQUIRE(parsed[0]["ledger"].size() == 6);  // 4 init entries + 2 for the single round
    double eps_sum = 0.0;
    for (const auto& e : parsed[0]["ledger"]) eps_sum += e["epsilon"].get<double>();
    REQUIRE(eps_sum == Catch::Approx(0.8).margin(1e-12));

    std::ifstream ms(cfg.out_dir + "/manifest.json");
    const nlohmann::json manifest = nlohmann::json::parse(ms);
    for (const char* key : {"version", "config", "config_hash", "seeds", "record_count",
                            "front_count", "columns"})
        REQUIRE(manifest.contains(key));
    std::filesystem::remove_all(dir);
}

TEST_CASE("single grid point and seed produce exactly one record", "[bench]") {
    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 120;
    cfg.data.clients = 3;
    cfg.data.k_true = 2;
    cfg.data.d = 2;
    cfg.data.sigma = 0.1;
    cfg.method = Method::kServerKmeansPp;
    cfg.k = 2;
    cfg.grid_eps = {1.0};
    cfg.grid_t = {0};
    cfg.seeds = {5};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 1);
    // T = 0 baseline never touches client data: zero budget spent.
    REQUIRE(records[0].eps_total == 0.0);
    REQUIRE(records[0].rounds == 0);
}

TEST_CASE("record eps_total is reproducible from its serialized ledger", "[bench]") {
    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 150;
    cfg.data.clients = 3;
    cfg.data.k_true = 2;
    cfg.data.d = 2;
    cfg.data.sigma = 0.1;
    cfg.method = Method::kFedDpKmeans;
    cfg.k = 2;
    cfg.grid_eps = {0.7};
    cfg.grid_t = {2};
    cfg.seeds = {4};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 1);
    REQUIRE(!records[0].ledger.empty());
    BudgetLedger rebuilt;
    for (const auto& e : records[0].ledger) rebuilt.append(e.label, e.params);
    const PrivacyParams total = compose_report(rebuilt, 0.1 * cfg.delta_total);
    REQUIRE(records[0].eps_total == total.epsilon);
    REQUIRE(records[0].delta == total.delta);
}

TEST_CASE("k-fed records carry the non-private flag", "[bench]") {
    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 120;
    cfg.data.clients = 4;
    cfg.data.k_true = 2;
    cfg.data.d = 2;
    cfg.data.sigma = 0.1;
    cfg.method = Method::kKFed;
    cfg.k = 2;
    cfg.seeds = {2};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 1);
    REQUIRE(records[0].non_private);
    REQUIRE(std::isinf(records[0].eps_total));
    REQUIRE(records[0].ledger.empty());
}

TEST_CASE("client-level sweep end to end", "[bench][slow]") {
    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 600;
    cfg.data.clients = 12;
    cfg.data.k_true = 2;
    cfg.data.d = 3;
    cfg.data.sigma = 0.1;
    cfg.method = Method::kFedDpKmeans;
    cfg.k = 2;
    cfg.unit = PrivacyUnit::kClient;
    cfg.grid_eps = {2.0};
    cfg.grid_t = {0, 1};
    cfg.seeds = {6};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 2);
    for (const auto& r : records) {
        REQUIRE(std::isfinite(r.cost));
        REQUIRE(r.eps_total > 0.0);
    }
}

TEST_CASE("imported datasets drive the harness", "[bench]") {
    const auto dir = std::filesystem::temp_directory_path() / "feddp_bench_import";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "pts.csv").string();
    RngStream rng(61);
    Points pts;
    for (int i = 0; i < 80; ++i)
        pts.push_back({rng.uniform01() + (i % 2 ? 8.0 : 0.0), rng.uniform01()});
    export_matrix(pts, path, MatrixFileFormat::kCsv);

    ExperimentConfig cfg;
    cfg.data.kind = "import";
    cfg.data.path = path;
    cfg.data.clients = 4;
    cfg.method = Method::kServerLloyds;
    cfg.k = 2;
    cfg.grid_eps = {1.0};
    cfg.grid_t = {1};
    cfg.seeds = {9};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 1);
    REQUIRE(std::isfinite(records[0].cost));
    std::filesystem::remove_all(dir);
}

TEST_CASE("optimal runs report the infinity marker", "[bench]") {
    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 90;
    cfg.data.clients = 3;
    cfg.data.k_true = 2;
    cfg.data.d = 2;
    cfg.data.sigma = 0.1;
    cfg.method = Method::kOptimal;
    cfg.k = 2;
    cfg.seeds = {3};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 1);
    REQUIRE(records[0].non_private);
    REQUIRE(std::isinf(records[0].eps_total));
}

TEST_CASE("harness cost matches a direct pipeline invocation", "[bench]") {
    ExperimentConfig cfg;
    cfg.data.profile = "custom";
    cfg.data.n = 200;
    cfg.data.clients = 4;
    cfg.data.k_true = 2;
    cfg.data.d = 3;
    cfg.data.sigma = 0.15;
    cfg.method = Method::kFedDpKmeans;
    cfg.k = 2;
    cfg.noise = false;
    cfg.grid_eps = {1.0};
    cfg.grid_t = {0};
    cfg.seeds = {11};
    const auto records = run_experiment(cfg);
    REQUIRE(records.size() == 1);

    const ExperimentData data = build_experiment_data(cfg, 11);
    PipelineConfig pc = pipeline_config_for(cfg, 1.0, 0);
    const std::uint64_t algo_seed = RngStream(11).substream("algo").substream(std::uint64_t{0}).next_u64();
    const PipelineResult direct = run_pipeline(data.partition, data.server, pc, algo_seed);
    REQUIRE(records[0].cost == normalized_kmeans_cost(data.all_points, direct.centers));
}

TEST_CASE("elbow locate on a hand-made curve", "[bench]") {
    // Biggest relative drop between k = 2 and k = 3.
    const std::vector<ElbowPoint> curve{{1, 100.0}, {2, 80.0}, {3, 20.0}, {4, 18.0}};
    REQUIRE(elbow_locate(curve) == 3);
    REQUIRE_THROWS_AS(elbow_locate({{1, 1.0}}), std::invalid_argument);
}

TEST_CASE("elbow scan on a small mixture", "[bench][slow]") {
    MixtureSpec spec;
    spec.k = 3;
    spec.d = 4;
    spec.means = {{0.0, 0.0, 0.0, 0.0}, {8.0, 8.0, 0.0, 0.0}, {0.0, 8.0, 8.0, 0.0}};
    spec.covariance_scale = 0.3;
    spec.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const LabeledPoints lp = generate_mixture(spec, 600, RngStream(41));
    const auto part =
        partition_clients(lp.points, lp.labels, 4, PartitionScheme::kIid, RngStream(42));
    ScenarioSpec scenario;
    scenario.server_in_dist_per_component = 6;
    scenario.server_ood_count = 8;
    spec.mean_range = 8.0;
    const Points server = make_server_data(spec, scenario, RngStream(43));

    const auto curve = elbow_scan(server, part.partition, 4, 1, 4, 1.0, 1.0, 1e-6, false, 7);
    REQUIRE(curve.size() == 4);
    // Noise-free curves from a generous restart count are non-increasing.
    const auto rich = elbow_scan(server, part.partition, 4, 1, 4, 1.0, 1.0, 1e-6, false, 7, 40);
    for (std::size_t i = 1; i < rich.size(); ++i)
        REQUIRE(rich[i].cost <= rich[i - 1].cost + 1e-9);
    REQUIRE(elbow_locate(rich) == 3);

    // k equal to the number of distinct proxy points drives the cost to zero.
    const auto full = elbow_scan(server, part.partition, server.size(), 1, server.size(), 1.0,
                                 1.0, 1e-6, false, 7, 5);
    REQUIRE(full.back().cost == Catch::Approx(0.0).margin(1e-18));

    REQUIRE_THROWS_AS(elbow_scan(server, part.partition, 2, 1, 4, 1.0, 1.0, 1e-6, false, 7),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(elbow_scan(server, part.partition, 4, 3, 2, 1.0, 1.0, 1e-6, false, 7),
                      std::invalid_argument);
}

TEST_CASE("thread count honors the environment variable", "[bench]") {
    REQUIRE(pool_thread_count() >= 1);
}
