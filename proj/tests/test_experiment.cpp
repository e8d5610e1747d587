#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "modemfuse/errors.hpp"
#include "modemfuse/experiment.hpp"

using namespace modemfuse;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ExperimentConfig small_config() {
    ExperimentConfig config;
    config.snr_db_list = {0.0, 10.0};
    config.sensor_counts = {1, 2};
    config.block_length_n = 60;
    config.trials = 16;
    config.stop_deltas = {1e-3};
    config.classifiers = {Method::EmHml, Method::Alrt, Method::MomHlrt};
    config.master_seed = 4242;
    return config;
}

}  // namespace

TEST_CASE("aggregate reproduces the binomial interval") {
    std::vector<TrialRecord> records;
    const CellKey key{5.0, 2, 1e-4, Method::EmHml};
    for (int t = 0; t < 1000; ++t) {
        TrialRecord record;
        record.key = key;
        record.truth_index = 0;
        record.decision_index = t < 881 ? 0 : 1;
        record.em_iterations = 10;
        records.push_back(record);
    }
    const AggregateResult cell = aggregate(records, 3, {"16qam", "32qam", "64qam"});
    CHECK(cell.pc == doctest::Approx(0.881).epsilon(1e-12));
    CHECK(cell.pc_ci95 == doctest::Approx(0.0200686).epsilon(1e-4));
    CHECK(cell.mean_iterations == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(cell.trials_completed == 1000);
    CHECK(cell.confusion(0, 0) == 881);
    CHECK(cell.confusion(0, 1) == 119);
    CHECK(cell.confusion.sum() == 1000);
}

TEST_CASE("aggregate boundary: all correct") {
    std::vector<TrialRecord> records;
    const CellKey key{0.0, 1, 1e-3, Method::Alrt};
    for (int t = 0; t < 50; ++t)
        records.push_back({key, t % 3, t % 3, 0, false});
    const AggregateResult cell = aggregate(records, 3, {"a", "b", "c"});
    CHECK(cell.pc == 1.0);
    CHECK(cell.pc_ci95 == 0.0);
}

TEST_CASE("aggregate rejects empty and mixed-cell input") {
    CHECK_THROWS_AS(aggregate({}, 3, {"a", "b", "c"}), UsageError);

    std::vector<TrialRecord> mixed;
    mixed.push_back({{0.0, 1, 1e-3, Method::Alrt}, 0, 0, 0, false});
    mixed.push_back({{5.0, 1, 1e-3, Method::Alrt}, 0, 0, 0, false});
    CHECK_THROWS_AS(aggregate(mixed, 3, {"a", "b", "c"}), UsageError);
}

TEST_CASE("single-trial cell has exactly one confusion entry") {
    ExperimentConfig config = small_config();
    config.snr_db_list = {5.0};
    config.sensor_counts = {1};
    config.trials = 1;
    config.classifiers = {Method::EmHml};
    const std::vector<AggregateResult> results = run_experiment(config);
    REQUIRE(results.size() == 1);
    CHECK(results[0].confusion.sum() == 1);
    int nonzero = 0;
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index c = 0; c < 3; ++c)
            if (results[0].confusion(r, c) != 0) ++nonzero;
    CHECK(nonzero == 1);
}

TEST_CASE("sweep output is independent of the worker count") {
    ExperimentConfig config = small_config();
    config.threads = 1;
    const std::vector<AggregateResult> serial = run_experiment(config);
    config.threads = 4;
    const std::vector<AggregateResult> parallel = run_experiment(config);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);
    CHECK(results_to_csv(serial) == results_to_csv(parallel));
}

TEST_CASE("confusion rows sum to the per-truth trial counts") {
    ExperimentConfig config = small_config();
    config.snr_db_list = {5.0};
    config.sensor_counts = {2};
    config.trials = 30;
    config.classifiers = {Method::Alrt};
    config.cycle_formats = true;  // exactly 10 trials per truth
    const std::vector<AggregateResult> results = run_experiment(config);
    REQUIRE(results.size() == 1);
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(results[0].confusion.row(r).sum() == 10);
}

TEST_CASE("results round trip through json") {
    ExperimentConfig config = small_config();
    config.snr_db_list = {0.0};
    config.trials = 8;
    const std::vector<AggregateResult> results = run_experiment(config);

    const std::string stem = temp_path("modemfuse_results_rt");
    write_results(results, stem, ResultsFormat::Both);
    const std::vector<AggregateResult> reloaded = read_results_json(stem + ".json");
    REQUIRE(reloaded.size() == results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(reloaded[i] == results[i]);
        CHECK(reloaded[i].labels == config.candidate_formats);
    }
    std::filesystem::remove(stem + ".csv");
    std::filesystem::remove(stem + ".json");
}

TEST_CASE("csv layout: header plus one row per cell") {
    ExperimentConfig config = small_config();
    config.trials = 4;
    const std::vector<AggregateResult> results = run_experiment(config);
    const std::string csv = results_to_csv(results);

    std::size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == results.size() + 1);
    CHECK(csv.rfind("snr_db,L,delta,classifier,trials,pc,ci95,mean_iterations\n", 0) == 0);
    // 2 snr x 2 L x 1 delta x 3 classifiers
    CHECK(results.size() == 12);
}

TEST_CASE("config file parsing honors defaults and rejects unknown keys") {
    const std::string path = temp_path("modemfuse_config.json");
    {
        std::ofstream out(path);
        out << R"({"snr_db_list": [5.0], "trials": 7, "classifiers": ["em_hml", "alrt"],
                   "grid_refine": {"snr_threshold_db": 12.0},
                   "noise_fusion": "sum", "master_seed": 99})";
    }
    const ExperimentConfig config = load_config_json(path);
    CHECK(config.snr_db_list == std::vector<double>{5.0});
    CHECK(config.trials == 7);
    CHECK(config.classifiers.size() == 2);
    CHECK(config.grid_refine.snr_threshold_db == 12.0);
    CHECK(config.grid_refine.points == 16);  // untouched default
    CHECK(config.noise_fusion == NoiseFusion::Sum);
    CHECK(config.master_seed == 99);
    CHECK(config.block_length_n == 500);
    CHECK(config.sensor_counts == std::vector<int>({1, 2, 4}));

    {
        std::ofstream out(path);
        out << R"({"snr_list": [5.0]})";
    }
    CHECK_THROWS_AS(load_config_json(path), InputError);

    {
        std::ofstream out(path);
        out << R"({"trials": 0})";
    }
    CHECK_THROWS_AS(load_config_json(path), InputError);
    std::filesystem::remove(path);
}

TEST_CASE("thread resolution order") {
    CHECK(resolve_thread_count(3) == 3);
#ifdef _WIN32
#else
    setenv("MODEMFUSE_THREADS", "2", 1);
    CHECK(resolve_thread_count(0) == 2);
    CHECK(resolve_thread_count(5) == 5);
    unsetenv("MODEMFUSE_THREADS");
#endif
    CHECK(resolve_thread_count(0) >= 1);
}
