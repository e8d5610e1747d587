#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modemfuse/classify.hpp"
#include "modemfuse/types.hpp"

namespace modemfuse {

struct GridRefineSettings {
    bool enabled = true;
    double snr_threshold_db = 10.0;
    int points = 16;
    bool gate_on_true_snr = false;
};

// Monte Carlo sweep definition; the defaults mirror the simulation protocol
// (ternary 16/32/64-QAM, Rayleigh fading with E{a^2} = 1, N = 500).
struct ExperimentConfig {
    std::vector<double> snr_db_list = {0.0, 5.0, 10.0};
    std::vector<int> sensor_counts = {1, 2, 4};
    int block_length_n = 500;
    int trials = 1000;
    std::vector<double> stop_deltas = {1e-4, 1e-3};
    std::vector<std::string> candidate_formats = {"16qam", "32qam", "64qam"};
    std::vector<Method> classifiers = {Method::EmHml};
    std::uint64_t master_seed = 20260808ULL;
    double fading_avg_power = 1.0;  // 2 sigma^2
    GridRefineSettings grid_refine;
    NoiseFusion noise_fusion = NoiseFusion::Sum;
    int max_iterations = 500;
    int restarts = 0;
    bool cycle_formats = false;  // deterministic truth cycling instead of uniform draws
    int threads = 0;             // 0 -> MODEMFUSE_THREADS or hardware concurrency
    std::string output_path = "results";
};

ExperimentConfig load_config_json(const std::string& path);

struct CellKey {
    double snr_db{};
    int sensors{};
    double stop_delta{};
    Method classifier{};

    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct TrialRecord {
    CellKey key;
    int truth_index{};
    int decision_index{};
    int em_iterations{};  // decision-hypothesis EM iterations; 0 for ALRT/MoM
    bool failed{};
};

struct AggregateResult {
    CellKey key;
    double pc{};
    double pc_ci95{};  // normal-approximation half width
    Eigen::MatrixXi confusion;  // row = truth, column = decision
    std::vector<std::string> labels;
    double mean_iterations{};
    long trials_completed{};
    long failures{};

    friend bool operator==(const AggregateResult&, const AggregateResult&);
};

// Folds one cell's trial records into Pc, its 95% CI half-width, the
// confusion matrix, and the mean decision-hypothesis EM iteration count.
// Throws UsageError on empty input or records from mixed cells.
AggregateResult aggregate(const std::vector<TrialRecord>& records, int num_candidates,
                          const std::vector<std::string>& labels);

// Seeded sweep over (snr, L, delta) x classifiers. Per trial: draw the true
// modulation, a fresh channel, one synthesized block, then run every
// requested classifier on that block (ALRT sees the true channel). Trials
// run in parallel; output is a pure function of the config.
std::vector<AggregateResult> run_experiment(const ExperimentConfig& config);

enum class ResultsFormat { Csv, Json, Both };

// CSV header: snr_db,L,delta,classifier,trials,pc,ci95,mean_iterations
// JSON mirrors the CSV fields plus row-major confusion matrices.
void write_results(const std::vector<AggregateResult>& results, const std::string& path,
                   ResultsFormat format);
std::string results_to_csv(const std::vector<AggregateResult>& results);
std::vector<AggregateResult> read_results_json(const std::string& path);

// Effective worker count: explicit override > MODEMFUSE_THREADS > hardware.
int resolve_thread_count(int requested);

}  // namespace modemfuse
