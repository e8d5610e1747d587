#include "modemfuse/experiment.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "modemfuse/errors.hpp"
#include "modemfuse/rng.hpp"

namespace modemfuse {

using nlohmann::json;

namespace {

// Purpose tags for per-trial substreams.
constexpr std::uint64_t kTruthTag = 1;
constexpr std::uint64_t kChannelTag = 2;
constexpr std::uint64_t kDataTag = 3;

std::uint64_t double_bits(double value) { return std::bit_cast<std::uint64_t>(value); }

void parallel_for(long count, int threads, const std::function<void(long)>& body) {
    if (threads <= 1) {
        for (long i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<long> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const long i = cursor.fetch_add(1);
                if (i >= count || failed.load()) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& worker : pool) worker.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string format_double(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%g", value);
    return buffer;
}

json aggregate_to_json(const AggregateResult& result) {
    json confusion = json::array();
    for (Eigen::Index row = 0; row < result.confusion.rows(); ++row) {
        json row_json = json::array();
        for (Eigen::Index col = 0; col < result.confusion.cols(); ++col)
            row_json.push_back(result.confusion(row, col));
        confusion.push_back(std::move(row_json));
    }
    return json{{"snr_db", result.key.snr_db},
                {"L", result.key.sensors},
                {"delta", result.key.stop_delta},
                {"classifier", to_string(result.key.classifier)},
                {"trials", result.trials_completed},
                {"failures", result.failures},
                {"pc", result.pc},
                {"ci95", result.pc_ci95},
                {"mean_iterations", result.mean_iterations},
                {"labels", result.labels},
                {"confusion", std::move(confusion)}};
}

AggregateResult aggregate_from_json(const json& cell) {
    AggregateResult result;
    result.key.snr_db = cell.at("snr_db").get<double>();
    result.key.sensors = cell.at("L").get<int>();
    result.key.stop_delta = cell.at("delta").get<double>();
    result.key.classifier = method_from_string(cell.at("classifier").get<std::string>());
    result.trials_completed = cell.at("trials").get<long>();
    result.failures = cell.at("failures").get<long>();
    result.pc = cell.at("pc").get<double>();
    result.pc_ci95 = cell.at("ci95").get<double>();
    result.mean_iterations = cell.at("mean_iterations").get<double>();
    result.labels = cell.at("labels").get<std::vector<std::string>>();
    const json& confusion = cell.at("confusion");
    const auto size = static_cast<Eigen::Index>(confusion.size());
    result.confusion.resize(size, size);
    for (Eigen::Index row = 0; row < size; ++row)
        for (Eigen::Index col = 0; col < size; ++col)
            result.confusion(row, col) =
                confusion[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]
                    .get<int>();
    return result;
}

}  // namespace

bool operator==(const AggregateResult& a, const AggregateResult& b) {
    return a.key == b.key && a.pc == b.pc && a.pc_ci95 == b.pc_ci95 &&
           a.confusion == b.confusion && a.labels == b.labels &&
           a.mean_iterations == b.mean_iterations && a.trials_completed == b.trials_completed &&
           a.failures == b.failures;
}

int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MODEMFUSE_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    const unsigned hardware = std::thread::hardware_concurrency();
    return hardware > 0 ? static_cast<int>(hardware) : 1;
}

ExperimentConfig load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& error) {
        throw InputError("config file '" + path + "': " + error.what());
    }
    if (!doc.is_object()) throw InputError("config file '" + path + "' must hold a JSON object");

    ExperimentConfig config;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "snr_db_list") config.snr_db_list = value.get<std::vector<double>>();
            else if (key == "sensor_counts") config.sensor_counts = value.get<std::vector<int>>();
            else if (key == "block_length_n") config.block_length_n = value.get<int>();
            else if (key == "trials") config.trials = value.get<int>();
            else if (key == "stop_deltas") config.stop_deltas = value.get<std::vector<double>>();
            else if (key == "candidate_formats")
                config.candidate_formats = value.get<std::vector<std::string>>();
            else if (key == "classifiers") {
                config.classifiers.clear();
                for (const auto& name : value)
                    config.classifiers.push_back(method_from_string(name.get<std::string>()));
            } else if (key == "master_seed") config.master_seed = value.get<std::uint64_t>();
            else if (key == "fading_avg_power") config.fading_avg_power = value.get<double>();
            else if (key == "grid_refine") {
                for (const auto& [sub, subvalue] : value.items()) {
                    if (sub == "enabled") config.grid_refine.enabled = subvalue.get<bool>();
                    else if (sub == "snr_threshold_db")
                        config.grid_refine.snr_threshold_db = subvalue.get<double>();
                    else if (sub == "points") config.grid_refine.points = subvalue.get<int>();
                    else if (sub == "gate_on_true_snr")
                        config.grid_refine.gate_on_true_snr = subvalue.get<bool>();
                    else
                        throw InputError("config: unknown key grid_refine." + sub);
                }
            } else if (key == "noise_fusion") {
                const auto mode = value.get<std::string>();
                if (mode == "mean") config.noise_fusion = NoiseFusion::Mean;
                else if (mode == "sum") config.noise_fusion = NoiseFusion::Sum;
                else throw InputError("config: noise_fusion must be 'mean' or 'sum'");
            } else if (key == "max_iterations") config.max_iterations = value.get<int>();
            else if (key == "restarts") config.restarts = value.get<int>();
            else if (key == "cycle_formats") config.cycle_formats = value.get<bool>();
            else if (key == "threads") config.threads = value.get<int>();
            else if (key == "output_path") config.output_path = value.get<std::string>();
            else throw InputError("config: unknown key '" + key + "'");
        }
    } catch (const json::exception& error) {
        throw InputError("config file '" + path + "': " + error.what());
    }

    if (config.snr_db_list.empty() || config.sensor_counts.empty() ||
        config.stop_deltas.empty() || config.candidate_formats.empty() ||
        config.classifiers.empty())
        throw InputError("config: lists must be non-empty");
    if (config.trials < 1 || config.block_length_n < 1)
        throw InputError("config: trials and block_length_n must be at least 1");
    return config;
}

AggregateResult aggregate(const std::vector<TrialRecord>& records, int num_candidates,
                          const std::vector<std::string>& labels) {
    if (records.empty()) throw UsageError("aggregate: no trial records");
    if (static_cast<int>(labels.size()) != num_candidates)
        throw UsageError("aggregate: labels do not match candidate count");

    AggregateResult result;
    result.key = records.front().key;
    result.labels = labels;
    result.confusion = Eigen::MatrixXi::Zero(num_candidates, num_candidates);

    double iteration_sum = 0.0;
    for (const TrialRecord& record : records) {
        if (!(record.key == result.key))
            throw UsageError("aggregate: trial records span multiple cells");
        if (record.failed) {
            ++result.failures;
            continue;
        }
        result.confusion(record.truth_index, record.decision_index) += 1;
        iteration_sum += record.em_iterations;
        ++result.trials_completed;
    }
    if (result.trials_completed == 0) throw UsageError("aggregate: every trial failed");

    const auto trials = static_cast<double>(result.trials_completed);
    result.pc = static_cast<double>(result.confusion.trace()) / trials;
    result.pc_ci95 = 1.96 * std::sqrt(result.pc * (1.0 - result.pc) / trials);
    result.mean_iterations = iteration_sum / trials;
    return result;
}

std::vector<AggregateResult> run_experiment(const ExperimentConfig& config) {
    CandidateSet candidates;
    for (const std::string& name : config.candidate_formats)
        candidates.specs.push_back(build_constellation(name));
    validate(candidates);
    const int hypothesis_count = static_cast<int>(candidates.specs.size());

    const FadingModel fading{std::sqrt(config.fading_avg_power / 2.0)};
    const int threads = resolve_thread_count(config.threads);

    std::vector<AggregateResult> results;
    for (double snr : config.snr_db_list) {
        const double noise_power = noise_power_for_snr_db(snr, config.fading_avg_power);
        for (int sensors : config.sensor_counts) {
            for (double delta : config.stop_deltas) {
                EmOptions options;
                options.stop_delta = delta;
                options.max_iterations = config.max_iterations;
                options.restarts = config.restarts;
                options.grid_refine = config.grid_refine.enabled;
                options.grid_refine_snr_threshold_db = config.grid_refine.snr_threshold_db;
                options.grid_points = config.grid_refine.points;
                options.noise_fusion = config.noise_fusion;
                if (config.grid_refine.gate_on_true_snr) options.gate_snr_db = snr;

                // One record slot per (classifier, trial); slot writes keep
                // aggregation independent of the worker schedule.
                std::vector<std::vector<TrialRecord>> records(config.classifiers.size());
                for (auto& slots : records)
                    slots.resize(static_cast<std::size_t>(config.trials));

                parallel_for(config.trials, threads, [&](long trial) {
                    RngStream trial_stream = RngStream::derive(
                        config.master_seed,
                        {double_bits(snr), static_cast<std::uint64_t>(sensors),
                         double_bits(delta), static_cast<std::uint64_t>(trial)});

                    int truth;
                    if (config.cycle_formats) {
                        truth = static_cast<int>(trial % hypothesis_count);
                    } else {
                        RngStream truth_stream = trial_stream.fork(kTruthTag);
                        truth = static_cast<int>(truth_stream.uniform_index(
                            static_cast<std::uint64_t>(hypothesis_count)));
                    }
                    RngStream channel_stream = trial_stream.fork(kChannelTag);
                    const ChannelRealization channel =
                        sample_channel(channel_stream, sensors, fading, noise_power);
                    RngStream data_stream = trial_stream.fork(kDataTag);
                    const SynthesisResult synthesis =
                        synthesize(data_stream, candidates.specs[static_cast<std::size_t>(truth)],
                                   channel, config.block_length_n);

                    for (std::size_t c = 0; c < config.classifiers.size(); ++c) {
                        TrialRecord record;
                        record.key = {snr, sensors, delta, config.classifiers[c]};
                        record.truth_index = truth;
                        try {
                            ClassificationResult decision;
                            switch (config.classifiers[c]) {
                                case Method::EmHml:
                                    decision =
                                        classify_em_hml(synthesis.block, candidates, options);
                                    record.em_iterations =
                                        decision
                                            .per_hypothesis_em[static_cast<std::size_t>(
                                                decision.decision_index)]
                                            .iterations;
                                    break;
                                case Method::Alrt:
                                    decision = classify_alrt(synthesis.block, candidates, channel);
                                    break;
                                case Method::MomHlrt:
                                    decision = classify_mom(synthesis.block, candidates);
                                    break;
                            }
                            record.decision_index = decision.decision_index;
                        } catch (const NumericError&) {
                            record.failed = true;
                        } catch (const EstimatorError&) {
                            record.failed = true;
                        }
                        records[c][static_cast<std::size_t>(trial)] = record;
                    }
                });

                for (std::size_t c = 0; c < config.classifiers.size(); ++c) {
                    AggregateResult cell =
                        aggregate(records[c], hypothesis_count, config.candidate_formats);
                    if (cell.failures * 100 > config.trials)
                        throw NumericError(
                            "cell snr=" + format_double(snr) + " L=" + std::to_string(sensors) +
                            " delta=" + format_double(delta) + " classifier=" +
                            to_string(config.classifiers[c]) + ": more than 1% of trials failed");
                    results.push_back(std::move(cell));
                }
            }
        }
    }
    return results;
}

std::string results_to_csv(const std::vector<AggregateResult>& results) {
    std::ostringstream out;
    out << "snr_db,L,delta,classifier,trials,pc,ci95,mean_iterations\n";
    char buffer[256];
    for (const AggregateResult& cell : results) {
        std::snprintf(buffer, sizeof(buffer), "%g,%d,%g,%s,%ld,%.6f,%.6f,%.4f\n",
                      cell.key.snr_db, cell.key.sensors, cell.key.stop_delta,
                      to_string(cell.key.classifier).c_str(), cell.trials_completed, cell.pc,
                      cell.pc_ci95, cell.mean_iterations);
        out << buffer;
    }
    return out.str();
}

void write_results(const std::vector<AggregateResult>& results, const std::string& path,
                   ResultsFormat format) {
    if (format == ResultsFormat::Csv || format == ResultsFormat::Both) {
        std::ofstream out(path + ".csv");
        if (!out) throw InputError("cannot open '" + path + ".csv' for writing");
        out << results_to_csv(results);
        if (!out) throw InputError("failed writing '" + path + ".csv'");
    }
    if (format == ResultsFormat::Json || format == ResultsFormat::Both) {
        json cells = json::array();
        for (const AggregateResult& cell : results) cells.push_back(aggregate_to_json(cell));
        std::ofstream out(path + ".json");
        if (!out) throw InputError("cannot open '" + path + ".json' for writing");
        out << json{{"results", std::move(cells)}}.dump(2) << "\n";
        if (!out) throw InputError("failed writing '" + path + ".json'");
    }
}

std::vector<AggregateResult> read_results_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open results file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& error) {
        throw InputError("results file '" + path + "': " + error.what());
    }
    std::vector<AggregateResult> results;
    try {
        for (const json& cell : doc.at("results")) results.push_back(aggregate_from_json(cell));
    } catch (const json::exception& error) {
        throw InputError("results file '" + path + "': " + error.what());
    }
    return results;
}

}  // namespace modemfuse
