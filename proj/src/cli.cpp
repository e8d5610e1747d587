#include "modemfuse/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modemfuse/errors.hpp"
#include "modemfuse/experiment.hpp"

namespace modemfuse {

namespace {

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> items;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

int run_sweep(const std::string& config_path, std::uint64_t seed, bool seed_set, int trials,
              int threads, const std::string& out_path, std::ostream& out) {
    ExperimentConfig config = load_config_json(config_path);
    if (seed_set) config.master_seed = seed;
    if (trials > 0) config.trials = trials;
    if (threads > 0) config.threads = threads;
    if (!out_path.empty()) config.output_path = out_path;

    const std::vector<AggregateResult> results = run_experiment(config);
    write_results(results, config.output_path, ResultsFormat::Both);
    out << results_to_csv(results);
    out << "wrote " << config.output_path << ".csv and " << config.output_path << ".json\n";
    return 0;
}

int run_classify(const std::string& iq_path, const std::string& candidates_arg,
                 const std::string& method_name, double delta, int max_iterations,
                 std::ostream& out) {
    CandidateSet candidates;
    for (const std::string& name : split_csv_list(candidates_arg))
        candidates.specs.push_back(build_constellation(name));
    validate(candidates);

    const ObservationBlock block = load_iq_csv(iq_path);
    const Method method = method_from_string(method_name);

    ClassificationResult result;
    switch (method) {
        case Method::EmHml: {
            EmOptions options;
            options.stop_delta = delta;
            options.max_iterations = max_iterations;
            result = classify_em_hml(block, candidates, options);
            break;
        }
        case Method::MomHlrt:
            result = classify_mom(block, candidates);
            break;
        case Method::Alrt:
            throw ConfigError("classify: ALRT needs the true channel and is only available in "
                              "simulation sweeps");
    }

    out << "sensors: " << block.sensor_count() << "  samples: " << block.block_length() << "\n";
    char buffer[128];
    for (std::size_t i = 0; i < candidates.specs.size(); ++i) {
        std::snprintf(buffer, sizeof(buffer), "%-8s llf = %.6f\n",
                      candidates.specs[i].name.c_str(),
                      result.per_hypothesis_llf(static_cast<Eigen::Index>(i)));
        out << buffer;
    }
    out << "decision: " << candidates.specs[static_cast<std::size_t>(result.decision_index)].name
        << "\n";
    return 0;
}

int run_tables(int trials, std::uint64_t seed, bool seed_set, int threads,
               const std::string& out_path, std::ostream& out) {
    ExperimentConfig config;
    config.snr_db_list = {0.0, 5.0};
    config.sensor_counts = {1, 2, 4};
    config.stop_deltas = {1e-4, 1e-3};
    config.classifiers = {Method::EmHml};
    config.trials = trials;
    if (seed_set) config.master_seed = seed;
    if (threads > 0) config.threads = threads;

    const std::vector<AggregateResult> results = run_experiment(config);
    if (!out_path.empty()) write_results(results, out_path, ResultsFormat::Both);

    const auto find_cell = [&](double snr, int sensors, double delta) {
        for (const AggregateResult& cell : results)
            if (cell.key.snr_db == snr && cell.key.sensors == sensors &&
                cell.key.stop_delta == delta)
                return cell;
        throw UsageError("tables: missing cell");
    };

    char buffer[256];
    for (double snr : config.snr_db_list) {
        out << "Stopping-criterion sweep, SNR = " << snr << " dB (N=" << config.block_length_n
            << ", trials=" << config.trials << ")\n";
        out << "delta      ";
        for (int sensors : config.sensor_counts) {
            std::snprintf(buffer, sizeof(buffer), "  L=%-2d iter   Pc    ", sensors);
            out << buffer;
        }
        out << "\n";
        for (double delta : config.stop_deltas) {
            std::snprintf(buffer, sizeof(buffer), "%-10g ", delta);
            out << buffer;
            for (int sensors : config.sensor_counts) {
                const AggregateResult cell = find_cell(snr, sensors, delta);
                std::snprintf(buffer, sizeof(buffer), "  %-9.1f %-6.3f", cell.mean_iterations,
                              cell.pc);
                out << buffer;
            }
            out << "\n";
        }
        out << "\n";
    }
    return 0;
}

int run_plotdata(const std::string& results_path, const std::string& out_path,
                 std::ostream& out) {
    std::vector<AggregateResult> results = read_results_json(results_path);
    std::sort(results.begin(), results.end(), [](const AggregateResult& a,
                                                 const AggregateResult& b) {
        const auto key = [](const AggregateResult& r) {
            return std::make_tuple(to_string(r.key.classifier), r.key.sensors, r.key.stop_delta,
                                   r.key.snr_db);
        };
        return key(a) < key(b);
    });

    std::ostringstream csv;
    csv << "classifier,L,delta,snr_db,pc,ci95\n";
    char buffer[256];
    for (const AggregateResult& cell : results) {
        std::snprintf(buffer, sizeof(buffer), "%s,%d,%g,%g,%.6f,%.6f\n",
                      to_string(cell.key.classifier).c_str(), cell.key.sensors,
                      cell.key.stop_delta, cell.key.snr_db, cell.pc, cell.pc_ci95);
        csv << buffer;
    }
    if (out_path.empty()) {
        out << csv.str();
    } else {
        std::ofstream file(out_path);
        if (!file) throw InputError("cannot open '" + out_path + "' for writing");
        file << csv.str();
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"multi-radio modulation classification via EM-based hybrid maximum likelihood"};
    app.require_subcommand(1);

    auto* sweep = app.add_subcommand("sweep", "run a seeded Monte Carlo sweep from a config file");
    std::string config_path;
    std::uint64_t seed = 0;
    int trials = 0;
    int threads = 0;
    std::string out_path;
    sweep->add_option("--config", config_path, "JSON sweep configuration")->required();
    auto* sweep_seed = sweep->add_option("--seed", seed, "override master seed");
    sweep->add_option("--trials", trials, "override trials per cell");
    sweep->add_option("--threads", threads, "cap worker threads");
    sweep->add_option("--out", out_path, "output path stem (.csv/.json appended)");

    auto* classify = app.add_subcommand("classify", "classify one IQ block from a CSV file");
    std::string iq_path;
    std::string candidates_arg = "16qam,32qam,64qam";
    std::string method_name = "em";
    double delta = 1e-4;
    int max_iterations = 500;
    classify->add_option("--iq", iq_path, "IQ CSV file (header sensor,n,re,im)")->required();
    classify->add_option("--candidates", candidates_arg, "comma-separated candidate formats");
    classify->add_option("--method", method_name, "em | mom");
    classify->add_option("--delta", delta, "EM stopping criterion");
    classify->add_option("--max-iterations", max_iterations, "EM iteration cap");

    auto* tables = app.add_subcommand("tables",
                                      "reproduce the stopping-criterion tables (SNR 0 and 5 dB)");
    int tables_trials = 1000;
    std::uint64_t tables_seed = 0;
    int tables_threads = 0;
    std::string tables_out;
    tables->add_option("--trials", tables_trials, "Monte Carlo trials per cell");
    auto* tables_seed_opt = tables->add_option("--seed", tables_seed, "override master seed");
    tables->add_option("--threads", tables_threads, "cap worker threads");
    tables->add_option("--out", tables_out, "also write results to this path stem");

    auto* plotdata = app.add_subcommand("plotdata", "emit Pc-vs-SNR series from stored results");
    std::string results_path;
    std::string plot_out;
    plotdata->add_option("--results", results_path, "results JSON file")->required();
    plotdata->add_option("--out", plot_out, "write series CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& error) {
        err << "error: " << error.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (sweep->parsed())
            return run_sweep(config_path, seed, sweep_seed->count() > 0, trials, threads, out_path,
                             out);
        if (classify->parsed())
            return run_classify(iq_path, candidates_arg, method_name, delta, max_iterations, out);
        if (tables->parsed())
            return run_tables(tables_trials, tables_seed, tables_seed_opt->count() > 0,
                              tables_threads, tables_out, out);
        if (plotdata->parsed()) return run_plotdata(results_path, plot_out, out);
    } catch (const NumericError& error) {
        err << "numeric failure: " << error.what() << "\n";
        return 2;
    } catch (const std::exception& error) {
        err << "error: " << error.what() << "\n";
        return 1;
    }
    err << "error: no subcommand\n";
    return 1;
}

}  // namespace modemfuse
