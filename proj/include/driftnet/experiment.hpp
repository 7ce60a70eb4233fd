#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftnet/eval.hpp"
#include "driftnet/network.hpp"
#include "driftnet/sde_model.hpp"
#include "driftnet/simulate.hpp"
#include "driftnet/train.hpp"

namespace driftnet {

/// Options for the Fig.-2-style slice export. Indices are 1-based in the
/// configuration file, 0-based here.
struct SliceOptions {
    bool enabled = false;
    std::size_t component = 1;
    std::size_t fixed_index = 1;
    double fixed_value = 0.5;
    std::size_t grid_size = 101;
    double band_multiplier = 2.0;

    bool operator==(const SliceOptions&) const = default;
};

struct ExperimentConfig {
    BenchmarkParams model{};
    double mesh = 1e-3;
    std::vector<std::size_t> skip_list{200, 100, 50, 20, 10};
    std::vector<double> horizon_list{10.0, 25.0, 50.0, 100.0};
    std::size_t n_mc = 50;
    std::vector<double> initial_state{0.0, 0.0};
    std::vector<std::size_t> widths{2, 32, 32, 2};
    TrainConfig train{};
    std::uint64_t master_seed = 20240601;
    std::string output_dir = "out";
    std::size_t irreducible_n_mc = 1000;
    SliceOptions slice{};
    bool overlays = false;

    /// Throws ValidationError naming the violated invariant.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict reader: unknown keys and wrongly typed values raise ParseError
/// naming the offending field. Missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& config);

struct MetricsRecord {
    std::size_t skip = 0;
    double horizon = 0.0;
    std::size_t replicate = 0;
    /// Unscaled mean squared errors, one entry per output head.
    std::vector<double> test_mse;
    std::vector<double> train_mse;
    std::vector<double> quotients_mse;
    double final_loss = 0.0;

    double test_avg() const;
    double train_avg() const;
    double quotients_avg() const;
};

/// Everything produced by one replicate of one grid cell.
struct ReplicateFit {
    SampledPath train_path;
    SampledPath test_path;
    ReluNetwork network;
    TrainReport report;
    MetricsRecord metrics;
};

/// Simulate train path, build the regression set, initialise and train
/// the network, simulate an independent test path and evaluate. Seeds are
/// replicate_seed(master_seed, skip, T, replicate, role).
ReplicateFit fit_replicate(const ExperimentConfig& config, const SdeModel& model, std::size_t skip, double horizon,
                           std::size_t replicate);

struct ReplicateFailure {
    std::size_t skip = 0;
    double horizon = 0.0;
    std::size_t replicate = 0;
    std::string message;
};

struct SummaryStat {
    double mean = 0.0;
    double standard_error = 0.0;
};

struct SummaryRow {
    std::size_t skip = 0;
    double horizon = 0.0;
    std::size_t successes = 0;
    SummaryStat test;
    SummaryStat train;
    SummaryStat quotients;
};

struct RunOptions {
    std::size_t workers = 1;
    /// Sort records by (skip, T, replicate) before aggregation and output.
    bool deterministic = true;
    /// Return the trained network of every successful replicate.
    bool keep_networks = false;
};

struct ExperimentResult {
    std::vector<MetricsRecord> records;
    /// Parallel to records; filled only with RunOptions::keep_networks.
    std::vector<ReluNetwork> networks;
    std::vector<ReplicateFailure> failures;
    std::vector<SummaryRow> summary;
    std::vector<std::pair<std::string, SliceProfile>> slices;
    std::vector<std::pair<std::string, Overlay>> overlays;

    /// True when some (skip, T) cell has no successful replicate.
    bool has_empty_cell() const;
};

/// Runs every (skip, T, replicate) of the grid; stage errors are recorded
/// per replicate and the grid continues.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Mean and standard error (sample sd / sqrt(n)) of the head-averaged metrics per cell,
/// in grid order.
std::vector<SummaryRow> summarize(const ExperimentConfig& config, const std::vector<MetricsRecord>& records);

/// metrics.csv: skip,T,replicate,head,test_mse,train_mse,quotients_mse with
/// head = avg (one row per replicate).
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);
/// Same schema with one row per output head (head = 1, 2, ...).
void write_metrics_by_head_csv(std::ostream& out, const std::vector<MetricsRecord>& records);
/// Summary table with means and standard errors scaled by 1e3.
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Writes all result files plus manifest.json into `dir` and returns the
/// list of written file names.
std::vector<std::string> write_experiment_outputs(const std::string& dir, const ExperimentConfig& config,
                                                  const RunOptions& options, const ExperimentResult& result);

/// Manifest recording the resolved configuration next to output files.
nlohmann::json make_manifest(const std::string& command, const ExperimentConfig& config,
                             const std::vector<std::string>& files, const nlohmann::json& extra = {});

/// Formats a horizon for file names and CSV cells ("100", "12.5").
std::string format_horizon(double horizon);

} // namespace driftnet
