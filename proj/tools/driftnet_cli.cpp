// driftnet: command line front end for the drift-estimation laboratory.
//
// Exit codes: 0 success, 1 configuration / parse error, 2 runtime divergence,
// 3 experiment grid with at least one cell lacking a successful replicate.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "driftnet/errors.hpp"
#include "driftnet/eval.hpp"
#include "driftnet/experiment.hpp"
#include "driftnet/json_io.hpp"
#include "driftnet/network.hpp"
#include "driftnet/seeding.hpp"
#include "driftnet/simulate.hpp"
#include "driftnet/train.hpp"

namespace fs = std::filesystem;
using namespace driftnet;

namespace {

enum ExitCode : int { ok = 0, config_error = 1, divergence = 2, partial_grid = 3 };

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    bool deterministic = false;
};

struct CellOptions {
    std::optional<std::size_t> skip;
    std::optional<double> horizon;
    std::size_t replicate = 0;
};

ExperimentConfig resolve_config(const GlobalOptions& g) {
    ExperimentConfig config = g.config_path.empty() ? ExperimentConfig{} : load_experiment_config(g.config_path);
    if (g.seed) config.master_seed = *g.seed;
    if (!g.out_dir.empty()) config.output_dir = g.out_dir;
    return config;
}

std::ofstream open_output(const fs::path& dir, const std::string& name, std::vector<std::string>& files) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    files.push_back(name);
    return out;
}

void finish_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& config,
                     std::vector<std::string>& files, const nlohmann::json& extra = {}) {
    write_json_file((dir / "manifest.json").string(), make_manifest(command, config, files, extra));
    files.push_back("manifest.json");
}

std::size_t cell_skip(const ExperimentConfig& c, const CellOptions& o) { return o.skip.value_or(c.skip_list.front()); }
double cell_horizon(const ExperimentConfig& c, const CellOptions& o) {
    return o.horizon.value_or(c.horizon_list.front());
}

void add_cell_options(CLI::App* cmd, CellOptions& o) {
    cmd->add_option("--skip", o.skip, "fine steps between retained observations (default: first of skip_list)");
    cmd->add_option("--T", o.horizon, "time horizon (default: first of T_list)");
    cmd->add_option("--replicate", o.replicate, "replicate index used for seed derivation");
}

int cmd_simulate(const GlobalOptions& g, const CellOptions& cell, const std::string& role) {
    ExperimentConfig config = resolve_config(g);
    config.validate();
    const SdeModel model = benchmark_model(config.model);
    const std::size_t skip = cell_skip(config, cell);
    const double horizon = cell_horizon(config, cell);
    const StreamRole stream = role == "test" ? StreamRole::test_path : StreamRole::train_path;
    const std::uint64_t seed = replicate_seed(config.master_seed, skip, horizon, cell.replicate, stream);
    const Vector x0 = Eigen::Map<const Vector>(config.initial_state.data(), 2);
    const SampledPath path = subsample(simulate_path(model, horizon, config.mesh, x0, seed), skip);

    const fs::path dir = config.output_dir;
    std::vector<std::string> files;
    {
        auto out = open_output(dir, "trajectory.csv", files);
        write_path_csv(out, path);
    }
    finish_manifest(dir, "simulate", config, files,
                    {{"skip", skip}, {"T", horizon}, {"replicate", cell.replicate}, {"role", role}, {"seed", seed}});
    std::cout << "wrote " << path.rows() << " rows (delta = " << path.interval() << ") to "
              << (dir / "trajectory.csv").string() << "\n";
    return ok;
}

int cmd_train(const GlobalOptions& g, const CellOptions& cell) {
    ExperimentConfig config = resolve_config(g);
    config.validate();
    const SdeModel model = benchmark_model(config.model);
    const std::size_t skip = cell_skip(config, cell);
    const double horizon = cell_horizon(config, cell);
    const ReplicateFit fit = fit_replicate(config, model, skip, horizon, cell.replicate);

    const fs::path dir = config.output_dir;
    std::vector<std::string> files;
    fs::create_directories(dir);
    save_network((dir / "network.json").string(), fit.network);
    files.push_back("network.json");
    write_json_file((dir / "certificate.json").string(), to_json(certify(fit.network)));
    files.push_back("certificate.json");
    {
        auto out = open_output(dir, "train_report.csv", files);
        write_train_report_csv(out, fit.report);
    }
    {
        auto out = open_output(dir, "metrics.csv", files);
        write_metrics_csv(out, {fit.metrics});
    }
    finish_manifest(dir, "train", config, files,
                    {{"skip", skip},
                     {"T", horizon},
                     {"replicate", cell.replicate},
                     {"projection_events", fit.report.projection_event_count},
                     {"wall_time_s", fit.report.wall_time}});
    std::printf("final loss %.6g  test MSE %.6g  train MSE %.6g  (x1e3: %.3f / %.3f)\n", fit.report.final_loss,
                fit.metrics.test_avg(), fit.metrics.train_avg(), fit.metrics.test_avg() * 1e3,
                fit.metrics.train_avg() * 1e3);
    return ok;
}

int cmd_experiment(const GlobalOptions& g) {
    ExperimentConfig config = resolve_config(g);
    const RunOptions run{g.workers, g.deterministic || g.workers <= 1};
    const ExperimentResult result = run_experiment(config, run);
    write_experiment_outputs(config.output_dir, config, run, result);
    write_summary_csv(std::cout, result.summary);
    for (const auto& f : result.failures) {
        std::cerr << "replicate failed (skip " << f.skip << ", T " << format_horizon(f.horizon) << ", r "
                  << f.replicate << "): " << f.message << "\n";
    }
    return result.has_empty_cell() ? partial_grid : ok;
}

int cmd_irreducible(const GlobalOptions& g, std::optional<std::size_t> n_mc, std::optional<double> horizon) {
    ExperimentConfig config = resolve_config(g);
    if (n_mc) config.irreducible_n_mc = *n_mc;
    config.validate();
    const double t = horizon.value_or(*std::max_element(config.horizon_list.begin(), config.horizon_list.end()));
    const SdeModel model = benchmark_model(config.model);
    const Vector x0 = Eigen::Map<const Vector>(config.initial_state.data(), 2);
    const auto estimates =
        irreducible_error(model, config.skip_list, t, config.mesh, config.irreducible_n_mc, config.master_seed, x0);

    const fs::path dir = config.output_dir;
    std::vector<std::string> files;
    {
        auto out = open_output(dir, "irreducible.csv", files);
        out << "skip,T,n_mc,irreducible_x1e3,se_x1e3";
        for (std::size_t i = 0; i < model.state_dim(); ++i) out << ",component" << (i + 1) << "_x1e3";
        out << "\n";
        for (const auto& e : estimates) {
            char buf[64];
            out << e.skip << "," << format_horizon(t) << "," << config.irreducible_n_mc;
            std::snprintf(buf, sizeof buf, ",%.6f,%.6f", e.mean * 1e3, e.standard_error * 1e3);
            out << buf;
            for (double c : e.per_component) {
                std::snprintf(buf, sizeof buf, ",%.6f", c * 1e3);
                out << buf;
            }
            out << "\n";
        }
    }
    finish_manifest(dir, "irreducible", config, files, {{"T", t}});
    for (const auto& e : estimates) {
        std::printf("skip %4zu  irreducible error x1e3 = %10.3f  (se %.3f)\n", e.skip, e.mean * 1e3,
                    e.standard_error * 1e3);
    }
    return ok;
}

int cmd_convert(const GlobalOptions& g, const std::string& network_path) {
    ExperimentConfig config = resolve_config(g);
    const ReluNetwork net = load_network(network_path);
    const Conversion conv = convert_to_unit_weights(net);
    const ConversionLimits limits = conversion_limits(net, conv.certificate.depth);

    const fs::path dir = config.output_dir;
    fs::create_directories(dir);
    std::vector<std::string> files;
    save_network((dir / "converted.json").string(), conv.network);
    files.push_back("converted.json");
    nlohmann::json cert = to_json(conv.certificate);
    cert["original"] = to_json(certify(net));
    cert["limits"] = {{"depth", limits.depth}, {"width", limits.width}, {"sparsity", limits.sparsity}};
    cert["within_limits"] = conv.certificate.depth <= limits.depth &&
                            conv.network.max_width() <= limits.width &&
                            conv.certificate.sparsity <= limits.sparsity;
    write_json_file((dir / "certificate.json").string(), cert);
    files.push_back("certificate.json");
    finish_manifest(dir, "convert", config, files, {{"input", network_path}});
    std::cout << "depth " << conv.certificate.depth << ", sparsity " << conv.certificate.sparsity
              << ", max weight " << conv.certificate.max_weight << ", unit class "
              << (conv.certificate.member_of_unit_class ? "yes" : "no") << "\n";
    return ok;
}

struct SliceCli {
    std::optional<std::size_t> component;
    std::optional<std::size_t> fixed_index;
    std::optional<double> fixed_value;
    std::optional<std::size_t> grid_size;
    std::optional<double> band;
    std::optional<std::size_t> n_mc;
};

int cmd_slice(const GlobalOptions& g, const CellOptions& cell, const SliceCli& s) {
    ExperimentConfig config = resolve_config(g);
    if (s.component) config.slice.component = *s.component - 1;
    if (s.fixed_index) config.slice.fixed_index = *s.fixed_index - 1;
    if (s.fixed_value) config.slice.fixed_value = *s.fixed_value;
    if (s.grid_size) config.slice.grid_size = *s.grid_size;
    if (s.band) config.slice.band_multiplier = *s.band;
    if (s.n_mc) config.n_mc = *s.n_mc;
    config.slice.enabled = true;
    config.validate();
    const SdeModel model = benchmark_model(config.model);
    const std::size_t skip = cell_skip(config, cell);
    const double horizon = cell_horizon(config, cell);

    std::vector<ReluNetwork> nets;
    for (std::size_t r = 0; r < config.n_mc; ++r) nets.push_back(fit_replicate(config, model, skip, horizon, r).network);
    const SliceProfile profile = slice_profile(nets, model, config.slice.component, config.slice.fixed_index,
                                               config.slice.fixed_value, config.slice.grid_size,
                                               config.slice.band_multiplier);
    const fs::path dir = config.output_dir;
    std::vector<std::string> files;
    {
        auto out = open_output(dir, "slice.csv", files);
        write_slice_csv(out, profile);
    }
    finish_manifest(dir, "slice", config, files, {{"skip", skip}, {"T", horizon}});
    std::printf("uncovered fraction of the slice: %.3f\n", uncovered_fraction(profile));
    return ok;
}

int cmd_overlay(const GlobalOptions& g, const CellOptions& cell) {
    ExperimentConfig config = resolve_config(g);
    config.validate();
    const SdeModel model = benchmark_model(config.model);
    const std::size_t skip = cell_skip(config, cell);
    const double horizon = cell_horizon(config, cell);
    const ReplicateFit fit = fit_replicate(config, model, skip, horizon, cell.replicate);

    const fs::path dir = config.output_dir;
    std::vector<std::string> files;
    for (std::size_t i = 0; i < model.state_dim(); ++i) {
        const Overlay o = path_overlay(fit.network, fit.test_path, model, i);
        auto out = open_output(dir, "overlay_comp" + std::to_string(i + 1) + ".csv", files);
        write_overlay_csv(out, o);
        std::printf("component %zu: mean squared gap on the test path %.6g\n", i + 1, mean_squared_gap(o));
    }
    finish_manifest(dir, "overlay", config, files, {{"skip", skip}, {"T", horizon}, {"replicate", cell.replicate}});
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftnet: neural drift estimation for ergodic diffusions"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config_path, "experiment configuration (JSON)")->check(CLI::ExistingFile);
    app.add_option("--out", g.out_dir, "output directory (overrides output.dir)");
    app.add_option("--seed", g.seed, "master seed (overrides monte_carlo.master_seed)");
    app.add_option("--workers", g.workers, "worker threads for the experiment grid")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "sort records before aggregation and output");
    app.fallthrough();

    CellOptions cell;
    auto* simulate = app.add_subcommand("simulate", "simulate one sampled path and dump it as CSV");
    add_cell_options(simulate, cell);
    std::string role = "train";
    simulate->add_option("--role", role, "seed stream: train or test")->check(CLI::IsMember({"train", "test"}));

    auto* train_cmd = app.add_subcommand("train", "fit one two-headed network and write it with its report");
    add_cell_options(train_cmd, cell);

    auto* experiment = app.add_subcommand("experiment", "run the full (skip, T, replicate) grid");

    auto* irreducible = app.add_subcommand("irreducible", "Monte Carlo estimate of the irreducible error per skip");
    std::optional<std::size_t> irr_n_mc;
    std::optional<double> irr_horizon;
    irreducible->add_option("--n-mc", irr_n_mc, "trajectories (default: monte_carlo.irreducible_n_mc)");
    irreducible->add_option("--T", irr_horizon, "horizon (default: max of T_list)");

    auto* convert = app.add_subcommand("convert", "rewrite a network with unit-bounded weights");
    std::string network_path;
    convert->add_option("--network", network_path, "network JSON file")->required()->check(CLI::ExistingFile);

    auto* slice = app.add_subcommand("slice", "replicate-averaged slice of one drift head with bands");
    add_cell_options(slice, cell);
    SliceCli slice_cli;
    slice->add_option("--component", slice_cli.component, "drift head (1 or 2)");
    slice->add_option("--fixed-index", slice_cli.fixed_index, "input coordinate held fixed (1 or 2)");
    slice->add_option("--fixed-value", slice_cli.fixed_value, "value of the fixed coordinate");
    slice->add_option("--grid-size", slice_cli.grid_size, "points along the free coordinate");
    slice->add_option("--band", slice_cli.band, "band half-width in pointwise standard deviations");
    slice->add_option("--n-mc", slice_cli.n_mc, "replicate networks (default: monte_carlo.n_mc)");

    auto* overlay = app.add_subcommand("overlay", "true vs fitted drift along an independent test path");
    add_cell_options(overlay, cell);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*simulate) return cmd_simulate(g, cell, role);
        if (*train_cmd) return cmd_train(g, cell);
        if (*experiment) return cmd_experiment(g);
        if (*irreducible) return cmd_irreducible(g, irr_n_mc, irr_horizon);
        if (*convert) return cmd_convert(g, network_path);
        if (*slice) return cmd_slice(g, cell, slice_cli);
        if (*overlay) return cmd_overlay(g, cell);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return divergence;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    }
    return ok;
}
