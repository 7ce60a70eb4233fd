#include "driftnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "driftnet/errors.hpp"
#include "driftnet/json_io.hpp"
#include "driftnet/seeding.hpp"

namespace driftnet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("ExperimentConfig: " + what); };
    model.validate();
    train.validate();
    if (!(mesh > 0.0)) fail("simulation.mesh must be > 0");
    if (skip_list.empty() || horizon_list.empty()) fail("skip_list and T_list must be nonempty");
    for (auto s : skip_list)
        if (s == 0) fail("skip_list entries must be positive");
    for (double t : horizon_list)
        if (!(t > 0.0)) fail("T_list entries must be positive");
    if (n_mc < 1) fail("monte_carlo.n_mc must be >= 1");
    if (irreducible_n_mc < 1) fail("monte_carlo.irreducible_n_mc must be >= 1");
    const double max_skip = static_cast<double>(*std::max_element(skip_list.begin(), skip_list.end()));
    const double min_horizon = *std::min_element(horizon_list.begin(), horizon_list.end());
    if (!(mesh * max_skip < min_horizon)) fail("mesh * max(skip_list) must be < min(T_list)");
    if (initial_state.size() != 2) fail("simulation.initial_state must have two entries");
    if (widths.size() < 2 || widths.front() != 2 || widths.back() != 2) {
        fail("network.widths must start and end with 2 (two inputs, two drift heads)");
    }
    for (auto w : widths)
        if (w == 0) fail("network.widths entries must be positive");
    if (!train.projection_radii.empty() && train.projection_radii.size() != widths.size() - 1) {
        fail("train.projection_radii needs one radius per weight matrix");
    }
    if (slice.component > 1 || slice.fixed_index > 1) fail("output.slice component and fixed_index must be 1 or 2");
    if (slice.grid_size < 2) fail("output.slice.grid_size must be >= 2");
    if (slice.enabled && n_mc < 2) fail("output.slice needs n_mc >= 2");
}

namespace {

// Strict section reader: every key must be consumed.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ParseError("config: '" + path_ + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& target) {
        seen_.push_back(key);
        auto it = node_.find(key);
        if (it == node_.end()) return;
        try {
            target = it->template get<T>();
        } catch (const json::exception&) {
            throw ParseError("config: field '" + name(key) + "' has the wrong type");
        }
    }

    void read_double(const char* key, double& target) {
        seen_.push_back(key);
        auto it = node_.find(key);
        if (it == node_.end()) return;
        if (!it->is_number()) throw ParseError("config: field '" + name(key) + "' must be a number");
        target = it->get<double>();
    }

    void read_count(const char* key, std::size_t& target) {
        seen_.push_back(key);
        auto it = node_.find(key);
        if (it == node_.end()) return;
        if (!it->is_number_unsigned()) {
            throw ParseError("config: field '" + name(key) + "' must be a non-negative integer");
        }
        target = it->get<std::size_t>();
    }

    std::optional<Section> child(const char* key) {
        seen_.push_back(key);
        auto it = node_.find(key);
        if (it == node_.end()) return std::nullopt;
        return Section(*it, name(key));
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
                throw ParseError("config: unknown key '" + name(key.c_str()) + "'");
            }
        }
    }

private:
    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& node_;
    std::string path_;
    std::vector<std::string> seen_;
};

} // namespace

json to_json(const ExperimentConfig& c) {
    json j;
    j["model"] = {{"alpha1", c.model.alpha1},
                  {"alpha2", c.model.alpha2},
                  {"alpha3", c.model.alpha3},
                  {"alpha4", c.model.alpha4},
                  {"beta1", c.model.beta1},
                  {"beta2", c.model.beta2},
                  {"beta3", c.model.beta3},
                  {"c1", c.model.c1},
                  {"c2", c.model.c2},
                  {"shape", to_string(c.model.shape)},
                  {"diffusion_scale", c.model.diffusion_scale},
                  {"dissipativity",
                   {{"r", c.model.dissipativity.r},
                    {"alpha", c.model.dissipativity.alpha},
                    {"m0", c.model.dissipativity.m0}}}};
    j["simulation"] = {{"mesh", c.mesh},
                       {"skip_list", c.skip_list},
                       {"T_list", c.horizon_list},
                       {"initial_state", c.initial_state}};
    j["monte_carlo"] = {{"n_mc", c.n_mc}, {"irreducible_n_mc", c.irreducible_n_mc}, {"master_seed", c.master_seed}};
    j["network"] = {{"widths", c.widths}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"learning_rate", c.train.learning_rate},
                  {"adam_beta1", c.train.adam_beta1},
                  {"adam_beta2", c.train.adam_beta2},
                  {"adam_epsilon", c.train.adam_epsilon},
                  {"projection_radii", c.train.projection_radii},
                  {"in_box_only", c.train.in_box_only},
                  {"check_feasibility", c.train.check_feasibility},
                  {"seed", c.train.seed}};
    j["output"] = {{"dir", c.output_dir},
                   {"overlays", c.overlays},
                   {"slice",
                    {{"enabled", c.slice.enabled},
                     {"component", c.slice.component + 1},
                     {"fixed_index", c.slice.fixed_index + 1},
                     {"fixed_value", c.slice.fixed_value},
                     {"grid_size", c.slice.grid_size},
                     {"band_multiplier", c.slice.band_multiplier}}}};
    return j;
}

ExperimentConfig experiment_config_from_json(const json& doc) {
    ExperimentConfig c;
    Section root(doc, "");
    if (auto s = root.child("model")) {
        s->read_double("alpha1", c.model.alpha1);
        s->read_double("alpha2", c.model.alpha2);
        s->read_double("alpha3", c.model.alpha3);
        s->read_double("alpha4", c.model.alpha4);
        s->read_double("beta1", c.model.beta1);
        s->read_double("beta2", c.model.beta2);
        s->read_double("beta3", c.model.beta3);
        s->read_double("c1", c.model.c1);
        s->read_double("c2", c.model.c2);
        std::string shape = to_string(c.model.shape);
        s->read("shape", shape);
        try {
            c.model.shape = diffusion_shape_from_string(shape);
        } catch (const ValidationError& e) {
            throw ParseError(std::string("config: model.shape: ") + e.what());
        }
        s->read_double("diffusion_scale", c.model.diffusion_scale);
        if (auto dis = s->child("dissipativity")) {
            dis->read_double("r", c.model.dissipativity.r);
            dis->read_double("alpha", c.model.dissipativity.alpha);
            dis->read_double("m0", c.model.dissipativity.m0);
            dis->finish();
        }
        s->finish();
    }
    if (auto s = root.child("simulation")) {
        s->read_double("mesh", c.mesh);
        s->read("skip_list", c.skip_list);
        s->read("T_list", c.horizon_list);
        s->read("initial_state", c.initial_state);
        s->finish();
    }
    if (auto s = root.child("monte_carlo")) {
        s->read_count("n_mc", c.n_mc);
        s->read_count("irreducible_n_mc", c.irreducible_n_mc);
        s->read("master_seed", c.master_seed);
        s->finish();
    }
    if (auto s = root.child("network")) {
        s->read("widths", c.widths);
        s->finish();
    }
    if (auto s = root.child("train")) {
        s->read_count("epochs", c.train.epochs);
        s->read_count("batch_size", c.train.batch_size);
        s->read_double("learning_rate", c.train.learning_rate);
        s->read_double("adam_beta1", c.train.adam_beta1);
        s->read_double("adam_beta2", c.train.adam_beta2);
        s->read_double("adam_epsilon", c.train.adam_epsilon);
        s->read("projection_radii", c.train.projection_radii);
        s->read("in_box_only", c.train.in_box_only);
        s->read("check_feasibility", c.train.check_feasibility);
        s->read("seed", c.train.seed);
        s->finish();
    }
    if (auto s = root.child("output")) {
        s->read("dir", c.output_dir);
        s->read("overlays", c.overlays);
        if (auto sl = s->child("slice")) {
            std::size_t component = c.slice.component + 1;
            std::size_t fixed = c.slice.fixed_index + 1;
            sl->read("enabled", c.slice.enabled);
            sl->read_count("component", component);
            sl->read_count("fixed_index", fixed);
            sl->read_double("fixed_value", c.slice.fixed_value);
            sl->read_count("grid_size", c.slice.grid_size);
            sl->read_double("band_multiplier", c.slice.band_multiplier);
            sl->finish();
            if (component < 1 || fixed < 1) throw ParseError("config: output.slice indices are 1-based");
            c.slice.component = component - 1;
            c.slice.fixed_index = fixed - 1;
        }
        s->finish();
    }
    root.finish();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    try {
        return experiment_config_from_json(read_json_file(path));
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        if (msg.rfind(path, 0) == 0) throw;
        throw ParseError(path + ": " + msg);
    }
}

void save_experiment_config(const std::string& path, const ExperimentConfig& config) {
    write_json_file(path, to_json(config));
}

// ---------------------------------------------------------------------------
// Replicates

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

} // namespace

double MetricsRecord::test_avg() const { return mean_of(test_mse); }
double MetricsRecord::train_avg() const { return mean_of(train_mse); }
double MetricsRecord::quotients_avg() const { return mean_of(quotients_mse); }

ReplicateFit fit_replicate(const ExperimentConfig& config, const SdeModel& model, std::size_t skip, double horizon,
                           std::size_t replicate) {
    const std::uint64_t master = config.master_seed;
    const Vector x0 = to_vector(config.initial_state);

    const Trajectory train_traj = simulate_path(model, horizon, config.mesh, x0,
                                                replicate_seed(master, skip, horizon, replicate, StreamRole::train_path));
    SampledPath train_path = subsample(train_traj, skip);
    const RegressionSet data = make_regression_set(train_path);

    const ReluNetwork init =
        init_network(config.widths, replicate_seed(master, skip, horizon, replicate, StreamRole::network_init));
    TrainConfig tc = config.train;
    tc.seed = replicate_seed(master, skip, horizon, replicate, StreamRole::shuffle);
    TrainResult fit = train(init, data, tc);

    const Trajectory test_traj = simulate_path(model, horizon, config.mesh, x0,
                                               replicate_seed(master, skip, horizon, replicate, StreamRole::test_path));
    SampledPath test_path = subsample(test_traj, skip);

    MetricsRecord rec;
    rec.skip = skip;
    rec.horizon = horizon;
    rec.replicate = replicate;
    const LossValue q = quotients_mse(fit.network, data, config.train.in_box_only);
    for (std::size_t i = 0; i < fit.network.output_dim(); ++i) {
        rec.test_mse.push_back(risk_estimate(fit.network, test_path, model, i).mse);
        rec.train_mse.push_back(train_risk(fit.network, train_path, model, i).mse);
    }
    rec.quotients_mse = q.per_head;
    rec.final_loss = fit.report.final_loss;

    return ReplicateFit{std::move(train_path), std::move(test_path), std::move(fit.network), std::move(fit.report),
                        std::move(rec)};
}

bool ExperimentResult::has_empty_cell() const {
    for (const auto& row : summary)
        if (row.successes == 0) return true;
    return false;
}

std::string format_horizon(double horizon) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.15g", horizon);
    return buf;
}

std::vector<SummaryRow> summarize(const ExperimentConfig& config, const std::vector<MetricsRecord>& records) {
    std::vector<SummaryRow> rows;
    for (std::size_t skip : config.skip_list) {
        for (double horizon : config.horizon_list) {
            std::vector<const MetricsRecord*> cell;
            for (const auto& r : records)
                if (r.skip == skip && r.horizon == horizon) cell.push_back(&r);
            std::sort(cell.begin(), cell.end(),
                      [](const MetricsRecord* a, const MetricsRecord* b) { return a->replicate < b->replicate; });

            auto stat = [&](auto getter) {
                SummaryStat s;
                const double n = static_cast<double>(cell.size());
                if (cell.empty()) return s;
                double sum = 0.0;
                for (const auto* r : cell) sum += getter(*r);
                s.mean = sum / n;
                if (cell.size() > 1) {
                    double ss = 0.0;
                    for (const auto* r : cell) ss += (getter(*r) - s.mean) * (getter(*r) - s.mean);
                    s.standard_error = std::sqrt(ss / (n - 1.0) / n);
                }
                return s;
            };
            SummaryRow row;
            row.skip = skip;
            row.horizon = horizon;
            row.successes = cell.size();
            row.test = stat([](const MetricsRecord& r) { return r.test_avg(); });
            row.train = stat([](const MetricsRecord& r) { return r.train_avg(); });
            row.quotients = stat([](const MetricsRecord& r) { return r.quotients_avg(); });
            rows.push_back(row);
        }
    }
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const SdeModel model = benchmark_model(config.model);

    struct Task {
        std::size_t skip;
        double horizon;
        std::size_t replicate;
    };
    std::vector<Task> tasks;
    for (std::size_t skip : config.skip_list)
        for (double horizon : config.horizon_list)
            for (std::size_t r = 0; r < config.n_mc; ++r) tasks.push_back({skip, horizon, r});

    struct Outcome {
        std::optional<MetricsRecord> record;
        std::optional<ReplicateFailure> failure;
        std::optional<ReluNetwork> network;
        std::optional<SampledPath> test_path;
    };
    std::vector<Outcome> outcomes(tasks.size());
    std::vector<std::size_t> completion;
    std::mutex completion_mutex;
    std::atomic<std::size_t> next{0};
    const bool keep_networks = config.slice.enabled || config.overlays || options.keep_networks;

    auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            const Task& task = tasks[t];
            Outcome& out = outcomes[t];
            try {
                ReplicateFit fit = fit_replicate(config, model, task.skip, task.horizon, task.replicate);
                out.record = std::move(fit.metrics);
                if (keep_networks) {
                    out.network = std::move(fit.network);
                    out.test_path = std::move(fit.test_path);
                }
            } catch (const std::exception& e) {
                out.failure = ReplicateFailure{task.skip, task.horizon, task.replicate, e.what()};
            }
            std::lock_guard lock(completion_mutex);
            completion.push_back(t);
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, tasks.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    if (options.deterministic) std::sort(completion.begin(), completion.end());

    ExperimentResult result;
    for (std::size_t t : completion) {
        if (outcomes[t].record) {
            result.records.push_back(*outcomes[t].record);
            if (options.keep_networks) result.networks.push_back(*outcomes[t].network);
        }
        if (outcomes[t].failure) result.failures.push_back(*outcomes[t].failure);
    }
    result.summary = summarize(config, result.records);

    if (keep_networks) {
        std::size_t t = 0;
        for (std::size_t skip : config.skip_list) {
            for (double horizon : config.horizon_list) {
                std::vector<ReluNetwork> nets;
                const Outcome* first_ok = nullptr;
                for (std::size_t r = 0; r < config.n_mc; ++r, ++t) {
                    if (!outcomes[t].network) continue;
                    nets.push_back(*outcomes[t].network);
                    if (!first_ok) first_ok = &outcomes[t];
                }
                const std::string cell = "skip" + std::to_string(skip) + "_T" + format_horizon(horizon);
                if (config.slice.enabled && nets.size() >= 2) {
                    result.slices.emplace_back(
                        "slice_" + cell + "_comp" + std::to_string(config.slice.component + 1),
                        slice_profile(nets, model, config.slice.component, config.slice.fixed_index,
                                      config.slice.fixed_value, config.slice.grid_size, config.slice.band_multiplier));
                }
                if (config.overlays && first_ok) {
                    for (std::size_t i = 0; i < model.state_dim(); ++i) {
                        result.overlays.emplace_back("overlay_" + cell + "_comp" + std::to_string(i + 1),
                                                     path_overlay(*first_ok->network, *first_ok->test_path, model, i));
                    }
                }
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_scaled(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v * 1e3);
    return buf;
}

} // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
    out << "skip,T,replicate,head,test_mse,train_mse,quotients_mse\n";
    for (const auto& r : records) {
        out << r.skip << "," << format_horizon(r.horizon) << "," << r.replicate << ",avg," << fmt17(r.test_avg())
            << "," << fmt17(r.train_avg()) << "," << fmt17(r.quotients_avg()) << "\n";
    }
}

void write_metrics_by_head_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
    out << "skip,T,replicate,head,test_mse,train_mse,quotients_mse\n";
    for (const auto& r : records) {
        for (std::size_t h = 0; h < r.test_mse.size(); ++h) {
            out << r.skip << "," << format_horizon(r.horizon) << "," << r.replicate << "," << (h + 1) << ","
                << fmt17(r.test_mse[h]) << "," << fmt17(r.train_mse[h]) << "," << fmt17(r.quotients_mse[h]) << "\n";
        }
    }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "skip,T,replicates,test_mse_x1e3,test_se_x1e3,train_mse_x1e3,train_se_x1e3,quotients_mse_x1e3,"
           "quotients_se_x1e3\n";
    for (const auto& r : rows) {
        out << r.skip << "," << format_horizon(r.horizon) << "," << r.successes << "," << fmt_scaled(r.test.mean)
            << "," << fmt_scaled(r.test.standard_error) << "," << fmt_scaled(r.train.mean) << ","
            << fmt_scaled(r.train.standard_error) << "," << fmt_scaled(r.quotients.mean) << ","
            << fmt_scaled(r.quotients.standard_error) << "\n";
    }
}

json make_manifest(const std::string& command, const ExperimentConfig& config, const std::vector<std::string>& files,
                   const json& extra) {
    json m;
    m["tool"] = "driftnet";
    m["command"] = command;
    m["master_seed"] = config.master_seed;
    m["config"] = to_json(config);
    m["files"] = files;
    if (extra.is_object())
        for (const auto& [k, v] : extra.items()) m[k] = v;
    return m;
}

std::vector<std::string> write_experiment_outputs(const std::string& dir, const ExperimentConfig& config,
                                                  const RunOptions& options, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> files;
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
        files.push_back(name);
        return out;
    };
    {
        auto out = open("metrics.csv");
        write_metrics_csv(out, result.records);
    }
    {
        auto out = open("metrics_by_head.csv");
        write_metrics_by_head_csv(out, result.records);
    }
    {
        auto out = open("summary.csv");
        write_summary_csv(out, result.summary);
    }
    {
        auto out = open("failures.csv");
        out << "skip,T,replicate,error\n";
        for (const auto& f : result.failures) {
            std::string msg = f.message;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            out << f.skip << "," << format_horizon(f.horizon) << "," << f.replicate << ",\"" << msg << "\"\n";
        }
    }
    for (const auto& [name, profile] : result.slices) {
        auto out = open(name + ".csv");
        write_slice_csv(out, profile);
    }
    for (const auto& [name, overlay] : result.overlays) {
        auto out = open(name + ".csv");
        write_overlay_csv(out, overlay);
    }
    json extra = {{"workers", options.workers}, {"deterministic", options.deterministic}};
    write_json_file((fs::path(dir) / "manifest.json").string(), make_manifest("experiment", config, files, extra));
    files.push_back("manifest.json");
    return files;
}

} // namespace driftnet
