#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "driftnet/errors.hpp"
#include "driftnet/eval.hpp"
#include "driftnet/experiment.hpp"
#include "driftnet/json_io.hpp"
#include "driftnet/network.hpp"
#include "driftnet/sde_model.hpp"
#include "driftnet/simulate.hpp"
#include "driftnet/train.hpp"

namespace py = pybind11;
using namespace driftnet;

namespace {

template <typename Writer, typename T>
std::string to_csv(Writer writer, const T& value) {
    std::ostringstream out;
    writer(out, value);
    return out.str();
}

BenchmarkParams make_params(double diffusion_scale, const std::string& shape) {
    BenchmarkParams p;
    p.diffusion_scale = diffusion_scale;
    p.shape = diffusion_shape_from_string(shape);
    p.validate();
    return p;
}

} // namespace

PYBIND11_MODULE(_driftnet, m) {
    m.doc() = "Drift estimation for ergodic diffusions with sparse ReLU networks.";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<UnsupportedError>(m, "UnsupportedError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    py::class_<SdeModel>(m, "SdeModel")
        .def_property_readonly("state_dim", &SdeModel::state_dim)
        .def_property_readonly("noise_dim", &SdeModel::noise_dim)
        .def_property_readonly("diagonal_noise", &SdeModel::diagonal_noise)
        .def("drift", &SdeModel::drift, py::arg("x"))
        .def("diffusion", &SdeModel::diffusion, py::arg("x"));

    m.def(
        "benchmark_model",
        [](double diffusion_scale, const std::string& shape) {
            return benchmark_model(make_params(diffusion_scale, shape));
        },
        py::arg("diffusion_scale") = 1.0, py::arg("shape") = "sigmoid");

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("mesh", &Trajectory::mesh)
        .def_property_readonly("seed", &Trajectory::seed)
        .def_property_readonly("states", &Trajectory::states)
        .def_property_readonly("steps", &Trajectory::steps);

    py::class_<SampledPath>(m, "SampledPath")
        .def_property_readonly("interval", &SampledPath::interval)
        .def_property_readonly("skip", &SampledPath::skip)
        .def_property_readonly("states", &SampledPath::states)
        .def("to_csv", [](const SampledPath& p) { return to_csv(write_path_csv, p); });

    py::class_<RegressionSet>(m, "RegressionSet")
        .def_property_readonly("inputs", &RegressionSet::inputs)
        .def_property_readonly("responses", &RegressionSet::responses)
        .def_property_readonly("interval", &RegressionSet::interval)
        .def_property_readonly("in_box_mask", &RegressionSet::in_box_mask)
        .def("__len__", &RegressionSet::size);

    m.def(
        "simulate_path",
        [](const SdeModel& model, double horizon, double mesh, const Vector& x0, std::uint64_t seed,
           const std::string& scheme) {
            SimulationOptions options;
            if (scheme == "euler_maruyama") {
                options.scheme = Scheme::euler_maruyama;
            } else if (scheme != "milstein") {
                throw ValidationError("unknown scheme '" + scheme + "'");
            }
            py::gil_scoped_release release;
            return simulate_path(model, horizon, mesh, x0, seed, options);
        },
        py::arg("model"), py::arg("horizon"), py::arg("mesh"), py::arg("initial_state"), py::arg("seed"),
        py::arg("scheme") = "milstein");
    m.def("subsample", &subsample, py::arg("trajectory"), py::arg("skip"));
    m.def("make_regression_set", &make_regression_set, py::arg("path"));

    py::class_<ReluNetwork>(m, "ReluNetwork")
        .def(py::init<std::vector<Matrix>, std::vector<Vector>>(), py::arg("weights"), py::arg("shifts"))
        .def_property_readonly("widths", &ReluNetwork::widths)
        .def_property_readonly("depth", &ReluNetwork::depth)
        .def_property_readonly("weights", [](const ReluNetwork& n) { return n.weights(); })
        .def_property_readonly("shifts", [](const ReluNetwork& n) { return n.shifts(); })
        .def("forward", &ReluNetwork::forward, py::arg("x"))
        .def("forward_clipped", &ReluNetwork::forward_clipped, py::arg("x"))
        .def("forward_batch", &ReluNetwork::forward_batch, py::arg("inputs"))
        .def("to_json", [](const ReluNetwork& n) { return to_json(n).dump(); })
        .def_static(
            "from_json", [](const std::string& text) { return network_from_json(nlohmann::json::parse(text)); },
            py::arg("text"))
        .def("__eq__", &ReluNetwork::operator==);

    m.def("sparsity", &sparsity);
    m.def("max_weight", &max_weight);
    m.def("sup_bound", &sup_bound);
    m.def("certificate_json", [](const ReluNetwork& n) { return to_json(certify(n)).dump(); });
    m.def("convert_to_unit_weights", [](const ReluNetwork& n) { return convert_to_unit_weights(n).network; });
    m.def("load_network", &load_network, py::arg("path"));
    m.def("save_network", &save_network, py::arg("path"), py::arg("network"));

    m.def("init_network", &init_network, py::arg("widths"), py::arg("seed"));
    m.def(
        "empirical_loss",
        [](const ReluNetwork& net, const RegressionSet& data, bool in_box_only) {
            return empirical_loss(net, data, in_box_only).per_head;
        },
        py::arg("network"), py::arg("data"), py::arg("in_box_only") = true);
    m.def(
        "train",
        [](const ReluNetwork& initial, const RegressionSet& data, std::size_t epochs, std::size_t batch_size,
           double learning_rate, std::uint64_t seed) {
            TrainConfig config;
            config.epochs = epochs;
            config.batch_size = batch_size;
            config.learning_rate = learning_rate;
            config.seed = seed;
            TrainResult result = [&] {
                py::gil_scoped_release release;
                return train(initial, data, config);
            }();
            return py::make_tuple(result.network, result.report.loss_by_epoch);
        },
        py::arg("initial"), py::arg("data"), py::arg("epochs") = 200, py::arg("batch_size") = 64,
        py::arg("learning_rate") = 1e-3, py::arg("seed") = 0);

    m.def(
        "irreducible_error",
        [](const SdeModel& model, const std::vector<std::size_t>& skips, double horizon, double mesh,
           std::size_t n_mc, std::uint64_t seed, const Vector& x0) {
            std::vector<IrreducibleError> rows;
            {
                py::gil_scoped_release release;
                rows = irreducible_error(model, skips, horizon, mesh, n_mc, seed, x0);
            }
            py::dict out;
            for (const auto& r : rows) out[py::int_(r.skip)] = py::make_tuple(r.mean, r.standard_error);
            return out;
        },
        py::arg("model"), py::arg("skips"), py::arg("horizon"), py::arg("mesh"), py::arg("n_mc"), py::arg("seed"),
        py::arg("initial_state"));
    m.def("bound_diagnostic", &bound_diagnostic, py::arg("sparsity"), py::arg("depth"), py::arg("sample_count"),
          py::arg("interval"), py::arg("sup_bound"));

    m.def(
        "default_config_json", [] { return to_json(ExperimentConfig{}).dump(); });
    m.def(
        "run_experiment",
        [](const std::string& config_text, std::size_t workers) {
            const ExperimentConfig config =
                experiment_config_from_json(parse_json_text(config_text, "<config>"));
            ExperimentResult result;
            {
                py::gil_scoped_release release;
                result = run_experiment(config, RunOptions{workers, true, false});
            }
            py::dict out;
            out["metrics_csv"] = to_csv(write_metrics_csv, result.records);
            out["summary_csv"] = to_csv(write_summary_csv, result.summary);
            out["failures"] = result.failures.size();
            return out;
        },
        py::arg("config_json"), py::arg("workers") = 1);
}
