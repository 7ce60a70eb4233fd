#include "driftnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "driftnet/errors.hpp"

namespace driftnet {

void TrainConfig::validate() const {
    auto fail = [](const char* what) { throw ValidationError(std::string("TrainConfig: ") + what); };
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in (0, 1)");
    if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in (0, 1)");
    if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    for (double r : projection_radii)
        if (!(r > 0.0)) fail("projection radii must be > 0");
}

namespace {

// Column-major copies of the (optionally filtered) data, one column per pair.
struct ColumnData {
    Matrix inputs;
    Matrix responses;
    std::vector<bool> active;  // false: prediction clipped to zero
};

ColumnData columns(const RegressionSet& data, bool in_box_only) {
    ColumnData out;
    const auto& mask = data.in_box_mask();
    std::vector<Eigen::Index> keep;
    for (std::size_t k = 0; k < data.size(); ++k)
        if (!in_box_only || mask[k]) keep.push_back(static_cast<Eigen::Index>(k));
    const auto n = static_cast<Eigen::Index>(keep.size());
    out.inputs.resize(data.inputs().cols(), n);
    out.responses.resize(data.responses().cols(), n);
    out.active.resize(keep.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        out.inputs.col(j) = data.inputs().row(keep[static_cast<std::size_t>(j)]).transpose();
        out.responses.col(j) = data.responses().row(keep[static_cast<std::size_t>(j)]).transpose();
        out.active[static_cast<std::size_t>(j)] = mask[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])];
    }
    return out;
}

Matrix clipped_predictions(const ReluNetwork& net, const ColumnData& data) {
    Matrix pred = net.forward_batch(data.inputs);
    for (std::size_t j = 0; j < data.active.size(); ++j)
        if (!data.active[j]) pred.col(static_cast<Eigen::Index>(j)).setZero();
    return pred;
}

LossValue loss_on(const ReluNetwork& net, const ColumnData& data) {
    const Matrix residual = clipped_predictions(net, data) - data.responses;
    const double n = static_cast<double>(residual.cols());
    LossValue loss;
    for (Eigen::Index i = 0; i < residual.rows(); ++i) loss.per_head.push_back(residual.row(i).squaredNorm() / n);
    loss.average = std::accumulate(loss.per_head.begin(), loss.per_head.end(), 0.0) /
                   static_cast<double>(loss.per_head.size());
    return loss;
}

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, double beta1, double beta2, double step_size, double eps) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    param.array() -= step_size * m.array() / (v.array().sqrt() + eps);
}

} // namespace

LossValue empirical_loss(const ReluNetwork& net, const RegressionSet& data, bool in_box_only) {
    if (net.input_dim() != static_cast<std::size_t>(data.inputs().cols()) ||
        net.output_dim() != static_cast<std::size_t>(data.responses().cols())) {
        throw ValidationError("empirical_loss: network and data dimensions differ");
    }
    const ColumnData cols = columns(data, in_box_only);
    if (cols.inputs.cols() == 0) throw ValidationError("empirical_loss: no pairs left after in-box filtering");
    return loss_on(net, cols);
}

std::vector<double> default_projection_radii(const ReluNetwork& net) {
    std::vector<double> radii;
    for (std::size_t l = 0; l < net.weights().size(); ++l) radii.push_back(std::sqrt(static_cast<double>(net.widths()[l])));
    return radii;
}

std::size_t project_rows_in_place(ReluNetwork& net, const std::vector<double>& radii) {
    if (radii.size() != net.weights().size()) {
        throw ValidationError("project_rows: need one radius per weight matrix");
    }
    // a rescaled row may sit a few ulp above its radius; leave it alone so
    // projecting twice is the identity
    constexpr double slack = 1.0 + 1e-14;
    std::size_t events = 0;
    for (std::size_t l = 0; l < radii.size(); ++l) {
        if (!(radii[l] > 0.0)) throw ValidationError("project_rows: radii must be > 0");
        Matrix& w = net.weight(l);
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            const double norm = w.row(i).norm();
            if (norm > radii[l] * slack) {
                w.row(i) *= radii[l] / norm;
                ++events;
            }
        }
        if (l >= 1) {
            Vector& v = net.shift(l);
            const double norm = v.norm();
            if (norm > radii[l] * slack) {
                v *= radii[l] / norm;
                ++events;
            }
        }
    }
    return events;
}

ReluNetwork project_rows(const ReluNetwork& net, const std::vector<double>& radii) {
    ReluNetwork out = net;
    project_rows_in_place(out, radii);
    return out;
}

double max_norm_excess(const ReluNetwork& net, const std::vector<double>& radii) {
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        excess = std::max(excess, net.weight(l).rowwise().norm().maxCoeff() - radii.at(l));
        if (l >= 1) excess = std::max(excess, net.shift(l).norm() - radii.at(l));
    }
    return excess;
}

ReluNetwork init_network(const std::vector<std::size_t>& widths, std::uint64_t seed) {
    ReluNetwork net = ReluNetwork::zeros(widths);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(widths[l])));
        Matrix& w = net.weight(l);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = normal(rng);
    }
    project_rows_in_place(net, default_projection_radii(net));
    return net;
}

TrainResult train(const ReluNetwork& initial, const RegressionSet& data, const TrainConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    if (initial.input_dim() != static_cast<std::size_t>(data.inputs().cols()) ||
        initial.output_dim() != static_cast<std::size_t>(data.responses().cols())) {
        throw ValidationError("train: network and data dimensions differ");
    }
    const ColumnData cols = columns(data, config.in_box_only);
    const std::size_t n = static_cast<std::size_t>(cols.inputs.cols());
    if (n == 0) throw ValidationError("train: empty training set after in-box filtering");

    const std::vector<double> radii =
        config.projection_radii.empty() ? default_projection_radii(initial) : config.projection_radii;
    if (radii.size() != initial.weights().size()) {
        throw ValidationError("train: projection_radii must have one entry per weight matrix");
    }

    ReluNetwork net = initial;
    TrainReport report;
    NetworkGradients m = NetworkGradients::zeros_like(net);
    NetworkGradients v = NetworkGradients::zeros_like(net);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed);

    const Eigen::Index d = cols.inputs.rows();
    const Eigen::Index q = cols.responses.rows();
    const std::size_t batch = std::min(config.batch_size, n);
    Matrix xb(d, static_cast<Eigen::Index>(batch));
    Matrix yb(q, static_cast<Eigen::Index>(batch));
    double beta1_power = 1.0;
    double beta2_power = 1.0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t first = 0; first < n; first += batch) {
            const std::size_t count = std::min(batch, n - first);
            xb.resize(d, static_cast<Eigen::Index>(count));
            yb.resize(q, static_cast<Eigen::Index>(count));
            std::vector<bool> active(count);
            for (std::size_t j = 0; j < count; ++j) {
                const auto src = static_cast<Eigen::Index>(order[first + j]);
                xb.col(static_cast<Eigen::Index>(j)) = cols.inputs.col(src);
                yb.col(static_cast<Eigen::Index>(j)) = cols.responses.col(src);
                active[j] = cols.active[static_cast<std::size_t>(src)];
            }
            // d/df of (1/B) sum_k |f(x_k) - y_k|^2
            Matrix grad_out = (2.0 / static_cast<double>(count)) * (net.forward_batch(xb) - yb);
            for (std::size_t j = 0; j < count; ++j)
                if (!active[j]) grad_out.col(static_cast<Eigen::Index>(j)).setZero();
            const NetworkGradients g = backward(net, xb, grad_out);

            beta1_power *= config.adam_beta1;
            beta2_power *= config.adam_beta2;
            const double step_size =
                config.learning_rate * std::sqrt(1.0 - beta2_power) / (1.0 - beta1_power);
            for (std::size_t l = 0; l < g.weights.size(); ++l) {
                adam_update(net.weight(l), g.weights[l], m.weights[l], v.weights[l], config.adam_beta1,
                            config.adam_beta2, step_size, config.adam_epsilon);
            }
            for (std::size_t l = 0; l < g.shifts.size(); ++l) {
                adam_update(net.shift(l + 1), g.shifts[l], m.shifts[l], v.shifts[l], config.adam_beta1,
                            config.adam_beta2, step_size, config.adam_epsilon);
            }
            report.projection_event_count += project_rows_in_place(net, radii);
            ++report.updates;

            if (config.check_feasibility) {
                const double excess = max_norm_excess(net, radii);
                report.max_norm_excess = std::max(report.max_norm_excess, excess);
                if (excess > 1e-12) ++report.feasibility_violations;
            }
        }

        const LossValue loss = loss_on(net, cols);
        if (!std::isfinite(loss.average)) {
            std::ostringstream os;
            os << "train: non-finite loss at epoch " << epoch;
            throw DivergenceError(os.str(), epoch);
        }
        report.loss_by_epoch.push_back(loss.average);
        report.head_loss_by_epoch.push_back(loss.per_head);
    }

    report.final_loss = config.epochs > 0 ? report.loss_by_epoch.back() : loss_on(net, cols).average;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(net), std::move(report)};
}

void write_train_report_csv(std::ostream& out, const TrainReport& report) {
    const std::size_t heads = report.head_loss_by_epoch.empty() ? 0 : report.head_loss_by_epoch.front().size();
    out << "epoch";
    for (std::size_t h = 0; h < heads; ++h) out << ",loss_head" << (h + 1);
    out << ",loss_avg\n";
    char buf[32];
    for (std::size_t e = 0; e < report.loss_by_epoch.size(); ++e) {
        out << (e + 1);
        for (double v : report.head_loss_by_epoch[e]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << "," << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", report.loss_by_epoch[e]);
        out << "," << buf << "\n";
    }
}

} // namespace driftnet
