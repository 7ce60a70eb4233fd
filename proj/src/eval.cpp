#include "driftnet/eval.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "driftnet/errors.hpp"
#include "driftnet/seeding.hpp"

namespace driftnet {

Predictor as_predictor(const ReluNetwork& net) {
    return [net](const Vector& x) { return net.forward(x); };
}

Predictor drift_predictor(const SdeModel& model) {
    return [model](const Vector& x) { return model.drift(x); };
}

RiskEstimate risk_estimate(const Predictor& estimator, const SampledPath& path, const SdeModel& model,
                           std::size_t component) {
    if (path.rows() < 2) throw ValidationError("risk_estimate: path needs at least two rows");
    if (component >= model.state_dim()) throw ValidationError("risk_estimate: component out of range");
    if (path.dim() != model.state_dim()) throw ValidationError("risk_estimate: path and model dimensions differ");

    const std::size_t n = path.rows() - 1;
    const std::size_t d = path.dim();
    Vector x(static_cast<Eigen::Index>(d));
    Vector b(static_cast<Eigen::Index>(d));
    double sum = 0.0;
    std::size_t in_box = 0;
    for (std::size_t k = 0; k < n; ++k) {
        x = path.states().row(static_cast<Eigen::Index>(k)).transpose();
        if (!in_unit_box({x.data(), d})) continue;
        ++in_box;
        model.drift_into({x.data(), d}, {b.data(), d});
        const Vector fx = estimator(x);
        if (component >= static_cast<std::size_t>(fx.size())) {
            throw ValidationError("risk_estimate: estimator output has no such component");
        }
        const double diff = fx[static_cast<Eigen::Index>(component)] - b[static_cast<Eigen::Index>(component)];
        sum += diff * diff;
    }
    RiskEstimate out;
    out.points = n;
    out.in_box_points = in_box;
    out.mse = sum / static_cast<double>(n);
    out.in_box_mse = in_box > 0 ? sum / static_cast<double>(in_box) : 0.0;
    return out;
}

RiskEstimate risk_estimate(const ReluNetwork& net, const SampledPath& path, const SdeModel& model,
                           std::size_t component) {
    return risk_estimate(as_predictor(net), path, model, component);
}

RiskEstimate train_risk(const ReluNetwork& net, const SampledPath& train_path, const SdeModel& model,
                        std::size_t component) {
    return risk_estimate(net, train_path, model, component);
}

LossValue quotients_mse(const ReluNetwork& net, const RegressionSet& data, bool in_box_only) {
    return empirical_loss(net, data, in_box_only);
}

std::vector<IrreducibleError> irreducible_error(const SdeModel& model, const std::vector<std::size_t>& skips,
                                                double horizon, double mesh, std::size_t n_mc, std::uint64_t seed,
                                                const Vector& initial_state) {
    if (n_mc < 1) throw ValidationError("irreducible_error: n_mc must be >= 1");
    if (skips.empty()) throw ValidationError("irreducible_error: need at least one skip");
    const std::size_t d = model.state_dim();

    // per skip: running sums of the per-path loss and its square
    std::vector<double> sum(skips.size(), 0.0);
    std::vector<double> sum_sq(skips.size(), 0.0);
    std::vector<std::vector<double>> component_sum(skips.size(), std::vector<double>(d, 0.0));
    std::vector<double> b(d);

    for (std::size_t r = 0; r < n_mc; ++r) {
        const Trajectory traj = simulate_path(model, horizon, mesh, initial_state, derive_seed(seed, {r}));
        for (std::size_t s = 0; s < skips.size(); ++s) {
            const RegressionSet data = make_regression_set(subsample(traj, skips[s]));
            std::vector<double> per_comp(d, 0.0);
            for (std::size_t k = 0; k < data.size(); ++k) {
                model.drift_into({data.inputs().row(static_cast<Eigen::Index>(k)).data(), d}, b);
                for (std::size_t i = 0; i < d; ++i) {
                    const double diff = data.responses()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) - b[i];
                    per_comp[i] += diff * diff;
                }
            }
            double avg = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                per_comp[i] /= static_cast<double>(data.size());
                component_sum[s][i] += per_comp[i];
                avg += per_comp[i] / static_cast<double>(d);
            }
            sum[s] += avg;
            sum_sq[s] += avg * avg;
        }
    }

    std::vector<IrreducibleError> out;
    const double n = static_cast<double>(n_mc);
    for (std::size_t s = 0; s < skips.size(); ++s) {
        IrreducibleError e;
        e.skip = skips[s];
        e.mean = sum[s] / n;
        const double var = n_mc > 1 ? std::max(0.0, (sum_sq[s] - n * e.mean * e.mean) / (n - 1.0)) : 0.0;
        e.standard_error = std::sqrt(var / n);
        for (double c : component_sum[s]) e.per_component.push_back(c / n);
        out.push_back(std::move(e));
    }
    return out;
}

IrreducibleError irreducible_error(const SdeModel& model, std::size_t skip, double horizon, double mesh,
                                   std::size_t n_mc, std::uint64_t seed, const Vector& initial_state) {
    return irreducible_error(model, std::vector<std::size_t>{skip}, horizon, mesh, n_mc, seed, initial_state).front();
}

double bound_diagnostic(std::size_t sparsity, std::size_t depth, std::size_t sample_count, double interval,
                        double sup_bound) {
    const double horizon = static_cast<double>(sample_count) * interval;
    if (!(interval > 0.0) || !(horizon > 1.0)) {
        throw ValidationError("bound_diagnostic: needs delta > 0 and N delta > 1");
    }
    if (sparsity < 2) throw ValidationError("bound_diagnostic: needs s >= 2");
    if (!(sup_bound >= 0.0)) throw ValidationError("bound_diagnostic: F must be >= 0");
    const double s = static_cast<double>(sparsity);
    const double log_horizon = std::log(horizon);
    const double variance = s * (static_cast<double>(depth) * std::log(s) + log_horizon) * log_horizon / horizon;
    return sup_bound * sup_bound * (variance + interval);
}

SliceProfile slice_profile(const std::vector<Predictor>& estimators, const SdeModel& model, std::size_t component,
                           std::size_t fixed_index, double fixed_value, std::size_t grid_size,
                           double band_multiplier) {
    if (estimators.size() < 2) throw ValidationError("slice_profile: need at least two estimators");
    if (model.state_dim() != 2) throw ValidationError("slice_profile: only two-dimensional inputs are supported");
    if (fixed_index > 1 || component > 1) throw ValidationError("slice_profile: index out of range");
    if (grid_size < 2) throw ValidationError("slice_profile: grid_size must be >= 2");
    if (!(band_multiplier >= 0.0)) throw ValidationError("slice_profile: band_multiplier must be >= 0");

    SliceProfile p;
    p.fixed_index = fixed_index;
    p.fixed_value = fixed_value;
    const std::size_t free_index = 1 - fixed_index;
    const double count = static_cast<double>(estimators.size());
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double t = static_cast<double>(g) / static_cast<double>(grid_size - 1);
        Vector x(2);
        x[static_cast<Eigen::Index>(fixed_index)] = fixed_value;
        x[static_cast<Eigen::Index>(free_index)] = t;
        const bool inside = in_unit_box({x.data(), 2});

        std::vector<double> values;
        for (const auto& f : estimators) values.push_back(inside ? f(x)[static_cast<Eigen::Index>(component)] : 0.0);
        // deviations from the first replicate keep identical inputs exact
        const double ref = values.front();
        double offset = 0.0;
        for (double v : values) offset += v - ref;
        offset /= count;
        const double mean = ref + offset;
        double var = 0.0;
        for (double v : values) var += (v - ref - offset) * (v - ref - offset);
        const double sd = std::sqrt(var / (count - 1.0));

        p.grid.push_back(t);
        p.mean_prediction.push_back(mean);
        p.band_low.push_back(mean - band_multiplier * sd);
        p.band_high.push_back(mean + band_multiplier * sd);
        p.true_drift.push_back(inside ? model.drift(x)[static_cast<Eigen::Index>(component)] : 0.0);
    }
    return p;
}

SliceProfile slice_profile(const std::vector<ReluNetwork>& nets, const SdeModel& model, std::size_t component,
                           std::size_t fixed_index, double fixed_value, std::size_t grid_size,
                           double band_multiplier) {
    std::vector<Predictor> estimators;
    for (const auto& net : nets) estimators.push_back(as_predictor(net));
    return slice_profile(estimators, model, component, fixed_index, fixed_value, grid_size, band_multiplier);
}

double uncovered_fraction(const SliceProfile& profile) {
    if (profile.grid.empty()) return 0.0;
    std::size_t missed = 0;
    for (std::size_t g = 0; g < profile.grid.size(); ++g) {
        if (profile.true_drift[g] < profile.band_low[g] || profile.true_drift[g] > profile.band_high[g]) ++missed;
    }
    return static_cast<double>(missed) / static_cast<double>(profile.grid.size());
}

Overlay path_overlay(const Predictor& estimator, const SampledPath& path, const SdeModel& model,
                     std::size_t component) {
    if (path.rows() == 0) throw ValidationError("path_overlay: empty path");
    if (component >= model.state_dim()) throw ValidationError("path_overlay: component out of range");
    Overlay o;
    const std::size_t d = path.dim();
    for (std::size_t k = 0; k < path.rows(); ++k) {
        const Vector x = path.states().row(static_cast<Eigen::Index>(k)).transpose();
        const bool inside = in_unit_box({x.data(), d});
        o.time.push_back(static_cast<double>(k) * path.interval());
        o.true_drift.push_back(inside ? model.drift(x)[static_cast<Eigen::Index>(component)] : 0.0);
        o.predicted.push_back(inside ? estimator(x)[static_cast<Eigen::Index>(component)] : 0.0);
    }
    return o;
}

Overlay path_overlay(const ReluNetwork& net, const SampledPath& path, const SdeModel& model, std::size_t component) {
    return path_overlay(as_predictor(net), path, model, component);
}

double mean_squared_gap(const Overlay& overlay) {
    if (overlay.time.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < overlay.time.size(); ++k) {
        const double diff = overlay.predicted[k] - overlay.true_drift[k];
        sum += diff * diff;
    }
    return sum / static_cast<double>(overlay.time.size());
}

void write_slice_csv(std::ostream& out, const SliceProfile& profile) {
    out << "x,mean,lo,hi,true\n";
    char buf[160];
    for (std::size_t g = 0; g < profile.grid.size(); ++g) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", profile.grid[g], profile.mean_prediction[g],
                      profile.band_low[g], profile.band_high[g], profile.true_drift[g]);
        out << buf;
    }
}

void write_overlay_csv(std::ostream& out, const Overlay& overlay) {
    out << "t,true_drift,predicted\n";
    char buf[100];
    for (std::size_t k = 0; k < overlay.time.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", overlay.time[k], overlay.true_drift[k],
                      overlay.predicted[k]);
        out << buf;
    }
}

} // namespace driftnet
