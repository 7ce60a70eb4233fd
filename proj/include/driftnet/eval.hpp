#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "driftnet/network.hpp"
#include "driftnet/sde_model.hpp"
#include "driftnet/simulate.hpp"
#include "driftnet/train.hpp"

namespace driftnet {

/// Any estimator R^d -> R^q. Risk functions apply the unit-box indicator
/// themselves, so a predictor is only ever called on points in [0,1]^d.
using Predictor = std::function<Vector(const Vector&)>;

Predictor as_predictor(const ReluNetwork& net);
/// The drift of `model` as a predictor (the oracle estimator).
Predictor drift_predictor(const SdeModel& model);

struct RiskEstimate {
    /// (1/N) sum_{k<N} (f_hat(X_k) - f0(X_k))^2 with f0 = b_i 1_[0,1]^d;
    /// out-of-box points contribute zero but count in N.
    double mse = 0.0;
    /// Diagnostic: the same sum divided by the number of in-box points.
    double in_box_mse = 0.0;
    std::size_t points = 0;
    std::size_t in_box_points = 0;
};

/// Risk of one output component along an independent test path, evaluated
/// at the first N = rows - 1 sampled states.
RiskEstimate risk_estimate(const Predictor& estimator, const SampledPath& path, const SdeModel& model,
                           std::size_t component);
RiskEstimate risk_estimate(const ReluNetwork& net, const SampledPath& path, const SdeModel& model,
                           std::size_t component);

/// Identical formula evaluated on the training path.
RiskEstimate train_risk(const ReluNetwork& net, const SampledPath& train_path, const SdeModel& model,
                        std::size_t component);

/// Training quadratic loss on the difference quotients.
LossValue quotients_mse(const ReluNetwork& net, const RegressionSet& data, bool in_box_only = true);

struct IrreducibleError {
    std::size_t skip = 0;
    /// Monte Carlo mean of the oracle loss averaged across components.
    double mean = 0.0;
    double standard_error = 0.0;
    std::vector<double> per_component;
};

/// Loss (1/N) sum_k |Y_k - b(X_k)|^2 / d of the true drift on fresh
/// trajectories, averaged over n_mc paths. All skips share the same fine
/// trajectories; replicate r uses derive_seed(seed, {r}).
std::vector<IrreducibleError> irreducible_error(const SdeModel& model, const std::vector<std::size_t>& skips,
                                                double horizon, double mesh, std::size_t n_mc, std::uint64_t seed,
                                                const Vector& initial_state);
IrreducibleError irreducible_error(const SdeModel& model, std::size_t skip, double horizon, double mesh,
                                   std::size_t n_mc, std::uint64_t seed, const Vector& initial_state);

/// F^2 (s (L ln s + ln(N delta)) ln(N delta) / (N delta) + delta): the shape of
/// the variance term of the risk inequality with its unknown constants set to
/// one. A diagnostic, not a bound.
double bound_diagnostic(std::size_t sparsity, std::size_t depth, std::size_t sample_count, double interval,
                        double sup_bound);

struct SliceProfile {
    std::vector<double> grid;
    std::size_t fixed_index = 0;
    double fixed_value = 0.0;
    std::vector<double> mean_prediction;
    std::vector<double> band_low;
    std::vector<double> band_high;
    std::vector<double> true_drift;
};

/// Pointwise mean and mean +- band_multiplier * (sample) standard deviation
/// of the clipped estimators along x_free in [0,1] with coordinate
/// fixed_index held at fixed_value (2-d inputs). Needs >= 2 estimators.
SliceProfile slice_profile(const std::vector<Predictor>& estimators, const SdeModel& model, std::size_t component,
                           std::size_t fixed_index, double fixed_value, std::size_t grid_size,
                           double band_multiplier = 2.0);
SliceProfile slice_profile(const std::vector<ReluNetwork>& nets, const SdeModel& model, std::size_t component,
                           std::size_t fixed_index, double fixed_value, std::size_t grid_size,
                           double band_multiplier = 2.0);

/// Fraction of grid points whose true drift lies outside [band_low, band_high].
double uncovered_fraction(const SliceProfile& profile);

struct Overlay {
    std::vector<double> time;
    std::vector<double> true_drift;
    std::vector<double> predicted;
};

/// f0 and clipped f_hat along every retained point of a path.
Overlay path_overlay(const Predictor& estimator, const SampledPath& path, const SdeModel& model,
                     std::size_t component);
Overlay path_overlay(const ReluNetwork& net, const SampledPath& path, const SdeModel& model, std::size_t component);
double mean_squared_gap(const Overlay& overlay);

/// CSV x,mean,lo,hi,true.
void write_slice_csv(std::ostream& out, const SliceProfile& profile);
/// CSV t,true_drift,predicted.
void write_overlay_csv(std::ostream& out, const Overlay& overlay);

} // namespace driftnet
