#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "driftnet/network.hpp"
#include "driftnet/simulate.hpp"

namespace driftnet {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Per-layer l2 radii for the rows of W_l and for v_l (l = 0..L). Empty
    /// means sqrt(p_l), p_l being the input width of W_l.
    std::vector<double> projection_radii;
    std::uint64_t seed = 0;
    /// Fit only pairs whose input lies in [0,1]^d.
    bool in_box_only = true;
    /// Re-check every row norm after every update and count violations.
    bool check_feasibility = false;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct TrainReport {
    /// Average of the per-head losses after each epoch (full training set).
    std::vector<double> loss_by_epoch;
    /// Per-head losses after each epoch.
    std::vector<std::vector<double>> head_loss_by_epoch;
    double final_loss = 0.0;
    std::size_t updates = 0;
    /// Number of rows / shift vectors rescaled by the projection.
    std::size_t projection_event_count = 0;
    /// Only populated when TrainConfig::check_feasibility is set.
    std::size_t feasibility_violations = 0;
    double max_norm_excess = 0.0;
    double wall_time = 0.0;
};

struct TrainResult {
    ReluNetwork network;
    TrainReport report;
};

struct LossValue {
    /// (1/N) sum_k (Y_k,i - f_i(X_k))^2 for each output head i.
    std::vector<double> per_head;
    /// Arithmetic mean of per_head.
    double average = 0.0;
};

/// Quadratic loss of the clipped network on the regression set. With
/// in_box_only the average runs over in-box pairs only.
LossValue empirical_loss(const ReluNetwork& net, const RegressionSet& data, bool in_box_only = true);

/// sqrt(p_l) for l = 0..L.
std::vector<double> default_projection_radii(const ReluNetwork& net);

/// Rescales every row of W_l and every whole v_l whose l2 norm exceeds
/// radii[l] back onto the sphere; other entries are untouched. Returns the
/// number of rescaled rows and vectors.
std::size_t project_rows_in_place(ReluNetwork& net, const std::vector<double>& radii);
ReluNetwork project_rows(const ReluNetwork& net, const std::vector<double>& radii);

/// Largest amount by which any row / shift norm exceeds its radius (<= 0 when feasible).
double max_norm_excess(const ReluNetwork& net, const std::vector<double>& radii);

/// He-normal weights (std sqrt(2 / fan_in)), zero shifts, then projected.
ReluNetwork init_network(const std::vector<std::size_t>& widths, std::uint64_t seed);

/// Mini-batch Adam on the summed per-head quadratic loss, projecting after
/// every update. Each epoch visits a fresh permutation drawn from config.seed.
/// Returns the final network (never a best-epoch snapshot).
TrainResult train(const ReluNetwork& initial, const RegressionSet& data, const TrainConfig& config);

/// CSV with header epoch,loss_head1,...,loss_avg.
void write_train_report_csv(std::ostream& out, const TrainReport& report);

} // namespace driftnet
