#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "driftnet/linalg.hpp"
#include "driftnet/sde_model.hpp"

namespace driftnet {

enum class Scheme { milstein, euler_maruyama };

/// One Milstein step for diagonal noise:
///   y_i + b_i(y) dt + s_ii(y) dW_i + 0.5 s_ii(y) d_i s_ii(y) (dW_i^2 - dt).
/// Throws UnsupportedError when the model is not declared diagonal.
Vector milstein_step(const SdeModel& model, const Vector& y, double dt, const Vector& dW);

/// One Euler-Maruyama step y + b(y) dt + sigma(y) dW (any noise structure).
Vector euler_maruyama_step(const SdeModel& model, const Vector& y, double dt, const Vector& dW);

struct SimulationOptions {
    Scheme scheme = Scheme::milstein;
    /// Upper bound on ceil(T / dt).
    std::size_t step_budget = 50'000'000;
    /// Any |coordinate| above this aborts the run with DivergenceError.
    double divergence_bound = 1e6;
};

/// Fine-mesh approximation of one sample path.
class Trajectory {
public:
    Trajectory(double mesh, std::uint64_t seed, StateMatrix states);

    double mesh() const noexcept { return mesh_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const StateMatrix& states() const noexcept { return states_; }
    Vector initial_state() const { return states_.row(0).transpose(); }
    std::size_t steps() const noexcept { return static_cast<std::size_t>(states_.rows()) - 1; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(states_.cols()); }
    double horizon() const noexcept { return mesh_ * static_cast<double>(steps()); }

private:
    double mesh_;
    std::uint64_t seed_;
    StateMatrix states_;
};

/// Every skip-th state of a Trajectory.
class SampledPath {
public:
    SampledPath(double mesh, std::size_t skip, std::uint64_t source_seed, StateMatrix states);

    /// Sampling interval delta = skip * mesh.
    double interval() const noexcept { return interval_; }
    double mesh() const noexcept { return mesh_; }
    std::size_t skip() const noexcept { return skip_; }
    std::uint64_t source_seed() const noexcept { return source_seed_; }
    const StateMatrix& states() const noexcept { return states_; }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(states_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(states_.cols()); }

private:
    double mesh_;
    std::size_t skip_;
    double interval_;
    std::uint64_t source_seed_;
    StateMatrix states_;
};

/// Difference-quotient regression data: inputs X_k and responses
/// Y_k = (X_{k+1} - X_k) / delta for k = 0..N-1.
class RegressionSet {
public:
    RegressionSet(StateMatrix inputs, StateMatrix responses, double interval);

    const StateMatrix& inputs() const noexcept { return inputs_; }
    const StateMatrix& responses() const noexcept { return responses_; }
    double interval() const noexcept { return interval_; }
    const std::vector<bool>& in_box_mask() const noexcept { return in_box_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(inputs_.rows()); }
    std::size_t in_box_count() const noexcept;

    /// The subset of pairs whose input lies in the closed unit box.
    RegressionSet in_box_subset() const;

private:
    StateMatrix inputs_;
    StateMatrix responses_;
    double interval_;
    std::vector<bool> in_box_;
};

/// Closed unit box membership: every coordinate in [0, 1].
bool in_unit_box(std::span<const double> x) noexcept;

/// Number of steps for horizon T at mesh dt; T/dt within 1e-9 of an integer
/// rounds to that integer, otherwise rounds up.
std::size_t step_count(double horizon, double mesh);

/// Simulates ceil(T/dt) steps from initial_state. Gaussian increments come
/// from std::mt19937_64 seeded with `seed`, transformed by
/// std::normal_distribution and scaled by sqrt(dt); coordinates are drawn in
/// order within a step. Bit-identical for identical inputs within one build.
Trajectory simulate_path(const SdeModel& model, double horizon, double mesh, const Vector& initial_state,
                         std::uint64_t seed, const SimulationOptions& options = {});

/// Keeps rows 0, skip, 2 skip, ...; a trailing remainder is dropped.
SampledPath subsample(const Trajectory& trajectory, std::size_t skip);

RegressionSet make_regression_set(const SampledPath& path);

/// CSV with header t,x1,...,xd and 17 significant digits.
void write_path_csv(std::ostream& out, const SampledPath& path);

} // namespace driftnet
