#include "driftnet/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

void require_diagonal(const SdeModel& model) {
    if (!model.diagonal_noise() || model.state_dim() != model.noise_dim()) {
        throw UnsupportedError(
            "Milstein scheme requires diagonal noise (d == m); use Scheme::euler_maruyama for general noise");
    }
}

// Workspace for allocation-free stepping.
struct StepBuffers {
    explicit StepBuffers(const SdeModel& model)
        : drift(model.state_dim()),
          sigma(model.state_dim() * model.noise_dim()),
          partial(model.state_dim() * model.noise_dim()) {}
    std::vector<double> drift;
    std::vector<double> sigma;
    std::vector<double> partial;
};

void milstein_into(const SdeModel& model, std::span<const double> y, double dt, std::span<const double> dW,
                   StepBuffers& buf, std::span<double> out) {
    const std::size_t d = model.state_dim();
    model.drift_into(y, buf.drift);
    model.diffusion_into(y, buf.sigma);
    for (std::size_t i = 0; i < d; ++i) {
        model.diffusion_partial_into(y, i, buf.partial);
        const double s = buf.sigma[i * d + i];
        const double ds = buf.partial[i * d + i];
        out[i] = y[i] + buf.drift[i] * dt + s * dW[i] + 0.5 * s * ds * (dW[i] * dW[i] - dt);
    }
}

void euler_into(const SdeModel& model, std::span<const double> y, double dt, std::span<const double> dW,
                StepBuffers& buf, std::span<double> out) {
    const std::size_t d = model.state_dim();
    const std::size_t m = model.noise_dim();
    model.drift_into(y, buf.drift);
    model.diffusion_into(y, buf.sigma);
    for (std::size_t i = 0; i < d; ++i) {
        double noise = 0.0;
        for (std::size_t k = 0; k < m; ++k) noise += buf.sigma[i * m + k] * dW[k];
        out[i] = y[i] + buf.drift[i] * dt + noise;
    }
}

void check_step_inputs(const SdeModel& model, const Vector& y, double dt, const Vector& dW) {
    if (static_cast<std::size_t>(y.size()) != model.state_dim() ||
        static_cast<std::size_t>(dW.size()) != model.noise_dim()) {
        throw ValidationError("step: state or increment has the wrong dimension");
    }
    if (!(dt > 0.0)) throw ValidationError("step: dt must be > 0");
}

} // namespace

Vector milstein_step(const SdeModel& model, const Vector& y, double dt, const Vector& dW) {
    require_diagonal(model);
    check_step_inputs(model, y, dt, dW);
    StepBuffers buf(model);
    Vector out(model.state_dim());
    milstein_into(model, {y.data(), model.state_dim()}, dt, {dW.data(), model.noise_dim()}, buf,
                  {out.data(), model.state_dim()});
    return out;
}

Vector euler_maruyama_step(const SdeModel& model, const Vector& y, double dt, const Vector& dW) {
    check_step_inputs(model, y, dt, dW);
    StepBuffers buf(model);
    Vector out(model.state_dim());
    euler_into(model, {y.data(), model.state_dim()}, dt, {dW.data(), model.noise_dim()}, buf,
               {out.data(), model.state_dim()});
    return out;
}

// ---------------------------------------------------------------------------

Trajectory::Trajectory(double mesh, std::uint64_t seed, StateMatrix states)
    : mesh_(mesh), seed_(seed), states_(std::move(states)) {
    if (!(mesh_ > 0.0)) throw ValidationError("Trajectory: mesh must be > 0");
    if (states_.rows() < 1 || states_.cols() < 1) throw ValidationError("Trajectory: empty state matrix");
}

SampledPath::SampledPath(double mesh, std::size_t skip, std::uint64_t source_seed, StateMatrix states)
    : mesh_(mesh),
      skip_(skip),
      interval_(static_cast<double>(skip) * mesh),
      source_seed_(source_seed),
      states_(std::move(states)) {
    if (skip_ == 0) throw ValidationError("SampledPath: skip must be >= 1");
    if (!(mesh_ > 0.0)) throw ValidationError("SampledPath: mesh must be > 0");
    if (states_.rows() < 1 || states_.cols() < 1) throw ValidationError("SampledPath: empty state matrix");
}

bool in_unit_box(std::span<const double> x) noexcept {
    for (double v : x) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

RegressionSet::RegressionSet(StateMatrix inputs, StateMatrix responses, double interval)
    : inputs_(std::move(inputs)), responses_(std::move(responses)), interval_(interval) {
    if (inputs_.rows() != responses_.rows()) {
        throw ValidationError("RegressionSet: inputs and responses must have the same number of rows");
    }
    in_box_.resize(static_cast<std::size_t>(inputs_.rows()));
    for (Eigen::Index k = 0; k < inputs_.rows(); ++k) {
        in_box_[static_cast<std::size_t>(k)] =
            in_unit_box({inputs_.row(k).data(), static_cast<std::size_t>(inputs_.cols())});
    }
}

std::size_t RegressionSet::in_box_count() const noexcept {
    std::size_t n = 0;
    for (bool b : in_box_) n += b ? 1 : 0;
    return n;
}

RegressionSet RegressionSet::in_box_subset() const {
    const std::size_t n = in_box_count();
    StateMatrix x(n, inputs_.cols());
    StateMatrix y(n, responses_.cols());
    std::size_t j = 0;
    for (std::size_t k = 0; k < in_box_.size(); ++k) {
        if (!in_box_[k]) continue;
        x.row(j) = inputs_.row(k);
        y.row(j) = responses_.row(k);
        ++j;
    }
    return RegressionSet(std::move(x), std::move(y), interval_);
}

std::size_t step_count(double horizon, double mesh) {
    if (!(horizon > 0.0) || !(mesh > 0.0) || !std::isfinite(horizon) || !std::isfinite(mesh)) {
        throw ValidationError("step_count: horizon and mesh must be finite and > 0");
    }
    const double ratio = horizon / mesh;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(ratio));
}

Trajectory simulate_path(const SdeModel& model, double horizon, double mesh, const Vector& initial_state,
                         std::uint64_t seed, const SimulationOptions& options) {
    const std::size_t d = model.state_dim();
    const std::size_t m = model.noise_dim();
    if (static_cast<std::size_t>(initial_state.size()) != d) {
        throw ValidationError("simulate_path: initial state has the wrong dimension");
    }
    const std::size_t steps = step_count(horizon, mesh);
    if (steps > options.step_budget) {
        std::ostringstream os;
        os << "simulate_path: " << steps << " steps exceed the step budget of " << options.step_budget;
        throw ValidationError(os.str());
    }
    if (options.scheme == Scheme::milstein) require_diagonal(model);

    StateMatrix states(steps + 1, d);
    for (std::size_t i = 0; i < d; ++i) states(0, static_cast<Eigen::Index>(i)) = initial_state[i];

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sqrt_dt = std::sqrt(mesh);
    std::vector<double> dW(m);
    StepBuffers buf(model);

    for (std::size_t n = 0; n < steps; ++n) {
        for (std::size_t k = 0; k < m; ++k) dW[k] = sqrt_dt * normal(rng);
        const std::span<const double> y{states.row(static_cast<Eigen::Index>(n)).data(), d};
        const std::span<double> next{states.row(static_cast<Eigen::Index>(n + 1)).data(), d};
        if (options.scheme == Scheme::milstein) {
            milstein_into(model, y, mesh, dW, buf, next);
        } else {
            euler_into(model, y, mesh, dW, buf, next);
        }
        for (double v : next) {
            if (!std::isfinite(v) || std::abs(v) > options.divergence_bound) {
                std::ostringstream os;
                os << "simulate_path: state diverged at step " << (n + 1);
                throw DivergenceError(os.str(), n + 1);
            }
        }
    }
    return Trajectory(mesh, seed, std::move(states));
}

SampledPath subsample(const Trajectory& trajectory, std::size_t skip) {
    if (skip == 0) throw ValidationError("subsample: skip must be >= 1");
    if (skip > trajectory.steps()) {
        throw ValidationError("subsample: skip exceeds the number of steps in the trajectory");
    }
    const std::size_t rows = trajectory.steps() / skip + 1;
    StateMatrix states(rows, trajectory.dim());
    for (std::size_t k = 0; k < rows; ++k) {
        states.row(static_cast<Eigen::Index>(k)) = trajectory.states().row(static_cast<Eigen::Index>(k * skip));
    }
    return SampledPath(trajectory.mesh(), skip, trajectory.seed(), std::move(states));
}

RegressionSet make_regression_set(const SampledPath& path) {
    if (path.rows() < 2) throw ValidationError("make_regression_set: path needs at least two rows");
    const auto n = static_cast<Eigen::Index>(path.rows() - 1);
    const StateMatrix& s = path.states();
    StateMatrix inputs = s.topRows(n);
    StateMatrix responses = (s.bottomRows(n) - s.topRows(n)) / path.interval();
    return RegressionSet(std::move(inputs), std::move(responses), path.interval());
}

void write_path_csv(std::ostream& out, const SampledPath& path) {
    out << "t";
    for (std::size_t i = 0; i < path.dim(); ++i) out << ",x" << (i + 1);
    out << "\n";
    char buf[32];
    for (std::size_t k = 0; k < path.rows(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(k) * path.interval());
        out << buf;
        for (std::size_t i = 0; i < path.dim(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g",
                          path.states()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
            out << "," << buf;
        }
        out << "\n";
    }
}

} // namespace driftnet
