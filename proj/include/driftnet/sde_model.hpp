#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftnet/linalg.hpp"

namespace driftnet {

/// Constants of the sufficient condition x'b(x) <= -r |x|^alpha for |x| >= m0.
struct Dissipativity {
    double r = 0.5;
    double alpha = 1.0;
    double m0 = 4.0;

    bool operator==(const Dissipativity&) const = default;
};

/// Coefficients of dX = b(X) dt + sigma(X) dW.
///
/// Evaluators write into caller-provided buffers so the simulator can run
/// allocation-free. The diffusion buffer is d*m, row-major. The partial
/// evaluator receives a coordinate j and writes d sigma / d x_j in the same
/// layout. Evaluators must be pure and defined on all of R^d.
class SdeModel {
public:
    using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;
    using DiffusionFn = std::function<void(std::span<const double> x, std::span<double> out)>;
    using DiffusionPartialFn =
        std::function<void(std::span<const double> x, std::size_t j, std::span<double> out)>;

    SdeModel(std::size_t state_dim, std::size_t noise_dim, DriftFn drift, DiffusionFn diffusion,
             DiffusionPartialFn diffusion_partial, bool diagonal_noise = false,
             std::optional<Dissipativity> dissipativity = std::nullopt);

    std::size_t state_dim() const noexcept { return d_; }
    std::size_t noise_dim() const noexcept { return m_; }

    /// True when d == m and sigma is diagonal everywhere (the Milstein case).
    bool diagonal_noise() const noexcept { return diagonal_; }
    const std::optional<Dissipativity>& dissipativity() const noexcept { return dissipativity_; }

    void drift_into(std::span<const double> x, std::span<double> out) const { drift_(x, out); }
    void diffusion_into(std::span<const double> x, std::span<double> out) const { diffusion_(x, out); }
    void diffusion_partial_into(std::span<const double> x, std::size_t j, std::span<double> out) const {
        partial_(x, j, out);
    }

    Vector drift(const Vector& x) const;
    Matrix diffusion(const Vector& x) const;
    /// d sigma / d x_j as a d x m matrix.
    Matrix diffusion_partial(const Vector& x, std::size_t j) const;

    /// Same coefficients with a different dissipativity record.
    SdeModel with_dissipativity(std::optional<Dissipativity> metadata) const;

private:
    void check_state(const Vector& x) const;

    std::size_t d_;
    std::size_t m_;
    DriftFn drift_;
    DiffusionFn diffusion_;
    DiffusionPartialFn partial_;
    bool diagonal_;
    std::optional<Dissipativity> dissipativity_;
};

/// Shape function s(.) used in the diagonal diffusion of the benchmark model.
enum class DiffusionShape { sigmoid, sin_squared, abs_sin, shifted_sin };

std::string to_string(DiffusionShape shape);
DiffusionShape diffusion_shape_from_string(const std::string& name);

double shape_value(DiffusionShape shape, double u);
double shape_derivative(DiffusionShape shape, double u);

/// Parameters of the two-dimensional benchmark diffusion
///
///   dY1 = [-a1 Y1 + c1 a2 (sin(Y2/c2) + 2)] dt + (b1 c1 s(Y1/c1) + c1 b3) dW1
///   dY2 = [c2 a3 (cos(Y1/c1) + 2) - a4 Y2] dt + (b2 c2 s(Y2/c2) + c2 b3) dW2
///
/// `diffusion_scale` multiplies both diagonal entries (1 reproduces the
/// model above).
struct BenchmarkParams {
    double alpha1 = 1.0;
    double alpha2 = 2.0;
    double alpha3 = 2.0;
    double alpha4 = 1.0;
    double beta1 = 0.5;
    double beta2 = 0.5;
    double beta3 = 0.1;
    double c1 = 1.0 / 6.0;
    double c2 = 1.0 / 5.0;
    DiffusionShape shape = DiffusionShape::sigmoid;
    double diffusion_scale = 1.0;
    Dissipativity dissipativity{};

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;

    bool operator==(const BenchmarkParams&) const = default;
};

SdeModel benchmark_model(const BenchmarkParams& params = {});

struct DissipativityReport {
    bool holds = false;
    /// max over sampled points of x'b(x) + r |x|^alpha; <= 0 when the condition holds.
    double worst_margin = 0.0;
};

/// Samples x'b(x) + r|x|^alpha on spheres of the given radii.
/// Two-dimensional models use evenly spaced angles; higher dimensions use
/// a fixed pseudo-random set of directions.
DissipativityReport dissipativity_check(const SdeModel& model, const std::vector<double>& radii,
                                        std::size_t directions_per_radius);

/// Model of Z = scale * X + shift (componentwise). The map is affine, so the
/// Ito correction vanishes: b_Z(z) = scale * b(x), sigma_Z(z) = diag(scale) sigma(x),
/// with x = (z - shift) / scale.
SdeModel rescale_model(const SdeModel& model, const Vector& scale, const Vector& shift);

} // namespace driftnet
