#include "driftnet/sde_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "driftnet/errors.hpp"

namespace driftnet {

SdeModel::SdeModel(std::size_t state_dim, std::size_t noise_dim, DriftFn drift, DiffusionFn diffusion,
                   DiffusionPartialFn diffusion_partial, bool diagonal_noise,
                   std::optional<Dissipativity> dissipativity)
    : d_(state_dim),
      m_(noise_dim),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      partial_(std::move(diffusion_partial)),
      diagonal_(diagonal_noise),
      dissipativity_(dissipativity) {
    if (d_ == 0 || m_ == 0) {
        throw ValidationError("SdeModel: state and noise dimensions must be >= 1");
    }
    if (!drift_ || !diffusion_ || !partial_) {
        throw ValidationError("SdeModel: drift, diffusion and diffusion_partial must all be set");
    }
    if (diagonal_ && d_ != m_) {
        throw ValidationError("SdeModel: diagonal noise requires state_dim == noise_dim");
    }
}

void SdeModel::check_state(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != d_) {
        std::ostringstream os;
        os << "SdeModel: state has length " << x.size() << ", expected " << d_;
        throw ValidationError(os.str());
    }
}

Vector SdeModel::drift(const Vector& x) const {
    check_state(x);
    Vector out(d_);
    drift_({x.data(), d_}, {out.data(), d_});
    return out;
}

Matrix SdeModel::diffusion(const Vector& x) const {
    check_state(x);
    std::vector<double> buf(d_ * m_);
    diffusion_({x.data(), d_}, buf);
    Matrix out(d_, m_);
    for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t k = 0; k < m_; ++k) out(i, k) = buf[i * m_ + k];
    return out;
}

Matrix SdeModel::diffusion_partial(const Vector& x, std::size_t j) const {
    check_state(x);
    if (j >= d_) throw ValidationError("SdeModel: partial derivative coordinate out of range");
    std::vector<double> buf(d_ * m_);
    partial_({x.data(), d_}, j, buf);
    Matrix out(d_, m_);
    for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t k = 0; k < m_; ++k) out(i, k) = buf[i * m_ + k];
    return out;
}

SdeModel SdeModel::with_dissipativity(std::optional<Dissipativity> metadata) const {
    SdeModel copy = *this;
    copy.dissipativity_ = metadata;
    return copy;
}

// ---------------------------------------------------------------------------
// Diffusion shapes

std::string to_string(DiffusionShape shape) {
    switch (shape) {
        case DiffusionShape::sigmoid: return "sigmoid";
        case DiffusionShape::sin_squared: return "sin_squared";
        case DiffusionShape::abs_sin: return "abs_sin";
        case DiffusionShape::shifted_sin: return "shifted_sin";
    }
    return "unknown";
}

DiffusionShape diffusion_shape_from_string(const std::string& name) {
    if (name == "sigmoid") return DiffusionShape::sigmoid;
    if (name == "sin_squared") return DiffusionShape::sin_squared;
    if (name == "abs_sin") return DiffusionShape::abs_sin;
    if (name == "shifted_sin") return DiffusionShape::shifted_sin;
    throw ValidationError("unknown diffusion shape '" + name +
                          "' (expected sigmoid, sin_squared, abs_sin or shifted_sin)");
}

double shape_value(DiffusionShape shape, double u) {
    switch (shape) {
        case DiffusionShape::sigmoid: return 1.0 / (1.0 + std::exp(-u));
        case DiffusionShape::sin_squared: {
            const double s = std::sin(u);
            return s * s;
        }
        case DiffusionShape::abs_sin: return std::abs(std::sin(u));
        case DiffusionShape::shifted_sin: return 0.5 * (std::sin(u) + 1.0);
    }
    return 0.0;
}

double shape_derivative(DiffusionShape shape, double u) {
    switch (shape) {
        case DiffusionShape::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-u));
            return s * (1.0 - s);
        }
        case DiffusionShape::sin_squared: return std::sin(2.0 * u);
        case DiffusionShape::abs_sin: {
            // derivative taken as 0 on the zero set of sin
            const double s = std::sin(u);
            return s > 0.0 ? std::cos(u) : (s < 0.0 ? -std::cos(u) : 0.0);
        }
        case DiffusionShape::shifted_sin: return 0.5 * std::cos(u);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Benchmark model

void BenchmarkParams::validate() const {
    auto fail = [](const char* what) { throw ValidationError(std::string("BenchmarkParams: ") + what); };
    if (!(alpha1 > 0.0)) fail("alpha1 must be > 0");
    if (!(alpha4 > 0.0)) fail("alpha4 must be > 0");
    if (!(beta3 > 0.0)) fail("beta3 must be > 0");
    if (!(c1 > 0.0)) fail("c1 must be > 0");
    if (!(c2 > 0.0)) fail("c2 must be > 0");
    if (!(diffusion_scale > 0.0)) fail("diffusion_scale must be > 0");
    if (!std::isfinite(alpha2) || !std::isfinite(alpha3) || !std::isfinite(beta1) || !std::isfinite(beta2))
        fail("coefficients must be finite");
    if (!(dissipativity.r > 0.0) || !(dissipativity.alpha >= 1.0) || !(dissipativity.m0 >= 0.0))
        fail("dissipativity metadata needs r > 0, alpha >= 1, m0 >= 0");

    constexpr int grid = 301;
    for (int k = 0; k < grid; ++k) {
        const double y = -3.0 + 6.0 * k / (grid - 1);
        const double s11 = beta1 * c1 * shape_value(shape, y / c1) + c1 * beta3;
        const double s22 = beta2 * c2 * shape_value(shape, y / c2) + c2 * beta3;
        if (!(s11 > 0.0)) fail("diffusion entry sigma11 is not strictly positive on [-3, 3]");
        if (!(s22 > 0.0)) fail("diffusion entry sigma22 is not strictly positive on [-3, 3]");
    }
}

SdeModel benchmark_model(const BenchmarkParams& params) {
    params.validate();
    const BenchmarkParams p = params;

    auto drift = [p](std::span<const double> y, std::span<double> out) {
        out[0] = -p.alpha1 * y[0] + p.c1 * p.alpha2 * (std::sin(y[1] / p.c2) + 2.0);
        out[1] = p.c2 * p.alpha3 * (std::cos(y[0] / p.c1) + 2.0) - p.alpha4 * y[1];
    };
    auto diffusion = [p](std::span<const double> y, std::span<double> out) {
        const double k = p.diffusion_scale;
        out[0] = k * (p.beta1 * p.c1 * shape_value(p.shape, y[0] / p.c1) + p.c1 * p.beta3);
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = k * (p.beta2 * p.c2 * shape_value(p.shape, y[1] / p.c2) + p.c2 * p.beta3);
    };
    // d/dy1 of sigma11 = k b1 s'(y1/c1); sigma22 depends on y2 only.
    auto partial = [p](std::span<const double> y, std::size_t j, std::span<double> out) {
        const double k = p.diffusion_scale;
        out[0] = out[1] = out[2] = out[3] = 0.0;
        if (j == 0) out[0] = k * p.beta1 * shape_derivative(p.shape, y[0] / p.c1);
        if (j == 1) out[3] = k * p.beta2 * shape_derivative(p.shape, y[1] / p.c2);
    };
    return SdeModel(2, 2, drift, diffusion, partial, true, p.dissipativity);
}

// ---------------------------------------------------------------------------
// Diagnostics

DissipativityReport dissipativity_check(const SdeModel& model, const std::vector<double>& radii,
                                        std::size_t directions_per_radius) {
    if (!model.dissipativity()) {
        throw UnsupportedError("dissipativity_check: model carries no dissipativity metadata");
    }
    const Dissipativity meta = *model.dissipativity();
    if (radii.empty() || directions_per_radius == 0) {
        throw ValidationError("dissipativity_check: need at least one radius and one direction");
    }
    for (double r : radii) {
        if (!(r > meta.m0)) throw ValidationError("dissipativity_check: every radius must exceed m0");
    }

    const std::size_t d = model.state_dim();
    std::vector<Vector> directions;
    directions.reserve(directions_per_radius);
    if (d == 1) {
        directions.push_back(Vector::Constant(1, 1.0));
        directions.push_back(Vector::Constant(1, -1.0));
    } else if (d == 2) {
        for (std::size_t k = 0; k < directions_per_radius; ++k) {
            const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) /
                                 static_cast<double>(directions_per_radius);
            Vector u(2);
            u << std::cos(theta), std::sin(theta);
            directions.push_back(u);
        }
    } else {
        std::mt19937_64 rng(0x5eed);
        std::normal_distribution<double> normal;
        for (std::size_t k = 0; k < directions_per_radius; ++k) {
            Vector u(d);
            for (std::size_t i = 0; i < d; ++i) u[i] = normal(rng);
            directions.push_back(u.normalized());
        }
    }

    DissipativityReport report;
    report.worst_margin = -std::numeric_limits<double>::infinity();
    Vector b(d);
    for (double radius : radii) {
        for (const auto& u : directions) {
            const Vector x = radius * u;
            model.drift_into({x.data(), d}, {b.data(), d});
            const double margin = x.dot(b) + meta.r * std::pow(radius, meta.alpha);
            report.worst_margin = std::max(report.worst_margin, margin);
        }
    }
    report.holds = report.worst_margin <= 0.0;
    return report;
}

SdeModel rescale_model(const SdeModel& model, const Vector& scale, const Vector& shift) {
    const std::size_t d = model.state_dim();
    const std::size_t m = model.noise_dim();
    if (static_cast<std::size_t>(scale.size()) != d || static_cast<std::size_t>(shift.size()) != d) {
        throw ValidationError("rescale_model: scale and shift must have the state dimension");
    }
    for (std::size_t i = 0; i < d; ++i) {
        if (scale[i] == 0.0 || !std::isfinite(scale[i])) {
            throw ValidationError("rescale_model: scale entries must be finite and nonzero");
        }
        if (!std::isfinite(shift[i])) throw ValidationError("rescale_model: shift entries must be finite");
    }
    const std::vector<double> a(scale.data(), scale.data() + d);
    const std::vector<double> c(shift.data(), shift.data() + d);

    auto to_source = [a, c](std::span<const double> z, std::span<double> x) {
        for (std::size_t i = 0; i < a.size(); ++i) x[i] = (z[i] - c[i]) / a[i];
    };

    auto drift = [model, a, to_source](std::span<const double> z, std::span<double> out) {
        std::vector<double> x(a.size());
        to_source(z, x);
        model.drift_into(x, out);
        for (std::size_t i = 0; i < a.size(); ++i) out[i] *= a[i];
    };
    auto diffusion = [model, a, m, to_source](std::span<const double> z, std::span<double> out) {
        std::vector<double> x(a.size());
        to_source(z, x);
        model.diffusion_into(x, out);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t k = 0; k < m; ++k) out[i * m + k] *= a[i];
    };
    // chain rule: d/dz_j = (1/a_j) d/dx_j
    auto partial = [model, a, m, to_source](std::span<const double> z, std::size_t j, std::span<double> out) {
        std::vector<double> x(a.size());
        to_source(z, x);
        model.diffusion_partial_into(x, j, out);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t k = 0; k < m; ++k) out[i * m + k] *= a[i] / a[j];
    };
    return SdeModel(d, m, drift, diffusion, partial, model.diagonal_noise(), std::nullopt);
}

} // namespace driftnet
