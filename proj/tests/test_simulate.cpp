#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "driftnet/errors.hpp"
#include "driftnet/seeding.hpp"
#include "driftnet/simulate.hpp"
#include "support.hpp"

using namespace driftnet;
using driftnet::testing::constant_model;
using driftnet::testing::geometric_brownian_motion;

namespace {

StateMatrix column(std::initializer_list<double> values) {
    StateMatrix m(static_cast<Eigen::Index>(values.size()), 1);
    Eigen::Index i = 0;
    for (double v : values) m(i++, 0) = v;
    return m;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_CASE("milstein_step examples") {
    SUBCASE("zero coefficients leave the state unchanged") {
        const SdeModel zero = constant_model({0.0, 0.0}, {0.0, 0.0});
        Vector y(2), dw(2);
        y << 0.3, -1.7;
        dw << 0.5, -0.2;
        CHECK(milstein_step(zero, y, 0.1, dw) == y);
    }
    SUBCASE("constant drift without noise is an Euler step") {
        const SdeModel drift_only = constant_model({2.0, -3.0}, {0.0, 0.0});
        Vector y(2), dw(2);
        y << 1.0, 1.0;
        dw << 0.4, 0.1;
        const Vector next = milstein_step(drift_only, y, 0.1, dw);
        CHECK(next[0] == doctest::Approx(1.2).epsilon(1e-15));
        CHECK(next[1] == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("geometric noise hand expansion") {
        const SdeModel gbm = geometric_brownian_motion(0.0, 1.0);
        const Vector next = milstein_step(gbm, Vector::Ones(1), 0.01, Vector::Constant(1, 0.2));
        CHECK(next[0] == doctest::Approx(1.215).epsilon(1e-14));
        // the fallback omits the correction term
        CHECK(euler_maruyama_step(gbm, Vector::Ones(1), 0.01, Vector::Constant(1, 0.2))[0] ==
              doctest::Approx(1.2).epsilon(1e-14));
    }
    SUBCASE("non-diagonal models are refused") {
        const SdeModel full(
            2, 2, [](std::span<const double>, std::span<double> out) { out[0] = out[1] = 0.0; },
            [](std::span<const double>, std::span<double> out) { out[0] = 1, out[1] = 0.5, out[2] = 0, out[3] = 1; },
            [](std::span<const double>, std::size_t, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
            false);
        CHECK_THROWS_AS(milstein_step(full, Vector::Zero(2), 0.1, Vector::Zero(2)), UnsupportedError);
        CHECK_THROWS_AS(simulate_path(full, 1.0, 0.1, Vector::Zero(2), 1), UnsupportedError);
        SimulationOptions em;
        em.scheme = Scheme::euler_maruyama;
        CHECK(simulate_path(full, 1.0, 0.1, Vector::Zero(2), 1, em).steps() == 10);
    }
}

TEST_CASE("simulate_path") {
    const SdeModel bench = benchmark_model();
    SUBCASE("step count includes the initial row") {
        CHECK(simulate_path(bench, 0.01, 0.001, Vector::Zero(2), 3).states().rows() == 11);
        CHECK(step_count(0.01, 0.001) == 10);
        CHECK(step_count(0.0105, 0.001) == 11);
    }
    SUBCASE("zero-coefficient model stays put") {
        Vector x0(2);
        x0 << 0.25, 0.75;
        const Trajectory t = simulate_path(constant_model({0.0, 0.0}, {0.0, 0.0}), 1.0, 0.01, x0, 9);
        for (Eigen::Index k = 0; k < t.states().rows(); ++k) CHECK(t.states().row(k).transpose() == x0);
    }
    SUBCASE("identical seeds give bit-identical paths") {
        const Trajectory a = simulate_path(bench, 5.0, 1e-3, Vector::Zero(2), 42);
        const Trajectory b = simulate_path(bench, 5.0, 1e-3, Vector::Zero(2), 42);
        const Trajectory c = simulate_path(bench, 5.0, 1e-3, Vector::Zero(2), 43);
        CHECK(a.states() == b.states());
        CHECK(a.states() != c.states());
    }
    SUBCASE("benchmark mostly occupies the unit box") {
        const Trajectory t = simulate_path(bench, 100.0, 1e-3, Vector::Zero(2), 20240601);
        std::size_t inside = 0;
        for (Eigen::Index k = 0; k < t.states().rows(); ++k) {
            if (in_unit_box({t.states().row(k).data(), 2})) ++inside;
        }
        CHECK(static_cast<double>(inside) / static_cast<double>(t.states().rows()) > 0.9);
    }
    SUBCASE("explosive growth aborts with the step index") {
        const SdeModel growth(
            1, 1, [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0]; },
            [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
            [](std::span<const double>, std::size_t, std::span<double> out) { out[0] = 0.0; }, true);
        try {
            simulate_path(growth, 10.0, 0.01, Vector::Ones(1), 1);
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            // x' = x^2 from 1 blows up at t = 1; the guard fires shortly after
            CHECK(e.index() > 50);
            CHECK(e.index() < 200);
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(simulate_path(bench, 0.0, 1e-3, Vector::Zero(2), 1), ValidationError);
        CHECK_THROWS_AS(simulate_path(bench, 1.0, -1e-3, Vector::Zero(2), 1), ValidationError);
        CHECK_THROWS_AS(simulate_path(bench, 1.0, 1e-3, Vector::Zero(3), 1), ValidationError);
        SimulationOptions tight;
        tight.step_budget = 100;
        CHECK_THROWS_AS(simulate_path(bench, 1.0, 1e-3, Vector::Zero(2), 1, tight), ValidationError);
    }
}

TEST_CASE("independent replicate streams are uncorrelated") {
    // pure Brownian motion so the path increments are the noise itself
    const SdeModel bm = constant_model({0.0}, {1.0});
    const std::uint64_t master = 20240601;
    const Trajectory a = simulate_path(bm, 10.0, 1e-3, Vector::Zero(1),
                                       replicate_seed(master, 100, 10.0, 0, StreamRole::train_path));
    const Trajectory b = simulate_path(bm, 10.0, 1e-3, Vector::Zero(1),
                                       replicate_seed(master, 100, 10.0, 1, StreamRole::train_path));
    const Trajectory c = simulate_path(bm, 10.0, 1e-3, Vector::Zero(1),
                                       replicate_seed(master, 100, 10.0, 0, StreamRole::test_path));
    REQUIRE(a.steps() == 10000);
    std::vector<double> da, db, dc;
    for (std::size_t k = 0; k < a.steps(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        da.push_back(a.states()(i + 1, 0) - a.states()(i, 0));
        db.push_back(b.states()(i + 1, 0) - b.states()(i, 0));
        dc.push_back(c.states()(i + 1, 0) - c.states()(i, 0));
    }
    CHECK(std::abs(correlation(da, db)) < 0.05);
    CHECK(std::abs(correlation(da, dc)) < 0.05);
    CHECK(std::abs(correlation(db, dc)) < 0.05);
}

TEST_CASE("subsample") {
    const Trajectory t = simulate_path(benchmark_model(), 0.1, 1e-3, Vector::Zero(2), 5);
    REQUIRE(t.states().rows() == 101);

    SUBCASE("skip one is the identity") {
        const SampledPath p = subsample(t, 1);
        CHECK(p.states() == t.states());
        CHECK(p.interval() == doctest::Approx(1e-3));
    }
    SUBCASE("index arithmetic") {
        const SampledPath p = subsample(t, 20);
        REQUIRE(p.rows() == 6);
        for (Eigen::Index k = 0; k < 6; ++k) CHECK(p.states().row(k) == t.states().row(20 * k));
        CHECK(p.interval() == doctest::Approx(0.02).epsilon(1e-15));
    }
    SUBCASE("trailing remainder is dropped") {
        const SampledPath p = subsample(t, 30);
        CHECK(p.rows() == 4);
        CHECK(p.states().row(3) == t.states().row(90));
    }
    SUBCASE("sampling intervals of the standard grid") {
        const std::pair<std::size_t, double> grid[] = {{200, 0.2}, {100, 0.1}, {50, 0.05}, {20, 0.02}, {10, 0.01}};
        const Trajectory long_path = simulate_path(benchmark_model(), 1.0, 1e-3, Vector::Zero(2), 5);
        for (const auto& [skip, delta] : grid) CHECK(subsample(long_path, skip).interval() == doctest::Approx(delta));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(subsample(t, 0), ValidationError);
        CHECK_THROWS_AS(subsample(t, 101), ValidationError);
    }
}

TEST_CASE("make_regression_set") {
    SUBCASE("single difference quotient") {
        const RegressionSet r = make_regression_set(SampledPath(1e-3, 20, 0, column({0.0, 0.02})));
        REQUIRE(r.size() == 1);
        CHECK(r.inputs()(0, 0) == 0.0);
        CHECK(r.responses()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(r.in_box_count() == 1);
    }
    SUBCASE("linear path gives constant responses") {
        const double delta = 0.05, c = -1.5;
        StateMatrix states(41, 1);
        for (Eigen::Index k = 0; k < 41; ++k) states(k, 0) = static_cast<double>(k) * delta * c;
        const RegressionSet r = make_regression_set(SampledPath(1e-3, 50, 0, states));
        CHECK(r.size() == 40);
        for (Eigen::Index k = 0; k < 40; ++k) CHECK(r.responses()(k, 0) == doctest::Approx(c).epsilon(1e-12));
        CHECK(r.in_box_count() == 1);
    }
    SUBCASE("quotient variance of Brownian motion scales like sigma^2 / delta") {
        const double sigma = 0.7;
        const std::size_t skip = 10;
        const SdeModel bm = constant_model({0.0}, {sigma});
        const Trajectory t = simulate_path(bm, 1e4 * skip * 1e-3, 1e-3, Vector::Zero(1), 77);
        const RegressionSet r = make_regression_set(subsample(t, skip));
        REQUIRE(r.size() == 10000);
        const auto y = r.responses().col(0);
        const double mean = y.mean();
        const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
        const double expected = sigma * sigma / r.interval();
        CHECK(std::abs(var / expected - 1.0) < 0.05);
    }
    SUBCASE("construction commutes with subsampling") {
        const Trajectory t = simulate_path(benchmark_model(), 2.0, 1e-3, Vector::Zero(2), 13);
        const std::size_t skip = 50;
        const RegressionSet r = make_regression_set(subsample(t, skip));
        const double delta = static_cast<double>(skip) * 1e-3;
        for (std::size_t k = 0; k < r.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const auto fine = static_cast<Eigen::Index>(k * skip);
            CHECK(r.inputs().row(i) == t.states().row(fine));
            const Eigen::RowVectorXd direct = (t.states().row(fine + skip) - t.states().row(fine)) / delta;
            CHECK(r.responses().row(i) == direct);
        }
    }
    SUBCASE("in-box mask uses the closed box") {
        StateMatrix states(4, 2);
        states << 0.0, 1.0, 1.0 + 1e-12, 0.5, 0.5, -1e-12, 0.2, 0.2;
        const RegressionSet r = make_regression_set(SampledPath(1e-3, 1, 0, states));
        CHECK(r.in_box_mask() == std::vector<bool>{true, false, false});
        const RegressionSet sub = r.in_box_subset();
        CHECK(sub.size() == 1);
        CHECK(sub.inputs().row(0) == states.row(0));
    }
    SUBCASE("needs two rows") {
        CHECK_THROWS_AS(make_regression_set(SampledPath(1e-3, 1, 0, column({0.5}))), ValidationError);
    }
}

TEST_CASE("trajectory CSV") {
    StateMatrix states(2, 2);
    states << 0.1, 0.2, 0.30000000000000004, 1.0 / 3.0;
    std::ostringstream out;
    write_path_csv(out, SampledPath(1e-3, 100, 0, states));
    CHECK(out.str() == "t,x1,x2\n0,0.10000000000000001,0.20000000000000001\n"
                       "0.10000000000000001,0.30000000000000004,0.33333333333333331\n");
}
