// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "driftnet/eval.hpp"
#include "driftnet/experiment.hpp"
#include "driftnet/network.hpp"
#include "driftnet/simulate.hpp"
#include "driftnet/train.hpp"
#include "support.hpp"

using namespace driftnet;

namespace {

int failures = 0;

void report(const std::string& id, const std::string& title, bool pass, const std::string& detail) {
    std::printf("%s  %-4s %-34s %s\n", pass ? "PASS" : "FAIL", id.c_str(), title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    return sxy / sxx;
}

// --- 1 -----------------------------------------------------------------------

void strong_order() {
    // dX = a X dt + theta X dW on [0, 1], exact X_1 = exp((a - theta^2/2) + theta W_1)
    const double a = 2.0, theta = 1.0;
    const SdeModel gbm = testing::geometric_brownian_motion(a, theta);
    const int finest = 8;
    const std::size_t fine_steps = std::size_t{1} << finest;
    const double fine_dt = std::ldexp(1.0, -finest);
    const int replicates = 2000;

    std::vector<double> log_dt, log_mil, log_em;
    std::vector<double> err_mil(5, 0.0), err_em(5, 0.0);
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> normal;
    std::vector<double> dw(fine_steps);
    for (int r = 0; r < replicates; ++r) {
        double w = 0.0;
        for (auto& v : dw) v = std::sqrt(fine_dt) * normal(rng), w += v;
        const double exact = std::exp(a - 0.5 * theta * theta + theta * w);
        for (int level = 0; level < 5; ++level) {
            const std::size_t block = std::size_t{1} << (4 - level);  // dt = 2^-(4 + level)
            const double dt = fine_dt * static_cast<double>(block);
            Vector ym = Vector::Ones(1), ye = Vector::Ones(1);
            for (std::size_t k = 0; k < fine_steps; k += block) {
                double inc = 0.0;
                for (std::size_t j = 0; j < block; ++j) inc += dw[k + j];
                const Vector d = Vector::Constant(1, inc);
                ym = milstein_step(gbm, ym, dt, d);
                ye = euler_maruyama_step(gbm, ye, dt, d);
            }
            err_mil[static_cast<std::size_t>(level)] += std::abs(ym[0] - exact) / replicates;
            err_em[static_cast<std::size_t>(level)] += std::abs(ye[0] - exact) / replicates;
        }
    }
    for (int level = 0; level < 5; ++level) {
        log_dt.push_back(std::log(std::ldexp(1.0, -(4 + level))));
        log_mil.push_back(std::log(err_mil[static_cast<std::size_t>(level)]));
        log_em.push_back(std::log(err_em[static_cast<std::size_t>(level)]));
    }
    const double sm = slope(log_dt, log_mil);
    const double se = slope(log_dt, log_em);
    report("1", "Milstein strong order", std::abs(sm - 1.0) <= 0.2,
           fmt("slope %.3f (target 1.0 +- 0.2), errors %.2e..%.2e", sm, err_mil.front(), err_mil.back()));
    report("1b", "Euler-Maruyama strong order", std::abs(se - 0.5) <= 0.2, fmt("slope %.3f (target 0.5 +- 0.2)", se));
}

// --- 2 -----------------------------------------------------------------------

void irreducible_law() {
    const auto e = irreducible_error(benchmark_model(), {200, 100, 50, 20, 10}, 100.0, 1e-3, 500, 20240601,
                                     Vector::Zero(2));
    const double r1 = e[1].mean / e[0].mean;
    const double r2 = e[2].mean / e[1].mean;
    const double r3 = e[4].mean / e[3].mean;
    const bool ratios = std::abs(r1 / 2.0 - 1.0) <= 0.15 && std::abs(r2 / 2.0 - 1.0) <= 0.15;
    const double target = 48.297e-3;
    const bool anchor = std::abs(e[0].mean / target - 1.0) <= 0.25;
    std::string values;
    for (const auto& x : e) values += fmt(" %g:%.3f", static_cast<double>(x.skip), 1e3 * x.mean);
    report("2", "irreducible error 1/delta law", ratios && anchor,
           fmt("ratios 100/200 %.3f, 50/100 %.3f; skip200 %.3fe-3 vs 48.297e-3 (+-25%%); x1e3%s", r1, r2,
               1e3 * e[0].mean, values.c_str()));
    report("2b", "irreducible ratio 10/20", std::abs(r3 / 2.0 - 1.0) <= 0.15, fmt("ratio %.3f (2 +- 15%%)", r3));
}

// --- 3, 4, 5, 8 ----------------------------------------------------------------

struct Cells {
    ExperimentResult by_t;     // skip 100, every T
    ExperimentResult wide;     // skip 200 and 10 at T = 10, 100
};

const SummaryRow& cell(const ExperimentResult& r, std::size_t skip, double horizon) {
    for (const auto& row : r.summary)
        if (row.skip == skip && row.horizon == horizon) return row;
    throw std::runtime_error("missing summary cell");
}

ExperimentResult run_grid(std::vector<std::size_t> skips, std::vector<double> horizons) {
    ExperimentConfig c;
    c.skip_list = std::move(skips);
    c.horizon_list = std::move(horizons);
    c.n_mc = 10;
    RunOptions o;
    o.keep_networks = true;
    return run_experiment(c, o);
}

void horizon_trend(const ExperimentResult& r) {
    const std::vector<double> horizons{10, 25, 50, 100};
    std::size_t inversions = 0;
    bool within = true;
    std::string values;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        const SummaryRow& now = cell(r, 100, horizons[i]);
        values += fmt(" T=%g:%.3f(%.3f)", horizons[i], 1e3 * now.test.mean, 1e3 * now.test.standard_error);
        if (i == 0) continue;
        const SummaryRow& before = cell(r, 100, horizons[i - 1]);
        if (now.test.mean >= before.test.mean) {
            ++inversions;
            if (now.test.mean - before.test.mean > std::max(now.test.standard_error, before.test.standard_error)) {
                within = false;
            }
        }
    }
    const bool pass = inversions == 0 || (inversions == 1 && within);
    report("3", "test MSE decreases in T (skip 100)", pass,
           fmt("%zu inversion(s); test x1e3%s", inversions, values.c_str()));
}

void anchors(const ExperimentResult& by_t, const ExperimentResult& wide) {
    const double a200 = cell(wide, 200, 100).test.mean;
    const double a100 = cell(by_t, 100, 100).test.mean;
    const double q200 = a200 / 2.269e-3, q100 = a100 / 2.013e-3;
    const bool pass = q200 >= 0.5 && q200 <= 2.0 && q100 >= 0.5 && q100 <= 2.0;
    report("4", "test MSE anchors at T = 100", pass,
           fmt("skip200 %.3fe-3 (x%.2f of 2.269e-3), skip100 %.3fe-3 (x%.2f of 2.013e-3)", 1e3 * a200, q200,
               1e3 * a100, q100));
}

void overfitting(const ExperimentResult& wide) {
    auto gap = [&](std::size_t skip, double horizon) {
        const SummaryRow& row = cell(wide, skip, horizon);
        return std::pair{row.test.mean - row.train.mean, row.train.mean < row.test.mean};
    };
    // the cited pairing (skip 10 at T = 10 against skip 200 at T = 100) and the same-T comparisons
    const auto [g10_10, ok10_10] = gap(10, 10);
    const auto [g10_100, ok10_100] = gap(10, 100);
    const auto [g200_10, ok200_10] = gap(200, 10);
    const auto [g200_100, ok200_100] = gap(200, 100);
    (void)ok200_10;
    (void)ok200_100;
    const bool cited = ok10_10 && g10_10 > g200_100;
    const bool same_t = ok10_10 && ok10_100 && g10_10 > g200_10 && g10_100 > g200_100;
    report("5", "overfitting gap at skip 10", cited && same_t,
           fmt("gap x1e3: skip10/T10 %.3f vs skip200/T100 %.3f; same T: T10 %.3f vs %.3f, T100 %.3f vs %.3f",
               1e3 * g10_10, 1e3 * g200_100, 1e3 * g10_10, 1e3 * g200_10, 1e3 * g10_100, 1e3 * g200_100));
}

void certificates(const std::vector<const ExperimentResult*>& runs) {
    std::size_t nets = 0, violations = 0;
    double worst_ratio = 0.0;
    Matrix grid(2, 201 * 201);
    for (int i = 0; i <= 200; ++i)
        for (int j = 0; j <= 200; ++j) grid.col(i * 201 + j) << i / 200.0, j / 200.0;
    for (const auto* run : runs) {
        for (const auto& net : run->networks) {
            const double f = sup_bound(net);
            const double m = net.forward_batch(grid).cwiseAbs().maxCoeff();
            if (m > f) ++violations;
            worst_ratio = std::max(worst_ratio, m / f);
            ++nets;
        }
    }
    report("8", "sup-norm certificate is sound", nets > 0 && violations == 0,
           fmt("%zu trained nets, %zu violations, max grid/F ratio %.3f", nets, violations, worst_ratio));
}

// --- 6 -----------------------------------------------------------------------

void feasibility() {
    ExperimentConfig c;
    c.train.check_feasibility = true;
    const ReplicateFit fit = fit_replicate(c, benchmark_model(c.model), 20, 100.0, 0);
    const double excess = max_norm_excess(fit.network, default_projection_radii(fit.network));
    const bool pass = fit.report.feasibility_violations == 0 && fit.report.max_norm_excess <= 1e-12 && excess <= 1e-12;
    report("6", "row-norm feasibility every update", pass,
           fmt("%zu updates, %zu violations, max excess %.2e, projection events %zu", fit.report.updates,
               fit.report.feasibility_violations, fit.report.max_norm_excess, fit.report.projection_event_count));
}

// --- 7 -----------------------------------------------------------------------

void conversion() {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> depth_dist(1, 3), width_dist(4, 16);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    const double bounds[] = {2.0, 4.0, 8.0};
    std::size_t bad_value = 0, bad_limits = 0;
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
        std::vector<std::size_t> widths{2};
        const int depth = depth_dist(rng);
        for (int l = 0; l < depth; ++l) widths.push_back(static_cast<std::size_t>(width_dist(rng)));
        widths.push_back(1);
        const double b = bounds[n % 3];
        const ReluNetwork g = testing::random_network(widths, 1000 + static_cast<std::uint64_t>(n), b);
        const Conversion c = convert_to_unit_weights(g);
        const ConversionLimits lim = conversion_limits(g, c.network.depth());
        const auto log_limit = static_cast<std::size_t>(std::ceil((std::log(max_weight(g)) + 5.0) * depth));
        if (max_weight(c.network) > 1.0 || c.network.depth() > lim.depth || lim.depth != log_limit ||
            c.network.max_width() > lim.width || sparsity(c.network) > lim.sparsity) {
            ++bad_limits;
        }
        for (int k = 0; k < 1000; ++k) {
            Vector x(2);
            x << unif(rng), unif(rng);
            const double gx = g.forward(x)[0];
            const double err = std::abs(c.network.forward(x)[0] - gx) / (1.0 + std::abs(gx));
            worst = std::max(worst, err);
            if (err > 1e-9) ++bad_value;
        }
    }
    report("7", "unit-weight conversion", bad_value == 0 && bad_limits == 0,
           fmt("100 nets, B in {2,4,8}: %zu limit failures, %zu pointwise failures, worst rel err %.2e", bad_limits,
               bad_value, worst));
}

// --- 9 -----------------------------------------------------------------------

double kink_margin(const ReluNetwork& net, const Matrix& inputs) {
    double margin = std::numeric_limits<double>::infinity();
    Matrix a = inputs;
    for (std::size_t l = 0; l < net.depth(); ++l) {
        Matrix z = net.weight(l) * a;
        z.colwise() -= net.shift(l + 1);
        margin = std::min(margin, z.cwiseAbs().minCoeff());
        a = z.cwiseMax(0.0);
    }
    return margin;
}

void gradients() {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> width_dist(3, 8), out_dist(1, 2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double h = 1e-6;
    std::size_t compared = 0, excluded = 0, mismatched = 0;
    double worst = 0.0;
    for (int n = 0; n < 20; ++n) {
        const std::vector<std::size_t> widths{2, static_cast<std::size_t>(width_dist(rng)),
                                              static_cast<std::size_t>(width_dist(rng)),
                                              static_cast<std::size_t>(out_dist(rng))};
        const ReluNetwork net = testing::random_network(widths, 500 + static_cast<std::uint64_t>(n));
        Matrix x(2, 6), og(static_cast<Eigen::Index>(widths.back()), 6);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unif(rng);
        for (Eigen::Index i = 0; i < og.size(); ++i) og.data()[i] = unif(rng) - 0.5;
        const NetworkGradients g = backward(net, x, og);
        auto objective = [&](const ReluNetwork& m) { return (m.forward_batch(x).array() * og.array()).sum(); };
        auto compare = [&](double analytic, const ReluNetwork& plus, const ReluNetwork& minus) {
            if (kink_margin(plus, x) < 1e-9 || kink_margin(minus, x) < 1e-9 ||
                (kink_margin(plus, x) > 0) != (kink_margin(minus, x) > 0)) {
                ++excluded;
                return;
            }
            const double fd = (objective(plus) - objective(minus)) / (2 * h);
            const double rel = std::abs(fd - analytic) / std::max(1.0, std::abs(analytic));
            worst = std::max(worst, rel);
            if (rel > 1e-4) ++mismatched;
            ++compared;
        };
        for (std::size_t l = 0; l < net.weights().size(); ++l) {
            for (Eigen::Index e = 0; e < net.weight(l).size(); ++e) {
                ReluNetwork plus = net, minus = net;
                plus.weight(l).data()[e] += h;
                minus.weight(l).data()[e] -= h;
                compare(g.weights[l].data()[e], plus, minus);
            }
        }
        for (std::size_t l = 1; l <= net.depth(); ++l) {
            for (Eigen::Index e = 0; e < net.shift(l).size(); ++e) {
                ReluNetwork plus = net, minus = net;
                plus.shift(l)[e] += h;
                minus.shift(l)[e] -= h;
                compare(g.shifts[l - 1][e], plus, minus);
            }
        }
    }
    report("9", "backward matches finite differences", mismatched == 0 && compared > 0,
           fmt("20 nets, %zu coordinates compared, %zu excluded near kinks, worst rel %.2e", compared, excluded, worst));
}

// --- 10 ----------------------------------------------------------------------

void realizable() {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    StateMatrix x(4096, 2), y(4096, 1);
    for (Eigen::Index k = 0; k < 4096; ++k) {
        x(k, 0) = unif(rng);
        x(k, 1) = unif(rng);
        y(k, 0) = std::max(0.0, x(k, 0) - 0.5);
    }
    TrainConfig c;
    c.seed = 10;
    const TrainResult r = train(init_network({2, 32, 32, 1}, 10), RegressionSet(x, y, 0.1), c);
    report("10", "realizable target training", r.report.final_loss <= 1e-3 && r.report.loss_by_epoch.size() == 200,
           fmt("final loss %.3e after %zu epochs (target <= 1e-3)", r.report.final_loss, r.report.loss_by_epoch.size()));
}

// --- 11 ----------------------------------------------------------------------

void determinism() {
    ExperimentConfig c;
    c.skip_list = {200};
    c.horizon_list = {10.0};
    c.n_mc = 1;
    c.master_seed = 7;
    std::ostringstream first, second;
    write_metrics_csv(first, run_experiment(c).records);
    write_metrics_csv(second, run_experiment(c).records);
    const std::string a = first.str();
    const bool pass = a == second.str() && std::count(a.begin(), a.end(), '\n') == 2;
    report("11", "byte-identical metrics CSV", pass, fmt("%zu bytes per run", a.size()));
}

} // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    auto guarded = [](const char* id, const std::function<void()>& f) {
        try {
            f();
        } catch (const std::exception& e) {
            report(id, "raised an exception", false, e.what());
        }
    };
    guarded("1", strong_order);
    guarded("2", irreducible_law);
    guarded("3-5", [] {
        const ExperimentResult by_t = run_grid({100}, {10, 25, 50, 100});
        const ExperimentResult wide = run_grid({200, 10}, {10, 100});
        horizon_trend(by_t);
        anchors(by_t, wide);
        overfitting(wide);
        certificates({&by_t, &wide});
    });
    guarded("6", feasibility);
    guarded("7", conversion);
    guarded("9", gradients);
    guarded("10", realizable);
    guarded("11", determinism);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s: %d failing line(s), %.1f s\n", failures == 0 ? "ALL PASS" : "FAILURES", failures, seconds);
    return failures == 0 ? 0 : 1;
}
