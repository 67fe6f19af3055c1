#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "billiard/estimators.hpp"

using namespace billiard;

namespace {

Table sym_table() { return build_table({4.0, 1.0, 0.3, Model::Symmetric}); }

// Area of Q by Green's theorem along the boundary, for the Liouville oracle.
double boundary_area(const Table& t) {
    double area = 0.0;
    const int K = 4096;
    for (int pid = 0; pid < static_cast<int>(t.pieces.size()); ++pid) {
        double len = t.piece(pid).length;
        double h = len / K;
        auto f = [&](double r) {
            PointFrame fr = boundary_point(t, pid, r);
            return fr.pos.x * fr.tangent.y;
        };
        double acc = f(0.0) + f(len);
        for (int i = 1; i < K; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
        area += acc * h / 3.0;
    }
    return area;
}

// Exact Pareto tail sample: S(x) = x^{-4} on x >= 1.
SurvivalCurve pareto_curve(std::uint64_t N, std::uint64_t seed) {
    RngStream rng(seed, 0);
    std::vector<double> xs(N);
    for (auto& x : xs) x = std::pow(1.0 - rng.uniform(), -0.25);
    SurvivalCurve c;
    c.N = N;
    double th = 1.0;
    while (true) {
        long long cnt = 0;
        for (double x : xs) cnt += x > th;
        if (cnt == 0) break;
        c.thresholds.push_back(th);
        c.counts.push_back(cnt);
        c.survival.push_back(static_cast<double>(cnt) / static_cast<double>(N));
        th *= 1.25;
    }
    return c;
}

}  // namespace

TEST_CASE("mu sampler has the cosine angle law") {
    Table t = sym_table();
    const int N = 1000000, bins = 20;
    RngStream rng(7, 0);
    std::vector<long long> hist(bins, 0);
    double mean_sin = 0.0;
    for (int i = 0; i < N; ++i) {
        MCoord m = sample_mu(t, rng);
        int b = static_cast<int>((m.phi + kPi / 2.0) / kPi * bins);
        ++hist[static_cast<size_t>(std::clamp(b, 0, bins - 1))];
        mean_sin += std::sin(m.phi);
    }
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b) {
        double lo = -kPi / 2.0 + kPi * b / bins, hi = lo + kPi / bins;
        double expect = N * 0.5 * (std::sin(hi) - std::sin(lo));
        double d = hist[static_cast<size_t>(b)] - expect;
        chi2 += d * d / expect;
    }
    CHECK(chi2 < 36.19);  // chi-square 1% critical value, 19 dof
    CHECK(std::fabs(mean_sin / N) < 3.0 * 0.5 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("mu sampler r-marginal is uniform") {
    Table t = sym_table();
    const int N = 200000;
    RngStream rng(11, 0);
    std::vector<double> grs(N);
    for (auto& g : grs) {
        MCoord m = sample_mu(t, rng);
        g = t.global_r(m.piece, m.r) / t.total_length;
    }
    double ks = ks_statistic(grs, [](double u) { return u; });
    CHECK(ks < 0.005);
}

TEST_CASE("liouville sampler matches the Green-theorem area") {
    Table t = sym_table();
    double area = boundary_area(t);
    CHECK(area > 0.0);
    double xc = t.spec.half_width;
    double bbox = 2.0 * xc * 2.0 * t.corner_y;
    const int M = 1000000;
    double rate[2];
    for (int s = 0; s < 2; ++s) {
        RngStream rng(100 + s, 0);
        int acc = 0;
        for (int i = 0; i < M; ++i) {
            Vec2 p{rng.uniform(-xc, xc), rng.uniform(-t.corner_y, t.corner_y)};
            acc += t.contains(p);
        }
        rate[s] = static_cast<double>(acc) / M;
    }
    double p = area / bbox;
    double sigma = std::sqrt(p * (1.0 - p) / M);
    CHECK(std::fabs(rate[0] - p) < 4.0 * sigma);
    CHECK(std::fabs(rate[1] - p) < 4.0 * sigma);
    CHECK(std::fabs(rate[0] - rate[1]) < 6.0 * sigma);

    RngStream rng(3, 0);
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < 20000; ++i) {
        FlowState s = sample_liouville(t, rng);
        CHECK(t.contains(s.pos));
        sx += std::cos(s.theta);
        sy += std::sin(s.theta);
    }
    CHECK(std::fabs(sx / 20000) < 3.0 / std::sqrt(2.0 * 20000.0));
    CHECK(std::fabs(sy / 20000) < 3.0 / std::sqrt(2.0 * 20000.0));
}

TEST_CASE("constant observables are annihilated exactly") {
    Table t = sym_table();
    auto c = make_constant(2.5);
    CorrelationSeries s =
        estimate_map_correlation(t, c, c, {0, 1, 2, 5}, 2000, 9);
    for (double v : s.values) CHECK(v == 0.0);
    auto cf = make_constant(2.5, true);
    CorrelationSeries sf = estimate_flow_correlation(t, cf, cf, {0.0, 1.0, 2.0}, 2000, 9);
    for (double v : sf.values) CHECK(v == 0.0);
}

TEST_CASE("lag-0 correlation is the sample variance") {
    Table t = sym_table();
    ObservableSpec f = make_map_bump(t.power_length * 0.5, 0.0, 0.4, 0.8);
    const std::uint64_t N = 50000, seed = 21;
    CorrelationSeries s = estimate_map_correlation(t, f, f, {0}, N, seed);
    // independent recomputation of the same draws
    double sf = 0.0, sff = 0.0;
    for (std::uint64_t i = 0; i < N; ++i) {
        RngStream rng(seed, i);
        double v = eval_map(t, f, sample_mu(t, rng));
        sf += v;
        sff += v * v;
    }
    double nd = static_cast<double>(N);
    double var = sff / nd - (sf / nd) * (sf / nd);
    CHECK(std::fabs(s.values[0] - var) < 1e-12);
    CHECK(var > 0.0);
}

TEST_CASE("domain mismatches are rejected") {
    Table t = sym_table();
    auto fm = make_map_bump(0.0, 0.0, 0.1, 0.8);
    auto ff = make_flow_bump(0.0, 0.0, 0.1, 0.8);
    CHECK_THROWS_AS(estimate_map_correlation(t, ff, ff, {0}, 2000, 1), ObservableUndefined);
    CHECK_THROWS_AS(estimate_flow_correlation(t, fm, fm, {0.0}, 2000, 1),
                    ObservableUndefined);
    CHECK_THROWS_AS(estimate_map_correlation(t, fm, fm, {3, 1}, 2000, 1), OutOfRange);
    CHECK_THROWS_AS(estimate_map_correlation(t, fm, fm, {0}, 10, 1), OutOfRange);
}

TEST_CASE("correlation estimates are worker-independent") {
    Table t = sym_table();
    ObservableSpec f = make_map_bump(t.power_length * 0.5, 0.0, 0.4, 0.8);
    CorrelationSeries a = estimate_map_correlation(t, f, f, {0, 1, 3}, 20000, 5, 1);
    CorrelationSeries b = estimate_map_correlation(t, f, f, {0, 1, 3}, 20000, 5, 4);
    for (size_t k = 0; k < a.values.size(); ++k) {
        CHECK(a.values[k] == b.values[k]);
        CHECK(a.std_errors[k] == b.std_errors[k]);
    }
}

TEST_CASE("power-law fit is exact on exact input") {
    // survival 2^{-4k} at thresholds 2^k: exactly log-linear with slope -4
    SurvivalCurve c;
    c.N = 1ULL << 40;
    for (int k = 0; k <= 8; ++k) {
        c.thresholds.push_back(std::pow(2.0, k));
        c.counts.push_back(static_cast<long long>(c.N >> (4 * k)));
        c.survival.push_back(std::pow(2.0, -4.0 * k));
    }
    PowerLawFit f = fit_power_law(c, 1.0, 300.0, 77);
    CHECK(f.slope == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(f.n_points == 9);
    CHECK(f.ci_low <= -4.0);
    CHECK(f.ci_high >= -4.0);
    // bootstrap spread is set by the smallest usable bin (256 counts here)
    CHECK(f.ci_high - f.ci_low < 0.1);
}

TEST_CASE("power-law fit recovers a sampled Pareto slope") {
    SurvivalCurve c = pareto_curve(1000000, 13);
    PowerLawFit f = fit_power_law(c, 1.0, 1e9, 99);
    CHECK(f.slope == doctest::Approx(-4.0).epsilon(0.05));
    CHECK(f.ci_low < f.slope);
    CHECK(f.ci_high > f.slope);
}

TEST_CASE("bootstrap confidence intervals cover the truth") {
    int covered = 0;
    for (int rep = 0; rep < 100; ++rep) {
        SurvivalCurve c = pareto_curve(20000, 1000 + static_cast<std::uint64_t>(rep));
        try {
            PowerLawFit f = fit_power_law(c, 1.0, 1e9, 5 + static_cast<std::uint64_t>(rep));
            if (f.ci_low <= -4.0 && -4.0 <= f.ci_high) ++covered;
        } catch (const InsufficientData&) {
        }
    }
    CHECK(covered >= 88);  // nominal 95 of 100, allowing 3-sigma binomial slack
}

TEST_CASE("degenerate fits are rejected") {
    SurvivalCurve c;
    c.N = 1000;
    for (int k = 0; k < 8; ++k) {
        c.thresholds.push_back(k + 1.0);
        c.counts.push_back(600);  // constant: log-log degenerate but fittable
        c.survival.push_back(0.6);
    }
    PowerLawFit f = fit_power_law(c, 1.0, 100.0, 3);
    CHECK(std::fabs(f.slope) < 1e-12);  // flagged by a near-zero slope
    SurvivalCurve tiny;
    tiny.N = 100;
    tiny.thresholds = {1.0, 2.0};
    tiny.counts = {60, 55};
    tiny.survival = {0.6, 0.55};
    CHECK_THROWS_AS(fit_power_law(tiny, 1.0, 100.0, 3), InsufficientData);
}

TEST_CASE("return tail estimator bookkeeping") {
    Table t = sym_table();
    const std::uint64_t N = 200000;
    auto [rc, tc] = estimate_return_tail(t, 0.3, N, 4242, 0);
    REQUIRE(!rc.thresholds.empty());
    REQUIRE(!tc.thresholds.empty());
    for (size_t i = 0; i + 1 < rc.counts.size(); ++i) CHECK(rc.counts[i] >= rc.counts[i + 1]);
    for (size_t i = 0; i + 1 < tc.counts.size(); ++i) CHECK(tc.counts[i] >= tc.counts[i + 1]);
    CHECK(rc.survival[0] <= 1.0);
    for (size_t i = 0; i < rc.counts.size(); ++i)
        CHECK(rc.survival[i] * static_cast<double>(N) ==
              doctest::Approx(static_cast<double>(rc.counts[i])).epsilon(1e-12));
    // worker independence: exact count equality
    auto [rc2, tc2] = estimate_return_tail(t, 0.3, N, 4242, 3);
    CHECK(rc2.counts == rc.counts);
    CHECK(tc2.counts == tc.counts);
    CHECK(rc2.fitted_slope == rc.fitted_slope);
}

TEST_CASE("undersampled tails are flagged") {
    Table t = sym_table();
    auto [rc, tc] = estimate_return_tail(t, 0.3, 2000, 7, 0);
    CHECK(rc.insufficient_tail);
}

TEST_CASE("holder probe basics") {
    Table t = sym_table();
    ProbeReport r = holder_probe(t, PairSide::Stable, {3, 5}, 0.8, 3, 2024);
    CHECK(r.ratios.size() == 6);
    for (double x : r.ratios) {
        CHECK(std::isfinite(x));
        CHECK(x > 0.0);
    }
    for (double d : r.distances) CHECK(d >= 1e-9);
    CHECK(r.max_ratio == *std::max_element(r.ratios.begin(), r.ratios.end()));
    CHECK(r.side == "stable");
    CHECK_THROWS_AS(holder_probe(t, PairSide::Stable, {3}, 1.5, 2, 1), OutOfRange);
}

TEST_CASE("asymptotics report hits the scaling exponents") {
    Table t = sym_table();
    AsymptoticsReport r = asymptotics_report(t, 100, 12, 31, 800);
    CHECK(r.first_slope_target == doctest::Approx(-1.0));
    CHECK(r.w_slope_target == doctest::Approx(-2.0));
    CHECK(r.first_slope_mean == doctest::Approx(-1.0).epsilon(0.15));
    CHECK(r.w_fit.slope == doctest::Approx(-2.0).epsilon(0.12));
    CHECK(r.power_sum_max < 1.0);
    CHECK(r.angle_floor >= r.angle_floor_bound - 1e-6);
    CHECK(r.angle_floor_bound ==
          doctest::Approx(std::asin(angle_floor_cos_bound(4.0, 0.3))).epsilon(1e-12));
    CHECK_THROWS_AS(asymptotics_report(t, 50, 5, 1), OutOfRange);
}

TEST_CASE("angle floor bound value") {
    // eps=0.3, beta=4: cos phi >= 0.3^4 / sqrt(0.3^2 + 0.3^8)
    double b = angle_floor_cos_bound(4.0, 0.3);
    CHECK(b == doctest::Approx(0.0081 / std::sqrt(0.09 + 6.561e-5)).epsilon(1e-15));
    CHECK(b == doctest::Approx(0.026988).epsilon(1e-4));
}
