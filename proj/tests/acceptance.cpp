// Acceptance suite: one line per criterion, exit 0 only if every one passes.
// Budget: a few minutes on a 4-core desktop (the tail fit and the Holder
// probes dominate).

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "billiard/estimators.hpp"
#include "billiard/io.hpp"

using namespace billiard;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %2d %-24s %s  %s\n", idx, name, pass ? "pass" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// 1: exact free-flight formula vs the collision solver on window chords
void c1_flight_formula(const Table& t) {
    RngStream rng(11, 0);
    double worst = 0.0;
    int checked = 0;
    while (checked < 10000) {
        double x = rng.uniform(-0.9, 0.9) * t.spec.epsilon;
        double psi = rng.uniform(-0.25, 0.25);
        try {
            CollisionResult c = next_collision(t, {{x, -t.g(x)}, kPi / 2.0 - psi});
            if (t.piece(c.m.piece).kind != PieceKind::PowerTop) continue;
            double tf = free_flight_formula(t.spec.beta, x, psi, c.m.pos.x);
            worst = std::max(worst, std::fabs(c.tau - tf) / tf);
            ++checked;
        } catch (const BilliardError&) {
        }
    }
    report(1, "flight-formula", worst <= 1e-9, fmt("max_rel_err=%.3g", worst));
}

// 2: T preserves mu -- KS of both pushforward marginals at N = 1e6
void c2_invariance(const Table& t) {
    const std::uint64_t N = 1000000;
    std::vector<double> phis(N), grs(N);
    parallel_for(N, 0, [&](std::uint64_t i) {
        RngStream rng(22, i);
        for (;;) {
            try {
                MCoord m = billiard_map(t, sample_mu(t, rng)).first;
                phis[i] = m.phi;
                grs[i] = t.global_r(m.piece, m.r) / t.total_length;
                return;
            } catch (const BilliardError&) {
            }
        }
    });
    double ks_phi = ks_statistic(phis, [](double p) { return 0.5 * (1.0 + std::sin(p)); });
    double ks_r = ks_statistic(grs, [](double u) { return u; });
    report(2, "measure-invariance", ks_phi < 0.002 && ks_r < 0.002,
           fmt("ks_phi=%.5f ks_r=%.5f", ks_phi, ks_r));
}

// 3: time-reversal involution rho T rho T = id
void c3_reversibility(const Table& t) {
    RngStream rng(33, 0);
    double worst = 0.0;
    int checked = 0;
    while (checked < 10000) {
        MCoord m = sample_mu(t, rng);
        try {
            MCoord b = time_reverse(billiard_map(t, time_reverse(billiard_map(t, m).first)).first);
            worst = std::max({worst, std::fabs(b.phi - m.phi),
                              t.boundary_distance(t.global_r(b.piece, b.r),
                                                  t.global_r(m.piece, m.r))});
            ++checked;
        } catch (const BilliardError&) {
        }
    }
    report(3, "reversibility", worst <= 1e-9, fmt("max_err=%.3g", worst));
}

// 4: survival tail of the collision count R (and the roof Theta) at beta = 4.
// The window eps = 0.45 reaches the asymptotic regime within the observable
// range; the target slope is -4 and the acceptance band [-4.5, -3.5].
void c4_return_tail(const Table& t) {
    auto [rc, tc] = estimate_return_tail(t, 0.45, 40000000, 44, 0);
    bool slope_ok = rc.fitted_slope >= -4.5 && rc.fitted_slope <= -3.5 &&
                    !rc.insufficient_tail;
    bool theta_ok = !tc.insufficient_tail &&
                    tc.ci_low <= rc.ci_high && rc.ci_low <= tc.ci_high;
    report(4, "return-tail", slope_ok && theta_ok,
           fmt("R_slope=%.3f ci=[%.3f,%.3f]  Theta_slope=%.3f ci=[%.3f,%.3f]",
               rc.fitted_slope, rc.ci_low, rc.ci_high, tc.fitted_slope, tc.ci_low,
               tc.ci_high));
}

// 5+6+7 share one deep-excursion survey up to n = 1e3
void c567_asymptotics(const Table& t) {
    AsymptoticsReport r = asymptotics_report(t, 100, 24, 55, 1000);

    bool c5 = std::fabs(r.first_slope_mean - r.first_slope_target) <= 0.1 &&
              std::fabs(r.w_fit.slope - r.w_slope_target) <= 0.15;
    report(5, "cell-asymptotics", c5,
           fmt("first_slope=%.3f (target %.0f)  w_slope=%.3f (target %.0f)",
               r.first_slope_mean, r.first_slope_target, r.w_fit.slope,
               r.w_slope_target));

    bool c6 = r.power_max_trend.p_one_sided >= 0.05 && std::isfinite(r.power_sum_max);
    report(6, "power-sum-bounded", c6,
           fmt("max=%.4f kendall_p=%.3f", r.power_sum_max,
               r.power_max_trend.p_one_sided));

    // the deep cells stress the bound hardest; add a random shallow ensemble
    double floor_angle = r.angle_floor;
    {
        RngStream rng(56, 0);
        int kept = 0;
        while (kept < 2000) {
            try {
                Excursion e = next_excursion(t, sample_mu_sigma(t, rng, t.spec.epsilon));
                if (std::abs(e.n) < 2) continue;
                for (const Bounce& b : e.bounces)
                    floor_angle = std::min(floor_angle, kPi / 2.0 - std::fabs(b.phi));
                ++kept;
            } catch (const BilliardError&) {
            }
        }
    }
    bool c7 = floor_angle >= r.angle_floor_bound - 1e-6;
    report(7, "angle-floor", c7,
           fmt("min=%.6f bound=%.6f", floor_angle, r.angle_floor_bound));
}

// 8: gamma-Holder control of the roof along (un)stable pairs, gamma = 1 - 1/b
void c8_holder(const Table& t) {
    std::vector<int> cells{5, 10, 20, 40};
    bool ok = true;
    std::string detail;
    for (PairSide side : {PairSide::Stable, PairSide::Unstable}) {
        ProbeReport r = holder_probe(t, side, cells, 0.8, 8, 88);
        bool side_ok = r.trend_slope - 2.0 * r.trend_slope_stderr <= 0.0;
        ok = ok && side_ok;
        detail += fmt("%s: slope=%.2f+-%.2f  ", r.side.c_str(), r.trend_slope,
                      r.trend_slope_stderr);
    }
    // contrast: with gamma = 1 the stable ratios may grow (informational)
    try {
        ProbeReport g1 = holder_probe(t, PairSide::Stable, cells, 1.0, 8, 89);
        detail += fmt("[gamma=1 stable slope=%.2f]", g1.trend_slope);
    } catch (const BilliardError&) {
        detail += "[gamma=1 contrast unavailable]";
    }
    report(8, "holder-probe", ok, detail);
}

// 9: correlation sanity -- exact annihilation of constants, the lag-0 variance
// identity, and monotone decay of the bump autocorrelation to the noise floor
void c9_correlations(const Table& t) {
    double center_r = t.power_arclen(0.0);
    // wide enough that the period-2 in-window bouncing does not leave an
    // oscillating even/odd-lag component on top of the decay
    ObservableSpec f = make_map_bump(center_r, 0.0, 2.0, 0.8);
    ObservableSpec one = make_constant(1.0, false);

    CorrelationSeries cz = estimate_map_correlation(t, one, f, {0, 3}, 10000, 91, 0);
    bool const_ok = cz.values[0] == 0.0 && cz.values[1] == 0.0;

    // lag-0 value must equal Var(f) computed independently from the same draws
    CorrelationSeries c0 = estimate_map_correlation(t, f, f, {0}, 100000, 92, 0);
    double var = 0.0;
    {
        std::vector<double> vals(100000);
        parallel_for(vals.size(), 0, [&](std::uint64_t i) {
            RngStream rng(92, i);
            for (;;) {
                try {
                    vals[i] = eval_map(t, f, sample_mu(t, rng));
                    return;
                } catch (const BilliardError&) {
                }
            }
        });
        double m = mean_of(vals);
        for (double v : vals) var += (v - m) * (v - m);
        var /= static_cast<double>(vals.size());
    }
    bool lag0_ok = std::fabs(c0.values[0] - var) <= 1e-12;

    std::vector<long long> lags{0, 1, 2, 3, 5, 8, 13, 21, 34};
    CorrelationSeries s = estimate_map_correlation(t, f, f, lags, 1000000, 93, 0);
    // from lag 5: each step down to the noise floor must not increase beyond
    // 2 combined standard errors, and the floor must actually be reached
    bool decay_ok = true, reached_floor = false;
    std::string path;
    for (std::size_t k = 0; k < s.lags.size(); ++k) {
        if (s.lags[k] < 5.0) continue;
        path += fmt("%.3g ", s.values[k]);
        if (s.values[k] <= 2.0 * s.std_errors[k]) {
            reached_floor = true;
            break;
        }
        if (k + 1 < s.lags.size()) {
            double se = 2.0 * std::hypot(s.std_errors[k], s.std_errors[k + 1]);
            if (s.values[k + 1] > s.values[k] + se) decay_ok = false;
        }
    }
    report(9, "correlation-decay",
           const_ok && lag0_ok && decay_ok && reached_floor,
           fmt("const=%d lag0_err=%.1e decay=%d floor=%d [%s]", const_ok,
               std::fabs(c0.values[0] - var), decay_ok, reached_floor, path.c_str()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 10: cmd_tail output bytes do not depend on --workers
void c10_determinism() {
    fs::path d = fs::temp_directory_path() / "billiard_acceptance_det";
    fs::remove_all(d);
    fs::create_directories(d);
    auto run = [&](const std::string& sub, int workers) {
        std::string cmd = std::string(BILLIARD_CLI_PATH) +
                          " tail --samples 200000 --seed 4242 --workers " +
                          std::to_string(workers) + " --out " + (d / sub).string() +
                          " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    int ra = run("a", 1), rb = run("b", 4), rc = run("c", 4);
    bool ok = ra == rb && rb == rc;
    for (const char* f : {"tail_r.csv", "tail_theta.csv"}) {
        std::string a = slurp(d / "a" / f), b = slurp(d / "b" / f),
                    c = slurp(d / "c" / f);
        ok = ok && !a.empty() && a == b && b == c;
    }
    report(10, "determinism", ok, fmt("exit_codes=%d/%d/%d", ra, rb, rc));
}

}  // namespace

int main() {
    Table t = build_table({4.0, 1.0, 0.3, Model::Symmetric});
    c1_flight_formula(t);
    c2_invariance(t);
    c3_reversibility(t);
    c4_return_tail(t);
    c567_asymptotics(t);
    c8_holder(t);
    c9_correlations(t);
    c10_determinism();
    std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASS" : "FAILURES PRESENT");
    return g_failures == 0 ? 0 : 1;
}
