// billiard_cli: batch front-end for the power-curve billiard experiments.
// Subcommands: validate | tail | correlate | holder | asymptotics.
// Exit codes: 0 success, 1 statistical/convergence failure, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "billiard/estimators.hpp"
#include "billiard/io.hpp"

using namespace billiard;
namespace fs = std::filesystem;

namespace {

std::string out_path(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return (fs::path(c.out_dir) / name).string();
}

void print_error_json(const std::string& type, const std::string& what) {
    nlohmann::json j{{"error", type}, {"message", what}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

int cmd_validate(const RunConfig& cfg) {
    Table t = build_table(cfg.table);
    bool ok = true;
    auto report = [&](const char* name, bool pass, double residual) {
        std::printf("%-28s %s  residual=%s\n", name, pass ? "pass" : "FAIL",
                    format_float(residual).c_str());
        ok = ok && pass;
    };

    // boundary closure (build_table already enforces 1e-12; report the worst gap)
    double worst_gap = 0.0;
    for (size_t i = 0; i < t.pieces.size(); ++i) {
        size_t j = (i + 1) % t.pieces.size();
        Vec2 end = boundary_point(t, static_cast<int>(i), t.pieces[i].length).pos;
        Vec2 begin = boundary_point(t, static_cast<int>(j), 0.0).pos;
        worst_gap = std::max(worst_gap, (end - begin).norm());
    }
    report("closure", worst_gap < 1e-12, worst_gap);

    // reflection involution: rho T rho T = id
    double worst_inv = 0.0;
    {
        RngStream rng(cfg.seed, 0);
        int checked = 0;
        while (checked < 500) {
            MCoord m = sample_mu(t, rng);
            try {
                MCoord b = time_reverse(billiard_map(t, time_reverse(billiard_map(t, m).first)).first);
                worst_inv = std::max({worst_inv, std::fabs(b.phi - m.phi),
                                      t.boundary_distance(t.global_r(b.piece, b.r),
                                                          t.global_r(m.piece, m.r))});
                ++checked;
            } catch (const BilliardError&) {
                continue;
            }
        }
    }
    report("reversibility", worst_inv < 1e-9, worst_inv);

    // window flight-time formula cross-check
    double worst_tau = 0.0;
    if (t.spec.model == Model::Symmetric) {
        RngStream rng(cfg.seed, 1);
        int checked = 0;
        while (checked < 1000) {
            double x = rng.uniform(-0.9, 0.9) * t.spec.epsilon;
            double psi = rng.uniform(-0.25, 0.25);
            try {
                CollisionResult c = next_collision(t, {{x, -t.g(x)}, kPi / 2.0 - psi});
                if (t.piece(c.m.piece).kind != PieceKind::PowerTop) continue;
                double tf = free_flight_formula(t.spec.beta, x, psi, c.m.pos.x);
                worst_tau = std::max(worst_tau, std::fabs(c.tau - tf) / tf);
                ++checked;
            } catch (const BilliardError&) {
                continue;
            }
        }
        report("flight-time formula", worst_tau < 1e-9, worst_tau);
    }

    // measure invariance at reduced N: KS of pushforward marginals
    {
        const int N = 100000;
        RngStream rng(cfg.seed, 2);
        std::vector<double> phis, grs;
        while (static_cast<int>(phis.size()) < N) {
            try {
                MCoord m = billiard_map(t, sample_mu(t, rng)).first;
                phis.push_back(m.phi);
                grs.push_back(t.global_r(m.piece, m.r) / t.total_length);
            } catch (const BilliardError&) {
                continue;
            }
        }
        double ks_phi =
            ks_statistic(phis, [](double p) { return 0.5 * (1.0 + std::sin(p)); });
        double ks_r = ks_statistic(grs, [](double u) { return u; });
        report("invariance (phi marginal)", ks_phi < 0.01, ks_phi);
        report("invariance (r marginal)", ks_r < 0.01, ks_r);
    }
    return ok ? 0 : 1;
}

int cmd_tail(const RunConfig& cfg) {
    Table t = build_table(cfg.table);
    auto [rc, tc] =
        estimate_return_tail(t, t.spec.epsilon, cfg.samples, cfg.seed, cfg.workers);
    write_survival_csv(out_path(cfg, "tail_r.csv"), rc);
    write_survival_csv(out_path(cfg, "tail_theta.csv"), tc);
    nlohmann::json summary{{"schema_version", kSchemaVersion},
                           {"config", config_to_json(cfg)},
                           {"r", survival_to_json(rc)},
                           {"theta", survival_to_json(tc)}};
    write_json(out_path(cfg, "tail_summary.json"), summary);
    if (rc.insufficient_tail || tc.insufficient_tail) {
        print_error_json("InsufficientTail", "fit range under one decade; output retained");
        return 1;
    }
    return 0;
}

int cmd_correlate(const RunConfig& cfg) {
    Table t = build_table(cfg.table);
    CorrelationSeries s;
    if (cfg.flow) {
        ObservableSpec f = make_flow_bump(0.0, t.spec.model == Model::Symmetric ? 0.0 : -0.5,
                                          0.5, 0.8);
        std::vector<double> times = cfg.times;
        if (times.empty())
            for (long long l : cfg.lags) times.push_back(static_cast<double>(l));
        s = estimate_flow_correlation(t, f, f, times, cfg.samples, cfg.seed, cfg.workers);
    } else {
        // bump centered on the bottom vertex of the window, phi = 0
        double center_r = t.power_arclen(0.0);
        ObservableSpec f = make_map_bump(center_r, 0.0, 0.5, 0.8);
        s = estimate_map_correlation(t, f, f, cfg.lags, cfg.samples, cfg.seed, cfg.workers);
    }
    write_correlation_csv(out_path(cfg, "correlate.csv"), s);
    nlohmann::json j = correlation_to_json(s);
    j["config"] = config_to_json(cfg);
    write_json(out_path(cfg, "correlate.json"), j);
    return 0;
}

int cmd_holder(const RunConfig& cfg) {
    Table t = build_table(cfg.table);
    int pairs = static_cast<int>(std::min<std::uint64_t>(cfg.samples, 8));
    bool trend_ok = true;
    for (PairSide side : {PairSide::Stable, PairSide::Unstable}) {
        ProbeReport r = holder_probe(t, side, cfg.cells, cfg.gamma, pairs, cfg.seed);
        std::string base = side == PairSide::Stable ? "holder_stable" : "holder_unstable";
        write_probe_csv(out_path(cfg, base + ".csv"), r);
        nlohmann::json j = probe_to_json(r);
        j["config"] = config_to_json(cfg);
        write_json(out_path(cfg, base + ".json"), j);
        std::printf("%s: max_ratio=%s trend_slope=%s +- %s\n", r.side.c_str(),
                    format_float(r.max_ratio).c_str(), format_float(r.trend_slope).c_str(),
                    format_float(r.trend_slope_stderr).c_str());
        trend_ok = trend_ok && r.trend_slope - 2.0 * r.trend_slope_stderr <= 0.0;
    }
    return trend_ok ? 0 : 1;
}

int cmd_asymptotics(const RunConfig& cfg) {
    Table t = build_table(cfg.table);
    int n_samples = static_cast<int>(std::min<std::uint64_t>(cfg.samples, 200));
    AsymptoticsReport r = asymptotics_report(t, cfg.n_min, std::max(n_samples, 8), cfg.seed);
    write_asymptotics_csv(out_path(cfg, "asymptotics.csv"), r);
    nlohmann::json j = asymptotics_to_json(r);
    j["config"] = config_to_json(cfg);
    write_json(out_path(cfg, "asymptotics.json"), j);
    std::printf("first_slope=%s (target %s)  w_slope=%s (target %s)\n",
                format_float(r.first_slope_mean).c_str(),
                format_float(r.first_slope_target).c_str(),
                format_float(r.w_fit.slope).c_str(),
                format_float(r.w_slope_target).c_str());
    bool ok = std::fabs(r.first_slope_mean - r.first_slope_target) < 0.2 &&
              std::fabs(r.w_fit.slope - r.w_slope_target) < 0.3 &&
              r.angle_floor >= r.angle_floor_bound - 1e-6;
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"power-curve billiard experiment runner"};
    app.require_subcommand(1);
    app.fallthrough(false);

    std::string config_path, out_dir, cells_arg;
    bool has_seed = false, has_workers = false, has_samples = false;
    bool has_beta = false, has_epsilon = false, has_gamma = false, has_nmin = false;
    std::uint64_t seed = 0, samples = 0;
    int workers = 0, n_min = 0;
    double beta = 0.0, epsilon = 0.0, gamma = 0.0;
    bool flow = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed)->each([&](const std::string&) { has_seed = true; });
        sub->add_option("--workers", workers)->each([&](const std::string&) {
            has_workers = true;
        });
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--beta", beta)->each([&](const std::string&) { has_beta = true; });
        sub->add_option("--epsilon", epsilon)->each([&](const std::string&) {
            has_epsilon = true;
        });
        sub->add_option("--samples", samples)->each([&](const std::string&) {
            has_samples = true;
        });
        sub->add_option("--gamma", gamma)->each([&](const std::string&) { has_gamma = true; });
        sub->add_option("--cells", cells_arg, "comma-separated cell list");
        sub->add_option("--n-min", n_min)->each([&](const std::string&) { has_nmin = true; });
        sub->add_flag("--flow", flow, "flow correlation instead of map");
    };
    for (const char* name : {"validate", "tail", "correlate", "holder", "asymptotics"})
        add_common(app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        CLI::App* sub = app.get_subcommands().front();
        cfg.command = sub->get_name();
        if (has_seed) cfg.seed = seed;
        if (has_workers) cfg.workers = workers;
        if (has_samples) cfg.samples = samples;
        if (has_beta) cfg.table.beta = beta;
        if (has_epsilon) cfg.table.epsilon = epsilon;
        if (has_gamma) cfg.gamma = gamma;
        if (has_nmin) cfg.n_min = n_min;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (flow) cfg.flow = true;
        if (!cells_arg.empty()) {
            cfg.cells.clear();
            std::size_t pos = 0;
            while (pos < cells_arg.size()) {
                std::size_t comma = cells_arg.find(',', pos);
                if (comma == std::string::npos) comma = cells_arg.size();
                cfg.cells.push_back(std::stoi(cells_arg.substr(pos, comma - pos)));
                pos = comma + 1;
            }
        }

        if (cfg.command == "validate") return cmd_validate(cfg);
        if (cfg.command == "tail") return cmd_tail(cfg);
        if (cfg.command == "correlate") return cmd_correlate(cfg);
        if (cfg.command == "holder") return cmd_holder(cfg);
        if (cfg.command == "asymptotics") return cmd_asymptotics(cfg);
        print_error_json("UnknownCommand", cfg.command);
        return 2;
    } catch (const InvalidSpec& e) {
        print_error_json("InvalidSpec", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        print_error_json("ConfigParse", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        print_error_json("BadArgument", e.what());
        return 2;
    } catch (const BilliardError& e) {
        print_error_json("Statistical", e.what());
        return 1;
    }
}
