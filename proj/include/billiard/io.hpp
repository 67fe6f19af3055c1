#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "billiard/estimators.hpp"
#include "billiard/geometry.hpp"

namespace billiard {

// One experiment = one RunConfig; every output is a pure function of it.
struct RunConfig {
    std::string schema_version = kSchemaVersion;
    std::string command;  // validate | tail | correlate | holder | asymptotics
    TableSpec table;
    std::uint64_t samples = 1000000;
    std::uint64_t seed = 42;
    int workers = 0;  // 0 = hardware concurrency
    std::string out_dir = ".";
    std::vector<long long> lags = {0, 1, 2, 3, 5, 8, 13, 21, 34};
    std::vector<double> times;
    std::vector<int> cells = {5, 10, 20, 40};
    double gamma = 0.8;
    int n_min = 100;
    bool flow = false;  // correlate: flow correlation instead of map
};

inline std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("schema_version")) c.schema_version = j.at("schema_version");
    if (c.schema_version != kSchemaVersion)
        throw InvalidSpec("unsupported schema_version " + c.schema_version);
    if (j.contains("command")) c.command = j.at("command");
    if (j.contains("table")) {
        const auto& t = j.at("table");
        if (t.contains("beta")) c.table.beta = t.at("beta");
        if (t.contains("half_width")) c.table.half_width = t.at("half_width");
        if (t.contains("epsilon")) c.table.epsilon = t.at("epsilon");
        if (t.contains("cap_sagitta")) c.table.cap_sagitta = t.at("cap_sagitta");
        if (t.contains("model")) {
            std::string m = t.at("model");
            if (m == "symmetric")
                c.table.model = Model::Symmetric;
            else if (m == "folded")
                c.table.model = Model::Folded;
            else
                throw InvalidSpec("model must be symmetric or folded");
        }
    }
    if (j.contains("samples")) c.samples = j.at("samples");
    if (j.contains("seed")) c.seed = j.at("seed");
    if (j.contains("workers")) c.workers = j.at("workers");
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir");
    if (j.contains("lags")) c.lags = j.at("lags").get<std::vector<long long>>();
    if (j.contains("times")) c.times = j.at("times").get<std::vector<double>>();
    if (j.contains("cells")) c.cells = j.at("cells").get<std::vector<int>>();
    if (j.contains("gamma")) c.gamma = j.at("gamma");
    if (j.contains("n_min")) c.n_min = j.at("n_min");
    if (j.contains("flow")) c.flow = j.at("flow");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidSpec("cannot open config file " + path);
    nlohmann::json j;
    in >> j;
    return parse_config(j);
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json t{{"beta", c.table.beta},
                     {"half_width", c.table.half_width},
                     {"epsilon", c.table.epsilon},
                     {"cap_sagitta", c.table.cap_sagitta},
                     {"model", c.table.model == Model::Symmetric ? "symmetric" : "folded"}};
    return nlohmann::json{{"schema_version", c.schema_version},
                          {"command", c.command},
                          {"table", t},
                          {"samples", c.samples},
                          {"seed", c.seed},
                          {"workers", c.workers},
                          {"out_dir", c.out_dir},
                          {"lags", c.lags},
                          {"times", c.times},
                          {"cells", c.cells},
                          {"gamma", c.gamma},
                          {"n_min", c.n_min},
                          {"flow", c.flow}};
}

// ------------------------------------------------------------- CSV writers
// Dialect: comma separator, header row, LF endings, floats at 17 significant
// digits.

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutOfRange("cannot open output file " + path);
    for (const auto& l : lines) out << l << "\n";
}

inline void write_survival_csv(const std::string& path, const SurvivalCurve& c) {
    std::vector<std::string> lines{"threshold,survival,count"};
    for (std::size_t i = 0; i < c.thresholds.size(); ++i)
        lines.push_back(format_float(c.thresholds[i]) + "," + format_float(c.survival[i]) +
                        "," + std::to_string(c.counts[i]));
    write_lines(path, lines);
}

inline void write_correlation_csv(const std::string& path, const CorrelationSeries& s) {
    std::vector<std::string> lines{"lag,value,std_error"};
    for (std::size_t i = 0; i < s.lags.size(); ++i)
        lines.push_back(format_float(s.lags[i]) + "," + format_float(s.values[i]) + "," +
                        format_float(s.std_errors[i]));
    write_lines(path, lines);
}

inline void write_probe_csv(const std::string& path, const ProbeReport& r) {
    std::vector<std::string> lines{"cell,ratio,distance"};
    for (std::size_t i = 0; i < r.ratios.size(); ++i)
        lines.push_back(std::to_string(r.cells[i]) + "," + format_float(r.ratios[i]) + "," +
                        format_float(r.distances[i]));
    write_lines(path, lines);
}

inline void write_asymptotics_csv(const std::string& path, const AsymptoticsReport& r) {
    std::vector<std::string> lines{"cell,first_slope,w_nprime,power_sum"};
    for (std::size_t i = 0; i < r.cells.size(); ++i)
        lines.push_back(std::to_string(r.cells[i]) + "," + format_float(r.first_slopes[i]) +
                        "," + format_float(r.w_nprime[i]) + "," +
                        format_float(r.power_sums[i]));
    write_lines(path, lines);
}

// ------------------------------------------------------------ JSON sidecars

inline nlohmann::json survival_to_json(const SurvivalCurve& c) {
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"label", c.label},
                          {"N", c.N},
                          {"fitted_slope", c.fitted_slope},
                          {"ci_low", c.ci_low},
                          {"ci_high", c.ci_high},
                          {"fit_lo", c.fit_lo},
                          {"fit_hi", c.fit_hi},
                          {"insufficient_tail", c.insufficient_tail},
                          {"thresholds", c.thresholds},
                          {"survival", c.survival},
                          {"counts", c.counts}};
}

inline nlohmann::json correlation_to_json(const CorrelationSeries& s) {
    return nlohmann::json{{"schema_version", kSchemaVersion}, {"N", s.N},
                          {"f", s.f_id},                      {"g", s.g_id},
                          {"lags", s.lags},                   {"values", s.values},
                          {"std_errors", s.std_errors}};
}

inline nlohmann::json probe_to_json(const ProbeReport& r) {
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"side", r.side},
                          {"gamma", r.gamma},
                          {"pairs_per_cell", r.pairs_per_cell},
                          {"cells", r.cells},
                          {"ratios", r.ratios},
                          {"distances", r.distances},
                          {"max_ratio", r.max_ratio},
                          {"trend_slope", r.trend_slope},
                          {"trend_slope_stderr", r.trend_slope_stderr}};
}

inline nlohmann::json asymptotics_to_json(const AsymptoticsReport& r) {
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"cells", r.cells},
                          {"first_slopes", r.first_slopes},
                          {"first_slope_mean", r.first_slope_mean},
                          {"first_slope_target", r.first_slope_target},
                          {"w_slope", r.w_fit.slope},
                          {"w_slope_stderr", r.w_fit.slope_stderr},
                          {"w_slope_target", r.w_slope_target},
                          {"power_sum_max", r.power_sum_max},
                          {"power_max_trend_tau", r.power_max_trend.tau_b},
                          {"power_max_trend_p", r.power_max_trend.p_one_sided},
                          {"angle_floor", r.angle_floor},
                          {"angle_floor_bound", r.angle_floor_bound}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutOfRange("cannot open output file " + path);
    out << j.dump(2) << "\n";
}

}  // namespace billiard
