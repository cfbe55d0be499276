#pragma once

// Experiment orchestration: one training run per seed, with artifacts on
// disk. Needs the vendored nlohmann/json header (see config.hpp).

#include "gspinn/config.hpp"
#include "gspinn/network.hpp"
#include "gspinn/training.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace gspinn {

inline constexpr const char* kSummaryHeader = "algorithm,mse,loss_init,loss_res,loss_sym,time_s,n_i,n_r,n_s,seed";
inline constexpr const char* kLogHeader = "iter,loss_total,loss_init,loss_res,loss_sym,lr,elapsed_s";

struct SummaryRow {
    std::string algorithm;
    double mse = 0.0;
    double loss_init = 0.0;
    double loss_res = 0.0;
    /// NaN (written blank) for PINN rows
    double loss_sym = std::numeric_limits<double>::quiet_NaN();
    double time_s = 0.0;
    int n_i = 0, n_r = 0, n_s = 0;
    std::uint64_t seed = 0;
};

inline std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv(const SummaryRow& r) {
    std::ostringstream os;
    os << r.algorithm << ',' << fmt(r.mse) << ',' << fmt(r.loss_init) << ',' << fmt(r.loss_res) << ','
       << fmt(r.loss_sym) << ',' << fmt(r.time_s) << ',' << r.n_i << ',' << r.n_r << ',' << r.n_s << ',' << r.seed;
    return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_cell(const std::string& s) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError("bad numeric cell '" + s + "'");
    return v;
}

} // namespace detail

inline SummaryRow parse_summary_row(const std::string& line) {
    const auto c = detail::split_csv(line);
    if (c.size() != 10) throw FormatError("summary row must have 10 columns: " + line);
    SummaryRow r;
    r.algorithm = c[0];
    r.mse = detail::parse_cell(c[1]);
    r.loss_init = detail::parse_cell(c[2]);
    r.loss_res = detail::parse_cell(c[3]);
    r.loss_sym = detail::parse_cell(c[4]);
    r.time_s = detail::parse_cell(c[5]);
    r.n_i = std::stoi(c[6]);
    r.n_r = std::stoi(c[7]);
    r.n_s = std::stoi(c[8]);
    r.seed = std::stoull(c[9]);
    return r;
}

inline std::vector<SummaryRow> read_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kSummaryHeader) throw FormatError(path + ": unexpected summary header");
    std::vector<SummaryRow> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(parse_summary_row(line));
    return rows;
}

/// Append rows, writing the header first when the file is new or empty.
/// An existing file with a different header is an error.
inline void append_summary(const std::string& path, const std::vector<SummaryRow>& rows) {
    namespace fs = std::filesystem;
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    if (!fresh) {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        if (header != kSummaryHeader) throw FormatError(path + ": existing file has a different header");
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw FormatError("cannot write " + path);
    if (fresh) out << kSummaryHeader << '\n';
    for (const auto& r : rows) out << to_csv(r) << '\n';
}

inline void write_training_log(const std::string& path, const std::vector<LogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << kLogHeader << '\n';
    for (const auto& r : rows)
        out << r.iter << ',' << fmt(r.loss_total) << ',' << fmt(r.loss_init) << ',' << fmt(r.loss_res) << ','
            << fmt(r.loss_sym) << ',' << fmt(r.lr) << ',' << fmt(r.elapsed_s) << '\n';
}

/// K_theta and K_exact along x at fixed (t, y).
inline void write_plot_slice(const std::string& path, const MlpParams& params, const PdeProblem& problem, double t,
                             double y, int n) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << "x,k_pred,k_exact\n";
    for (double x : linspace(problem.sample_x_lo(), problem.box.x_hi, n))
        out << fmt(x) << ',' << fmt(params.evaluate(t, x, y)) << ',' << fmt(problem.exact(t, x, y)) << '\n';
}

inline double plot_y(const ExperimentConfig& cfg, const PdeProblem& problem) {
    return cfg.plot_y ? *cfg.plot_y : 0.5 * (problem.sample_x_lo() + problem.box.x_hi);
}

struct RunResult {
    SummaryRow row;
    TrainReport report;
    std::string dir;
};

/// One seed: sample, train, evaluate, write params.bin, training_log.csv,
/// plot_slice.csv and run_info.json into `dir`.
inline RunResult run_single(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const PdeProblem problem = build_problem(cfg);
    const SamplerConfig sampler = build_sampler(cfg, problem, seed);
    const Generator* generator = nullptr;
    if (cfg.mode == Mode::gspinn) {
        generator = problem.find_generator(cfg.generator);
        if (generator == nullptr) throw ConfigError("config key 'generator': unknown generator '" + cfg.generator + "'");
    }
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    MlpParams params = init_mlp(cfg.arch, seed);

    RunResult res;
    res.dir = dir;
    res.report = train(params, problem, sampler, generator, tc, cfg.weights);
    const TrainReport& rep = res.report;

    SummaryRow& row = res.row;
    row.algorithm = to_string(cfg.mode);
    row.mse = rep.final_mse;
    row.loss_init = rep.final_loss.initial;
    row.loss_res = rep.final_loss.residual;
    row.loss_sym = rep.final_loss.symmetry;
    row.time_s = rep.elapsed_s;
    row.n_i = cfg.points[0];
    row.n_r = cfg.points[1];
    row.n_s = cfg.n_symmetry();
    row.seed = seed;

    save_params(params, dir + "/params.bin");
    write_training_log(dir + "/training_log.csv", rep.rows);
    write_plot_slice(dir + "/plot_slice.csv", params, problem, cfg.plot_t, plot_y(cfg, problem), cfg.plot_points);
    nlohmann::json info;
    info["config_hash"] = config_hash(cfg);
    info["config"] = to_json(cfg);
    info["seed"] = seed;
    info["stop_reason"] = to_string(rep.stop);
    info["diagnostic"] = rep.diagnostic;
    info["adam_steps"] = rep.adam_steps;
    info["lbfgs_iters"] = rep.lbfgs_iters;
    info["mse"] = rep.final_mse;
    std::ofstream(dir + "/run_info.json") << info.dump(2) << '\n';
    return res;
}

/// Runs `repeats` seeds (seed, seed+1, ...) and appends one summary row per
/// seed to <out>/summary.csv. A run that throws is reported on `log` and
/// the remaining seeds still run.
inline std::vector<SummaryRow> run_experiment(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out);
    const std::string hash = config_hash(cfg);
    std::vector<SummaryRow> rows;
    for (int k = 0; k < cfg.repeats; ++k) {
        const std::uint64_t seed = cfg.seed + std::uint64_t(k);
        const std::string dir = cfg.out + "/" + cfg.problem + "_" + to_string(cfg.mode) + "_seed" + std::to_string(seed);
        try {
            RunResult r = run_single(cfg, seed, dir);
            log << cfg.problem << ' ' << to_string(cfg.mode) << " seed " << seed << ": mse " << fmt(r.row.mse)
                << ", stop " << to_string(r.report.stop) << ", " << fmt(r.row.time_s) << " s\n";
            append_summary(cfg.out + "/summary.csv", {r.row});
            rows.push_back(r.row);
        } catch (const NumericError& e) {
            log << "seed " << seed << " aborted: " << e.what() << '\n';
        }
    }
    std::ofstream(cfg.out + "/config_hash.txt") << hash << '\n';
    return rows;
}

} // namespace gspinn
