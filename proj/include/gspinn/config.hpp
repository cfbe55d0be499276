#pragma once

// Experiment configuration. Needs the vendored nlohmann/json header
// (vendor/json.hpp) on the include path.

#include "gspinn/errors.hpp"
#include "gspinn/problems.hpp"
#include "gspinn/sampling.hpp"
#include "gspinn/training.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gspinn {

enum class Mode { pinn, gspinn };

inline std::string to_string(Mode m) { return m == Mode::pinn ? "pinn" : "gspinn"; }

struct ExperimentConfig {
    std::string problem = "heat";
    /// heat only
    double diffusivity = 0.5;
    /// diffusion only
    double b = 0.5;
    Mode mode = Mode::gspinn;
    std::string generator = "invariant";
    std::vector<int> arch{3, 50, 50, 50, 50, 1};
    /// N_i, N_r, N_s
    std::array<int, 3> points{500, 5000, 5000};
    double sigma = 0.1;
    bool resample_each_iteration = false;
    /// domain overrides; unset means the problem default
    std::optional<double> t_max, x_lo, x_hi, t_floor, space_floor;
    TrainConfig train;
    LossWeights weights;
    std::uint64_t seed = 0;
    int repeats = 1;
    std::string out = "runs";
    bool deterministic = false;
    double plot_t = 0.5;
    /// unset means the midpoint of the sampling interval
    std::optional<double> plot_y;
    int plot_points = 201;

    /// Symmetry points actually used: none in PINN mode.
    int n_symmetry() const { return mode == Mode::pinn ? 0 : points[2]; }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline bool operator==(const TrainConfig& a, const TrainConfig& b) {
    return a.adam_steps == b.adam_steps && a.lr0 == b.lr0 && a.gamma == b.gamma &&
           a.loops_per_iteration == b.loops_per_iteration &&
           (a.e_stop == b.e_stop || (std::isinf(a.e_stop) && std::isinf(b.e_stop))) &&
           a.lbfgs_memory == b.lbfgs_memory && a.lbfgs_max_iters == b.lbfgs_max_iters && a.c1 == b.c1 && a.c2 == b.c2 &&
           a.seed == b.seed;
}

inline bool operator==(const LossWeights& a, const LossWeights& b) {
    return a.initial == b.initial && a.residual == b.residual && a.symmetry == b.symmetry && a.data == b.data &&
           a.boundary == b.boundary;
}

namespace detail {

using nlohmann::json;

class ConfigReader {
public:
    ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "top level" : path_, "expected an object");
    }

    /// Reject keys that were never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(key(it.key()), "unknown key");
    }

    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }

    double number(const std::string& k, double fallback) {
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (!v.is_number()) fail(key(k), "expected a number");
        return v.get<double>();
    }

    std::optional<double> optional_number(const std::string& k, std::optional<double> fallback) {
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (v.is_null()) return std::nullopt;
        if (!v.is_number()) fail(key(k), "expected a number or null");
        return v.get<double>();
    }

    long long integer(const std::string& k, long long fallback) {
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (!v.is_number_integer()) fail(key(k), "expected an integer");
        return v.get<long long>();
    }

    bool boolean(const std::string& k, bool fallback) {
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (!v.is_boolean()) fail(key(k), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& k, const std::string& fallback) {
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (!v.is_string()) fail(key(k), "expected a string");
        return v.get<std::string>();
    }

    std::vector<int> int_list(const std::string& k, const std::vector<int>& fallback) {
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (!v.is_array()) fail(key(k), "expected a list of integers");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) fail(key(k), "expected a list of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    std::optional<ConfigReader> object(const std::string& k) {
        if (!has(k)) return std::nullopt;
        return std::optional<ConfigReader>(std::in_place, j_.at(k), key(k));
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    [[noreturn]] static void fail(const std::string& k, const std::string& what) {
        throw ConfigError("config key '" + k + "': " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& k, const std::string& what) {
    if (!ok) ConfigReader::fail(k, what);
}

} // namespace detail

/// Bounds and cross-field checks. Errors name the key and the constraint.
inline void validate(const ExperimentConfig& c) {
    using detail::check;
    check(c.problem == "heat" || c.problem == "diffusion", "problem", "unknown problem '" + c.problem + "'");
    check(c.diffusivity > 0.0 && std::isfinite(c.diffusivity), "diffusivity", "must be > 0");
    check(c.b == 0.5, "b", "only b = 0.5 has a closed-form kernel");
    try {
        MlpParams::validate_arch(c.arch);
    } catch (const UsageError& e) {
        detail::ConfigReader::fail("arch", e.what());
    }
    for (int n : c.points) check(n >= 0, "points", "counts must be >= 0");
    check(c.sigma > 0.0 && std::isfinite(c.sigma), "sampler.sigma", "must be > 0");
    const auto& t = c.train;
    check(t.adam_steps >= 0, "train.adam_steps", "must be >= 0");
    check(t.lr0 > 0.0 && std::isfinite(t.lr0), "train.lr0", "must be > 0");
    check(t.gamma > 0.0 && t.gamma <= 1.0, "train.gamma", "gamma must be in (0,1]");
    check(t.loops_per_iteration >= 1, "train.loops_per_iteration", "must be >= 1");
    check(!std::isnan(t.e_stop), "train.e_stop", "must be a number or null");
    check(t.lbfgs_memory >= 1, "train.lbfgs_memory", "must be >= 1");
    check(t.lbfgs_max_iters >= 0, "train.lbfgs_max_iters", "must be >= 0");
    check(t.c1 > 0.0 && t.c1 < t.c2 && t.c2 < 1.0, "train.c1", "Wolfe constants must satisfy 0 < c1 < c2 < 1");
    for (double w : {c.weights.initial, c.weights.residual, c.weights.symmetry, c.weights.data, c.weights.boundary})
        check(w >= 0.0 && std::isfinite(w), "weights", "weights must be finite and >= 0");
    check(c.repeats >= 1, "repeats", "must be >= 1");
    check(!c.out.empty(), "out", "must not be empty");
    check(c.plot_points >= 2, "plot.points", "must be >= 2");
}

/// Parse JSON text. Missing keys take defaults; unknown keys are rejected.
inline ExperimentConfig parse_config_text(const std::string& text) {
    using detail::ConfigReader;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    {
        ConfigReader r(j, "");
        c.problem = r.string("problem", c.problem);
        c.diffusivity = r.number("diffusivity", c.diffusivity);
        c.b = r.number("b", c.b);
        const std::string mode = r.string("mode", to_string(c.mode));
        if (mode == "pinn") c.mode = Mode::pinn;
        else if (mode == "gspinn") c.mode = Mode::gspinn;
        else ConfigReader::fail("mode", "expected \"pinn\" or \"gspinn\"");
        c.generator = r.string("generator", c.generator);
        c.arch = r.int_list("arch", c.arch);
        const auto pts = r.int_list("points", {c.points[0], c.points[1], c.points[2]});
        if (pts.size() != 3) ConfigReader::fail("points", "expected [N_i, N_r, N_s]");
        c.points = {pts[0], pts[1], pts[2]};
        if (auto s = r.object("sampler")) {
            c.sigma = s->number("sigma", c.sigma);
            c.resample_each_iteration = s->boolean("resample_each_iteration", c.resample_each_iteration);
            c.t_max = s->optional_number("t_max", c.t_max);
            c.x_lo = s->optional_number("x_lo", c.x_lo);
            c.x_hi = s->optional_number("x_hi", c.x_hi);
            c.t_floor = s->optional_number("t_floor", c.t_floor);
            c.space_floor = s->optional_number("space_floor", c.space_floor);
            s->finish();
        }
        if (auto t = r.object("train")) {
            auto& tc = c.train;
            tc.adam_steps = int(t->integer("adam_steps", tc.adam_steps));
            tc.lr0 = t->number("lr0", tc.lr0);
            tc.gamma = t->number("gamma", tc.gamma);
            tc.loops_per_iteration = int(t->integer("loops_per_iteration", tc.loops_per_iteration));
            // null disables the stop criterion
            const auto e = t->optional_number("e_stop", tc.e_stop);
            tc.e_stop = e ? *e : std::numeric_limits<double>::infinity();
            tc.lbfgs_memory = int(t->integer("lbfgs_memory", tc.lbfgs_memory));
            tc.lbfgs_max_iters = int(t->integer("lbfgs_max_iters", tc.lbfgs_max_iters));
            tc.c1 = t->number("c1", tc.c1);
            tc.c2 = t->number("c2", tc.c2);
            t->finish();
        }
        if (auto w = r.object("weights")) {
            auto& lw = c.weights;
            lw.initial = w->number("initial", lw.initial);
            lw.residual = w->number("residual", lw.residual);
            lw.symmetry = w->number("symmetry", lw.symmetry);
            lw.data = w->number("data", lw.data);
            lw.boundary = w->number("boundary", lw.boundary);
            w->finish();
        }
        const long long seed = r.integer("seed", (long long)c.seed);
        if (seed < 0) ConfigReader::fail("seed", "must be >= 0");
        c.seed = std::uint64_t(seed);
        c.train.seed = c.seed;
        c.repeats = int(r.integer("repeats", c.repeats));
        c.out = r.string("out", c.out);
        c.deterministic = r.boolean("deterministic", c.deterministic);
        if (auto p = r.object("plot")) {
            c.plot_t = p->number("t", c.plot_t);
            c.plot_y = p->optional_number("y", c.plot_y);
            c.plot_points = int(p->integer("points", c.plot_points));
            p->finish();
        }
        r.finish();
    }
    validate(c);
    return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully defaulted JSON form; parse_config_text(to_json(c)) == c.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["problem"] = c.problem;
    j["diffusivity"] = c.diffusivity;
    j["b"] = c.b;
    j["mode"] = to_string(c.mode);
    j["generator"] = c.generator;
    j["arch"] = c.arch;
    j["points"] = {c.points[0], c.points[1], c.points[2]};
    j["sampler"] = {{"sigma", c.sigma},
                    {"resample_each_iteration", c.resample_each_iteration},
                    {"t_max", opt(c.t_max)},
                    {"x_lo", opt(c.x_lo)},
                    {"x_hi", opt(c.x_hi)},
                    {"t_floor", opt(c.t_floor)},
                    {"space_floor", opt(c.space_floor)}};
    const auto& t = c.train;
    j["train"] = {{"adam_steps", t.adam_steps},
                  {"lr0", t.lr0},
                  {"gamma", t.gamma},
                  {"loops_per_iteration", t.loops_per_iteration},
                  {"e_stop", std::isfinite(t.e_stop) ? json(t.e_stop) : json(nullptr)},
                  {"lbfgs_memory", t.lbfgs_memory},
                  {"lbfgs_max_iters", t.lbfgs_max_iters},
                  {"c1", t.c1},
                  {"c2", t.c2}};
    const auto& w = c.weights;
    j["weights"] = {{"initial", w.initial},
                    {"residual", w.residual},
                    {"symmetry", w.symmetry},
                    {"data", w.data},
                    {"boundary", w.boundary}};
    j["seed"] = c.seed;
    j["repeats"] = c.repeats;
    j["out"] = c.out;
    j["deterministic"] = c.deterministic;
    j["plot"] = {{"t", c.plot_t}, {"y", opt(c.plot_y)}, {"points", c.plot_points}};
    return j;
}

/// FNV-1a over the canonical JSON of every field except the output directory.
inline std::string config_hash(const ExperimentConfig& c) {
    nlohmann::json j = to_json(c);
    j.erase("out");
    const std::string text = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline PdeProblem build_problem(const ExperimentConfig& c) {
    PdeProblem p = c.problem == "heat" ? make_heat_problem(1, c.diffusivity) : make_diffusion_problem(c.b);
    if (c.t_max) p.box.t_max = *c.t_max;
    if (c.x_lo) p.box.x_lo = *c.x_lo;
    if (c.x_hi) p.box.x_hi = *c.x_hi;
    if (c.t_floor) p.t_floor = *c.t_floor;
    if (c.space_floor) p.space_floor = *c.space_floor;
    if (!p.box.valid() || !(p.sample_x_lo() < p.box.x_hi)) throw ConfigError("config key 'sampler': degenerate domain box");
    if (p.kind == ProblemKind::diffusion && !(p.sample_x_lo() > 0.0))
        throw ConfigError("config key 'sampler.space_floor': diffusion needs x > 0");
    return p;
}

inline SamplerConfig build_sampler(const ExperimentConfig& c, const PdeProblem& p, std::uint64_t seed) {
    SamplerConfig s = SamplerConfig::for_problem(p, c.points[0], c.points[1], c.n_symmetry(), seed);
    s.sigma = c.sigma;
    s.resample_each_iteration = c.resample_each_iteration;
    return s;
}

} // namespace gspinn
