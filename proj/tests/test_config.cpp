#include "gspinn/config.hpp"
#include "gspinn/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gspinn;
namespace fs = std::filesystem;

namespace {

std::string config_error_message(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("gspinn_test_" + name);
    fs::remove_all(d);
    return d;
}

} // namespace

TEST(Config, MinimalDocumentTakesDefaults) {
    const ExperimentConfig c = parse_config_text(R"({"problem":"heat","mode":"gspinn"})");
    EXPECT_EQ(c, ExperimentConfig{});
    EXPECT_EQ(c.points[0], 500);
    EXPECT_EQ(c.points[1], 5000);
    EXPECT_EQ(c.n_symmetry(), 5000);
    EXPECT_EQ(c.arch, (std::vector<int>{3, 50, 50, 50, 50, 1}));
    EXPECT_EQ(c.train.adam_steps, 3000);
    EXPECT_EQ(c.train.e_stop, 1e-4);
}

TEST(Config, PinnHasNoSymmetryPoints) {
    const ExperimentConfig c = parse_config_text(R"({"mode":"pinn","points":[100,200,300]})");
    EXPECT_EQ(c.points[2], 300);
    EXPECT_EQ(c.n_symmetry(), 0);
}

TEST(Config, GammaOutOfRange) {
    const std::string msg = config_error_message(R"({"problem":"heat","mode":"gspinn","train":{"gamma":1.5}})");
    EXPECT_NE(msg.find("gamma must be in (0,1]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("train.gamma"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_NE(config_error_message(R"({"problme":"heat"})").find("problme"), std::string::npos);
    EXPECT_NE(config_error_message(R"({"train":{"lr":1e-3}})").find("train.lr"), std::string::npos);
}

TEST(Config, TypeAndValueErrors) {
    EXPECT_FALSE(config_error_message(R"({"points":[1,2]})").empty());
    EXPECT_FALSE(config_error_message(R"({"points":"many"})").empty());
    EXPECT_FALSE(config_error_message(R"({"train":{"adam_steps":1.5}})").empty());
    EXPECT_FALSE(config_error_message(R"({"mode":"both"})").empty());
    EXPECT_FALSE(config_error_message(R"({"problem":"wave"})").empty());
    EXPECT_FALSE(config_error_message(R"({"b":1.0,"problem":"diffusion"})").empty());
    EXPECT_FALSE(config_error_message(R"({"arch":[2,10,1]})").empty());
    EXPECT_FALSE(config_error_message(R"({"seed":-1})").empty());
    EXPECT_FALSE(config_error_message("{not json").empty());
}

TEST(Config, NullEarlyStopDisables) {
    const ExperimentConfig c = parse_config_text(R"({"train":{"e_stop":null}})");
    EXPECT_TRUE(std::isinf(c.train.e_stop));
}

TEST(Config, JsonRoundTrip) {
    const ExperimentConfig c = parse_config_text(R"({
        "problem": "diffusion", "mode": "pinn", "points": [10, 20, 30], "arch": [3, 7, 1],
        "sampler": {"sigma": 0.2, "t_floor": 0.03},
        "train": {"adam_steps": 5, "gamma": 0.9, "e_stop": null},
        "weights": {"symmetry": 2.0}, "seed": 4, "repeats": 2, "out": "x",
        "plot": {"t": 0.3, "y": 0.8}})");
    EXPECT_EQ(parse_config_text(to_json(c).dump()), c);
    EXPECT_EQ(c.plot_y, 0.8);
    EXPECT_EQ(c.t_floor, 0.03);
}

TEST(Config, HashIgnoresOutputDirectory) {
    ExperimentConfig a = parse_config_text("{}"), b = a;
    b.out = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.seed = 1;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, BuildProblemOverrides) {
    const ExperimentConfig c = parse_config_text(R"({"problem":"heat","sampler":{"x_lo":-1,"x_hi":3,"t_max":2}})");
    const PdeProblem p = build_problem(c);
    EXPECT_EQ(p.box.x_lo, -1.0);
    EXPECT_EQ(p.box.x_hi, 3.0);
    EXPECT_EQ(p.box.t_max, 2.0);
    const ExperimentConfig d = parse_config_text(R"({"problem":"diffusion","sampler":{"space_floor":0}})");
    EXPECT_THROW(build_problem(d), ConfigError);
}

TEST(Summary, RowRoundTripWithBlankSymmetry) {
    SummaryRow r{"pinn", 0.125, 0.5, 0.25, std::nan(""), 12.5, 500, 5000, 0, 7};
    const std::string line = to_csv(r);
    EXPECT_EQ(line, "pinn,0.125,0.5,0.25,,12.5,500,5000,0,7");
    const SummaryRow back = parse_summary_row(line);
    EXPECT_EQ(back.algorithm, "pinn");
    EXPECT_EQ(back.mse, 0.125);
    EXPECT_TRUE(std::isnan(back.loss_sym));
    EXPECT_EQ(back.seed, 7u);
    EXPECT_THROW(parse_summary_row("pinn,1,2"), FormatError);
}

TEST(Summary, AppendKeepsSingleHeader) {
    const fs::path d = fresh_dir("summary");
    fs::create_directories(d);
    const std::string path = (d / "summary.csv").string();
    SummaryRow r{"gspinn", 0.5, 0.1, 0.2, 0.3, 1.0, 1, 2, 3, 0};
    append_summary(path, {r});
    r.seed = 1;
    append_summary(path, {r});
    const auto rows = read_summary(path);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].seed, 1u);
    std::ofstream(path, std::ios::trunc) << "a,b\n";
    EXPECT_THROW(append_summary(path, {r}), FormatError);
    fs::remove_all(d);
}

TEST(Experiment, ThreeSeedsShareHash) {
    const fs::path d = fresh_dir("experiment");
    for (const char* mode : {"gspinn", "pinn"}) {
        std::ostringstream text;
        text << R"({"problem":"heat","mode":")" << mode << R"(","arch":[3,6,1],"points":[10,10,10],)"
             << R"("train":{"adam_steps":4,"lbfgs_max_iters":3,"loops_per_iteration":2,"e_stop":null},)"
             << R"("repeats":3,"seed":5,"out":")" << d.string() << R"(","plot":{"points":5}})";
        const ExperimentConfig c = parse_config_text(text.str());
        std::ostringstream log;
        const auto rows = run_experiment(c, log);
        ASSERT_EQ(rows.size(), 3u);
        EXPECT_EQ(rows[0].seed, 5u);
        EXPECT_EQ(rows[2].seed, 7u);
        for (const auto& r : rows) EXPECT_EQ(std::isnan(r.loss_sym), std::string(mode) == "pinn");
        std::ifstream hash(d / "config_hash.txt");
        std::string h;
        hash >> h;
        EXPECT_EQ(h, config_hash(c));
        for (int s = 5; s < 8; ++s) {
            const fs::path run = d / ("heat_" + std::string(mode) + "_seed" + std::to_string(s));
            for (const char* f : {"params.bin", "training_log.csv", "plot_slice.csv", "run_info.json"})
                EXPECT_TRUE(fs::exists(run / f)) << run / f;
        }
    }
    const auto all = read_summary((d / "summary.csv").string());
    ASSERT_EQ(all.size(), 6u);
    EXPECT_EQ(all[3].algorithm, "pinn");
    std::ifstream slice(d / "heat_gspinn_seed5" / "plot_slice.csv");
    std::string header;
    std::getline(slice, header);
    EXPECT_EQ(header, "x,k_pred,k_exact");
    fs::remove_all(d);
}

TEST(Experiment, RunIsReproducible) {
    const fs::path d = fresh_dir("repro");
    const std::string text = R"({"arch":[3,6,1],"points":[10,10,10],"train":{"adam_steps":4,"lbfgs_max_iters":3},"out":")" +
                             d.string() + R"("})";
    const ExperimentConfig c = parse_config_text(text);
    const RunResult a = run_single(c, 0, (d / "a").string());
    const RunResult b = run_single(c, 0, (d / "b").string());
    EXPECT_EQ(a.row.mse, b.row.mse);
    EXPECT_EQ(a.row.loss_init, b.row.loss_init);
    fs::remove_all(d);
}
