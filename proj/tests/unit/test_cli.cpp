#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "mplab/cli.hpp"
#include "mplab/config.hpp"
#include "mplab/errors.hpp"
#include "mplab/io.hpp"
#include "mplab/margins.hpp"
#include "mplab/pruning.hpp"
#include "mplab/rational.hpp"
#include "mplab/sweep.hpp"

namespace fs = std::filesystem;
using namespace mplab;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mplab_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& s) const { return path / s; }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path config_dir() {
    const char* d = std::getenv("MPLAB_CONFIG_DIR");
    REQUIRE(d != nullptr);
    return d;
}

const char* kTinySweep = R"(task: perceptron
seed: 5
output:
  name: tiny.csv
model:
  K: 10
train:
  epochs: 3
sweep:
  arms:
    - {strategy: none}
    - {strategy: pe, ratio: 0.5}
    - {strategy: pe, ratio: 0.5, filter: true}
  epsilons: [0, 1/20]
  alphas: [1, 2]
  seeds: 2
  n_test: 50
)";

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("rational parsing of radii") {
    CHECK(parse_rational("8/255") == Rational(8, 255));
    CHECK(parse_rational("16/510") == Rational(8, 255));
    CHECK(parse_rational("0.001") == Rational(1, 1000));
    CHECK(parse_rational("-3") == Rational(-3));
    CHECK(parse_real("8/255") == 8.0 / 255.0);
    CHECK(parse_real("0.1") == 0.1);
    CHECK(parse_real("1e-3") == 0.001);
    CHECK(parse_real("0.123456789012345678") == 0.123456789012345678);
    for (const char* bad : {"", "abc", "1/0", "1/", "/3", "0.1.2", "1e", "8/255x", "nan"}) {
        CHECK_THROWS_AS(parse_real(bad), ConfigError);
    }
    CHECK(Rational(8, 255) - Rational(1, 255) == Rational(7, 255));
    CHECK(Rational(-2, 4).str() == "-1/2");
    CHECK(Rational(1, 3) < Rational(1, 2));
}

TEST_CASE("shipped configs parse, validate and round-trip") {
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(config_dir())) {
        if (entry.path().extension() != ".yaml") continue;
        ++seen;
        CAPTURE(entry.path().string());
        ExperimentConfig cfg = load_config(entry.path());
        std::string text = format_config(cfg);
        ExperimentConfig back = parse_config(text);
        CHECK(back == cfg);
        CHECK(format_config(back) == text);
    }
    CHECK(seen >= 8);
}

TEST_CASE("config values keep exact fractions") {
    ExperimentConfig cfg = load_config(config_dir() / "puma-schedule.yaml");
    CHECK(cfg.epsilon == 8.0 / 255.0);
    CHECK(cfg.pruning.gap == 1.0 / 255.0);
    CHECK(cfg.pruning.schedule);
    CHECK(cfg.pruning.strategy == PruneStrategy::prune_easy);
    ExperimentConfig online = load_config(config_dir() / "online.yaml");
    CHECK(online.pruning.m_p == 26.0 / 255.0);
    CHECK(online.pruning.source == MarginSource::online);
}

TEST_CASE("config errors are reported as config errors") {
    CHECK_THROWS_AS(parse_config("task: perceptron\nbogus: 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("train:\n  epsilon: eight\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("train:\n  epsilon: -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("task: imagenet\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("sweep:\n  arms:\n    - {strategy: pe, ratio: 1.5}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("pruning:\n  gap: 1/255\n  schedule: true\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("train: [1, 2\n"), ConfigError);
    TempDir t("cfgpath");
    write_file_atomic(t / "c.yaml", "pruning:\n  source: manifest\n  manifest: missing.csv\n");
    CHECK_THROWS_AS(load_config(t / "c.yaml"), ConfigError);
}

TEST_CASE("exit codes") {
    CHECK(cli({}).code == 1);
    CHECK(cli({"dance"}).code == 1);
    CHECK(cli({"sweep"}).code == 1);
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"fit", "x.csv", "--no-such-flag"}).code == 1);
    CHECK(cli({"sweep", "/nonexistent/dir/config.yaml"}).code == 1);

    TempDir t("codes");
    write_file_atomic(t / "bad.yaml", "task: perceptron\nunknown_key: 3\n");
    Run r = cli({"sweep", (t / "bad.yaml").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown_key") != std::string::npos);

    write_file_atomic(t / "empty.yaml", "task: perceptron\n");
    CHECK(cli({"sweep", (t / "empty.yaml").string()}).code == 1);

    // a runtime failure: the output directory is a regular file
    write_file_atomic(t / "blocker", "x");
    write_file_atomic(t / "tiny.yaml", kTinySweep);
    CHECK(cli({"sweep", (t / "tiny.yaml").string(), "--out", (t / "blocker").string()}).code == 2);
    CHECK(cli({"fit", (t / "missing.csv").string()}).code == 2);
    CHECK(cli({"schedule", (t / "blocker").string(), "--eps", "8/255"}).code == 2);
    CHECK(cli({"schedule", (t / "blocker").string(), "--eps", "eight"}).code == 1);
}

TEST_CASE("output directory precedence") {
    unsetenv("MPLAB_OUT_DIR");
    CHECK(resolve_output_dir(std::nullopt, "") == fs::path("."));
    CHECK(resolve_output_dir(std::nullopt, "cfgdir") == fs::path("cfgdir"));
    setenv("MPLAB_OUT_DIR", "envdir", 1);
    CHECK(resolve_output_dir(std::nullopt, "") == fs::path("envdir"));
    CHECK(resolve_output_dir(std::nullopt, "cfgdir") == fs::path("cfgdir"));
    CHECK(resolve_output_dir(std::string("flagdir"), "cfgdir") == fs::path("flagdir"));
    unsetenv("MPLAB_OUT_DIR");
}

TEST_CASE("sweep output is deterministic across runs and worker counts") {
    TempDir t("sweep");
    write_file_atomic(t / "tiny.yaml", kTinySweep);
    Run a = cli({"sweep", (t / "tiny.yaml").string(), "--out", (t / "a").string(), "--jobs", "1"});
    REQUIRE(a.code == 0);
    Run b = cli({"sweep", (t / "tiny.yaml").string(), "--out", (t / "b").string(), "--jobs", "3"});
    REQUIRE(b.code == 0);
    Run c = cli({"sweep", (t / "tiny.yaml").string(), "--out", (t / "c").string(), "--jobs", "1"});
    std::string ta = read_file(t / "a" / "tiny.csv");
    CHECK(ta == read_file(t / "b" / "tiny.csv"));
    CHECK(ta == read_file(t / "c" / "tiny.csv"));
    auto rows = lines_of(ta);
    CHECK(rows.size() == 1 + 3 * 2 * 2 * 2);
    CHECK(rows[0] == "strategy,epsilon,alpha,prune_ratio,seed,corr_error,clean_error,robust_error");
    CHECK(rows[1].rfind("none,0,1,0,0,", 0) == 0);
    CHECK(rows.back().rfind("pe+filter,0.05,2,0.5,1,", 0) == 0);

    Run d = cli({"sweep", (t / "tiny.yaml").string(), "--out", (t / "d").string(), "--seed", "6"});
    REQUIRE(d.code == 0);
    CHECK(read_file(t / "d" / "tiny.csv") != ta);

    setenv("MPLAB_OUT_DIR", (t / "env").string().c_str(), 1);
    REQUIRE(cli({"sweep", (t / "tiny.yaml").string(), "--name", "named.csv"}).code == 0);
    unsetenv("MPLAB_OUT_DIR");
    CHECK(read_file(t / "env" / "named.csv") == ta);
}

TEST_CASE("atomic writes leave either the old file or the new one") {
    TempDir t("atomic");
    write_file_atomic(t / "f.txt", "first\n");
    write_file_atomic(t / "f.txt", "second\n");
    CHECK(read_file(t / "f.txt") == "second\n");
    fs::create_directories(t / "dir.csv");
    CHECK_THROWS_AS(write_file_atomic(t / "dir.csv", "payload"), IoError);
    CHECK(fs::is_directory(t / "dir.csv"));
    int entries = 0;
    for (const auto& e : fs::directory_iterator(t.path)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 2);  // no temp files left behind
}

TEST_CASE("empty tables and repeated writes") {
    TempDir t("empty");
    write_results({}, t / "e.csv");
    CHECK(read_file(t / "e.csv") == "strategy,epsilon,alpha,prune_ratio,seed,corr_error,clean_error,robust_error\n");
    write_margin_manifest(t / "m.csv", {});
    CHECK(read_file(t / "m.csv") == "sample_id,margin,method,iterations\n");
    SweepRow r;
    r.strategy = "none";
    r.alpha = 2.0;
    r.corr_error = 0.1;
    write_results({r}, t / "x.csv");
    std::string once = read_file(t / "x.csv");
    write_results({r}, t / "x.csv");
    CHECK(read_file(t / "x.csv") == once);
}

TEST_CASE("schedule command applies the clamp at 8/255") {
    TempDir t("schedule");
    write_margin_manifest(t / "m.csv", {{0, 2.0 / 255, MarginMethod::analytic, 0, true},
                                        {1, 20.0 / 255, MarginMethod::analytic, 0, true},
                                        {2, -10.0 / 255, MarginMethod::analytic, 0, true}});
    Run r = cli({"schedule", (t / "m.csv").string(), "--eps", "8/255", "--gap", "0", "--out", t.path.string()});
    REQUIRE(r.code == 0);
    auto rows = lines_of(read_file(t / "schedule.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "sample_id,margin,epsilon_i");
    CHECK(rows[1] == "0,0.00784313725,0.00784313725");
    CHECK(rows[2] == "1,0.0784313725,0.031372549");
    CHECK(rows[3] == "2,-0.0392156863,-0.031372549");

    REQUIRE(cli({"schedule", (t / "m.csv").string(), "--eps", "8/255", "--gap", "1/255", "--out", t.path.string(),
                 "--name", "g.csv"})
                .code == 0);
    EpsilonSchedule g = parse_schedule(read_file(t / "g.csv"));
    CHECK(g.eps_i[0] == doctest::Approx(1.0 / 255).epsilon(1e-9));
    CHECK(cli({"schedule", (t / "m.csv").string(), "--eps", "8/255", "--gap", "8/255"}).code == 1);
}

TEST_CASE("train, margin, prune and fit chain together") {
    TempDir t("chain");
    write_file_atomic(t / "run.yaml", R"(task: perceptron
seed: 3
model:
  K: 12
data:
  alpha: 8
train:
  epsilon: 0.05
  epochs: 4
sweep:
  n_test: 200
pruning:
  strategy: pe
  ratio: 0.25
  schedule: true
  gap: 1/100
)");
    Run tr = cli({"train", (t / "run.yaml").string(), "--out", (t / "run").string(), "--write-data"});
    REQUIRE(tr.code == 0);
    for (const char* f : {"model.txt", "plan.txt", "schedule.csv", "metrics.json", "data.csv"}) {
        CHECK(fs::exists(t / "run" / f));
    }
    PruningPlan plan = read_plan(t / "run" / "plan.txt");
    CHECK(plan.retained.size() == 96);
    CHECK(plan.strategy == PruneStrategy::prune_easy);
    CHECK(read_file(t / "run" / "metrics.json").find("\"corr_error\"") != std::string::npos);

    const std::string model = (t / "run" / "model.txt").string();
    const std::string data = (t / "run" / "data.csv").string();
    REQUIRE(cli({"margin", model, data, "--method", "analytic", "--out", t.path.string()}).code == 0);
    REQUIRE(cli({"margin", model, data, "--method", "deepfool", "--out", t.path.string()}).code == 0);
    REQUIRE(cli({"margin", model, data, "--method", "fast", "--step", "1/1000", "--out", t.path.string()}).code == 0);
    REQUIRE(cli({"margin", model, data, "--method", "online", "--eps", "8/255", "--out", t.path.string()}).code == 0);
    CHECK(cli({"margin", model, data, "--method", "online", "--out", t.path.string()}).code == 1);
    CHECK(cli({"margin", model, data, "--method", "magic"}).code == 1);

    auto an = read_margin_manifest(t / "margins_analytic.csv");
    auto df = read_margin_manifest(t / "margins_deepfool.csv");
    auto fa = read_margin_manifest(t / "margins_fast.csv");
    auto on = read_margin_manifest(t / "margins_online.csv");
    REQUIRE(an.size() == df.size());
    REQUIRE(an.size() == 128);
    for (std::size_t i = 0; i < an.size(); ++i) {
        CHECK(an[i].sample_id == df[i].sample_id);
        CHECK(std::abs(an[i].margin - df[i].margin) <= 1e-6);
        CHECK((fa[i].margin >= 0) == (an[i].margin >= 0));
        CHECK(on[i].margin <= 8.0 / 255 + 1e-12);
    }

    REQUIRE(cli({"prune", (t / "margins_analytic.csv").string(), "--strategy", "pe", "--ratio", "0.25", "--out",
                 t.path.string()})
                .code == 0);
    PruningPlan p = read_plan(t / "plan.txt");
    CHECK(p.retained.size() == 96);
    CHECK(p.manifest_hash == fnv1a64(read_file(t / "margins_analytic.csv")));
    REQUIRE(cli({"prune", (t / "margins_analytic.csv").string(), "--strategy", "filter", "--threshold", "0",
                 "--out", t.path.string(), "--name", "f.txt"})
                .code == 0);
    for (auto id : read_plan(t / "f.txt").retained) CHECK(an[static_cast<std::size_t>(id)].margin >= 0.0);
}

TEST_CASE("fit command prints one slope per group") {
    TempDir t("fit");
    std::vector<SweepRow> rows;
    for (double a : {2.0, 4.0, 8.0, 16.0}) {
        SweepRow r;
        r.strategy = "none";
        r.alpha = a;
        r.corr_error = 0.3 / a;
        r.clean_error = 0.1 / std::sqrt(a);
        r.robust_error = 0.2;
        rows.push_back(r);
    }
    write_results(rows, t / "s.csv");
    Run r = cli({"fit", (t / "s.csv").string()});
    REQUIRE(r.code == 0);
    auto out = lines_of(r.out);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == "strategy,epsilon,prune_ratio,slope,intercept,residual");
    CHECK(out[1].rfind("none,0,0,-1,", 0) == 0);
    Run c = cli({"fit", (t / "s.csv").string(), "--metric", "clean_error", "--alpha-min", "4"});
    CHECK(lines_of(c.out)[1].rfind("none,0,0,-0.5,", 0) == 0);
}

TEST_CASE("toy network training writes its artifacts") {
    TempDir t("toy");
    write_file_atomic(t / "toy.yaml", R"(task: toy-mlp
seed: 1
model:
  hidden: 8
  classes: 3
data:
  n: 300
train:
  epsilon: 0.05
  epochs: 3
  lr: 0.1
  attack: pgd
sweep:
  n_test: 100
)");
    Run r = cli({"train", (t / "toy.yaml").string(), "--out", t.path.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("test_accuracy") != std::string::npos);
    REQUIRE(cli({"margin", (t / "model.txt").string(), (t / "data.csv").string(), "--method", "deepfool", "--out",
                 t.path.string()})
                .code == 0);
    CHECK(read_margin_manifest(t / "margins_deepfool.csv").size() == 300);
    CHECK(cli({"margin", (t / "model.txt").string(), (t / "data.csv").string(), "--method", "analytic", "--out",
               t.path.string()})
              .code == 2);
}
