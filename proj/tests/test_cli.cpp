#include "doctest.h"

#include "regvar/cli.hpp"
#include "regvar/io.hpp"
#include "regvar/manifest.hpp"

#include "support.hpp"

#include "json.hpp"

#include <cstdlib>
#include <sstream>

using namespace regvar;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"register", "--bogus"}).code == 1);
    CHECK(run({"register", "--out", "x"}).code == 1);  // neither a pair nor a manifest
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("synth -> register -> eval on a zero-magnitude pair") {
    testing::ScratchDir tmp("regvar_cli");
    const std::string d = tmp.path.string();
    REQUIRE(run({"synth", "--pairs", "1", "--magnitude", "0", "--out", d + "/data"}).code == 0);
    const PairManifest m = read_manifest(d + "/data/manifest.json");
    REQUIRE(m.size() == 1);

    REQUIRE(run({"register", "--fixed", m[0].fixed.string(), "--moving", m[0].moving.string(), "--fixed-labels",
                 m[0].fixed_labels.string(), "--moving-labels", m[0].moving_labels.string(), "--max-iters", "20",
                 "--out", d + "/res"})
                .code == 0);
    const auto report = nlohmann::json::parse(testing::slurp(d + "/res/report.json"));
    CHECK(report.at("evaluation").at("mean_dice") == 1.0);
    CHECK(report.at("evaluation").at("folding_pct") == 0.0);
    CHECK(fs::exists(d + "/res/timing.json"));
    CHECK(fs::exists(d + "/res/evaluation.csv"));

    const Run ev = run({"eval", "--field", d + "/res/field.raw", "--fixed-labels", m[0].fixed_labels.string(),
                        "--moving-labels", m[0].moving_labels.string(), "--diff-fixed", m[0].fixed.string(),
                        "--diff-moving", m[0].moving.string(), "--diff-out", d + "/diff.pgm"});
    REQUIRE(ev.code == 0);
    const auto j = nlohmann::json::parse(ev.out);
    CHECK(j.at("mean_dice") == 1.0);
    CHECK(j.at("folding_pct") == 0.0);
    CHECK(fs::exists(d + "/diff.pgm"));
}

TEST_CASE("register echoes defaults and supports unsupervised mode") {
    testing::ScratchDir tmp("regvar_cli");
    const std::string d = tmp.path.string();
    REQUIRE(run({"synth", "--pairs", "1", "--magnitude", "2", "--seed", "3", "--out", d + "/data"}).code == 0);
    const PairManifest m = read_manifest(d + "/data/manifest.json");
    REQUIRE(run({"register", "--fixed", m[0].fixed.string(), "--moving", m[0].moving.string(), "--beta", "0",
                 "--max-iters", "5", "--out", d + "/un"})
                .code == 0);
    const auto report = nlohmann::json::parse(testing::slurp(d + "/un/report.json"));
    const auto& cfg = report.at("config");
    CHECK(cfg.at("delta") == 1.0);
    CHECK(cfg.at("alpha") == 1000.0);
    CHECK(cfg.at("beta") == 0.0);
    CHECK(cfg.at("epsilon") == 0.1);
    CHECK(cfg.at("levels") == 3);
    CHECK_FALSE(report.contains("evaluation"));
    CHECK_FALSE(fs::exists(d + "/un/evaluation.csv"));

    REQUIRE(run({"register", "--fixed", m[0].fixed.string(), "--moving", m[0].moving.string(), "--max-iters", "1",
                 "--out", d + "/def"})
                .code == 0);
    const auto def = nlohmann::json::parse(testing::slurp(d + "/def/report.json")).at("config");
    CHECK(def.at("beta") == 50000.0);
    CHECK(def.at("alpha") == 1000.0);

    // Config file, overridden by a flag.
    io::write_text(d + "/cfg.json", R"({"alpha": 5.0, "max_iters": 2, "levels": 2})");
    REQUIRE(run({"register", "--fixed", m[0].fixed.string(), "--moving", m[0].moving.string(), "--config",
                 d + "/cfg.json", "--levels", "1", "--out", d + "/cfg"})
                .code == 0);
    const auto c = nlohmann::json::parse(testing::slurp(d + "/cfg/report.json")).at("config");
    CHECK(c.at("alpha") == 5.0);
    CHECK(c.at("max_iters") == 2);
    CHECK(c.at("levels") == 1);

    CHECK(run({"register", "--fixed", m[0].fixed.string(), "--moving", m[0].moving.string(), "--alpha", "-1",
               "--out", d + "/neg"})
              .code == 1);
    CHECK(run({"register", "--fixed", m[0].fixed.string(), "--moving", m[0].moving.string(), "--delta", "1e308",
               "--levels", "1", "--out", d + "/inf"})
              .code == 2);
}

TEST_CASE("ablate, augment and diff") {
    testing::ScratchDir tmp("regvar_cli");
    const std::string d = tmp.path.string();
    REQUIRE(run({"synth", "--pairs", "2", "--magnitude", "2", "--out", d + "/data"}).code == 0);

    const Run abl = run({"ablate", "--manifest", d + "/data/manifest.json", "--param", "alpha", "--factors", "1,0",
                         "--max-iters", "2", "--levels", "1"});
    REQUIRE(abl.code == 0);
    CHECK(abl.out.rfind("factor,dice_mean,folding_pct\n1,", 0) == 0);
    CHECK(std::count(abl.out.begin(), abl.out.end(), '\n') == 3);
    CHECK(run({"ablate", "--manifest", d + "/data/manifest.json", "--param", "gamma"}).code == 1);

    REQUIRE(run({"augment", "--manifest", d + "/data/manifest.json", "--seed", "1", "--out", d + "/aug"}).code == 0);
    const PairManifest aug = read_manifest(d + "/aug/manifest.json");
    CHECK(aug.size() == 16);
    CHECK_FALSE(aug[0].ground_truth.has_value());
    CHECK(aug[0].has_labels());

    const PairManifest m = read_manifest(d + "/data/manifest.json");
    REQUIRE(run({"diff", "--a", m[0].fixed.string(), "--b", m[0].fixed.string(), "--out", d + "/same.pgm"}).code == 0);
    const Image2D same = io::read_pgm_image(d + "/same.pgm");
    for (double v : same.data()) CHECK(std::abs(v - 0.5) <= 1.0 / 255.0);
}

TEST_CASE("batch results do not depend on --jobs and REGVAR_SEED is the fallback seed") {
    testing::ScratchDir tmp("regvar_cli");
    const std::string d = tmp.path.string();
    ::setenv("REGVAR_SEED", "77", 1);
    REQUIRE(run({"synth", "--pairs", "3", "--magnitude", "3", "--out", d + "/a"}).code == 0);
    REQUIRE(run({"synth", "--pairs", "3", "--magnitude", "3", "--seed", "77", "--out", d + "/b"}).code == 0);
    ::unsetenv("REGVAR_SEED");
    CHECK(testing::slurp(d + "/a/pair001_gt_field.raw") == testing::slurp(d + "/b/pair001_gt_field.raw"));

    const std::string man = d + "/a/manifest.json";
    REQUIRE(run({"register", "--manifest", man, "--jobs", "1", "--max-iters", "5", "--out", d + "/r1"}).code == 0);
    REQUIRE(run({"register", "--manifest", man, "--jobs", "3", "--max-iters", "5", "--out", d + "/r3"}).code == 0);
    CHECK(testing::slurp(d + "/r1/evaluation.csv") == testing::slurp(d + "/r3/evaluation.csv"));
    CHECK(testing::slurp(d + "/r1/pair002/field.raw") == testing::slurp(d + "/r3/pair002/field.raw"));

    const Run e1 = run({"eval", "--manifest", man, "--results", d + "/r1", "--jobs", "1"});
    const Run e4 = run({"eval", "--manifest", man, "--results", d + "/r1", "--jobs", "4"});
    REQUIRE(e1.code == 0);
    CHECK(e1.out == e4.out);
    CHECK(e1.out == testing::slurp(d + "/r1/evaluation.csv"));

    ::setenv("REGVAR_SEED", "nope", 1);
    CHECK(run({"synth", "--pairs", "1", "--out", d + "/c"}).code == 1);
    ::unsetenv("REGVAR_SEED");
}
