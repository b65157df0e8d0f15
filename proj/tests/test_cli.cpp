#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ermtree/core.hpp"
#include "ermtree/io_util.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

using namespace ermtree;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// spawns the installed binary (path from ERMTREE_BIN) with a scratch
// directory per test case; stdout and stderr are captured to files so the
// test log stays readable
struct Cli {
    std::string bin;
    fs::path dir;

    explicit Cli(const std::string& name) {
        const char* env = std::getenv("ERMTREE_BIN");
        REQUIRE_MESSAGE(env != nullptr, "ERMTREE_BIN must point at the cli binary");
        bin = env;
        dir = fs::current_path() / ("cli_scratch_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }

    int run(const std::string& args, std::string* out = nullptr) {
        std::string cmd = "\"" + bin + "\" " + args + " > \"" +
                          (dir / "stdout.txt").string() + "\" 2> \"" +
                          (dir / "stderr.txt").string() + "\"";
        int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        if (out) *out = read_file((dir / "stdout.txt").string());
        return WEXITSTATUS(rc);
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    void write(const std::string& name, const std::string& content) const {
        atomic_write_file(path(name), content);
    }
};

const char* kFourPoints = "x1,y\n0.1,0\n0.2,0\n0.8,1\n0.9,1\n";

} // namespace

TEST_CASE("cli fit: constrained and penalized routes") {
    Cli cli("fit");
    cli.write("four.csv", kFourPoints);

    std::string out;
    int code = cli.run("fit --data " + cli.path("four.csv") +
                           " --loss reg --leaves 2 --out " + cli.path("m2.json"),
                       &out);
    CHECK(code == 0);
    json line = json::parse(out);
    CHECK(line.at("empirical_risk").get<double>() == 0.0);
    CHECK(line.at("leaves").get<size_t>() == 2);

    RiskValue risk;
    TreeModel model = tree_from_json(read_file(cli.path("m2.json")), &risk);
    CHECK(model.n_leaves() == 2);
    CHECK(risk.mean == 0.0);
    CHECK(model.predict(std::vector<double>{0.15}) == 0.0);
    CHECK(model.predict(std::vector<double>{0.85}) == 1.0);

    // a single leaf carries the grand mean, so the risk is the variance
    code = cli.run("fit --data " + cli.path("four.csv") + " --leaves 1 --out " +
                       cli.path("m1.json"),
                   &out);
    CHECK(code == 0);
    CHECK(json::parse(out).at("empirical_risk").get<double>() ==
          doctest::Approx(0.25).epsilon(1e-12));

    // a tiny penalty keeps the full split, a huge one collapses to the root
    code = cli.run("fit --data " + cli.path("four.csv") +
                       " --lambda 0.01 --out " + cli.path("mp.json"),
                   &out);
    CHECK(code == 0);
    CHECK(json::parse(out).at("leaves").get<size_t>() == 2);
    code = cli.run("fit --data " + cli.path("four.csv") + " --lambda 10 --out " +
                       cli.path("mp2.json"),
                   &out);
    CHECK(code == 0);
    CHECK(json::parse(out).at("leaves").get<size_t>() == 1);
}

TEST_CASE("cli fit: flag and input validation exits 2") {
    Cli cli("fit_bad");
    cli.write("four.csv", kFourPoints);
    cli.write("bad.csv", "x1,y\n0.1,zero\n");
    cli.write("nonbin.csv", "x1,y\n0.1,0.5\n0.9,1\n");

    // malformed number: config error, and no half-written model appears
    CHECK(cli.run("fit --data " + cli.path("bad.csv") + " --leaves 2 --out " +
                  cli.path("never.json")) == 2);
    CHECK(!fs::exists(cli.path("never.json")));

    CHECK(cli.run("fit --data " + cli.path("four.csv") +
                  " --leaves 2 --lambda 0.1 --out " + cli.path("x.json")) == 2);
    CHECK(cli.run("fit --data " + cli.path("four.csv") + " --out " +
                  cli.path("x.json")) == 2);
    CHECK(cli.run("fit --data " + cli.path("nonbin.csv") +
                  " --loss cls --leaves 2 --out " + cli.path("x.json")) == 2);
    CHECK(cli.run("fit --data " + cli.path("four.csv") +
                  " --loss cls --leaves 2 --sup-bound 1 --out " +
                  cli.path("x.json")) == 2);
    CHECK(!fs::exists(cli.path("x.json")));
}

TEST_CASE("cli gen: reruns are byte-identical and manifests are complete") {
    Cli cli("gen");
    cli.write("gen.json", json{
        {"seed", 11},
        {"n", 64},
        {"world", {{"kind", "pshab"}, {"d", 1}, {"B", 2}, {"bumps_per_piece", 2}}},
        {"noise", {{"kind", "gaussian"}, {"K", 0.5}}},
        {"output", {{"dir", cli.path("a")}}},
    }.dump());

    CHECK(cli.run("gen --config " + cli.path("gen.json")) == 0);
    CHECK(cli.run("gen --config " + cli.path("gen.json") + " --out-dir " +
                  cli.path("b")) == 0);
    for (const char* f : {"data.csv", "spec.json", "truth.json"})
        CHECK(read_file(cli.path("a/") + f) == read_file(cli.path("b/") + f));

    json manifest = json::parse(read_file(cli.path("a/truth.json")));
    CHECK(manifest.at("kind") == "pshab");
    CHECK(manifest.at("n").get<size_t>() == 64);
    CHECK(manifest.at("abar").size() == 2);
    CHECK(manifest.at("noise").at("K").get<double>() == 0.5);
    Dataset data = read_csv_dataset(cli.path("a/data.csv"));
    CHECK(data.n() == 64);
    CHECK(data.d() == 1);

    // classification worlds: labels are 0/1, the margin step lands in the
    // manifest, and a noise section is rejected
    cli.write("cls.json", json{
        {"seed", 3},
        {"n", 50},
        {"world", {{"kind", "hypercube"}, {"r", 4}, {"w_fraction", 0.9}}},
        {"output", {{"dir", cli.path("c")}}},
    }.dump());
    CHECK(cli.run("gen --config " + cli.path("cls.json")) == 0);
    json cm = json::parse(read_file(cli.path("c/truth.json")));
    CHECK(cm.at("kind") == "hypercube");
    CHECK(cm.at("b").get<double>() > 0.0);
    CHECK(cm.at("eta_step").at("mass").get<double>() == doctest::Approx(0.9));
    CHECK(read_csv_dataset(cli.path("c/data.csv")).labels_binary());

    cli.write("cls_noise.json", json{
        {"seed", 3},
        {"n", 50},
        {"world", {{"kind", "hypercube"}}},
        {"noise", {{"kind", "gaussian"}, {"K", 1.0}}},
        {"output", {{"dir", cli.path("d")}}},
    }.dump());
    CHECK(cli.run("gen --config " + cli.path("cls_noise.json")) == 2);
    CHECK(!fs::exists(cli.path("d")));
}

TEST_CASE("cli gen: file worlds resolve relative to the config") {
    Cli cli("gen_file");
    cli.write("gen.json", json{
        {"seed", 21},
        {"n", 40},
        {"world", {{"kind", "pshab"}, {"d", 1}, {"bumps_per_piece", 1}}},
        {"output", {{"dir", cli.path("a")}}},
    }.dump());
    CHECK(cli.run("gen --config " + cli.path("gen.json")) == 0);

    // reuse the emitted spec through a relative path: same world, new draw
    cli.write("reuse.json", json{
        {"seed", 21},
        {"n", 40},
        {"world", {{"kind", "file"}, {"path", "a/spec.json"}}},
        {"output", {{"dir", cli.path("e")}}},
    }.dump());
    CHECK(cli.run("gen --config " + cli.path("reuse.json")) == 0);
    CHECK(read_file(cli.path("a/spec.json")) == read_file(cli.path("e/spec.json")));
    CHECK(read_file(cli.path("a/data.csv")) == read_file(cli.path("e/data.csv")));
}

TEST_CASE("cli sweep: rate target gate drives the exit code") {
    Cli cli("sweep_rate");
    json cfg{
        {"seed", 7},
        {"world", {{"kind", "pshab"}, {"d", 1}, {"B", 1}, {"bumps_per_piece", 2}}},
        {"noise", {{"kind", "gaussian"}, {"K", 0.25}}},
        {"solver", {{"M", 1.0}}},
        {"sweep",
         {{"kind", "rate-reg"},
          {"n_grid", {64, 128, 256}},
          {"reps", 3},
          {"n_test", 5000},
          {"target", -2.0 / 3.0},
          {"tolerance", 2.0}}},
        {"output", {{"dir", cli.path("ok")}}},
    };
    cli.write("rate.json", cfg.dump());
    CHECK(cli.run("sweep --config " + cli.path("rate.json")) == 0);
    json summary = json::parse(read_file(cli.path("ok/summary.json")));
    CHECK(summary.at("kind") == "rate-reg");
    CHECK(summary.at("pass").get<bool>());
    CHECK(summary.at("points").size() == 3);
    std::string csv = read_file(cli.path("ok/sweep.csv"));
    CHECK(csv.rfind("sweep_var,value,median_excess,iqr,reps\n", 0) == 0);

    // the same experiment against an absurd exponent: runs fine, fails the gate
    cfg["sweep"]["target"] = -6.0;
    cfg["output"]["dir"] = cli.path("bad");
    cli.write("rate_bad.json", cfg.dump());
    CHECK(cli.run("sweep --config " + cli.path("rate_bad.json")) == 1);
    CHECK_FALSE(
        json::parse(read_file(cli.path("bad/summary.json"))).at("pass").get<bool>());

    // reruns of the passing config are byte-identical
    cfg["sweep"]["target"] = -2.0 / 3.0;
    cfg["output"]["dir"] = cli.path("ok2");
    cli.write("rate2.json", cfg.dump());
    CHECK(cli.run("sweep --config " + cli.path("rate2.json")) == 0);
    CHECK(read_file(cli.path("ok/sweep.csv")) == read_file(cli.path("ok2/sweep.csv")));
}

TEST_CASE("cli sweep: consistency batteries pass and reject bad configs") {
    Cli cli("sweep_batteries");
    cli.write("enum.json", json{
        {"seed", 3},
        {"sweep", {{"kind", "enum-check"}}},
        {"output", {{"dir", cli.path("enum")}}},
    }.dump());
    CHECK(cli.run("sweep --config " + cli.path("enum.json")) == 0);
    json es = json::parse(read_file(cli.path("enum/summary.json")));
    CHECK(es.at("pass").get<bool>());
    CHECK(es.at("hand_checked").get<size_t>() == 2);
    std::string csv = read_file(cli.path("enum/sweep.csv"));
    CHECK(csv.find("2,1,2,3,4\n") != std::string::npos);
    CHECK(csv.find("2,2,2,5,16\n") != std::string::npos);

    cli.write("alloc.json", json{
        {"seed", 4},
        {"sweep", {{"kind", "alloc-check"}, {"grid_steps", 200}}},
        {"output", {{"dir", cli.path("alloc")}}},
    }.dump());
    CHECK(cli.run("sweep --config " + cli.path("alloc.json")) == 0);
    json as = json::parse(read_file(cli.path("alloc/summary.json")));
    CHECK(as.at("bracket").at("violations").get<size_t>() == 0);
    CHECK(as.at("grid").at("violations").get<size_t>() == 0);

    // unknown keys and malformed seeds are config errors; nothing is written
    cli.write("typo.json", json{
        {"seed", 3},
        {"sweep", {{"kind", "enum-check"}, {"n_vals", {2}}}},
        {"output", {{"dir", cli.path("typo")}}},
    }.dump());
    CHECK(cli.run("sweep --config " + cli.path("typo.json")) == 2);
    CHECK(!fs::exists(cli.path("typo")));
    cli.write("negseed.json", "{\"seed\": -4, \"sweep\": {\"kind\": \"enum-check\"}, "
                              "\"output\": {\"dir\": \"x\"}}");
    CHECK(cli.run("sweep --config " + cli.path("negseed.json")) == 2);
    CHECK(cli.run("sweep --config " + cli.path("missing.json")) == 2);
}

TEST_CASE("cli enumerate: counts, bound, and the envelope guard") {
    Cli cli("enumerate");
    cli.write("four.csv", kFourPoints);
    std::string out;
    CHECK(cli.run("enumerate --data " + cli.path("four.csv") + " --leaves 2", &out) == 0);
    json j = json::parse(out);
    CHECK(j.at("count").get<uint64_t>() == 5); // root plus one split per value
    CHECK(j.at("bound").get<uint64_t>() == 16);
    CHECK(j.at("within").get<bool>());

    std::string big = "x1,y\n";
    for (int i = 0; i < 20; ++i)
        big += format_double(0.01 * double(i + 1)) + ",1\n";
    cli.write("big.csv", big);
    CHECK(cli.run("enumerate --data " + cli.path("big.csv") + " --leaves 3") == 3);
}

TEST_CASE("cli help exits 0") {
    Cli cli("help");
    CHECK(cli.run("--help") == 0);
    CHECK(cli.run("sweep --help") == 0);
    CHECK(cli.run("definitely-not-a-command") == 2);
}
