#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dpcr/commands.hpp"
#include "dpcr/config.hpp"
#include "dpcr/error.hpp"
#include "dpcr/report.hpp"
#include "test_support.hpp"

using namespace dpcr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig sim_config(const fs::path& out, DriftKind kind = DriftKind::orthogonal) {
    RunConfig c;
    c.source.scenario.seed = 3;
    c.source.scenario.dim = 6;
    c.source.scenario.tasks = 3;
    c.source.scenario.classes_per_task = 4;
    c.source.scenario.train_per_class = 30;
    c.source.scenario.test_per_class = 15;
    c.source.scenario.drift_kind = kind;
    c.output.directory = out;
    c.threads = 1;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json without_timing(json doc) {
    doc.erase(kWallTimeKey);
    return doc;
}

#ifdef DPCR_CLI_PATH
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + DPCR_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_CASE("generate: file count and reproducibility") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_generate");
    std::ostringstream log;
    const auto files = cmd_generate(sim_config(root / "a"), log);
    std::size_t train = 0;
    for (const auto& f : files) train += f.filename().string().find("_train") != std::string::npos;
    CHECK(train == 3 * 2);
    CHECK(fs::exists(root / "a" / "manifest.json"));
    const json manifest = json::parse(slurp(root / "a" / "manifest.json"));
    CHECK(manifest["seed"] == 3);
    CHECK(manifest["ground_truth_drift"].size() == 2);
    CHECK(manifest["ground_truth_drift"][0]["orthogonality_error"].get<double>() < 1e-10);

    cmd_generate(sim_config(root / "b"), log);
    for (const auto& f : files) CHECK(slurp(f) == slurp(root / "b" / f.filename()));

    // The generated stream is a complete dump source for every method.
    RunConfig from_dumps = sim_config(root / "dump_run");
    from_dumps.source.kind = SourceConfig::Kind::dumps;
    from_dumps.source.directory = root / "a";
    for (const char* m : {"DPCR", "FROZEN-RIDGE", "NCM-RAW"}) {
        from_dumps.method.name = method_from_string(m);
        CHECK_NOTHROW(cmd_run(from_dumps, log));
    }

    RunConfig bad = sim_config(root / "c");
    bad.source.kind = SourceConfig::Kind::dumps;
    CHECK_THROWS_AS(cmd_generate(bad, log), ConfigError);
}

TEST_CASE("run: summary line and outputs") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_run");
    std::ostringstream out;
    const ProtocolResult r = cmd_run(sim_config(root), out);
    CHECK(out.str() == summary_line(r.metrics) + "\n");
    CHECK(out.str().rfind("A_f=", 0) == 0);
    CHECK(out.str().find(" A_avg=") != std::string::npos);

    const json doc = json::parse(slurp(root / "results.json"));
    CHECK(doc["config"] == sim_config(root).to_json());
    CHECK(doc["metrics"]["A_f"].get<double>() == r.metrics.final_accuracy);
    CHECK(doc["persistent_state"]["classes"] == 12);
    CHECK(fs::exists(root / "accuracy.csv"));
    CHECK(fs::exists(root / "state.dpck"));
    const std::string csv = slurp(root / "accuracy.csv");
    CHECK(csv.rfind("after_task,eval_task,accuracy,test_count\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 6);
}

TEST_CASE("run: identical config gives identical results") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_determinism");
    std::ostringstream out;
    cmd_run(sim_config(root), out);
    const json first = json::parse(slurp(root / "results.json"));
    cmd_run(sim_config(root), out);
    const json second = json::parse(slurp(root / "results.json"));
    CHECK(without_timing(first) == without_timing(second));
}

TEST_CASE("run: zero drift prints the frozen-ridge accuracy") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_zero");
    RunConfig c = sim_config(root, DriftKind::none);
    c.source.scenario.observation_noise_std = 0.0;
    std::ostringstream out;
    const double dpcr = cmd_run(c, out).metrics.final_accuracy;
    c.method.name = MethodName::frozen_ridge;
    const double frozen = cmd_run(c, out).metrics.final_accuracy;
    CHECK(std::abs(dpcr - frozen) <= 1e-3);
}

TEST_CASE("ablate: presets and error rows") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_ablate");
    std::ostringstream out;
    RunConfig c = sim_config(root);
    CHECK(cmd_ablate(c, out).size() == 4);
    const std::string ladder = slurp(root / "grid.csv");
    for (const char* name : {"\nRRCR,", "\nRRCR+TSSP,", "\nRRCR+TSSP+CIP,", "\nDPCR,"}) {
        CHECK(ladder.find(name) != std::string::npos);
    }

    c.ablation.preset = "gamma-sweep";
    const auto rows = cmd_ablate(c, out);
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].variant.gamma <= rows[i].variant.gamma);

    c.ablation.preset = "custom";
    c.ablation.methods = {"DPCR"};
    c.ablation.gammas = {-5.0, 1.0};
    const auto mixed = cmd_ablate(c, out);
    CHECK(!mixed[0].ok);
    CHECK(mixed[1].ok);
    CHECK(slurp(root / "grid.csv").find(",error,") != std::string::npos);
}

TEST_CASE("inspect: dumps, checkpoints and corrupt files") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_inspect");
    std::mt19937_64 rng(5);
    std::vector<ClassId> labels(100);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<ClassId>(i % 4);
    write_dump(root / "d.emb", labels, Matrix::Ones(100, 3));
    std::ostringstream dump;
    cmd_inspect(root / "d.emb", dump);
    CHECK(dump.str().find("dim: 3") != std::string::npos);
    CHECK(dump.str().find("records: 100") != std::string::npos);
    CHECK(dump.str().find("label 2: 25") != std::string::npos);

    std::ostringstream out;
    cmd_run(sim_config(root / "run"), out);
    std::ostringstream cp;
    cmd_inspect(root / "run" / "state.dpck", cp);
    CHECK(cp.str().find("task_count: 3") != std::string::npos);
    CHECK(cp.str().find("classes: 12") != std::string::npos);
    CHECK(cp.str().find("dim: 6") != std::string::npos);

    std::ofstream(root / "junk.bin") << "garbage bytes";
    CHECK_THROWS_AS(cmd_inspect(root / "junk.bin", out), FormatError);
}

#ifdef DPCR_CLI_PATH
TEST_CASE("cli: exit codes and overrides") {
    const fs::path root = dpcr::testing::scratch_dir("cmd_cli");
    RunConfig c = sim_config(root / "out");
    std::ofstream(root / "run.json") << c.to_json().dump(2);

    CHECK(run_cli("run --config " + (root / "run.json").string() + " --method dp-ncm", root / "log1") == 0);
    const std::string printed = slurp(root / "log1");
    CHECK(printed.rfind("A_f=", 0) == 0);
    const json doc = json::parse(slurp(root / "out" / "results.json"));
    CHECK(doc["method"]["name"] == "DP-NCM");
    CHECK(doc["config"]["method"]["name"] == "DP-NCM");

    CHECK(run_cli("generate --config " + (root / "run.json").string() + " --out " + (root / "dumps").string(),
                  root / "log2") == 0);
    fs::remove(root / "dumps" / "task3_backbone2_train.emb");
    RunConfig d = c;
    d.source.kind = SourceConfig::Kind::dumps;
    d.source.directory = root / "dumps";
    std::ofstream(root / "dumps.json") << d.to_json().dump(2);
    CHECK(run_cli("run --config " + (root / "dumps.json").string(), root / "log3") != 0);
    CHECK(slurp(root / "log3").find("task3_backbone2_train.emb") != std::string::npos);

    std::ofstream(root / "bad.json") << R"({"source": {"scenario": {}}})";
    CHECK(run_cli("run --config " + (root / "bad.json").string(), root / "log4") == 2);
    CHECK(slurp(root / "log4").find("source.scenario.dim") != std::string::npos);

    std::ofstream(root / "junk.bin") << "garbage";
    CHECK(run_cli("inspect " + (root / "junk.bin").string(), root / "log5") != 0);
    CHECK(run_cli("inspect " + (root / "out" / "state.dpck").string(), root / "log6") == 0);
}
#endif
