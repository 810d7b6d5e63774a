#include <doctest.h>

#include "bclab/chainio.hpp"
#include "bclab/cli.hpp"
#include "bclab/experiment.hpp"
#include "bclab/example_chain.hpp"
#include "bclab/hash.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace bclab;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = BCLAB_FIXTURES_DIR;

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("bclab_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

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

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Scenario small_scenario(std::uint64_t seed) {
    ScenarioConfig c;
    c.entities = 15;
    c.transactions = 300;
    c.defaults.coinjoin = 0.05;
    c.peel_chains = {{4, 0.1, 5 * kCoin}};
    c.seed = seed;
    return generate(c);
}

}  // namespace

TEST_CASE("chain dump round trip") {
    Scenario s = small_scenario(5);
    std::stringstream buf;
    write_chain_jsonl(buf, s.chain);
    auto back = read_chain_jsonl(buf, "mem");
    REQUIRE(back.size() == s.chain.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].hash() == s.chain[i].hash());
        CHECK(back[i].txs.size() == s.chain[i].txs.size());
    }
    // The committed example chain still reads back to the built one.
    auto ex = running_example();
    auto fixture = read_chain_jsonl(kFixtures / "running_example.jsonl");
    REQUIRE(fixture.size() == ex.chain.size());
    for (std::size_t i = 0; i < ex.chain.size(); ++i) CHECK(fixture[i].hash() == ex.chain[i].hash());
}

TEST_CASE("chain dump errors carry the line number") {
    Scenario s = small_scenario(6);
    std::stringstream buf;
    write_chain_jsonl(buf, s.chain);
    std::vector<std::string> lines;
    for (std::string l; std::getline(buf, l);) lines.push_back(l);
    REQUIRE(lines.size() >= 3);

    auto expect_error = [](const std::string& text, const std::string& prefix) {
        std::istringstream in(text);
        try {
            read_chain_jsonl(in, "c.jsonl");
            FAIL("no error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).rfind(prefix, 0) == 0);
        }
    };
    // Swapped blocks break the parent link on line 2.
    expect_error(lines[0] + "\n" + lines[2] + "\n", "c.jsonl:2:");
    expect_error(lines[0] + "\n{not json\n", "c.jsonl:2:");
    std::string tampered = lines[1];
    auto pos = tampered.find("\"nonce\":");
    REQUIRE(pos != std::string::npos);
    tampered.insert(pos + 8, "1");
    expect_error(lines[0] + "\n" + tampered + "\n", "c.jsonl:2:");
}

TEST_CASE("ground truth round trip") {
    Scenario s = small_scenario(7);
    fs::path dir = scratch("gt");
    write_ground_truth(dir, s.truth, s.chain);
    GroundTruth back = read_ground_truth(dir);
    CHECK(back.owner == s.truth.owner);
    CHECK(back.origin_peer == s.truth.origin_peer);
    CHECK(back.coinjoins == s.truth.coinjoins);
    CHECK(back.marked == s.truth.marked);
    REQUIRE(back.peel_chains.size() == s.truth.peel_chains.size());
    GroundTruth flat = read_ground_truth(dir / "addresses.csv");
    CHECK(flat.owner == s.truth.owner);
    CHECK(flat.coinjoins.empty());
}

TEST_CASE("config errors name the JSON path") {
    auto error_of = [](const std::string& text) {
        auto doc = nlohmann::json::parse(text);
        try {
            run_simulation_document(doc, 1, scratch("cfg"));
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(error_of(R"({"economy": {"transactions": 10}})") == "$.economy.entities: required field missing");
    CHECK(error_of(R"({"economy": {"entities": 3, "transactions": 10, "colour": 1}})") == "$.economy.colour: unknown field");
    CHECK(error_of(R"({"economy": {"entities": "x", "transactions": 10}})").rfind("$.economy.entities: wrong type", 0) == 0);
    CHECK(error_of(R"({"network": {"peers": ["a", "b"], "links": [["a", "c", 1]]}})") == "$.network.links[0]: unknown peer 'c'");
    CHECK(error_of(R"({"network": {"peers": ["a", "b"], "blocks": [{"label": "x", "miner": "a", "time": 1, "parent": "y"}]}})") ==
          "$.network.blocks[0].parent: must name an earlier block");
    CHECK(error_of(R"({"economy": {"entities": 3, "transactions": 10, "profiles": [{"reuse": 0.5}]}})") ==
          "$.economy.profiles[0].id: required field missing");
    CHECK(error_of(R"({})") == "$: needs an economy or a network section");
}

TEST_CASE("exit codes") {
    fs::path out = scratch("exit");
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({"mine", "--blocks", "2"}).code == kExitUsage);  // --out missing
    CHECK(cli({"frobnicate"}).code == kExitUsage);

    fs::create_directories(out);
    std::ofstream(out / "bad.json") << R"({"economy": {"transactions": 10}})";
    Run r = cli({"simulate", (out / "bad.json").string(), "--out", (out / "x").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("$.economy.entities: required field missing") != std::string::npos);

    std::ofstream(out / "broken.json") << "{";
    CHECK(cli({"simulate", (out / "broken.json").string(), "--out", (out / "y").string()}).code == kExitUsage);

    const std::string chain = (kFixtures / "running_example.jsonl").string();
    CHECK(cli({"cluster", "--chain", chain, "--heuristics", "idioms,astrology", "--out", (out / "c").string()}).code == kExitUsage);
    CHECK(cli({"taint", "--chain", chain, "--source", "nothex:0", "--out", (out / "t").string()}).code == kExitUsage);
    CHECK(cli({"graph", "--chain", chain, "--format", "xml", "--out", (out / "g").string()}).code == kExitUsage);
}

TEST_CASE("scripted fork race and supernode fixtures meet their expectations") {
    for (const char* name : {"fork_race.json", "supernode.json"}) {
        fs::path out = scratch(name);
        Run r = cli({"simulate", (kFixtures / name).string(), "--out", out.string()});
        INFO(r.out << r.err);
        CHECK(r.code == kExitOk);
        CHECK(r.out.find("FAIL") == std::string::npos);
        CHECK(fs::exists(out / "manifest.json"));
        CHECK(fs::exists(out / "trace.jsonl"));
    }
    auto labels = nlohmann::json::parse(slurp(fs::temp_directory_path() / "bclab_test_cli_fork_race.json" / "labels.json"));
    CHECK(labels["blocks"]["8-4'"]["on_best_chain"] == true);
    CHECK(labels["blocks"]["8-4"]["on_best_chain"] == false);
}

TEST_CASE("failed expectations exit with a runtime error") {
    auto doc = nlohmann::json::parse(slurp(kFixtures / "fork_race.json"));
    doc["network"]["expect"]["tip"] = "8-4";
    fs::path dir = scratch("fail");
    fs::create_directories(dir);
    std::ofstream(dir / "doc.json") << doc.dump();
    Run r = cli({"simulate", (dir / "doc.json").string(), "--out", (dir / "out").string()});
    CHECK(r.code == kExitRuntime);
    CHECK(r.out.find("expect tip is 8-4: FAIL") != std::string::npos);
}

TEST_CASE("same seed gives byte-identical bundles") {
    auto outputs = [](const fs::path& dir) {
        auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
        return std::make_pair(m["config_digest"], m["outputs"]);
    };
    fs::path cfg = scratch("det_cfg");
    fs::create_directories(cfg);
    std::ofstream(cfg / "doc.json") << R"({"seed": 9, "economy": {"entities": 10, "transactions": 200, "peers": 6},
        "network": {"topology": {"peers": 6, "min_peers": 2, "max_peers": 4}, "adversary": "spy", "adversary_links_all": true}})";
    fs::path a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(cli({"simulate", (cfg / "doc.json").string(), "--out", a.string()}).code == kExitOk);
    REQUIRE(cli({"simulate", (cfg / "doc.json").string(), "--out", b.string()}).code == kExitOk);
    CHECK(outputs(a) == outputs(b));
    CHECK(slurp(a / "chain.jsonl") == slurp(b / "chain.jsonl"));
    CHECK(slurp(a / "trace.jsonl") == slurp(b / "trace.jsonl"));

    // Repeated runs fan out over consecutive seeds.
    fs::path m = scratch("det_mine");
    Run r = cli({"mine", "--blocks", "3", "--target-bits", "248", "--runs", "2", "--jobs", "2", "--out", m.string()});
    CHECK(r.code == kExitOk);
    CHECK(slurp(m / "seed-1" / "chain.jsonl") != slurp(m / "seed-2" / "chain.jsonl"));
    CHECK(r.out.find("seed 2:") > r.out.find("seed 1:"));
}

TEST_CASE("graph export of the example splits tx4 into four proportional edges") {
    fs::path out = scratch("graph");
    auto ex = running_example();
    Run r = cli({"graph", "--chain", (kFixtures / "running_example.jsonl").string(), "--kind", "address", "--out", out.string()});
    REQUIRE(r.code == kExitOk);
    std::istringstream csv(slurp(out / "address_graph.csv"));
    std::map<std::pair<std::string, std::string>, std::string> tx4;
    for (std::string line; std::getline(csv, line);) {
        auto f = split_csv_line(line);
        if (f.size() >= 5 && f[4] == ex.txs.at("tx4").hex()) tx4[{f[0], f[1]}] = f[2] + "/" + f[3];
    }
    std::map<std::pair<std::string, std::string>, std::string> want{
        {{"2", "5"}, "4/3"}, {{"2", "6"}, "2/3"}, {{"3", "5"}, "2/3"}, {{"3", "6"}, "1/3"}};
    CHECK(tx4 == want);
}

TEST_CASE("cluster, taint and metrics commands on a generated bundle") {
    fs::path dir = scratch("bundle");
    fs::create_directories(dir);
    std::ofstream(dir / "doc.json") << R"({"seed": 4, "economy": {"entities": 12, "transactions": 300}})";
    REQUIRE(cli({"simulate", (dir / "doc.json").string(), "--out", (dir / "sim").string()}).code == kExitOk);
    const std::string chain = (dir / "sim" / "chain.jsonl").string();

    Run c = cli({"cluster", "--chain", chain, "--ground-truth", (dir / "sim" / "ground_truth").string(), "--out", (dir / "cl").string()});
    CHECK(c.code == kExitOk);
    CHECK(c.out.find("precision 1 ") != std::string::npos);
    CHECK(fs::exists(dir / "cl" / "eval.json"));

    Run w = cli({"cluster", "--chain", chain, "--out", (dir / "cl2").string()});
    CHECK(w.code == kExitOk);
    CHECK(w.err.find("evaluation skipped") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "cl2" / "eval.json"));

    Run e = cli({"graph", "--chain", chain, "--kind", "entity", "--partition", (dir / "cl" / "partition.csv").string(), "--format",
                 "dot", "--out", (dir / "g").string()});
    CHECK(e.code == kExitOk);
    CHECK(slurp(dir / "g" / "entity_graph.dot").rfind("digraph", 0) == 0);

    Run t = cli({"taint", "--chain", chain, "--source", "coinbase:0:0", "--purity", "coinbase:1:0", "--out", (dir / "t").string()});
    CHECK(t.code == kExitOk);
    CHECK(t.out.find("balanced at every height") != std::string::npos);
    CHECK(fs::exists(dir / "t" / "purity.json"));

    Run m = cli({"metrics", "--chain", chain, "--kind", "transaction", "--out", (dir / "m").string()});
    CHECK(m.code == kExitOk);
    auto metrics = nlohmann::json::parse(slurp(dir / "m" / "metrics.json"));
    CHECK(metrics.contains("clustering_coefficient"));

    auto manifest = nlohmann::json::parse(slurp(dir / "t" / "manifest.json"));
    CHECK(manifest["command"] == "taint");
    CHECK(manifest["inputs"][0]["sha256"] == sha256(slurp(chain)).hex());
}
