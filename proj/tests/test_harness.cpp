#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "spikegram/config.hpp"
#include "spikegram/manifest.hpp"

using namespace spikegram;
namespace fs = std::filesystem;

TEST_CASE("config: minimal input materializes every default") {
    ExperimentConfig cfg = config_from_json(nlohmann::json::object());
    CHECK(cfg.seed == 0);
    CHECK(cfg.alphabet.n == 6);
    CHECK(cfg.alphabet.w == 8);
    CHECK(!cfg.chain);
    auto j = cfg.to_json();
    CHECK(j.contains("alphabet"));
    CHECK(j.contains("noise"));
    CHECK(j.contains("evolution"));
    CHECK(j.contains("marcus"));
    CHECK(j.contains("quasispecies"));
    CHECK(j["alphabet"]["d_min"] == 4);
    // the snapshot itself parses back
    ExperimentConfig back = config_from_json(j);
    CHECK(back.alphabet.n == cfg.alphabet.n);
    CHECK(back.equiv.cases == cfg.equiv.cases);
}

TEST_CASE("config: unknown keys are rejected with their path") {
    nlohmann::json j{{"speling", 1}};
    CHECK_THROWS_WITH(config_from_json(j), Catch::Matchers::ContainsSubstring("/speling"));
    nlohmann::json nested{{"alphabet", {{"n", 4}, {"banana", true}}}};
    CHECK_THROWS_WITH(config_from_json(nested),
                      Catch::Matchers::ContainsSubstring("/alphabet/banana"));
}

TEST_CASE("config: chain inequality violations name the inequality") {
    nlohmann::json j{{"alphabet", {{"D", 50}, {"eps", 3}}},
                     {"chain", {{"slot_pitch", 100}}}};
    CHECK_THROWS_WITH(config_from_json(j),
                      Catch::Matchers::ContainsSubstring("lambda >= D + rho + eps"));
}

TEST_CASE("config: wrong types carry the field path") {
    nlohmann::json j{{"alphabet", {{"n", "six"}}}};
    CHECK_THROWS_WITH(config_from_json(j), Catch::Matchers::ContainsSubstring("/alphabet/n"));
    nlohmann::json j2{{"derive", {{"engine", "quantum"}}}};
    CHECK_THROWS_WITH(config_from_json(j2), Catch::Matchers::ContainsSubstring("/derive/engine"));
}

TEST_CASE("config: noise bounds are validated") {
    nlohmann::json j{{"noise", {{"p_delete", 1.5}}}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("config: missing file errors carry the path") {
    CHECK_THROWS_WITH(load_config("/no/such/config.json"),
                      Catch::Matchers::ContainsSubstring("/no/such/config.json"));
}

TEST_CASE("config: rules section round trips") {
    nlohmann::json rules{{"start", 0},
                         {"terminals", {1, 2}},
                         {"rules", {{{"cond", 0}, {"action", {1, 2}}, {"p", 1.0}}}}};
    nlohmann::json j{{"rules", rules}};
    ExperimentConfig cfg = config_from_json(j);
    REQUIRE(cfg.rules);
    CHECK(cfg.rules->rules.size() == 1);
    CHECK(cfg.rules->rules[0].action == std::vector<SymbolId>{1, 2});
}

TEST_CASE("manifest hashes emitted files") {
    auto dir = fs::temp_directory_path() / "spikegram_manifest_test";
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        out << content;
    };
    write("a.csv", "x,y\n1,2\n");
    write("b.csv", "x,y\n1,2\n");
    write("c.csv", "x,y\n1,3\n");

    RunManifest m(nlohmann::json{{"k", "v"}}, 42, "2000-01-01T00:00:00Z");
    m.add_output(dir / "a.csv");
    m.add_output(dir / "b.csv");
    m.add_output(dir / "c.csv");
    CHECK(m.outputs()[0].second == m.outputs()[1].second);
    CHECK(m.outputs()[0].second != m.outputs()[2].second);

    m.write(dir, "2000-01-01T00:00:01Z");
    std::ifstream in(dir / "run_manifest.json");
    nlohmann::json j;
    in >> j;
    CHECK(j["master_seed"] == 42);
    CHECK(j["outputs"].size() == 3);
    CHECK(j["artifact_version"] == kArtifactVersion);
    fs::remove_all(dir);
}

TEST_CASE("decision stream log replays through JSON") {
    RngDecisionStream rec(123);
    std::vector<double> w{1.0, 2.0, 3.0};
    std::vector<std::size_t> picks;
    for (int i = 0; i < 20; ++i) picks.push_back(rec.choose(w));
    auto j = rec.to_json();
    ScriptedDecisionStream replay = ScriptedDecisionStream::from_json(j);
    for (int i = 0; i < 20; ++i) REQUIRE(replay.choose(w) == picks[static_cast<std::size_t>(i)]);
}
