#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hinfgrid/config.hpp"

using namespace hg;

namespace {

int error_line(const std::string& text) {
    try {
        parse_config(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e.line;
    }
    return -1;
}

}  // namespace

TEST_CASE("defaults round trip") {
    ProjectConfig c;
    auto a = parse_config(dump_config(c));
    CHECK(a == c);
    CHECK(dump_config(a) == dump_config(c));
}

TEST_CASE("edited config round trips exactly") {
    ProjectConfig c;
    c.converter.L_g = 0.35;
    c.converter.tau = 1.0 / 3.0;
    c.converter.mode = Mode::PQ;
    c.synthesis.starts = 3;
    c.synthesis.seed = 12345678901234ull;
    c.synthesis.lg = {0.1, 0.2};
    c.synthesis.weights = "pq";
    c.controller.kind = "droop";
    c.certify.lambda1_scale = 0.25;
    c.simulation.dt = 1e-5;
    c.scenario = "fig8";
    c.scenario_lg = {0.2, 0.3, 0.4};
    c.output_dir = "results";
    auto a = parse_config(dump_config(c));
    CHECK(a == c);
    auto b = parse_config(dump_config(a));
    CHECK(b == a);
}

TEST_CASE("partial configs keep defaults") {
    auto c = parse_config(R"({ "synthesis": { "starts": 2 } })");
    CHECK(c.synthesis.starts == 2);
    CHECK(c.synthesis.max_iters_phase2 == ProjectConfig{}.synthesis.max_iters_phase2);
    CHECK(c.converter == ConverterParams{});
}

TEST_CASE("errors point at the offending line") {
    CHECK(error_line("{\n  \"synthesis\": {\n    \"starts\": 0\n  }\n}\n") == 3);
    CHECK(error_line("{\n  \"synthesis\": {\n    \"starts\": \"many\"\n  }\n}\n") == 3);
    CHECK(error_line("{\n  \"converter\": {\n    \"L_F\": 0.05,\n    \"L_G\": 0.2\n  }\n}\n") == 4);
    CHECK(error_line("{\n  \"converter\": {\n    \"L_F\": -1\n  }\n}\n") == 2);
    CHECK(error_line("{\n  \"scenario\": \"fig5\",\n  \"output_dir\": \n}\n") == 4);
    CHECK(error_line("{\n  \"synthesis\": {\"lg\": [0.1,\n  -0.2]}\n}\n") == 3);
    CHECK(error_line("{\"controller\": {\"kind\": \"lqr\"}}") == 1);
    try {
        parse_config("{\n\n  \"synthesis\": {\"starts\": 0}\n}", "x.json");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).rfind("x.json:3:", 0) == 0);
    }
}

TEST_CASE("referenced files must exist") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hinfgrid_cfg_test";
    fs::create_directories(dir);
    const fs::path cfg = dir / "c.json";
    std::ofstream(cfg) << "{\n  \"network\": \"missing.json\"\n}\n";
    try {
        load_config(cfg.string());
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.line == 2);
    }
    std::ofstream(dir / "net.json") << dump_network(nine_bus_network());
    std::ofstream(cfg) << "{\n  \"network\": \"net.json\"\n}\n";
    auto c = load_config(cfg.string());
    CHECK(parse_network(read_text_file(resolve_path(c, c.network))) == nine_bus_network());
    fs::remove_all(dir);
}

TEST_CASE("weights, networks and scenarios round trip") {
    auto pq = default_pq_weights();
    CHECK(parse_weights(dump_weights(pq)) == pq);
    auto net = nine_bus_with_converters({0.2, 0.3, 0.4});
    CHECK(parse_network(dump_network(net)) == net);
    for (const auto& [name, s] : preset_scenarios()) CHECK(parse_scenario(dump_scenario(s)) == s);
}

TEST_CASE("scenario files use 1-based converter numbers") {
    auto s = parse_scenario(R"({"name": "x", "duration": 2, "network": true,
        "events": [{"time": 1, "kind": "p_ref_step", "converter": 3, "value": 1}]})");
    CHECK(s.events[0].target == 2);
    CHECK_THROWS_AS(parse_scenario(R"({"duration": 1, "events": [{"time": 0.5, "kind": "jump"}]})"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(R"({"duration": 1, "events": [{"time": 2, "kind": "p_ref_step"}]})"), ConfigError);
}

TEST_CASE("bad weight entries") {
    CHECK_THROWS_AS(parse_weights(R"({"entries": [{"row": 11, "col": 1, "kind": "lead_lag"}]})"), ConfigError);
    CHECK_THROWS_AS(parse_weights(R"({"entries": [{"row": 1, "col": 1, "kind": "lead_lag", "b": 0}]})"),
                    ConfigError);
}
