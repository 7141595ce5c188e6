#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hinfgrid/converter.hpp"
#include "hinfgrid/network.hpp"
#include "hinfgrid/sim.hpp"
#include "hinfgrid/weights.hpp"

namespace hg {

struct ConfigError : std::runtime_error {
    int line = 0;
    ConfigError(const std::string& msg, int l) : std::runtime_error(msg), line(l) {}
};

struct SynthesisSettings {
    int starts = 8;
    std::uint64_t seed = 1;
    int max_iters_phase1 = 4000;
    int max_iters_phase2 = 6000;
    double box = 5e4;
    double stability_margin = 0.05;
    std::vector<double> lg = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    double P_ref = 1.0;
    double V_or_Q_ref = -1.0;
    std::string weights = "pv";  // pv | pq | path to a weights file
    bool operator==(const SynthesisSettings&) const = default;
};

struct ControllerSettings {
    std::string kind = "hinf";  // hinf | droop | pll | file
    std::string file;           // hinf: defaults to <output_dir>/K.txt
    std::string pq_file;        // PQ-mode gains, defaults to <output_dir>/K_pq.txt
    bool operator==(const ControllerSettings&) const = default;
};

struct CertifySettings {
    std::vector<double> lg = {0.2, 0.35, 0.5};
    std::string network = "fixture";  // fixture | nine_bus | path to a network file
    double lambda1_scale = 1.0;
    bool operator==(const CertifySettings&) const = default;
};

struct ProjectConfig {
    ConverterParams converter;
    SynthesisSettings synthesis;
    ControllerSettings controller;
    CertifySettings certify;
    std::string network = "nine_bus";  // used by network scenarios
    SimConfig simulation;
    std::string scenario = "fig5";     // preset name or path to a scenario file
    std::vector<double> scenario_lg = {0.2};
    std::string output_dir = "out";

    std::string base_dir = ".";  // directory of the config file, not serialized
    bool operator==(const ProjectConfig& o) const;
};

ProjectConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ProjectConfig load_config(const std::string& path);
std::string dump_config(const ProjectConfig& cfg);

// Resolves a path relative to the config file directory.
std::string resolve_path(const ProjectConfig& cfg, const std::string& p);

WeightingSpec parse_weights(const std::string& text, const std::string& origin = "<weights>");
WeightingSpec load_weights(const ProjectConfig& cfg);
std::string dump_weights(const WeightingSpec& spec);

NetworkSpec parse_network(const std::string& text, const std::string& origin = "<network>");
std::string dump_network(const NetworkSpec& net);

Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>");
std::string dump_scenario(const Scenario& s);

std::string read_text_file(const std::string& path);

}  // namespace hg
