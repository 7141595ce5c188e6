#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hinfgrid/config.hpp"
#include "hinfgrid/network.hpp"
#include "hinfgrid/sim.hpp"
#include "hinfgrid/synthesis.hpp"

using namespace hg;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, error = 1, phase1_failure = 2, certificate_fail = 3, unstable = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<double> lg;
    std::string controller;
    std::optional<double> lambda1_scale;
    std::string k_file;
    std::string scenario;
    std::string target = "finvy";
    std::string entry = "7,7";
};

ProjectConfig load(const Options& o) {
    ProjectConfig c = o.config.empty() ? ProjectConfig{} : load_config(o.config);
    if (o.seed) c.synthesis.seed = *o.seed;
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.controller.empty()) {
        if (o.controller != "hinf" && o.controller != "droop" && o.controller != "pll" && o.controller != "file")
            throw std::invalid_argument("--controller must be hinf, droop, pll or file");
        c.controller.kind = o.controller;
    }
    if (!o.k_file.empty()) c.controller.file = o.k_file;
    if (c.controller.kind == "file" && c.controller.file.empty())
        throw std::invalid_argument("--controller file needs a gain file (--k-file or controller.file)");
    if (o.lambda1_scale) {
        if (!(*o.lambda1_scale > 0.0)) throw std::invalid_argument("--lambda1-scale must be positive");
        c.certify.lambda1_scale = *o.lambda1_scale;
    }
    return c;
}

fs::path out_dir(const ProjectConfig& c) {
    fs::path p(c.output_dir);
    fs::create_directories(p);
    return p;
}

std::string lg_tag(double lg) {
    std::ostringstream s;
    s << lg;
    return s.str();
}

Mat read_k(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open gain file '" + path + "'");
    return read_gain_file(in);
}

// Gains for a converter running in `mode`.
Mat controller_for(const ProjectConfig& c, Mode mode) {
    const auto& kind = c.controller.kind;
    if (kind == "droop" || kind == "pll") return controller_template(kind).K;
    if (mode == Mode::PV) {
        if (!c.controller.file.empty()) return read_k(resolve_path(c, c.controller.file));
        return read_k((fs::path(c.output_dir) / "K.txt").string());
    }
    if (!c.controller.pq_file.empty()) return read_k(resolve_path(c, c.controller.pq_file));
    if (kind == "file") return read_k(resolve_path(c, c.controller.file));
    return read_k((fs::path(c.output_dir) / "K_pq.txt").string());
}

ConverterParams params_at(const ProjectConfig& c, double lg, Mode mode) {
    ConverterParams p = c.converter;
    p.L_g = lg;
    p.mode = mode;
    return p;
}

GeneralizedPlant plant_at(const ProjectConfig& c, double lg) {
    const ConverterParams p = params_at(c, lg, c.converter.mode);
    double ref = c.synthesis.V_or_Q_ref;
    if (ref < 0.0) ref = p.mode == Mode::PV ? 1.0 : 0.0;
    return build_plant(p, solve_operating_point(p, c.synthesis.P_ref, ref));
}

SynthesisConfig synthesis_config(const ProjectConfig& c, const std::vector<double>& lgs, const WeightingSpec& w) {
    ConverterParams base = c.converter;
    base.mode = w.pq_plant ? Mode::PQ : Mode::PV;
    SynthesisConfig sc;
    sc.plants = loop_family(plant_family(base, lgs, c.synthesis.P_ref, c.synthesis.V_or_Q_ref));
    sc.weights = w;
    sc.starts = c.synthesis.starts;
    sc.max_iters_phase1 = c.synthesis.max_iters_phase1;
    sc.max_iters_phase2 = c.synthesis.max_iters_phase2;
    sc.seed = c.synthesis.seed;
    sc.box = c.synthesis.box;
    sc.stability_margin = c.synthesis.stability_margin;
    return sc;
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& fn) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    fn(f);
}

int cmd_synth(const Options& o) {
    ProjectConfig c = load(o);
    const auto lgs = o.lg.empty() ? c.synthesis.lg : o.lg;
    const WeightingSpec w = load_weights(c);
    SynthesisConfig sc = synthesis_config(c, lgs, w);
    SynthesisResult r;
    try {
        r = synthesize(sc);
    } catch (const StabilizationFailure& e) {
        std::cerr << "synth: " << e.what() << " (best abscissa " << e.best_abscissa << ")\n";
        return phase1_failure;
    }
    const fs::path dir = out_dir(c);
    const std::string kname = w.pq_plant ? "K_pq.txt" : "K.txt";
    write_file(dir / kname, [&](std::ostream& os) { write_gain_file(os, r.K.K); });
    write_file(dir / "synth_report.txt", [&](std::ostream& os) { write_report_text(os, r); });
    write_file(dir / "synth_report.json", [&](std::ostream& os) { write_report_json(os, r); });
    write_file(dir / "synth_trace.csv", [&](std::ostream& os) { write_trace_csv(os, r); });
    write_report_text(std::cout, r);
    std::cout << "wrote " << (dir / kname).string() << "\n";
    return ok;
}

int cmd_eval_k(const Options& o) {
    ProjectConfig c = load(o);
    const auto lgs = o.lg.empty() ? c.synthesis.lg : o.lg;
    const WeightingSpec w = load_weights(c);
    SynthesisConfig sc = synthesis_config(c, lgs, w);
    const Mat K = controller_for(c, w.pq_plant ? Mode::PQ : Mode::PV);
    SynthesisResult r = evaluate_controller(K, sc, true);
    const fs::path dir = out_dir(c);
    write_file(dir / "eval_report.txt", [&](std::ostream& os) { write_report_text(os, r); });
    write_file(dir / "eval_report.json", [&](std::ostream& os) { write_report_json(os, r); });
    write_report_text(std::cout, r);
    for (const auto& p : r.per_plant)
        if (!p.stable) return unstable;
    return ok;
}

ReducedNetwork certify_network(const ProjectConfig& c) {
    const auto& n = c.certify.network;
    if (n == "fixture") return reduced_from_matrix(fixture_q_red(), c.converter.omega_b, c.converter.tau);
    if (n == "nine_bus") return kron_reduce(nine_bus_network());
    const std::string p = resolve_path(c, n);
    if (!fs::is_regular_file(p)) throw std::runtime_error("network file '" + p + "' does not exist");
    return kron_reduce(parse_network(read_text_file(p), p));
}

int cmd_certify(const Options& o) {
    ProjectConfig c = load(o);
    const auto lgs = o.lg.empty() ? c.certify.lg : o.lg;
    const ReducedNetwork net = certify_network(c);
    const Mat K = controller_for(c, c.converter.mode);
    std::vector<StateSpace> devices;
    std::vector<std::string> names;
    for (double lg : lgs) {
        const auto g = plant_at(c, lg);
        devices.push_back(extract_admittance(g, GainMatrix(K)));
        names.push_back("L_g=" + lg_tag(lg));
    }
    const CertificateReport rep = certify(devices, net, names, c.certify.lambda1_scale);
    const fs::path dir = out_dir(c);
    write_file(dir / "certificate.txt", [&](std::ostream& os) { write_certificate_text(os, rep); });
    write_file(dir / "certificate.csv", [&](std::ostream& os) { write_certificate_csv(os, rep); });
    write_certificate_text(std::cout, rep);
    return rep.pass ? ok : certificate_fail;
}

Scenario find_scenario(const ProjectConfig& c, const std::string& name) {
    const auto presets = preset_scenarios();
    auto it = presets.find(name);
    if (it != presets.end()) return it->second;
    const std::string p = resolve_path(c, name);
    if (!fs::is_regular_file(p)) throw std::invalid_argument("unknown scenario '" + name + "'");
    return parse_scenario(read_text_file(p), p);
}

NetworkSpec sim_network(const ProjectConfig& c) {
    if (c.network == "nine_bus") return nine_bus_network();
    if (c.network == "fixture") throw std::invalid_argument("the fixture network has no branch data to simulate");
    const std::string p = resolve_path(c, c.network);
    if (!fs::is_regular_file(p)) throw std::runtime_error("network file '" + p + "' does not exist");
    return parse_network(read_text_file(p), p);
}

ConverterSetup setup_for(const ProjectConfig& c, double lg, Mode mode, bool needs_alt) {
    ConverterSetup s;
    s.params = params_at(c, lg, mode);
    s.K = controller_for(c, mode);
    if (needs_alt) s.K_alt = controller_for(c, mode == Mode::PV ? Mode::PQ : Mode::PV);
    return s;
}

// Metrics after every reference step, on the matching power or voltage signal.
void report_metrics(std::ostream& os, const SimTrace& tr, const Scenario& s, const std::string& label, bool network) {
    for (size_t i = 0; i < s.events.size(); ++i) {
        const Event& e = s.events[i];
        std::string sig;
        if (e.kind == EventKind::p_ref_step) sig = "P_E";
        else if (e.kind == EventKind::q_ref_step) sig = "Q_E";
        else if (e.kind == EventKind::v_ref_step) sig = "V_d";
        else continue;
        if (network) sig += "_" + std::to_string(e.target + 1);
        double t1 = s.duration;
        for (size_t k = i + 1; k < s.events.size(); ++k)
            if (s.events[k].time > e.time) {
                t1 = s.events[k].time;
                break;
            }
        if (tr.unstable && tr.unstable_time < t1) t1 = tr.unstable_time;
        if (!(t1 > e.time) || tr.t.empty()) continue;
        t1 = std::min(t1, tr.t.back());
        os << label << "," << e.time << "," << to_string(e.kind) << "," << sig << ",";
        try {
            const StepMetrics m = metrics(tr, sig, e.time, t1);
            os << m.rise_time << "," << m.overshoot_pct << "," << m.settling_time << "\n";
        } catch (const std::exception&) {
            os << "nan,nan,nan\n";
        }
    }
}

int cmd_simulate(const Options& o) {
    ProjectConfig c = load(o);
    const std::string name = o.scenario.empty() ? c.scenario : o.scenario;
    const Scenario s = find_scenario(c, name);
    const Mode mode = s.mode.value_or(c.converter.mode);
    bool switches = false;
    for (const auto& e : s.events) switches |= e.kind == EventKind::mode_switch;
    const auto lgs = o.lg.empty() ? c.scenario_lg : o.lg;
    const fs::path dir = out_dir(c);
    std::ostringstream met;
    met << std::setprecision(12) << "run,t_event,event,signal,rise_time_s,overshoot_pct,settling_time_s\n";
    bool any_unstable = false;

    auto finish = [&](const SimTrace& tr, const std::string& file, const std::string& label) {
        write_file(dir / file, [&](std::ostream& os) { write_trace_csv(os, tr); });
        report_metrics(met, tr, s, label, s.network);
        std::cout << label << ": " << (tr.unstable ? "unstable" : "stable");
        if (tr.unstable) std::cout << " at t=" << tr.unstable_time << " s";
        std::cout << ", trace " << (dir / file).string() << "\n";
        any_unstable |= tr.unstable;
    };

    if (s.network) {
        const NetworkSpec net = sim_network(c);
        const int n = static_cast<int>(net.boundary.size());
        if (lgs.size() != 1 && static_cast<int>(lgs.size()) != n)
            throw std::invalid_argument("give one L_g or one per converter");
        std::vector<ConverterSetup> conv;
        for (int k = 0; k < n; ++k) conv.push_back(setup_for(c, lgs.size() == 1 ? lgs[0] : lgs[k], mode, switches));
        const SimTrace tr = simulate_network(conv, net, s, c.simulation);
        finish(tr, "trace_" + s.name + ".csv", s.name);
    } else {
        for (double lg : lgs) {
            const SimTrace tr = simulate_single(setup_for(c, lg, mode, switches), s, c.simulation);
            finish(tr, "trace_" + s.name + "_lg" + lg_tag(lg) + ".csv", s.name + " L_g=" + lg_tag(lg));
        }
    }
    write_file(dir / ("metrics_" + s.name + ".csv"), [&](std::ostream& os) { os << met.str(); });
    std::cout << met.str();
    return any_unstable ? unstable : ok;
}

int cmd_sigma(const Options& o) {
    ProjectConfig c = load(o);
    const fs::path dir = out_dir(c);
    const auto grid = default_grid();
    if (o.target == "identity") {
        const SigmaPlot sp = sigma_plot(StateSpace::identity(2), grid);
        write_file(dir / "sigma_identity.csv", [&](std::ostream& os) { write_sigma_csv(os, sp); });
        std::cout << "wrote " << (dir / "sigma_identity.csv").string() << "\n";
        return ok;
    }
    if (o.target != "finvy") throw std::invalid_argument("sigma target must be finvy or identity");
    const auto lgs = o.lg.empty() ? c.certify.lg : o.lg;
    const Mat K = controller_for(c, c.converter.mode);
    bool bad = false;
    std::cout << std::setprecision(12);
    for (double lg : lgs) {
        const auto g = plant_at(c, lg);
        const StateSpace Y = extract_admittance(g, GainMatrix(K));
        const std::string file = "sigma_finvy_lg" + lg_tag(lg) + ".csv";
        const StateSpace S = finv_cascade(Y, c.converter.omega_b, c.converter.tau);
        write_file(dir / file, [&](std::ostream& os) { write_sigma_csv(os, sigma_plot(S, grid)); });
        if (!is_stable(Y)) {
            std::cout << "L_g=" << lg << " unstable device, " << file << "\n";
            bad = true;
            continue;
        }
        const HinfResult h = hinf_norm(S, 1e-6);
        std::cout << "L_g=" << lg << " max sigma1 " << h.norm << " at " << h.peak_frequency << " rad/s, " << file
                  << "\n";
    }
    return bad ? unstable : ok;
}

int cmd_bode(const Options& o) {
    ProjectConfig c = load(o);
    int i = 0, j = 0;
    char comma = 0;
    std::istringstream es(o.entry);
    if (!(es >> i >> comma >> j) || comma != ',' || i < 1 || i > 10 || j < 1 || j > 7)
        throw std::invalid_argument("--entry must be i,j with i in 1..10 and j in 1..7");
    const auto lgs = o.lg.empty() ? std::vector<double>{c.converter.L_g} : o.lg;
    const Mat K = controller_for(c, c.converter.mode);
    const fs::path dir = out_dir(c);
    const auto grid = default_grid();
    std::cout << std::setprecision(12);
    for (double lg : lgs) {
        const auto g = plant_at(c, lg);
        const StateSpace e = sensitivity_entry(g, GainMatrix(K), i, j);
        const std::string file = "bode_P" + std::to_string(i) + std::to_string(j) + "_" + c.controller.kind + "_lg" +
                                 lg_tag(lg) + ".csv";
        write_file(dir / file, [&](std::ostream& os) {
            os << "omega_rad_s,mag,mag_db,phase_deg\n" << std::setprecision(15);
            for (double w : grid) {
                const cplx v = e.freq(w)(0, 0);
                os << w << "," << std::abs(v) << "," << 20.0 * std::log10(std::abs(v)) << ","
                   << std::arg(v) * 180.0 / M_PI << "\n";
            }
        });
        std::cout << "L_g=" << lg << " crossover " << crossover_frequency(e, grid) << " rad/s, " << file << "\n";
    }
    return ok;
}

int cmd_scenarios(const Options&) {
    for (const auto& [name, s] : preset_scenarios()) {
        std::cout << name << "  " << s.duration << " s  " << (s.network ? "network" : "single");
        if (s.mode) std::cout << "  " << to_string(*s.mode);
        std::cout << "\n";
        for (const auto& e : s.events) {
            std::cout << "  t=" << e.time << "  " << to_string(e.kind) << "  converter " << (e.target + 1);
            if (e.kind == EventKind::mode_switch) std::cout << "  -> " << to_string(e.mode);
            else if (e.kind != EventKind::breaker_open && e.kind != EventKind::breaker_close)
                std::cout << "  value " << e.value;
            std::cout << "\n";
        }
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured H-infinity synthesis, certificates and simulation for grid converters"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "project configuration (JSON)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--lg", o.lg, "grid inductances (p.u.)")->delimiter(',');
        sub->add_option("--controller", o.controller, "hinf | droop | pll | file");
        sub->add_option("--k-file", o.k_file, "gain file for --controller file");
    };

    auto* synth = app.add_subcommand("synth", "synthesize K over the plant family");
    common(synth);
    synth->add_option("--seed", o.seed, "random seed");
    auto* evalk = app.add_subcommand("eval-k", "evaluate a controller on the plant family");
    common(evalk);
    auto* cert = app.add_subcommand("certify", "small-gain certificate against the network");
    common(cert);
    cert->add_option("--lambda1-scale", o.lambda1_scale, "scale the smallest network eigenvalue");
    auto* sim = app.add_subcommand("simulate", "run a scenario");
    common(sim);
    sim->add_option("scenario", o.scenario, "preset name or scenario file");
    auto* sig = app.add_subcommand("sigma", "singular values of F^-1 Y (or identity)");
    common(sig);
    sig->add_option("--target", o.target, "finvy | identity");
    auto* bode = app.add_subcommand("bode", "Bode data of a closed-loop entry");
    common(bode);
    bode->add_option("--entry", o.entry, "i,j (1-based), default 7,7");
    auto* scen = app.add_subcommand("scenarios", "list preset scenarios");
    auto* wts = app.add_subcommand("weights", "print a built-in weighting set as JSON");
    std::string wset = "pv";
    wts->add_option("set", wset, "pv | pq")->check(CLI::IsMember({"pv", "pq"}));
    auto* conf = app.add_subcommand("config", "print the effective configuration");
    conf->add_option("--config", o.config, "project configuration (JSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : error;
    }

    try {
        if (*synth) return cmd_synth(o);
        if (*evalk) return cmd_eval_k(o);
        if (*cert) return cmd_certify(o);
        if (*sim) return cmd_simulate(o);
        if (*sig) return cmd_sigma(o);
        if (*bode) return cmd_bode(o);
        if (*scen) return cmd_scenarios(o);
        if (*wts) {
            std::cout << dump_weights(wset == "pv" ? default_pv_weights() : default_pq_weights());
            return ok;
        }
        if (*conf) {
            std::cout << dump_config(load(o));
            return ok;
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error;
    }
    return error;
}
