#include "hinfgrid/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hg {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// JSON pointer -> line of the key (or array element) in the source text.
std::map<std::string, int> index_lines(const std::string& s) {
    std::map<std::string, int> out;
    struct Frame {
        bool obj;
        int idx;
        std::string base, key;
    };
    std::vector<Frame> st;
    int line = 1;
    bool expect_key = false;
    auto here = [&]() -> std::string {
        if (st.empty()) return "";
        const auto& f = st.back();
        return f.base + "/" + (f.obj ? f.key : std::to_string(f.idx));
    };
    auto skip_string = [&](size_t& i) {
        std::string v;
        for (++i; i < s.size() && s[i] != '"'; ++i) {
            if (s[i] == '\\') {
                ++i;
                continue;
            }
            v += s[i];
        }
        ++i;
        return v;
    };
    size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (std::isspace(static_cast<unsigned char>(c)) || c == ':') {
            ++i;
        } else if (c == ',') {
            if (!st.empty() && !st.back().obj) ++st.back().idx;
            else expect_key = true;
            ++i;
        } else if (c == '}' || c == ']') {
            if (!st.empty()) st.pop_back();
            expect_key = false;
            ++i;
        } else if (expect_key && c == '"') {
            st.back().key = skip_string(i);
            out.emplace(here(), line);
            expect_key = false;
        } else {
            const std::string path = here();
            out.emplace(path, line);
            if (c == '{') {
                st.push_back({true, 0, path, ""});
                expect_key = true;
                ++i;
            } else if (c == '[') {
                st.push_back({false, 0, path, ""});
                ++i;
            } else if (c == '"') {
                skip_string(i);
            } else {
                while (i < s.size() && s[i] != ',' && s[i] != '}' && s[i] != ']' &&
                       !std::isspace(static_cast<unsigned char>(s[i])))
                    ++i;
            }
        }
    }
    return out;
}

class Reader {
public:
    Reader(const std::string& text, std::string origin) : origin_(std::move(origin)) {
        try {
            root_ = json::parse(text);
        } catch (const json::parse_error& e) {
            int line = 1, col = 1;
            for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
                if (text[i] == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
            }
            std::string what = e.what();
            auto p = what.find("syntax error");
            if (p != std::string::npos) what = what.substr(p);
            throw ConfigError(origin_ + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what, line);
        }
        lines_ = index_lines(text);
    }

    const json& root() const { return root_; }

    int line(std::string ptr) const {
        while (true) {
            auto it = lines_.find(ptr);
            if (it != lines_.end()) return it->second;
            auto p = ptr.rfind('/');
            if (p == std::string::npos || ptr.empty()) return 1;
            ptr = ptr.substr(0, p);
        }
    }

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
        const int l = line(ptr);
        const std::string key = ptr.empty() ? "(root)" : ptr.substr(1);
        std::string dotted = key;
        for (auto& c : dotted)
            if (c == '/') c = '.';
        throw ConfigError(origin_ + ":" + std::to_string(l) + ": " + dotted + ": " + msg, l);
    }

    void expect_object(const json& j, const std::string& ptr) const {
        if (!j.is_object()) fail(ptr, "expected an object");
    }

    void allowed(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) const {
        expect_object(j, ptr);
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key())) fail(ptr + "/" + it.key(), "unknown key");
    }

    template <class T>
    void get(const json& j, const std::string& ptr, const char* key, T& out) const {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        const std::string p = ptr + "/" + key;
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) fail(p, "expected a number");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) fail(p, "expected an integer");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.get<long long>() < 0) fail(p, "expected a non-negative integer");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) fail(p, "expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) fail(p, "expected a string");
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!v.is_array()) fail(p, "expected an array of numbers");
                for (size_t i = 0; i < v.size(); ++i)
                    if (!v[i].is_number()) fail(p + "/" + std::to_string(i), "expected a number");
            }
            out = v.get<T>();
        } catch (const json::exception& e) {
            fail(p, e.what());
        }
    }

    template <class F>
    void check(const std::string& ptr, F&& f) const {
        try {
            f();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            fail(ptr, e.what());
        }
    }

private:
    std::string origin_;
    json root_;
    std::map<std::string, int> lines_;
};

ConverterParams read_converter(const Reader& r, const json& j, const std::string& p) {
    r.allowed(j, p, {"L_F", "C_F", "L_g", "tau", "Kp_i", "Ki_i", "K_VF", "T_VF", "X_v", "omega_b", "omega_f", "mode"});
    ConverterParams c;
    r.get(j, p, "L_F", c.L_F);
    r.get(j, p, "C_F", c.C_F);
    r.get(j, p, "L_g", c.L_g);
    r.get(j, p, "tau", c.tau);
    r.get(j, p, "Kp_i", c.Kp_i);
    r.get(j, p, "Ki_i", c.Ki_i);
    r.get(j, p, "K_VF", c.K_VF);
    r.get(j, p, "T_VF", c.T_VF);
    r.get(j, p, "X_v", c.X_v);
    r.get(j, p, "omega_b", c.omega_b);
    r.get(j, p, "omega_f", c.omega_f);
    std::string mode = to_string(c.mode);
    r.get(j, p, "mode", mode);
    r.check(p + "/mode", [&] { c.mode = mode_from_string(mode); });
    r.check(p, [&] { c.validate(); });
    return c;
}

ojson write_converter(const ConverterParams& c) {
    ojson j;
    j["L_F"] = c.L_F;
    j["C_F"] = c.C_F;
    j["L_g"] = c.L_g;
    j["tau"] = c.tau;
    j["Kp_i"] = c.Kp_i;
    j["Ki_i"] = c.Ki_i;
    j["K_VF"] = c.K_VF;
    j["T_VF"] = c.T_VF;
    j["X_v"] = c.X_v;
    j["omega_b"] = c.omega_b;
    j["omega_f"] = c.omega_f;
    j["mode"] = to_string(c.mode);
    return j;
}

bool is_builtin_network(const std::string& s) { return s == "nine_bus" || s == "fixture"; }

WeightingSpec read_weights(const Reader& r, const json& j, const std::string& p) {
    r.allowed(j, p, {"pq_plant", "entries"});
    WeightingSpec w;
    r.get(j, p, "pq_plant", w.pq_plant);
    if (!j.contains("entries") || !j["entries"].is_array()) r.fail(p + "/entries", "expected an array of weights");
    const json& arr = j["entries"];
    for (size_t i = 0; i < arr.size(); ++i) {
        const std::string q = p + "/entries/" + std::to_string(i);
        const json& e = arr[i];
        r.allowed(e, q, {"row", "col", "kind", "k", "a", "b", "w1", "xi1", "w2", "xi2"});
        int row = 0, col = 0;
        r.get(e, q, "row", row);
        r.get(e, q, "col", col);
        if (row < 1 || row > 10) r.fail(q + "/row", "row must be in 1..10");
        if (col < 1 || col > 7) r.fail(q + "/col", "col must be in 1..7");
        RationalWeight rw;
        std::string kind = "zero";
        r.get(e, q, "kind", kind);
        r.check(q + "/kind", [&] { rw.kind = weight_kind_from_string(kind); });
        r.get(e, q, "k", rw.k);
        r.get(e, q, "a", rw.a);
        r.get(e, q, "b", rw.b);
        r.get(e, q, "w1", rw.w1);
        r.get(e, q, "xi1", rw.xi1);
        r.get(e, q, "w2", rw.w2);
        r.get(e, q, "xi2", rw.xi2);
        r.check(q, [&] { rw.validate(); });
        if (!w.entries.emplace(std::make_pair(row, col), rw).second) r.fail(q, "duplicate entry");
    }
    return w;
}

NetworkSpec read_network(const Reader& r, const json& j, const std::string& p) {
    r.allowed(j, p, {"nodes", "branches", "self_loops", "boundary", "loads", "omega0", "tau"});
    NetworkSpec n;
    auto strings = [&](const char* key, std::vector<std::string>& out) {
        if (!j.contains(key)) return;
        const std::string q = p + "/" + key;
        if (!j[key].is_array()) r.fail(q, "expected an array of names");
        for (size_t i = 0; i < j[key].size(); ++i) {
            if (!j[key][i].is_string()) r.fail(q + "/" + std::to_string(i), "expected a string");
            out.push_back(j[key][i].get<std::string>());
        }
    };
    strings("nodes", n.nodes);
    strings("boundary", n.boundary);
    auto objects = [&](const char* key, auto&& fn) {
        if (!j.contains(key)) return;
        const std::string q = p + "/" + key;
        if (!j[key].is_array()) r.fail(q, "expected an array");
        for (size_t i = 0; i < j[key].size(); ++i) fn(j[key][i], q + "/" + std::to_string(i));
    };
    objects("branches", [&](const json& e, const std::string& q) {
        r.allowed(e, q, {"from", "to", "R", "X"});
        Branch b;
        r.get(e, q, "from", b.from);
        r.get(e, q, "to", b.to);
        r.get(e, q, "R", b.R);
        r.get(e, q, "X", b.X);
        n.branches.push_back(b);
    });
    objects("self_loops", [&](const json& e, const std::string& q) {
        r.allowed(e, q, {"node", "R", "X"});
        SelfLoop b;
        r.get(e, q, "node", b.node);
        r.get(e, q, "R", b.R);
        r.get(e, q, "X", b.X);
        n.self_loops.push_back(b);
    });
    objects("loads", [&](const json& e, const std::string& q) {
        r.allowed(e, q, {"node", "P", "Q"});
        Load b;
        r.get(e, q, "node", b.node);
        r.get(e, q, "P", b.P);
        r.get(e, q, "Q", b.Q);
        n.loads.push_back(b);
    });
    r.get(j, p, "omega0", n.omega0);
    r.get(j, p, "tau", n.tau);
    r.check(p, [&] { n.validate(); });
    return n;
}

Scenario read_scenario(const Reader& r, const json& j, const std::string& p) {
    r.allowed(j, p, {"name", "duration", "network", "mode", "initial", "events"});
    Scenario s;
    s.name = "custom";
    r.get(j, p, "name", s.name);
    r.get(j, p, "duration", s.duration);
    r.get(j, p, "network", s.network);
    if (j.contains("mode")) {
        std::string m;
        r.get(j, p, "mode", m);
        r.check(p + "/mode", [&] { s.mode = mode_from_string(m); });
    }
    if (j.contains("initial")) {
        const std::string q = p + "/initial";
        if (!j["initial"].is_array() || j["initial"].empty()) r.fail(q, "expected a non-empty array");
        s.initial.clear();
        for (size_t i = 0; i < j["initial"].size(); ++i) {
            const std::string qi = q + "/" + std::to_string(i);
            r.allowed(j["initial"][i], qi, {"P", "V_or_Q"});
            InitialReference ir;
            r.get(j["initial"][i], qi, "P", ir.P);
            r.get(j["initial"][i], qi, "V_or_Q", ir.V_or_Q);
            s.initial.push_back(ir);
        }
    }
    if (j.contains("events")) {
        const std::string q = p + "/events";
        if (!j["events"].is_array()) r.fail(q, "expected an array");
        for (size_t i = 0; i < j["events"].size(); ++i) {
            const std::string qi = q + "/" + std::to_string(i);
            const json& e = j["events"][i];
            r.allowed(e, qi, {"time", "kind", "converter", "value", "mode"});
            Event ev;
            std::string kind, mode = "PV";
            int conv = 1;
            r.get(e, qi, "time", ev.time);
            r.get(e, qi, "kind", kind);
            r.check(qi + "/kind", [&] { ev.kind = event_kind_from_string(kind); });
            r.get(e, qi, "converter", conv);
            ev.target = conv - 1;
            r.get(e, qi, "value", ev.value);
            r.get(e, qi, "mode", mode);
            r.check(qi + "/mode", [&] { ev.mode = mode_from_string(mode); });
            s.events.push_back(ev);
        }
    }
    int n = 1;
    for (const auto& e : s.events) n = std::max(n, e.target + 1);
    n = std::max<int>(n, static_cast<int>(s.initial.size()));
    if (s.network) n = std::max(n, 3);
    r.check(p, [&] { s.validate(n); });
    for (const auto& e : s.events)
        if (e.target < 0) r.fail(p + "/events", "converter indices start at 1");
    return s;
}

ojson write_scenario(const Scenario& s) {
    ojson j;
    j["name"] = s.name;
    j["duration"] = s.duration;
    j["network"] = s.network;
    if (s.mode) j["mode"] = to_string(*s.mode);
    j["initial"] = ojson::array();
    for (const auto& ir : s.initial) j["initial"].push_back({{"P", ir.P}, {"V_or_Q", ir.V_or_Q}});
    j["events"] = ojson::array();
    for (const auto& e : s.events) {
        ojson o;
        o["time"] = e.time;
        o["kind"] = to_string(e.kind);
        o["converter"] = e.target + 1;
        o["value"] = e.value;
        if (e.kind == EventKind::mode_switch) o["mode"] = to_string(e.mode);
        j["events"].push_back(o);
    }
    return j;
}

bool file_exists(const std::string& p) { return std::filesystem::is_regular_file(p); }

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string resolve_path(const ProjectConfig& cfg, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (std::filesystem::path(cfg.base_dir) / fp).lexically_normal().string();
}

bool ProjectConfig::operator==(const ProjectConfig& o) const {
    return converter == o.converter && synthesis == o.synthesis && controller == o.controller &&
           certify == o.certify && network == o.network && simulation == o.simulation && scenario == o.scenario &&
           scenario_lg == o.scenario_lg && output_dir == o.output_dir;
}

ProjectConfig parse_config(const std::string& text, const std::string& origin) {
    Reader r(text, origin);
    const json& j = r.root();
    r.allowed(j, "", {"converter", "synthesis", "controller", "certify", "network", "simulation", "scenario",
                      "scenario_lg", "output_dir"});
    ProjectConfig c;
    if (j.contains("converter")) c.converter = read_converter(r, j["converter"], "/converter");

    if (j.contains("synthesis")) {
        const json& s = j["synthesis"];
        const std::string p = "/synthesis";
        r.allowed(s, p, {"starts", "seed", "max_iters_phase1", "max_iters_phase2", "box", "stability_margin", "lg",
                         "P_ref", "V_or_Q_ref", "weights"});
        auto& o = c.synthesis;
        r.get(s, p, "starts", o.starts);
        r.get(s, p, "seed", o.seed);
        r.get(s, p, "max_iters_phase1", o.max_iters_phase1);
        r.get(s, p, "max_iters_phase2", o.max_iters_phase2);
        r.get(s, p, "box", o.box);
        r.get(s, p, "stability_margin", o.stability_margin);
        r.get(s, p, "lg", o.lg);
        r.get(s, p, "P_ref", o.P_ref);
        r.get(s, p, "V_or_Q_ref", o.V_or_Q_ref);
        r.get(s, p, "weights", o.weights);
        if (o.starts < 1) r.fail(p + "/starts", "must be >= 1");
        if (o.max_iters_phase1 < 1) r.fail(p + "/max_iters_phase1", "must be >= 1");
        if (o.max_iters_phase2 < 1) r.fail(p + "/max_iters_phase2", "must be >= 1");
        if (!(o.box > 0.0)) r.fail(p + "/box", "must be positive");
        if (!(o.stability_margin >= 0.0)) r.fail(p + "/stability_margin", "must be non-negative");
        if (o.lg.empty()) r.fail(p + "/lg", "needs at least one inductance");
        for (size_t i = 0; i < o.lg.size(); ++i)
            if (!(o.lg[i] > 0.0)) r.fail(p + "/lg/" + std::to_string(i), "inductance must be positive");
    }

    if (j.contains("controller")) {
        const json& s = j["controller"];
        const std::string p = "/controller";
        r.allowed(s, p, {"kind", "file", "pq_file"});
        r.get(s, p, "kind", c.controller.kind);
        r.get(s, p, "file", c.controller.file);
        r.get(s, p, "pq_file", c.controller.pq_file);
        const auto& k = c.controller.kind;
        if (k != "hinf" && k != "droop" && k != "pll" && k != "file")
            r.fail(p + "/kind", "expected hinf, droop, pll or file");
        if (k == "file" && c.controller.file.empty()) r.fail(p + "/file", "required when kind is file");
    }

    if (j.contains("certify")) {
        const json& s = j["certify"];
        const std::string p = "/certify";
        r.allowed(s, p, {"lg", "network", "lambda1_scale"});
        r.get(s, p, "lg", c.certify.lg);
        r.get(s, p, "network", c.certify.network);
        r.get(s, p, "lambda1_scale", c.certify.lambda1_scale);
        if (c.certify.lg.empty()) r.fail(p + "/lg", "needs at least one inductance");
        for (size_t i = 0; i < c.certify.lg.size(); ++i)
            if (!(c.certify.lg[i] > 0.0)) r.fail(p + "/lg/" + std::to_string(i), "inductance must be positive");
        if (!(c.certify.lambda1_scale > 0.0)) r.fail(p + "/lambda1_scale", "must be positive");
    }

    r.get(j, "", "network", c.network);

    if (j.contains("simulation")) {
        const json& s = j["simulation"];
        const std::string p = "/simulation";
        r.allowed(s, p, {"dt", "solver", "icd_limit", "icq_limit", "decimation", "blowup"});
        r.get(s, p, "dt", c.simulation.dt);
        std::string solver = "rk4";
        r.get(s, p, "solver", solver);
        if (solver != "rk4") r.fail(p + "/solver", "only rk4 is supported");
        r.get(s, p, "icd_limit", c.simulation.icd_limit);
        r.get(s, p, "icq_limit", c.simulation.icq_limit);
        r.get(s, p, "decimation", c.simulation.decimation);
        r.get(s, p, "blowup", c.simulation.blowup);
        r.check(p, [&] { c.simulation.validate(); });
    }

    r.get(j, "", "scenario", c.scenario);
    r.get(j, "", "scenario_lg", c.scenario_lg);
    if (c.scenario_lg.empty()) r.fail("/scenario_lg", "needs at least one inductance");
    for (size_t i = 0; i < c.scenario_lg.size(); ++i)
        if (!(c.scenario_lg[i] > 0.0)) r.fail("/scenario_lg/" + std::to_string(i), "inductance must be positive");
    r.get(j, "", "output_dir", c.output_dir);
    if (c.output_dir.empty()) r.fail("/output_dir", "must not be empty");
    return c;
}

namespace {

// Referenced files must exist relative to the config file.
void check_references(const ProjectConfig& c, const std::string& text, const std::string& origin) {
    const auto lines = index_lines(text);
    auto missing = [&](const std::string& ptr, const std::string& p) {
        auto it = lines.find(ptr);
        const int l = it == lines.end() ? 1 : it->second;
        std::string key = ptr.substr(1);
        for (auto& ch : key)
            if (ch == '/') ch = '.';
        throw ConfigError(origin + ":" + std::to_string(l) + ": " + key + ": file '" + p + "' does not exist", l);
    };
    const auto& w = c.synthesis.weights;
    if (w != "pv" && w != "pq" && !file_exists(resolve_path(c, w))) missing("/synthesis/weights", w);
    if (!is_builtin_network(c.network) && !file_exists(resolve_path(c, c.network))) missing("/network", c.network);
    if (!is_builtin_network(c.certify.network) && !file_exists(resolve_path(c, c.certify.network)))
        missing("/certify/network", c.certify.network);
    if (!preset_scenarios().count(c.scenario) && !file_exists(resolve_path(c, c.scenario)))
        missing("/scenario", c.scenario);
    if (c.controller.kind == "file" && !file_exists(resolve_path(c, c.controller.file)))
        missing("/controller/file", c.controller.file);
}

}  // namespace

ProjectConfig load_config(const std::string& path) {
    const std::string text = read_text_file(path);
    ProjectConfig c = parse_config(text, path);
    c.base_dir = std::filesystem::path(path).parent_path().string();
    if (c.base_dir.empty()) c.base_dir = ".";
    check_references(c, text, path);
    return c;
}

std::string dump_config(const ProjectConfig& c) {
    ojson j;
    j["converter"] = write_converter(c.converter);
    ojson s;
    s["starts"] = c.synthesis.starts;
    s["seed"] = c.synthesis.seed;
    s["max_iters_phase1"] = c.synthesis.max_iters_phase1;
    s["max_iters_phase2"] = c.synthesis.max_iters_phase2;
    s["box"] = c.synthesis.box;
    s["stability_margin"] = c.synthesis.stability_margin;
    s["lg"] = c.synthesis.lg;
    s["P_ref"] = c.synthesis.P_ref;
    s["V_or_Q_ref"] = c.synthesis.V_or_Q_ref;
    s["weights"] = c.synthesis.weights;
    j["synthesis"] = s;
    j["controller"] = {{"kind", c.controller.kind}, {"file", c.controller.file}, {"pq_file", c.controller.pq_file}};
    ojson cert;
    cert["lg"] = c.certify.lg;
    cert["network"] = c.certify.network;
    cert["lambda1_scale"] = c.certify.lambda1_scale;
    j["certify"] = cert;
    j["network"] = c.network;
    ojson sim;
    sim["dt"] = c.simulation.dt;
    sim["solver"] = "rk4";
    sim["icd_limit"] = c.simulation.icd_limit;
    sim["icq_limit"] = c.simulation.icq_limit;
    sim["decimation"] = c.simulation.decimation;
    sim["blowup"] = c.simulation.blowup;
    j["simulation"] = sim;
    j["scenario"] = c.scenario;
    j["scenario_lg"] = c.scenario_lg;
    j["output_dir"] = c.output_dir;
    return j.dump(2) + "\n";
}

WeightingSpec parse_weights(const std::string& text, const std::string& origin) {
    Reader r(text, origin);
    return read_weights(r, r.root(), "");
}

WeightingSpec load_weights(const ProjectConfig& cfg) {
    const auto& w = cfg.synthesis.weights;
    if (w == "pv") return default_pv_weights();
    if (w == "pq") return default_pq_weights();
    const std::string p = resolve_path(cfg, w);
    return parse_weights(read_text_file(p), p);
}

std::string dump_weights(const WeightingSpec& spec) {
    ojson j;
    j["pq_plant"] = spec.pq_plant;
    j["entries"] = ojson::array();
    for (const auto& [ij, w] : spec.entries) {
        ojson e;
        e["row"] = ij.first;
        e["col"] = ij.second;
        e["kind"] = to_string(w.kind);
        e["k"] = w.k;
        e["a"] = w.a;
        e["b"] = w.b;
        e["w1"] = w.w1;
        e["xi1"] = w.xi1;
        e["w2"] = w.w2;
        e["xi2"] = w.xi2;
        j["entries"].push_back(e);
    }
    return j.dump(2) + "\n";
}

NetworkSpec parse_network(const std::string& text, const std::string& origin) {
    Reader r(text, origin);
    return read_network(r, r.root(), "");
}

std::string dump_network(const NetworkSpec& n) {
    ojson j;
    j["nodes"] = n.nodes;
    j["branches"] = ojson::array();
    for (const auto& b : n.branches) j["branches"].push_back({{"from", b.from}, {"to", b.to}, {"R", b.R}, {"X", b.X}});
    j["self_loops"] = ojson::array();
    for (const auto& b : n.self_loops) j["self_loops"].push_back({{"node", b.node}, {"R", b.R}, {"X", b.X}});
    j["boundary"] = n.boundary;
    j["loads"] = ojson::array();
    for (const auto& l : n.loads) j["loads"].push_back({{"node", l.node}, {"P", l.P}, {"Q", l.Q}});
    j["omega0"] = n.omega0;
    j["tau"] = n.tau;
    return j.dump(2) + "\n";
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    Reader r(text, origin);
    return read_scenario(r, r.root(), "");
}

std::string dump_scenario(const Scenario& s) { return write_scenario(s).dump(2) + "\n"; }

}  // namespace hg
