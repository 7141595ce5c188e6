#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hinfgrid/converter.hpp"
#include "hinfgrid/network.hpp"

namespace hg {

enum class EventKind {
    p_ref_step,
    q_ref_step,
    v_ref_step,
    lg_step,
    grid_voltage_step,
    breaker_open,
    breaker_close,
    mode_switch,
    local_load
};

std::string to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::p_ref_step;
    int target = 0;       // converter index, 0-based
    double value = 0.0;   // new reference / inductance / voltage / load power
    Mode mode = Mode::PV; // mode_switch only
    bool operator==(const Event&) const = default;
};

struct InitialReference {
    double P = 0.0;
    double V_or_Q = -1.0;  // Vd_ref in PV mode, Q_ref in PQ mode; negative means 1 (PV) or 0 (PQ)
    bool operator==(const InitialReference&) const = default;
};

struct Scenario {
    std::string name;
    double duration = 1.0;
    bool network = false;
    std::vector<InitialReference> initial = {InitialReference{}};
    std::vector<Event> events;
    std::optional<Mode> mode;  // starting mode the scenario is written for; callers set up the converters

    void validate(int converters) const;
    bool operator==(const Scenario&) const = default;
};

enum class Solver { rk4 };

struct SimConfig {
    double dt = 20e-6;
    Solver solver = Solver::rk4;
    double icd_limit = 1.1;
    double icq_limit = 0.5;
    int decimation = 50;       // record every n-th step
    double blowup = 1e3;       // |state| bound (angle excluded), also applied to the frequency command

    void validate() const;
    bool operator==(const SimConfig&) const = default;
};

struct SimTrace {
    std::vector<double> t;
    std::vector<std::string> names;
    std::vector<std::vector<double>> data;  // one column per name
    bool unstable = false;
    double unstable_time = 0.0;

    const std::vector<double>& signal(const std::string& name) const;
    bool has(const std::string& name) const;
};

struct UnknownConverter : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// One converter with its controller; K_alt is used after a mode switch (defaults to K).
struct ConverterSetup {
    ConverterParams params;
    Mat K;
    Mat K_alt;
};

// LCL resonance (Hz) for the given parameters.
double lcl_resonance_hz(const ConverterParams& p);

SimTrace simulate_single(const ConverterSetup& conv, const Scenario& scenario, const SimConfig& cfg = {});
SimTrace simulate_single(const ConverterParams& params, const Mat& K, const Scenario& scenario,
                         const SimConfig& cfg = {});

struct NetworkInitFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Converters attach through their L_g to the boundary buses of `network` (in order).
SimTrace simulate_network(const std::vector<ConverterSetup>& converters, const NetworkSpec& network,
                          const Scenario& scenario, const SimConfig& cfg = {});

std::map<std::string, Scenario> preset_scenarios();

struct StepMetrics {
    double rise_time = 0.0;       // 10-90 %
    double overshoot_pct = 0.0;
    double settling_time = 0.0;   // 2 % band, from window start
    bool stable = true;
};

struct NoStepDetected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

StepMetrics metrics(const SimTrace& trace, const std::string& signal, double t0, double t1);
StepMetrics step_metrics(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1);

void write_trace_csv(std::ostream& os, const SimTrace& trace);

}  // namespace hg
