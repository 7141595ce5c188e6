#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hinfgrid/config.hpp"
#include "hinfgrid/network.hpp"
#include "hinfgrid/sim.hpp"
#include "hinfgrid/synthesis.hpp"

namespace py = pybind11;
using namespace hg;

namespace {

GeneralizedPlant plant_at(const ConverterParams& base, double lg, double P) {
    ConverterParams p = base;
    p.L_g = lg;
    return build_plant(p, solve_operating_point(p, P, p.mode == Mode::PV ? 1.0 : 0.0));
}

ReducedNetwork network_for(const std::string& which, const ConverterParams& p) {
    if (which == "fixture") return reduced_from_matrix(fixture_q_red(), p.omega_b, p.tau);
    if (which == "nine_bus") return kron_reduce(nine_bus_network());
    return kron_reduce(parse_network(read_text_file(which), which));
}

py::dict trace_dict(const SimTrace& tr) {
    py::dict d;
    d["t"] = tr.t;
    for (size_t i = 0; i < tr.names.size(); ++i) d[tr.names[i].c_str()] = tr.data[i];
    d["unstable"] = tr.unstable;
    d["unstable_time"] = tr.unstable_time;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "structured H-infinity synthesis and small-gain certificates for grid converters";

    py::enum_<Mode>(m, "Mode").value("PV", Mode::PV).value("PQ", Mode::PQ);

    py::class_<ConverterParams>(m, "ConverterParams")
        .def(py::init<>())
        .def_readwrite("L_F", &ConverterParams::L_F)
        .def_readwrite("C_F", &ConverterParams::C_F)
        .def_readwrite("L_g", &ConverterParams::L_g)
        .def_readwrite("tau", &ConverterParams::tau)
        .def_readwrite("Kp_i", &ConverterParams::Kp_i)
        .def_readwrite("Ki_i", &ConverterParams::Ki_i)
        .def_readwrite("K_VF", &ConverterParams::K_VF)
        .def_readwrite("T_VF", &ConverterParams::T_VF)
        .def_readwrite("X_v", &ConverterParams::X_v)
        .def_readwrite("omega_b", &ConverterParams::omega_b)
        .def_readwrite("omega_f", &ConverterParams::omega_f)
        .def_readwrite("mode", &ConverterParams::mode);

    py::register_exception<StabilizationFailure>(m, "StabilizationFailure");
    py::register_exception<UnstableSystemError>(m, "UnstableSystemError");
    py::register_exception<ConfigError>(m, "ConfigError");

    m.def("fixture_q_red", &fixture_q_red, "reduced network matrix of the nine-bus fixture");
    m.def("reference_pv_gains", &reference_pv_gains);
    m.def("design_lg_set", &design_lg_set);
    m.def("lambda_min", &lambda_min, py::arg("Q"));
    m.def("droop_gains", [] { return droop_template().K; });
    m.def("pll_gains", [] { return pll_template().K; });

    m.def(
        "hinf_norm",
        [](const Mat& A, const Mat& B, const Mat& C, const Mat& D) {
            const HinfResult r = hinf_norm(StateSpace(A, B, C, D));
            return py::make_tuple(r.norm, r.peak_frequency);
        },
        py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"));

    m.def(
        "closed_loop_abscissa",
        [](const Mat& K, double lg, const ConverterParams& p, double P) {
            return spectral_abscissa(closed_loop_A(plant_at(p, lg, P), K));
        },
        py::arg("K"), py::arg("L_g"), py::arg("params") = ConverterParams{}, py::arg("P") = 1.0);

    m.def(
        "admittance_norm",
        [](const Mat& K, double lg, const ConverterParams& p, double P) {
            const StateSpace Y = extract_admittance(plant_at(p, lg, P), GainMatrix(K));
            return hinf_norm(finv_cascade(Y, p.omega_b, p.tau)).norm;
        },
        py::arg("K"), py::arg("L_g"), py::arg("params") = ConverterParams{}, py::arg("P") = 1.0,
        "peak gain of F^-1 Y for the converter closed by K");

    m.def(
        "certify",
        [](const Mat& K, const std::vector<double>& lgs, const std::string& network, double scale) {
            const ConverterParams p;
            std::vector<StateSpace> devs;
            for (double lg : lgs) devs.push_back(extract_admittance(plant_at(p, lg, 1.0), GainMatrix(K)));
            const CertificateReport r = certify(devs, network_for(network, p), {}, scale);
            py::dict d;
            d["pass"] = r.pass;
            d["lambda1"] = r.lambda1;
            d["margin"] = r.margin;
            std::vector<double> norms;
            for (const auto& dv : r.devices) norms.push_back(dv.norm);
            d["norms"] = norms;
            return d;
        },
        py::arg("K"), py::arg("L_g") = std::vector<double>{0.2, 0.35, 0.5}, py::arg("network") = "fixture",
        py::arg("lambda1_scale") = 1.0);

    m.def(
        "synthesize",
        [](int starts, std::uint64_t seed, int phase1, int phase2, const std::vector<double>& lgs, Mode mode) {
            ConverterParams base;
            base.mode = mode;
            SynthesisConfig sc;
            sc.plants = loop_family(plant_family(base, lgs));
            sc.weights = mode == Mode::PV ? default_pv_weights() : default_pq_weights();
            sc.starts = starts;
            sc.seed = seed;
            sc.max_iters_phase1 = phase1;
            sc.max_iters_phase2 = phase2;
            SynthesisResult r;
            {
                py::gil_scoped_release nogil;
                r = synthesize(sc);
            }
            py::dict d;
            d["K"] = r.K.K;
            d["objective"] = r.objective;
            d["trace"] = r.trace;
            return d;
        },
        py::arg("starts") = 8, py::arg("seed") = 1, py::arg("phase1") = 4000, py::arg("phase2") = 6000,
        py::arg("L_g") = design_lg_set(), py::arg("mode") = Mode::PV);

    m.def("scenarios", [] {
        std::vector<std::string> names;
        for (const auto& [k, v] : preset_scenarios()) names.push_back(k);
        return names;
    });

    m.def(
        "simulate",
        [](const std::string& scenario, const Mat& K, double lg, const std::optional<Mat>& K_alt) {
            const auto presets = preset_scenarios();
            const Scenario s = presets.count(scenario) ? presets.at(scenario)
                                                       : parse_scenario(read_text_file(scenario), scenario);
            ConverterParams p;
            p.L_g = lg;
            if (s.mode) p.mode = *s.mode;
            const ConverterSetup c{p, K, K_alt.value_or(Mat())};
            py::gil_scoped_release nogil;
            SimTrace tr = s.network ? simulate_network(std::vector<ConverterSetup>(3, c), nine_bus_network(), s)
                                    : simulate_single(c, s);
            py::gil_scoped_acquire gil;
            return trace_dict(tr);
        },
        py::arg("scenario"), py::arg("K"), py::arg("L_g") = 0.2, py::arg("K_alt") = py::none());
}
