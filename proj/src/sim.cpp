#include "hinfgrid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <ostream>

#include "model.hpp"

namespace hg {

using model::NX;

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::p_ref_step: return "p_ref_step";
        case EventKind::q_ref_step: return "q_ref_step";
        case EventKind::v_ref_step: return "v_ref_step";
        case EventKind::lg_step: return "lg_step";
        case EventKind::grid_voltage_step: return "grid_voltage_step";
        case EventKind::breaker_open: return "breaker_open";
        case EventKind::breaker_close: return "breaker_close";
        case EventKind::mode_switch: return "mode_switch";
        case EventKind::local_load: return "local_load";
    }
    return "?";
}

EventKind event_kind_from_string(const std::string& s) {
    for (EventKind k : {EventKind::p_ref_step, EventKind::q_ref_step, EventKind::v_ref_step, EventKind::lg_step,
                        EventKind::grid_voltage_step, EventKind::breaker_open, EventKind::breaker_close,
                        EventKind::mode_switch, EventKind::local_load})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown event kind '" + s + "'");
}

void Scenario::validate(int converters) const {
    if (!(duration > 0.0)) throw std::invalid_argument("scenario " + name + ": duration must be positive");
    if (initial.empty()) throw std::invalid_argument("scenario " + name + ": missing initial references");
    double last = 0.0;
    for (const auto& e : events) {
        if (e.time < 0.0 || e.time > duration)
            throw std::invalid_argument("scenario " + name + ": event time outside [0, duration]");
        if (e.time < last) throw std::invalid_argument("scenario " + name + ": events must be sorted by time");
        last = e.time;
        if (e.target < 0 || e.target >= converters)
            throw UnknownConverter("scenario " + name + ": event targets converter " + std::to_string(e.target + 1) +
                                   " but only " + std::to_string(converters) + " exist");
        if (e.kind == EventKind::lg_step && !(e.value > 0.0))
            throw std::invalid_argument("scenario " + name + ": lg_step needs a positive inductance");
    }
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("sim: dt must be positive");
    if (!(icd_limit > 0.0) || !(icq_limit > 0.0)) throw std::invalid_argument("sim: limits must be positive");
    if (decimation < 1) throw std::invalid_argument("sim: decimation must be >= 1");
    if (!(blowup > 0.0)) throw std::invalid_argument("sim: blowup bound must be positive");
}

const std::vector<double>& SimTrace::signal(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("trace has no signal '" + name + "'");
    return data[it - names.begin()];
}

bool SimTrace::has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

double lcl_resonance_hz(const ConverterParams& p) {
    const double w = p.omega_b * std::sqrt((p.L_F + p.L_g) / (p.L_F * p.L_g * p.C_F));
    return w / (2.0 * M_PI);
}

namespace {

const double kNoDisturbance[7] = {0, 0, 0, 0, 0, 0, 0};
const char* kSignals[] = {"P_E", "Q_E", "P_m", "Q_m", "V_d", "V_q", "V_mag", "omega", "theta",
                          "I_d", "I_q", "Ic_d", "Ic_q", "Icd_ref", "Icq_ref"};
constexpr int kNumSignals = 15;

// Converter with its static output feedback and saturation.
struct Unit {
    ConverterParams p;
    Mat K_pv, K_pq;
    References r;
    double icd = 1.1, icq = 0.5;

    const Mat& K() const { return p.mode == Mode::PV ? K_pv : K_pq; }

    Eigen::Vector3d raw(const model::Measured<double>& m) const {
        Eigen::Matrix<double, 7, 1> y;
        for (int i = 0; i < 7; ++i) y(i) = m.y[i];
        return K() * y;
    }
    Eigen::Vector3d saturate(const Eigen::Vector3d& u) const {
        return {std::clamp(u(0), -icd, icd), std::clamp(u(1), -icq, icq), u(2)};
    }

    // dx for every state but IG; returns the applied command.
    Eigen::Vector3d rhs(const double* x, double* dx) const {
        auto m = model::measure(p, p.mode, r, x, x + model::IG, kNoDisturbance);
        const Eigen::Vector3d ur = raw(m);
        const Eigen::Vector3d u = saturate(ur);
        model::derivs(p, p.mode, m, x, u.data(), dx);
        const double lim[2] = {icd, icq};
        const int ints[3] = {model::E1, model::E3, model::E5};
        const int cols[3] = {1, 3, 5};
        for (int k = 0; k < 3; ++k)
            for (int row = 0; row < 2; ++row) {
                const double push = K()(row, cols[k]) * dx[ints[k]];
                if ((ur(row) > lim[row] && push > 0.0) || (ur(row) < -lim[row] && push < 0.0)) dx[ints[k]] = 0.0;
            }
        return u;
    }

    Eigen::Vector3d command(const double* x) const {
        return saturate(raw(model::measure(p, p.mode, r, x, x + model::IG, kNoDisturbance)));
    }

    // Minimum-norm integrator states so that K y reproduces u_target.
    void init_integrators(double* x, const Eigen::Vector3d& u_target) const {
        x[model::E1] = x[model::E3] = x[model::E5] = 0.0;
        auto m = model::measure(p, p.mode, r, x, x + model::IG, kNoDisturbance);
        const Eigen::Vector3d base = raw(m);
        Mat Ke(3, 3);
        Ke << K().col(1), K().col(3), K().col(5);
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(Ke);
        const Vec eta = cod.solve(u_target - base);
        x[model::E1] = eta(0);
        x[model::E3] = eta(1);
        x[model::E5] = eta(2);
    }

    void record(const double* x, std::vector<std::vector<double>>& data, int offset) const {
        auto m = model::measure(p, p.mode, r, x, x + model::IG, kNoDisturbance);
        const Eigen::Vector3d u = saturate(raw(m));
        const double vals[kNumSignals] = {m.PE,
                                          m.QE,
                                          m.Pm,
                                          m.Qm,
                                          m.Vc[0],
                                          m.Vc[1],
                                          std::hypot(m.Vc[0], m.Vc[1]),
                                          u(2),
                                          x[model::TH],
                                          x[model::IG],
                                          x[model::IG + 1],
                                          x[model::IC],
                                          x[model::IC + 1],
                                          u(0),
                                          u(1)};
        for (int k = 0; k < kNumSignals; ++k) data[offset + k].push_back(vals[k]);
    }
};

Unit make_unit(const ConverterSetup& c, const SimConfig& cfg) {
    if (c.K.rows() != 3 || c.K.cols() != 7) throw DimensionError("controller K must be 3x7");
    const Mat& alt = c.K_alt.size() ? c.K_alt : c.K;
    if (alt.rows() != 3 || alt.cols() != 7) throw DimensionError("alternate controller K must be 3x7");
    Unit u;
    u.p = c.params;
    u.p.validate();
    u.K_pv = c.params.mode == Mode::PV ? c.K : alt;
    u.K_pq = c.params.mode == Mode::PQ ? c.K : alt;
    u.icd = cfg.icd_limit;
    u.icq = cfg.icq_limit;
    return u;
}

double ref_value(const InitialReference& r, Mode mode) {
    if (r.V_or_Q >= 0.0) return r.V_or_Q;
    return mode == Mode::PV ? 1.0 : 0.0;
}

void check_step(const SimConfig& cfg, ConverterParams p, const Scenario& sc, int target) {
    double lg = p.L_g;
    for (const auto& e : sc.events)
        if (e.kind == EventKind::lg_step && e.target == target) lg = std::min(lg, e.value);
    p.L_g = lg;
    const double f = lcl_resonance_hz(p);
    if (cfg.dt > 1.0 / (20.0 * f))
        throw std::invalid_argument("sim: dt = " + std::to_string(cfg.dt) + " s exceeds 1/(20 f_res) with f_res = " +
                                    std::to_string(f) + " Hz");
}

bool blown(const Vec& x, double bound) {
    for (int i = 0; i < x.size(); ++i) {
        if (i % NX == model::TH) continue;
        if (!std::isfinite(x(i)) || std::abs(x(i)) > bound) return true;
    }
    return false;
}

template <class F>
void rk4(const F& f, Vec& x, double dt) {
    Vec k1 = f(x);
    Vec k2 = f(x + 0.5 * dt * k1);
    Vec k3 = f(x + 0.5 * dt * k2);
    Vec k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void add_names(SimTrace& tr, const std::string& suffix) {
    for (const char* s : kSignals) {
        tr.names.push_back(std::string(s) + suffix);
        tr.data.emplace_back();
    }
}

using cd = std::complex<double>;
inline cd cpx(const double* v) { return {v[0], v[1]}; }

}  // namespace

SimTrace simulate_single(const ConverterParams& params, const Mat& K, const Scenario& scenario, const SimConfig& cfg) {
    return simulate_single(ConverterSetup{params, K, Mat()}, scenario, cfg);
}

SimTrace simulate_single(const ConverterSetup& conv, const Scenario& scenario, const SimConfig& cfg) {
    cfg.validate();
    scenario.validate(1);
    check_step(cfg, conv.params, scenario, 0);
    Unit unit = make_unit(conv, cfg);

    double U = 1.0;
    bool breaker = true;
    double P_load = 0.0;
    Eigen::Vector2d I_island = Eigen::Vector2d::Zero();  // fixed global-frame sink while islanded
    const auto& ini = scenario.initial.front();
    OperatingPoint op = solve_operating_point(unit.p, ini.P, ref_value(ini, unit.p.mode), U);
    unit.r = op.ref;
    Vec x = op.x0;
    unit.init_integrators(x.data(), op.u0);

    auto island_current = [&](Vec& s) { s.segment<2>(model::IG) = I_island; };
    auto freeze_load = [&]() {
        const Eigen::Vector2d V = x.segment<2>(model::VC);
        const double v2 = V.squaredNorm();
        I_island = v2 > 0.0 ? Eigen::Vector2d(P_load / v2 * V) : Eigen::Vector2d::Zero();
    };
    auto f = [&](const Vec& s) {
        Vec xl = s;
        if (!breaker) island_current(xl);
        Vec dx = Vec::Zero(NX);
        unit.rhs(xl.data(), dx.data());
        if (breaker) {
            const double Uv[2] = {U, 0.0};
            model::grid_branch(unit.p, xl.data(), Uv, dx.data() + model::IG);
        }
        return dx;
    };

    SimTrace tr;
    add_names(tr, "");
    auto rec = [&](double t) {
        tr.t.push_back(t);
        unit.record(x.data(), tr.data, 0);
    };

    const long steps = std::lround(scenario.duration / cfg.dt);
    size_t ev = 0;
    for (long k = 0; k <= steps; ++k) {
        const double t = k * cfg.dt;
        while (ev < scenario.events.size() && scenario.events[ev].time <= t + 0.5 * cfg.dt) {
            const Event& e = scenario.events[ev++];
            switch (e.kind) {
                case EventKind::p_ref_step: unit.r.P = e.value; break;
                case EventKind::q_ref_step: unit.r.Q = e.value; break;
                case EventKind::v_ref_step: unit.r.Vd = e.value; break;
                case EventKind::lg_step: unit.p.L_g = e.value; break;
                case EventKind::grid_voltage_step: U = e.value; break;
                case EventKind::breaker_open:
                    breaker = false;
                    freeze_load();
                    island_current(x);
                    break;
                case EventKind::breaker_close: breaker = true; break;
                case EventKind::local_load:
                    P_load = e.value;
                    if (!breaker) {
                        freeze_load();
                        island_current(x);
                    }
                    break;
                case EventKind::mode_switch: {
                    const Eigen::Vector3d u = unit.command(x.data());
                    unit.p.mode = e.mode;
                    unit.init_integrators(x.data(), u);
                    break;
                }
            }
        }
        if (k % cfg.decimation == 0 || k == steps) rec(t);
        if (k == steps) break;
        rk4(f, x, cfg.dt);
        if (!breaker) island_current(x);
        if (blown(x, cfg.blowup) || !(std::abs(unit.command(x.data())(2)) <= cfg.blowup)) {
            tr.unstable = true;
            tr.unstable_time = t + cfg.dt;
            break;
        }
    }
    return tr;
}

namespace {

// Reduction of a network onto converter capacitor nodes, with constant interior injections.
struct ReducedGrid {
    Mat Q;       // boundary x boundary
    Mat Ki;      // boundary x interior, L_bi L_ii^-1
    Vec c;       // coefficient of the infinite-bus voltage
    std::vector<int> interior;  // indices into the extended node list
};

NetworkSpec extend(const NetworkSpec& net, const std::vector<double>& lg) {
    NetworkSpec s = net;
    s.boundary.clear();
    for (size_t k = 0; k < lg.size(); ++k) {
        const std::string c = "c" + std::to_string(k + 1);
        s.nodes.push_back(c);
        s.branches.push_back(Branch{c, net.boundary[k], net.tau / net.omega0 * lg[k], lg[k]});
        s.boundary.push_back(c);
    }
    return s;
}

ReducedGrid reduce(const NetworkSpec& s) {
    Laplacian lap = assemble_laplacian(s);
    std::vector<int> b, in;
    for (const auto& name : s.boundary) b.push_back(s.index(name));
    for (int i = 0; i < static_cast<int>(s.nodes.size()); ++i)
        if (std::find(b.begin(), b.end(), i) == b.end()) in.push_back(i);
    const int nb = static_cast<int>(b.size()), ni = static_cast<int>(in.size());
    Mat Lbb(nb, nb), Lbi(nb, ni), Lii(ni, ni);
    Vec gb(nb), gi(ni);
    for (int r = 0; r < nb; ++r) {
        gb(r) = lap.ground(b[r]);
        for (int c = 0; c < nb; ++c) Lbb(r, c) = lap.L(b[r], b[c]);
        for (int c = 0; c < ni; ++c) Lbi(r, c) = lap.L(b[r], in[c]);
    }
    for (int r = 0; r < ni; ++r) {
        gi(r) = lap.ground(in[r]);
        for (int c = 0; c < ni; ++c) Lii(r, c) = lap.L(in[r], in[c]);
    }
    ReducedGrid g;
    g.interior = in;
    if (ni == 0) {
        g.Q = Lbb;
        g.Ki = Mat::Zero(nb, 0);
        g.c = -gb;
        return g;
    }
    Eigen::FullPivLU<Mat> lu(Lii);
    if (!lu.isInvertible()) throw NetworkInitFailure("network: interior block is singular");
    g.Ki = lu.solve(Lbi.transpose()).transpose();
    g.Q = Lbb - g.Ki * Lbi.transpose();
    g.c = g.Ki * gi - gb;
    return g;
}

}  // namespace

SimTrace simulate_network(const std::vector<ConverterSetup>& converters, const NetworkSpec& network,
                          const Scenario& scenario, const SimConfig& cfg) {
    cfg.validate();
    network.validate();
    const int n = static_cast<int>(converters.size());
    if (n == 0) throw std::invalid_argument("simulate_network: no converters");
    if (static_cast<int>(network.boundary.size()) != n)
        throw std::invalid_argument("simulate_network: network has " + std::to_string(network.boundary.size()) +
                                    " boundary buses for " + std::to_string(n) + " converters");
    scenario.validate(n);
    if (scenario.initial.size() != 1 && static_cast<int>(scenario.initial.size()) != n)
        throw std::invalid_argument("scenario " + scenario.name + ": initial references must be given once or per converter");
    for (const auto& e : scenario.events)
        if (e.kind == EventKind::breaker_open || e.kind == EventKind::breaker_close || e.kind == EventKind::local_load)
            throw std::invalid_argument("simulate_network: event " + to_string(e.kind) + " is single-converter only");

    std::vector<Unit> units;
    std::vector<double> lg;
    for (int k = 0; k < n; ++k) {
        check_step(cfg, converters[k].params, scenario, k);
        units.push_back(make_unit(converters[k], cfg));
        lg.push_back(units.back().p.L_g);
        if (std::abs(units.back().p.tau - network.tau) > 1e-9 * network.tau ||
            std::abs(units.back().p.omega_b - network.omega0) > 1e-9 * network.omega0)
            throw std::invalid_argument("simulate_network: converter and network R/L ratio or base frequency differ");
    }
    for (int k = 0; k < n; ++k) {
        const auto& ini = scenario.initial.size() == 1 ? scenario.initial[0] : scenario.initial[k];
        References r;
        r.P = ini.P;
        if (units[k].p.mode == Mode::PV) {
            r.Vd = ref_value(ini, Mode::PV);
        } else {
            r.Q = ref_value(ini, Mode::PQ);
        }
        units[k].r = r;
    }

    NetworkSpec ext = extend(network, lg);
    ReducedGrid grid = reduce(ext);
    const double wb = network.omega0, tau = network.tau;
    const cd alpha(tau / wb, 1.0);  // F at steady state
    double U = 1.0;

    // Power flow: per converter (Vd, Vq, theta), per interior node (Vd, Vq).
    Laplacian lap = assemble_laplacian(ext);
    const int nn = static_cast<int>(ext.nodes.size());
    std::vector<int> bidx;
    for (const auto& name : ext.boundary) bidx.push_back(ext.index(name));
    const int ni = static_cast<int>(grid.interior.size());
    std::vector<cd> load_S(nn, 0.0);
    for (const auto& l : ext.loads) load_S[ext.index(l.node)] += cd(l.P, l.Q);
    for (int k = 0; k < n; ++k)
        if (std::abs(load_S[bidx[k]]) > 0.0) throw NetworkInitFailure("loads on converter nodes are not supported");

    const int nv = 3 * n + 2 * ni;
    auto unpack = [&](const Vec& v, std::vector<cd>& V) {
        V.assign(nn, 0.0);
        for (int k = 0; k < n; ++k) V[bidx[k]] = cd(v(3 * k), v(3 * k + 1));
        for (int i = 0; i < ni; ++i) V[grid.interior[i]] = cd(v(3 * n + 2 * i), v(3 * n + 2 * i + 1));
    };
    auto injections = [&](const std::vector<cd>& V) {
        std::vector<cd> I(nn);
        for (int i = 0; i < nn; ++i) {
            cd acc = -lap.ground(i) * U;
            for (int j = 0; j < nn; ++j) acc += lap.L(i, j) * V[j];
            I[i] = acc / alpha;
        }
        return I;
    };
    auto residual = [&](const Vec& v) {
        std::vector<cd> V;
        unpack(v, V);
        auto I = injections(V);
        Vec f(nv);
        for (int k = 0; k < n; ++k) {
            const Unit& u = units[k];
            double x[NX] = {};
            x[model::VC] = V[bidx[k]].real();
            x[model::VC + 1] = V[bidx[k]].imag();
            x[model::IG] = I[bidx[k]].real();
            x[model::IG + 1] = I[bidx[k]].imag();
            x[model::TH] = v(3 * k + 2);
            ConverterParams p = u.p;
            p.omega_f = 0.0;
            auto m = model::measure(p, p.mode, u.r, x, x + model::IG, kNoDisturbance);
            f(3 * k) = p.mode == Mode::PV ? m.y[0] : m.QE - u.r.Q;
            f(3 * k + 1) = m.y[2];
            f(3 * k + 2) = m.PE - u.r.P;
        }
        for (int i = 0; i < ni; ++i) {
            const int node = grid.interior[i];
            const cd Il = std::abs(V[node]) > 0.0 ? std::conj(load_S[node] / V[node]) : 0.0;
            const cd r = I[node] + Il;
            f(3 * n + 2 * i) = r.real();
            f(3 * n + 2 * i + 1) = r.imag();
        }
        return f;
    };
    Vec v = Vec::Zero(nv);
    for (int k = 0; k < n; ++k) v(3 * k) = 1.0;
    for (int i = 0; i < ni; ++i) v(3 * n + 2 * i) = 1.0;
    Vec fv = residual(v);
    for (int it = 0; it < 60 && fv.cwiseAbs().maxCoeff() > 1e-12; ++it) {
        Mat J(nv, nv);
        for (int j = 0; j < nv; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(v(j)));
            Vec vp = v, vm = v;
            vp(j) += h;
            vm(j) -= h;
            J.col(j) = (residual(vp) - residual(vm)) / (2.0 * h);
        }
        Eigen::FullPivLU<Mat> lu(J);
        if (!lu.isInvertible()) throw NetworkInitFailure("network power flow: singular Jacobian");
        const Vec step = lu.solve(fv);
        double a = 1.0;
        Vec vn = v - step, fn = residual(vn);
        for (int ls = 0; ls < 20 && !(fn.norm() < fv.norm()); ++ls) {
            a *= 0.5;
            vn = v - a * step;
            fn = residual(vn);
        }
        v = vn;
        fv = fn;
    }
    if (!(fv.cwiseAbs().maxCoeff() < 1e-9))
        throw NetworkInitFailure("network power flow did not converge (residual " +
                                 std::to_string(fv.cwiseAbs().maxCoeff()) + ")");

    std::vector<cd> V0;
    unpack(v, V0);
    auto I0 = injections(V0);
    std::vector<cd> Iint(ni);  // constant interior injections
    for (int i = 0; i < ni; ++i) Iint[i] = I0[grid.interior[i]];

    Vec x(NX * n);
    for (int k = 0; k < n; ++k) {
        const cd Vk = V0[bidx[k]], Ik = I0[bidx[k]];
        OperatingPoint op = complete_operating_point(units[k].p, units[k].r, Eigen::Vector2d(Vk.real(), Vk.imag()),
                                                     Eigen::Vector2d(Ik.real(), Ik.imag()), v(3 * k + 2), U);
        x.segment(NX * k, NX) = op.x0;
        units[k].init_integrators(x.data() + NX * k, op.u0);
    }

    // interior contribution K_i (tau/wb + j) I_i, refreshed when the reduction changes
    std::vector<cd> drive(n);
    auto refresh_drive = [&]() {
        for (int k = 0; k < n; ++k) {
            cd acc = 0.0;
            for (int i = 0; i < ni; ++i) acc += grid.Ki(k, i) * alpha * Iint[i];
            drive[k] = acc;
        }
    };
    refresh_drive();

    auto f = [&](const Vec& s) {
        Vec dx = Vec::Zero(NX * n);
        for (int k = 0; k < n; ++k) units[k].rhs(s.data() + NX * k, dx.data() + NX * k);
        for (int k = 0; k < n; ++k) {
            cd acc = drive[k] + grid.c(k) * U;
            for (int j = 0; j < n; ++j) acc += grid.Q(k, j) * cpx(s.data() + NX * j + model::VC);
            const cd I = cpx(s.data() + NX * k + model::IG);
            const cd dI = wb * acc - tau * I - cd(0.0, wb) * I;
            dx(NX * k + model::IG) = dI.real();
            dx(NX * k + model::IG + 1) = dI.imag();
        }
        return dx;
    };

    SimTrace tr;
    for (int k = 0; k < n; ++k) add_names(tr, "_" + std::to_string(k + 1));
    auto rec = [&](double t) {
        tr.t.push_back(t);
        for (int k = 0; k < n; ++k) units[k].record(x.data() + NX * k, tr.data, k * kNumSignals);
    };

    const long steps = std::lround(scenario.duration / cfg.dt);
    size_t ev = 0;
    for (long step = 0; step <= steps; ++step) {
        const double t = step * cfg.dt;
        while (ev < scenario.events.size() && scenario.events[ev].time <= t + 0.5 * cfg.dt) {
            const Event& e = scenario.events[ev++];
            Unit& u = units[e.target];
            switch (e.kind) {
                case EventKind::p_ref_step: u.r.P = e.value; break;
                case EventKind::q_ref_step: u.r.Q = e.value; break;
                case EventKind::v_ref_step: u.r.Vd = e.value; break;
                case EventKind::lg_step:
                    u.p.L_g = e.value;
                    lg[e.target] = e.value;
                    grid = reduce(extend(network, lg));
                    refresh_drive();
                    break;
                case EventKind::grid_voltage_step: U = e.value; break;
                case EventKind::mode_switch: {
                    double* xs = x.data() + NX * e.target;
                    const Eigen::Vector3d cmd = u.command(xs);
                    u.p.mode = e.mode;
                    u.init_integrators(xs, cmd);
                    break;
                }
                default: break;
            }
        }
        if (step % cfg.decimation == 0 || step == steps) rec(t);
        if (step == steps) break;
        rk4(f, x, cfg.dt);
        bool bad = blown(x, cfg.blowup);
        for (int k = 0; k < n && !bad; ++k) bad = !(std::abs(units[k].command(x.data() + NX * k)(2)) <= cfg.blowup);
        if (bad) {
            tr.unstable = true;
            tr.unstable_time = t + cfg.dt;
            break;
        }
    }
    return tr;
}

std::map<std::string, Scenario> preset_scenarios() {
    std::map<std::string, Scenario> m;
    using E = EventKind;

    Scenario s5;
    s5.name = "fig5";
    s5.duration = 2.0;
    s5.initial = {{0.0, -1.0}};
    s5.events = {{1.0, E::p_ref_step, 0, 1.0}};
    m[s5.name] = s5;

    Scenario s7;
    s7.name = "fig7";
    s7.duration = 9.0;
    s7.initial = {{0.5, -1.0}};
    s7.events = {{1.0, E::grid_voltage_step, 0, 0.5}, {2.0, E::grid_voltage_step, 0, 1.0},
                 {4.0, E::local_load, 0, 0.5},        {4.0, E::breaker_open, 0, 0.0},
                 {5.0, E::breaker_close, 0, 0.0},     {7.0, E::v_ref_step, 0, 1.45}};
    m[s7.name] = s7;

    Scenario s8;
    s8.name = "fig8";
    s8.duration = 7.0;
    s8.network = true;
    s8.initial = {{0.0, -1.0}};
    s8.events = {{1.0, E::p_ref_step, 0, 1.0}, {2.0, E::p_ref_step, 1, 1.0}, {3.0, E::p_ref_step, 2, 1.0},
                 {4.0, E::lg_step, 0, 0.4},    {5.0, E::lg_step, 1, 0.3},    {6.0, E::lg_step, 2, 0.5}};
    m[s8.name] = s8;

    Scenario s9;
    s9.name = "fig9";
    s9.duration = 10.0;
    s9.network = true;
    s9.initial = {{1.0, 0.0}};
    s9.mode = Mode::PQ;
    s9.events = {{1.0, E::p_ref_step, 0, 0.0}, {2.0, E::p_ref_step, 1, 0.0}, {2.0, E::q_ref_step, 0, 0.5},
                 {3.0, E::p_ref_step, 2, 0.0}, {4.0, E::q_ref_step, 0, 0.0}, {5.0, E::p_ref_step, 0, 1.0},
                 {6.0, E::p_ref_step, 1, 1.0}, {7.0, E::p_ref_step, 2, 1.0},
                 {8.0, E::mode_switch, 0, 0.0, Mode::PV}, {9.0, E::mode_switch, 0, 0.0, Mode::PQ}};
    m[s9.name] = s9;
    return m;
}

StepMetrics step_metrics(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1) {
    if (t.size() != y.size()) throw std::invalid_argument("metrics: time and signal lengths differ");
    if (t.empty() || t0 < t.front() - 1e-12 || t1 > t.back() + 1e-12 || !(t1 > t0))
        throw std::out_of_range("metrics: window outside the trace");
    size_t a = std::lower_bound(t.begin(), t.end(), t0 - 1e-12) - t.begin();
    size_t b = std::upper_bound(t.begin(), t.end(), t1 + 1e-12) - t.begin();
    if (b <= a + 2) throw std::out_of_range("metrics: window too short");
    StepMetrics out;
    for (size_t i = a; i < b; ++i)
        if (!std::isfinite(y[i])) {
            out.stable = false;
            throw NoStepDetected("metrics: signal is not finite in the window");
        }
    const double y0 = y[a];
    const size_t tail = std::max<size_t>(1, (b - a) / 20);
    double yf = 0.0;
    for (size_t i = b - tail; i < b; ++i) yf += y[i];
    yf /= static_cast<double>(tail);
    const double step = yf - y0;
    double span = 0.0;
    for (size_t i = a; i < b; ++i) span = std::max(span, std::abs(y[i] - y0));
    if (std::abs(step) < 1e-9 * std::max(1.0, std::abs(y0)) || span == 0.0)
        throw NoStepDetected("metrics: no step detected in window");

    auto crossing = [&](double level) {
        for (size_t i = a + 1; i < b; ++i) {
            const double p0 = (y[i - 1] - y0) / step, p1 = (y[i] - y0) / step;
            if (p0 < level && p1 >= level) return t[i - 1] + (level - p0) / (p1 - p0) * (t[i] - t[i - 1]);
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    out.rise_time = crossing(0.9) - crossing(0.1);
    double peak = 0.0;
    for (size_t i = a; i < b; ++i) peak = std::max(peak, (y[i] - yf) / step);
    out.overshoot_pct = 100.0 * peak;
    out.settling_time = 0.0;
    for (size_t i = b; i-- > a;)
        if (std::abs(y[i] - yf) > 0.02 * std::abs(step)) {
            out.settling_time = (i + 1 < b ? t[i + 1] : t[i]) - t[a];
            break;
        }
    return out;
}

StepMetrics metrics(const SimTrace& trace, const std::string& signal, double t0, double t1) {
    StepMetrics m = step_metrics(trace.t, trace.signal(signal), t0, t1);
    m.stable = !trace.unstable;
    return m;
}

void write_trace_csv(std::ostream& os, const SimTrace& tr) {
    os << "t";
    for (const auto& n : tr.names) os << "," << n;
    os << "\n" << std::setprecision(15);
    for (size_t i = 0; i < tr.t.size(); ++i) {
        os << tr.t[i];
        for (const auto& col : tr.data) os << "," << col[i];
        os << "\n";
    }
    os << "# unstable=" << (tr.unstable ? 1 : 0);
    if (tr.unstable) os << " t=" << tr.unstable_time;
    os << "\n";
}

}  // namespace hg
