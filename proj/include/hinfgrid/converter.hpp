#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "hinfgrid/lti.hpp"

namespace hg {

enum class Mode { PV, PQ };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct ConverterParams {
    double L_F = 0.05;
    double C_F = 0.05;
    double L_g = 0.2;
    double tau = 0.1 * 2.0 * M_PI * 50.0;  // 1/s
    double Kp_i = 0.5;
    double Ki_i = 10.0;
    double K_VF = 1.0;
    double T_VF = 0.004;
    double X_v = 0.3;
    double omega_b = 2.0 * M_PI * 50.0;
    double omega_f = 10.0 * M_PI;  // power measurement filter, 0 disables
    Mode mode = Mode::PV;

    void validate() const;
    double R_g() const { return tau * L_g / omega_b; }
    bool operator==(const ConverterParams&) const = default;
};

struct References {
    double P = 0.0;
    double Q = 0.0;
    double Vd = 1.0;
    double Vq = 0.0;
    bool operator==(const References&) const = default;
};

struct InfeasibleOperatingPoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OperatingPoint {
    Eigen::Vector2d V0, I0, Ic0, Uc0;
    double theta0 = 0.0;
    double P0 = 0.0, Q0 = 0.0;
    double U_grid = 1.0;
    References ref;
    Mode mode = Mode::PV;
    Vec x0;              // full nonlinear state
    Eigen::Vector3d u0;  // Icd_ref, Icq_ref, omega
    double residual = 0.0;
};

// V_or_Q_ref is Vd_ref in PV mode and Q_ref in PQ mode.
OperatingPoint solve_operating_point(const ConverterParams& p, double P_ref, double V_or_Q_ref,
                                     double U_grid = 1.0);
// Steady state for a given capacitor voltage / grid current / angle, used by network init.
OperatingPoint complete_operating_point(const ConverterParams& p, const References& ref,
                                        const Eigen::Vector2d& V, const Eigen::Vector2d& I,
                                        double theta, double U_grid);
// Max |dx/dt| of the nonlinear single-converter model at the operating point.
double steady_state_residual(const ConverterParams& p, const OperatingPoint& op);

struct GeneralizedPlant {
    StateSpace model;  // inputs w1..w7, Icd_ref, Icq_ref, omega; outputs z1..z10, y1..y7
    Mat C_I;           // grid-side current (global dq) as a function of the state
    OperatingPoint op;
    ConverterParams params;

    static constexpr int nw = 7, nu = 3, nz = 10, ny = 7;
};

GeneralizedPlant build_plant(const ConverterParams& p, const OperatingPoint& op);

struct GainMatrix {
    Mat K = Mat::Zero(3, 7);
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(3, 7, true);

    GainMatrix() = default;
    explicit GainMatrix(const Mat& k);
    GainMatrix(const Mat& k, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& m);
    void enforce_mask();
    int free_count() const;
};

Mat reference_pv_gains();
Mat reference_pq_gains();

struct DroopGains {
    double KVP = 2.0, KVI = 10.0, Kf = 4.0 * M_PI;
};
struct PllGains {
    double KPP = 0.5, KPI = 40.0, KVP = 0.5, KVI = 40.0, KwP = 171.8, KwI = 14754.2;
};

GainMatrix controller_template(const std::string& kind, const std::map<std::string, double>& gains = {});
GainMatrix droop_template(const DroopGains& g = {});
GainMatrix pll_template(const PllGains& g = {});

// P(K) from w to z, structurally pruned.
StateSpace lft_close(const GeneralizedPlant& plant, const GainMatrix& k);
StateSpace lft_close(const GeneralizedPlant& plant, const Mat& K);
// Closed-loop state matrix (pruned) for stability checks.
Mat closed_loop_A(const GeneralizedPlant& plant, const Mat& K);
// Y(s): (w5, w6) -> grid current (I'd, I'q).
StateSpace extract_admittance(const GeneralizedPlant& plant, const GainMatrix& k);
// SISO entry P_ij(K), 1-based indices.
StateSpace sensitivity_entry(const GeneralizedPlant& plant, const GainMatrix& k, int i, int j);

void write_matrix_csv(std::ostream& os, const Mat& M, const std::vector<std::string>& rows,
                      const std::vector<std::string>& cols);
// Writes <prefix>_A.csv ... <prefix>_D.csv.
void export_plant_csv(const GeneralizedPlant& plant, const std::string& prefix);

}  // namespace hg
