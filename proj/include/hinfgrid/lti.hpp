#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct AlgebraicLoopError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnstableSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Continuous-time state-space model with named channels.
class StateSpace {
public:
    StateSpace() = default;
    StateSpace(Mat A, Mat B, Mat C, Mat D,
               std::vector<std::string> inputs = {},
               std::vector<std::string> outputs = {});

    static StateSpace gain(const Mat& D);
    static StateSpace identity(int n);

    const Mat& A() const { return A_; }
    const Mat& B() const { return B_; }
    const Mat& C() const { return C_; }
    const Mat& D() const { return D_; }
    const std::vector<std::string>& inputs() const { return in_; }
    const std::vector<std::string>& outputs() const { return out_; }

    int nx() const { return static_cast<int>(A_.rows()); }
    int nu() const { return static_cast<int>(D_.cols()); }
    int ny() const { return static_cast<int>(D_.rows()); }

    int input_index(const std::string& name) const;
    int output_index(const std::string& name) const;

    CMat eval(cplx s) const;
    CMat freq(double w) const { return eval(cplx(0.0, w)); }

    StateSpace select(const std::vector<int>& outs, const std::vector<int>& ins) const;
    StateSpace scaled(double alpha) const;
    StateSpace relabeled(std::vector<std::string> inputs, std::vector<std::string> outputs) const;

private:
    Mat A_, B_, C_, D_;
    std::vector<std::string> in_, out_;
};

// g2 * g1 (g1 drives g2).
StateSpace series(const StateSpace& g1, const StateSpace& g2);
StateSpace parallel(const StateSpace& g1, const StateSpace& g2);
StateSpace append(const StateSpace& g1, const StateSpace& g2);
// Closed loop y = g(r + sign*k*y).
StateSpace feedback(const StateSpace& g, const StateSpace& k, int sign = -1);
StateSpace feedback(const StateSpace& g, const Mat& k, int sign = -1);

// Drops states that cannot influence any other state or output.
StateSpace prune_structural(const StateSpace& sys);

std::vector<cplx> eigenvalues(const Mat& m);
double spectral_abscissa(const Mat& m);
bool is_stable(const StateSpace& sys);

struct FrequencyResponse {
    std::vector<double> frequencies;
    std::vector<CMat> values;
};

struct SigmaPlot {
    std::vector<double> frequencies;
    std::vector<Vec> sigma;
};

enum class HinfMethod { hamiltonian_bisection, grid };

struct HinfResult {
    double norm = 0.0;
    double peak_frequency = 0.0;
    HinfMethod method = HinfMethod::hamiltonian_bisection;
    bool ill_conditioned = false;
};

std::vector<double> log_grid(double w_min, double w_max, int n, bool include_zero = true);
// 400 log points over 1e-4..1e4 Hz in rad/s plus 0.
std::vector<double> default_grid(int n = 400);

FrequencyResponse freqresp(const StateSpace& sys, const std::vector<double>& grid);
SigmaPlot sigma_plot(const StateSpace& sys, const std::vector<double>& grid);
void write_sigma_csv(std::ostream& os, const SigmaPlot& plot);

double sigma_max(const CMat& m);

HinfResult hinf_norm(const StateSpace& sys, double rel_tol = 1e-6);
// Dense log grid plus pole frequencies, every local maximum refined by golden section.
HinfResult hinf_norm_grid(const StateSpace& sys, int points = 2000);

// Lowest frequency where |G(jw)| of a SISO system first reaches `level`; NaN if it never does on the grid.
double crossover_frequency(const StateSpace& siso, const std::vector<double>& grid, double level = M_SQRT1_2);

// Fast repeated frequency evaluation through an eigendecomposition of A,
// falling back to dense solves when A is badly conditioned.
class ModalEvaluator {
public:
    explicit ModalEvaluator(const StateSpace& sys);
    CMat eval(double w) const;
    cplx entry(double w, int i, int j) const;
    std::vector<cplx> entries(double w, const std::vector<std::pair<int, int>>& idx) const;
    bool modal() const { return modal_; }
    double abscissa() const { return abscissa_; }
    const CVec& poles() const { return poles_; }

private:
    StateSpace sys_;
    bool modal_ = false;
    double abscissa_ = -std::numeric_limits<double>::infinity();
    CVec lambda_, poles_;
    CMat CV_, VB_;
    mutable std::vector<std::pair<int, int>> cached_idx_;
    mutable CMat R_;
    mutable CVec D0_;
};

}  // namespace hg
