#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "hinfgrid/converter.hpp"
#include "hinfgrid/weights.hpp"

namespace hg {

using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Generic partitioned plant (w,u) -> (z,y) for static output feedback u = K y.
struct LoopPlant {
    Mat A, Bw, Bu, Cz, Cy, Dzw, Dzu, Dyw, Dyu;
    double L_g = 0.0;  // label for reports

    static LoopPlant from(const GeneralizedPlant& g);
    StateSpace close(const Mat& K) const;  // w -> z, structurally pruned; throws on ill-posed loop
};

struct SynthesisConfig {
    std::vector<LoopPlant> plants;
    WeightingSpec weights = default_pv_weights();
    BoolMat mask = BoolMat::Constant(3, 7, true);
    int starts = 8;
    std::vector<double> grid = default_grid();
    int max_iters_phase1 = 4000;   // objective evaluations per start
    int max_iters_phase2 = 6000;
    std::uint64_t seed = 1;
    double box = 5e4;
    double stability_margin = 0.05;
    std::vector<Mat> initial;  // extra warm starts tried first

    void validate() const;
};

struct PlantReport {
    double L_g = 0.0;
    double norm = 0.0;        // gridded + refined weighted objective
    double certified = 0.0;   // hinf norm of the realized W o P, NaN when not verified
    bool stable = false;
    double abscissa = 0.0;
};

struct SynthesisResult {
    GainMatrix K;
    double objective = 0.0;
    std::vector<PlantReport> per_plant;
    int iterations = 0;
    double verification = 0.0;  // max certified norm over plants
    std::vector<double> trace;  // best-so-far objective after each phase-2 evaluation
    int best_start = -1;
};

struct StabilizationFailure : std::runtime_error {
    double best_abscissa;
    StabilizationFailure(const std::string& m, double a) : std::runtime_error(m), best_abscissa(a) {}
};

double spectral_abscissa(const std::vector<LoopPlant>& plants, const Mat& K);
GainMatrix stabilize(const SynthesisConfig& cfg);
SynthesisResult synthesize(const SynthesisConfig& cfg);
SynthesisResult evaluate_controller(const Mat& K, const SynthesisConfig& cfg, bool verify = true);

// L_g = 0.05 x, x = 1..10, each linearized at its own operating point.
std::vector<double> design_lg_set();
std::vector<GeneralizedPlant> plant_family(const ConverterParams& base, const std::vector<double>& lgs,
                                           double P_ref = 1.0, double V_or_Q_ref = -1.0);
std::vector<LoopPlant> loop_family(const std::vector<GeneralizedPlant>& g);

void write_report_text(std::ostream& os, const SynthesisResult& r);
void write_report_json(std::ostream& os, const SynthesisResult& r);
void write_trace_csv(std::ostream& os, const SynthesisResult& r);
void write_gain_file(std::ostream& os, const Mat& K);
Mat read_gain_file(std::istream& is);

}  // namespace hg
