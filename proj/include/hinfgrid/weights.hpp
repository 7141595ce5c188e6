#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hinfgrid/lti.hpp"

namespace hg {

enum class WeightKind { zero, lead_lag, biquad_ratio, double_biquad_inverse };

std::string to_string(WeightKind k);
WeightKind weight_kind_from_string(const std::string& s);

// lead_lag:               k (s + a) / (s + b)
// biquad_ratio:           k (s^2/w2^2 + 2 xi2 s/w2 + 1) / (s^2/w1^2 + 2 xi1 s/w1 + 1)
// double_biquad_inverse:  k / (s^2/w1^2 + 2 xi1 s/w1 + 1)^2
struct RationalWeight {
    WeightKind kind = WeightKind::zero;
    double k = 1.0;
    double a = 0.0, b = 1.0;
    double w1 = 1.0, xi1 = 1.0, w2 = 1.0, xi2 = 1.0;

    static RationalWeight lead_lag(double a, double b, double k = 1.0);
    static RationalWeight biquad_ratio(double w1, double xi1, double w2, double xi2, double k = 1.0);
    static RationalWeight double_biquad_inverse(double w1, double xi1, double k);

    void validate() const;
    cplx eval(double w) const;
    StateSpace realize() const;
    bool operator==(const RationalWeight&) const = default;
};

struct WeightingSpec {
    std::map<std::pair<int, int>, RationalWeight> entries;  // 1-based (z row, w column)
    bool pq_plant = false;

    const RationalWeight* find(int i, int j) const;
    bool operator==(const WeightingSpec&) const = default;
};

WeightingSpec default_pv_weights();
WeightingSpec default_pq_weights();
cplx eval_weight(const WeightingSpec& spec, int i, int j, double w);

struct ObjectiveValue {
    double value = 0.0;
    double omega = 0.0;
    bool stable = true;
};

// max over grid of sigma_max(W o P(jw)); optional golden-section refinement near the top 3 peaks.
ObjectiveValue weighted_objective(const StateSpace& cl, const WeightingSpec& spec, const std::vector<double>& grid,
                                  bool refine = true);

// Precomputed weights on a fixed grid for repeated evaluation inside the optimizer.
class WeightedObjective {
public:
    WeightedObjective(WeightingSpec spec, std::vector<double> grid);
    ObjectiveValue operator()(const StateSpace& cl, bool refine) const;
    // Same, reusing a decomposition of cl.
    ObjectiveValue evaluate(const ModalEvaluator& ev, bool refine) const;
    const std::vector<double>& grid() const { return grid_; }
    const WeightingSpec& spec() const { return spec_; }

private:
    double sigma_at(const ModalEvaluator& ev, double w, const std::vector<cplx>* wvals) const;
    WeightingSpec spec_;
    std::vector<double> grid_;
    std::vector<std::pair<int, int>> idx_;      // 0-based
    int rows_ = 0, cols_ = 0;
    std::vector<std::vector<cplx>> wgrid_;      // per grid point, per entry
    struct Block {
        struct Item {
            size_t e;
            int r, c;
        };
        std::vector<Item> entries;
        std::vector<int> rows, cols;
    };
    std::vector<Block> blocks_;
};

// Realization of the entrywise product W o P for a 10x7 closed loop.
StateSpace weighted_realization(const StateSpace& cl, const WeightingSpec& spec);

void write_weight_magnitude_csv(std::ostream& os, const RationalWeight& w, const std::vector<double>& grid);

}  // namespace hg
