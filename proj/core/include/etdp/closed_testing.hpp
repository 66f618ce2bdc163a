#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "etdp/eprocess.hpp"

namespace etdp {

// Largest m accepted by the exponential brute-force routines.
inline constexpr int kBruteForceMaxM = 20;

struct DiscoverySet {
    std::vector<int> indices; // 1-based, strictly increasing
    std::string label;

    int size() const { return static_cast<int>(indices.size()); }
};

void validate_discovery_set(const DiscoverySet& set, int m);

struct ShortcutTrace {
    int k_star = 0;    // optimal out-of-set complement size
    double rhs = 0.0;  // k*/alpha - sum of the k* smallest out-of-set e-values
    int h_max = 0;     // largest surviving in-set subset size, equals the bound
};

// Bound on the number of false discoveries in `set` from one vector of
// e-values, via the sorted-prefix shortcut. Exact for average merging.
std::pair<int, ShortcutTrace> shortcut_bound(std::span<const double> e,
                                             const DiscoverySet& set, double alpha);

// Same bound by full closed testing over all 2^m - 1 intersections with
// average merging. Exponential; the oracle the shortcut is checked against.
int brute_force_bound(std::span<const double> e, const DiscoverySet& set, double alpha);

// Comparison arm: full closed testing where an intersection is rejected iff
// its Bonferroni-merged p-value is <= alpha (min p <= alpha / |J|).
int p_value_closed_testing_bound(std::span<const double> p, const DiscoverySet& set,
                                 double alpha);

struct BoundSeries {
    int set_size = 0;
    bool ard_selected = false;
    std::vector<int> c_inst;
    std::vector<int> c_ard;         // running minimum of c_inst
    std::vector<double> tdp_inst;   // 1 - c_inst / |R|
    std::vector<double> tdp_ard;    // 1 - c_ard / |R|

    int horizon() const { return static_cast<int>(c_inst.size()) - 1; }
    int selected_c(int t) const { return ard_selected ? c_ard[t] : c_inst[t]; }
    double selected_tdp(int t) const { return ard_selected ? tdp_ard[t] : tdp_inst[t]; }
};

// Bounds over every time row of the matrix. `ard` selects which series is
// reported downstream; both are always computed.
BoundSeries bound_series(const EValueMatrix& matrix, const DiscoverySet& set,
                         double alpha, bool ard);

using LabeledBoundSeries = std::vector<std::pair<std::string, BoundSeries>>;

// One series per set from the same matrix at the same alpha; simultaneity
// comes from closed testing, so no correction across sets.
LabeledBoundSeries multi_r_bounds(const EValueMatrix& matrix,
                                  const std::vector<DiscoverySet>& sets, double alpha,
                                  bool ard);

} // namespace etdp
