#include "etdp/closed_testing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>

#include "etdp/errors.hpp"

namespace etdp {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw config_error("alpha must lie in (0, 1), got " + std::to_string(alpha));
}

void check_evalues(std::span<const double> e) {
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!std::isfinite(e[i]) || e[i] < 0.0)
            throw input_error("e-value for hypothesis " + std::to_string(i + 1) +
                              " is not a finite nonnegative number");
    }
}

// Ascending by value, index as tie-break, so traces are permutation-stable.
std::vector<double> sorted_values(std::vector<std::pair<double, int>>& keyed) {
    std::sort(keyed.begin(), keyed.end());
    std::vector<double> out;
    out.reserve(keyed.size());
    for (const auto& [v, idx] : keyed) out.push_back(v);
    return out;
}

} // namespace

void validate_discovery_set(const DiscoverySet& set, int m) {
    if (set.indices.empty())
        throw input_error("discovery set '" + set.label + "' is empty");
    int prev = 0;
    for (int idx : set.indices) {
        if (idx < 1 || idx > m)
            throw input_error("discovery set '" + set.label + "' index " +
                              std::to_string(idx) + " outside 1.." + std::to_string(m));
        if (idx <= prev)
            throw input_error("discovery set '" + set.label +
                              "' indices must be strictly increasing");
        prev = idx;
    }
}

std::pair<int, ShortcutTrace> shortcut_bound(std::span<const double> e,
                                             const DiscoverySet& set, double alpha) {
    check_alpha(alpha);
    check_evalues(e);
    const int m = static_cast<int>(e.size());
    validate_discovery_set(set, m);

    std::vector<std::pair<double, int>> in_keyed, out_keyed;
    in_keyed.reserve(set.indices.size());
    out_keyed.reserve(e.size() - set.indices.size());
    std::size_t pos = 0;
    for (int i = 1; i <= m; ++i) {
        if (pos < set.indices.size() && set.indices[pos] == i) {
            in_keyed.emplace_back(e[i - 1], i);
            ++pos;
        } else {
            out_keyed.emplace_back(e[i - 1], i);
        }
    }
    const std::vector<double> in_sorted = sorted_values(in_keyed);
    const std::vector<double> out_sorted = sorted_values(out_keyed);

    const double inv_alpha = 1.0 / alpha;

    // rhs = max_k (k/alpha - sum of the k smallest out-of-set e-values),
    // smallest maximizing k on ties.
    int k_star = 0;
    double rhs = 0.0;
    double out_prefix = 0.0;
    for (int k = 1; k <= static_cast<int>(out_sorted.size()); ++k) {
        out_prefix += out_sorted[k - 1];
        const double f = static_cast<double>(k) * inv_alpha - out_prefix;
        if (f > rhs) {
            rhs = f;
            k_star = k;
        }
    }

    // Largest h whose h cheapest in-set members evade every augmented
    // rejection: sum of h smallest minus h/alpha strictly below rhs.
    std::vector<double> in_prefix(in_sorted.size() + 1, 0.0);
    for (std::size_t h = 1; h <= in_sorted.size(); ++h)
        in_prefix[h] = in_prefix[h - 1] + in_sorted[h - 1];
    int c = 0;
    for (int h = static_cast<int>(in_sorted.size()); h >= 1; --h) {
        if (in_prefix[h] - static_cast<double>(h) * inv_alpha < rhs) {
            c = h;
            break;
        }
    }

    return {c, ShortcutTrace{k_star, rhs, c}};
}

int brute_force_bound(std::span<const double> e, const DiscoverySet& set, double alpha) {
    check_alpha(alpha);
    check_evalues(e);
    const int m = static_cast<int>(e.size());
    if (m > kBruteForceMaxM)
        throw input_error("brute-force bound limited to m <= " +
                          std::to_string(kBruteForceMaxM) + ", got m = " +
                          std::to_string(m));
    validate_discovery_set(set, m);

    const std::uint32_t full = (m == 32) ? ~0u : ((1u << m) - 1u);
    const double inv_alpha = 1.0 / alpha;

    std::vector<double> sum(full + 1u, 0.0);
    std::vector<char> surviving(full + 1u, 0);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const std::uint32_t low = mask & (0u - mask);
        sum[mask] = sum[mask ^ low] + e[static_cast<std::size_t>(std::countr_zero(low))];
        const int pc = std::popcount(mask);
        // Local test: average e-value at least 1/alpha.
        surviving[mask] = sum[mask] < static_cast<double>(pc) * inv_alpha;
    }

    // Closed testing keeps I only if some superset survives its local test:
    // propagate survival downward with a superset OR over each bit.
    for (int b = 0; b < m; ++b) {
        const std::uint32_t bit = 1u << b;
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (!(mask & bit)) surviving[mask] |= surviving[mask | bit];
        }
    }

    std::uint32_t r_mask = 0;
    for (int idx : set.indices) r_mask |= 1u << (idx - 1);

    int c = 0;
    for (std::uint32_t sub = r_mask; sub != 0; sub = (sub - 1) & r_mask) {
        if (surviving[sub]) c = std::max(c, std::popcount(sub));
    }
    return c;
}

int p_value_closed_testing_bound(std::span<const double> p, const DiscoverySet& set,
                                 double alpha) {
    check_alpha(alpha);
    const int m = static_cast<int>(p.size());
    if (m > kBruteForceMaxM)
        throw input_error("p-value closed testing limited to m <= " +
                          std::to_string(kBruteForceMaxM) + ", got m = " +
                          std::to_string(m));
    for (int i = 0; i < m; ++i) {
        if (!std::isfinite(p[i]) || p[i] <= 0.0 || p[i] > 1.0)
            throw input_error("p-value for hypothesis " + std::to_string(i + 1) +
                              " must lie in (0, 1]");
    }
    validate_discovery_set(set, m);

    const std::uint32_t full = (1u << m) - 1u;
    std::vector<double> thresh(static_cast<std::size_t>(m) + 1, 0.0);
    for (int pc = 1; pc <= m; ++pc) thresh[pc] = alpha / static_cast<double>(pc);

    std::vector<double> minp(full + 1u, std::numeric_limits<double>::infinity());
    std::vector<char> surviving(full + 1u, 0);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const std::uint32_t low = mask & (0u - mask);
        minp[mask] = std::min(minp[mask ^ low],
                              p[static_cast<std::size_t>(std::countr_zero(low))]);
        // Bonferroni local test: reject iff min p <= alpha / |J|.
        surviving[mask] = minp[mask] > thresh[std::popcount(mask)];
    }

    for (int b = 0; b < m; ++b) {
        const std::uint32_t bit = 1u << b;
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (!(mask & bit)) surviving[mask] |= surviving[mask | bit];
        }
    }

    std::uint32_t r_mask = 0;
    for (int idx : set.indices) r_mask |= 1u << (idx - 1);

    int c = 0;
    for (std::uint32_t sub = r_mask; sub != 0; sub = (sub - 1) & r_mask) {
        if (surviving[sub]) c = std::max(c, std::popcount(sub));
    }
    return c;
}

BoundSeries bound_series(const EValueMatrix& matrix, const DiscoverySet& set,
                         double alpha, bool ard) {
    validate_evalue_matrix(matrix);
    validate_discovery_set(set, matrix.m);

    BoundSeries series;
    series.set_size = set.size();
    series.ard_selected = ard;
    const int horizon = matrix.horizon();
    series.c_inst.reserve(horizon + 1);
    series.c_ard.reserve(horizon + 1);
    series.tdp_inst.reserve(horizon + 1);
    series.tdp_ard.reserve(horizon + 1);

    const double r = static_cast<double>(set.size());
    int running_min = set.size();
    for (int t = 0; t <= horizon; ++t) {
        const int c = shortcut_bound(matrix.values[t], set, alpha).first;
        running_min = std::min(running_min, c);
        series.c_inst.push_back(c);
        series.c_ard.push_back(running_min);
        series.tdp_inst.push_back(1.0 - static_cast<double>(c) / r);
        series.tdp_ard.push_back(1.0 - static_cast<double>(running_min) / r);
    }
    return series;
}

LabeledBoundSeries multi_r_bounds(const EValueMatrix& matrix,
                                  const std::vector<DiscoverySet>& sets, double alpha,
                                  bool ard) {
    if (sets.empty()) throw input_error("no discovery sets supplied");
    std::set<std::string> seen;
    for (const auto& set : sets) {
        if (!seen.insert(set.label).second)
            throw input_error("duplicate discovery set label '" + set.label + "'");
    }
    LabeledBoundSeries out;
    out.reserve(sets.size());
    for (const auto& set : sets)
        out.emplace_back(set.label, bound_series(matrix, set, alpha, ard));
    return out;
}

} // namespace etdp
