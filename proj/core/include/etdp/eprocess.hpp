#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etdp/distributions.hpp"

namespace etdp {

// E-value arithmetic is carried in log space; exponentiation for merging is
// clamped here so sums of a few thousand entries stay inside double range.
inline constexpr double kLogEValueCap = 700.0;

enum class FamilyKind { gaussian_lr, t_lr, mom };

// The moment prior for a one-sided alternative is truncated to delta > 0 by
// default; the symmetric variant keeps both bumps.
enum class MomPriorSide { one_sided, symmetric };

struct EProcessFamily {
    FamilyKind kind = FamilyKind::gaussian_lr;
    double delta = 0.0;     // alternative effect size (gaussian_lr, t_lr)
    double delta_min = 0.0; // minimal relevant effect (mom)
    int quadrature_nodes = 64;
    MomPriorSide prior_side = MomPriorSide::one_sided;
};

// Throws config_error on invalid parameters. quadrature_nodes must be >= 16,
// except that exactly 1 selects the point-mass prior at delta_min.
void validate_family(const EProcessFamily& family);

FamilyKind family_kind_from_string(const std::string& name);
std::string to_string(FamilyKind kind);
MomPriorSide prior_side_from_string(const std::string& name);
std::string to_string(MomPriorSide side);

struct ElementaryState {
    std::int64_t n = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    double log_e = 0.0;
    bool capped = false; // some update hit a zero-variance t statistic
};

ElementaryState init_eprocess(const EProcessFamily& family);

// Current e-value, exp(log_e) clamped at exp(kLogEValueCap).
double e_value(const ElementaryState& state);

ElementaryState update_gaussian_lr(ElementaryState state, double y, double delta);

// Likelihood ratio of the noncentral t density at sqrt(n_t)*delta against
// the central density, both with lambda degrees of freedom.
double t_lr(double t, int n_t, int lambda, double delta);

ElementaryState update_t_lr(ElementaryState state, double y, double delta);

// Quadrature view of the moment prior pi(delta) proportional to
// delta^2 exp(-delta^2 / (2 delta_min^2)), truncated to (0, 6 delta_min]
// (one_sided) or mirrored onto [-6 delta_min, 6 delta_min] (symmetric),
// normalized numerically. nodes == 1 degenerates to a point mass at delta_min.
class MomPrior {
public:
    MomPrior(double delta_min, int nodes, MomPriorSide side = MomPriorSide::one_sided);

    double delta_min() const { return delta_min_; }
    int nodes() const { return static_cast<int>(deltas_.size()); }
    MomPriorSide side() const { return side_; }
    std::span<const double> deltas() const { return deltas_; }
    // log prior mass per node; logsumexp over all nodes is 0
    std::span<const double> log_weights() const { return log_weights_; }

private:
    double delta_min_;
    MomPriorSide side_;
    std::vector<double> deltas_;
    std::vector<double> log_weights_;
};

ElementaryState update_mom(ElementaryState state, double y, const MomPrior& prior);
ElementaryState update_mom(ElementaryState state, double y, double delta_min, int nodes);

// Dispatches on the family kind, holding the mom quadrature fixed across calls.
class FamilyUpdater {
public:
    explicit FamilyUpdater(EProcessFamily family);

    ElementaryState operator()(ElementaryState state, double y) const;
    const EProcessFamily& family() const { return family_; }

private:
    EProcessFamily family_;
    std::optional<MomPrior> prior_;
};

double merge_average(std::span<const double> e);
double merge_product(std::span<const double> e);

// p[n] = min over l <= n of min(1 / e[l], 1); nonincreasing, in (0, 1].
std::vector<double> e_to_p_process(std::span<const double> e_series);

// Rejects iff e >= 1/alpha.
bool local_test(double e, double alpha);

// Per-time rows of per-hypothesis e-values. Row 0 is the pre-data state and
// is all ones.
struct EValueMatrix {
    int m = 0;
    std::vector<std::vector<double>> values;

    int horizon() const { return static_cast<int>(values.size()) - 1; }
};

EValueMatrix make_evalue_matrix(int m, int horizon);
void validate_evalue_matrix(const EValueMatrix& matrix);

} // namespace etdp
