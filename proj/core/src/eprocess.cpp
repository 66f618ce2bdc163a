#include "etdp/eprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "etdp/errors.hpp"

namespace etdp {

namespace {

double logsumexp(std::span<const double> logs) {
    double max_log = -std::numeric_limits<double>::infinity();
    for (double lg : logs) max_log = std::max(max_log, lg);
    if (!std::isfinite(max_log)) return max_log;
    double acc = 0.0;
    for (double lg : logs) acc += std::exp(lg - max_log);
    return max_log + std::log(acc);
}

void check_observation(double y) {
    if (!std::isfinite(y)) throw input_error("e-process update: non-finite observation");
}

} // namespace

void validate_family(const EProcessFamily& family) {
    switch (family.kind) {
    case FamilyKind::gaussian_lr:
    case FamilyKind::t_lr:
        if (!(family.delta > 0.0) || !std::isfinite(family.delta)) {
            throw config_error("e-process family: delta must be > 0");
        }
        break;
    case FamilyKind::mom:
        if (!(family.delta_min > 0.0) || !std::isfinite(family.delta_min)) {
            throw config_error("e-process family: delta_min must be > 0");
        }
        if (family.quadrature_nodes != 1 && family.quadrature_nodes < 16) {
            throw config_error(
                "e-process family: quadrature_nodes must be >= 16 (or exactly 1 "
                "for the point-mass prior), got " +
                std::to_string(family.quadrature_nodes));
        }
        break;
    }
}

FamilyKind family_kind_from_string(const std::string& name) {
    if (name == "gaussian_lr") return FamilyKind::gaussian_lr;
    if (name == "t_lr") return FamilyKind::t_lr;
    if (name == "mom") return FamilyKind::mom;
    throw config_error("unknown e-process family: " + name);
}

std::string to_string(FamilyKind kind) {
    switch (kind) {
    case FamilyKind::gaussian_lr: return "gaussian_lr";
    case FamilyKind::t_lr: return "t_lr";
    case FamilyKind::mom: return "mom";
    }
    throw internal_error("unreachable family kind");
}

MomPriorSide prior_side_from_string(const std::string& name) {
    if (name == "one_sided") return MomPriorSide::one_sided;
    if (name == "symmetric") return MomPriorSide::symmetric;
    throw config_error("unknown prior side: " + name);
}

std::string to_string(MomPriorSide side) {
    return side == MomPriorSide::one_sided ? "one_sided" : "symmetric";
}

ElementaryState init_eprocess(const EProcessFamily& family) {
    validate_family(family);
    return ElementaryState{};
}

double e_value(const ElementaryState& state) {
    return std::exp(std::min(state.log_e, kLogEValueCap));
}

ElementaryState update_gaussian_lr(ElementaryState state, double y, double delta) {
    check_observation(y);
    if (!(delta > 0.0)) throw config_error("update_gaussian_lr: delta must be > 0");
    state.n += 1;
    state.sum += y;
    state.sumsq += y * y;
    state.log_e += delta * y - delta * delta / 2.0;
    return state;
}

double t_lr(double t, int n_t, int lambda, double delta) {
    if (n_t < 2) throw input_error("t_lr: n_t must be >= 2");
    if (lambda < 1) throw config_error("t_lr: lambda must be >= 1");
    TLikelihoodRatioKernel kernel(t, lambda);
    const double mu = std::sqrt(static_cast<double>(n_t)) * delta;
    return std::exp(kernel.log_ratio(mu));
}

ElementaryState update_t_lr(ElementaryState state, double y, double delta) {
    check_observation(y);
    if (!(delta > 0.0)) throw config_error("update_t_lr: delta must be > 0");
    state.n += 1;
    state.sum += y;
    state.sumsq += y * y;
    if (state.n < 2) {
        state.log_e = 0.0; // variance undefined, e-value stays 1
        return state;
    }
    const TStatistic stat = one_sample_t_from_sums(state.n, state.sum, state.sumsq);
    if (stat.capped) state.capped = true;
    TLikelihoodRatioKernel kernel(stat.t, stat.lambda);
    const double mu = std::sqrt(static_cast<double>(stat.n_t)) * delta;
    state.log_e = kernel.log_ratio(mu);
    return state;
}

MomPrior::MomPrior(double delta_min, int nodes, MomPriorSide side)
    : delta_min_(delta_min), side_(side) {
    if (!(delta_min > 0.0) || !std::isfinite(delta_min)) {
        throw config_error("mom prior: delta_min must be > 0");
    }
    if (nodes == 1) {
        deltas_ = {delta_min};
        log_weights_ = {0.0};
        return;
    }
    if (nodes < 16) {
        throw config_error("mom prior: nodes must be >= 16 (or exactly 1), got " +
                           std::to_string(nodes));
    }
    const auto [gl_nodes, gl_weights] = gauss_legendre(nodes);
    auto add_interval = [&](double lo, double hi) {
        const double half = (hi - lo) / 2.0;
        const double mid = (hi + lo) / 2.0;
        for (int i = 0; i < nodes; ++i) {
            const double d = mid + half * gl_nodes[i];
            const double log_density =
                2.0 * std::log(std::abs(d)) - d * d / (2.0 * delta_min * delta_min);
            deltas_.push_back(d);
            log_weights_.push_back(std::log(gl_weights[i] * half) + log_density);
        }
    };
    if (side == MomPriorSide::one_sided) {
        add_interval(0.0, 6.0 * delta_min);
    } else {
        add_interval(-6.0 * delta_min, 0.0);
        add_interval(0.0, 6.0 * delta_min);
    }
    const double log_norm = logsumexp(log_weights_);
    for (double& lw : log_weights_) lw -= log_norm;
}

ElementaryState update_mom(ElementaryState state, double y, const MomPrior& prior) {
    check_observation(y);
    state.n += 1;
    state.sum += y;
    state.sumsq += y * y;
    if (state.n < 2) {
        state.log_e = 0.0;
        return state;
    }
    const TStatistic stat = one_sample_t_from_sums(state.n, state.sum, state.sumsq);
    if (stat.capped) state.capped = true;
    TLikelihoodRatioKernel kernel(stat.t, stat.lambda);
    const double sqrt_n = std::sqrt(static_cast<double>(stat.n_t));
    std::vector<double> logs(prior.deltas().size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        logs[i] = prior.log_weights()[i] + kernel.log_ratio(sqrt_n * prior.deltas()[i]);
    }
    state.log_e = logsumexp(logs);
    return state;
}

ElementaryState update_mom(ElementaryState state, double y, double delta_min, int nodes) {
    return update_mom(state, y, MomPrior(delta_min, nodes));
}

FamilyUpdater::FamilyUpdater(EProcessFamily family) : family_(family) {
    validate_family(family_);
    if (family_.kind == FamilyKind::mom) {
        prior_.emplace(family_.delta_min, family_.quadrature_nodes, family_.prior_side);
    }
}

ElementaryState FamilyUpdater::operator()(ElementaryState state, double y) const {
    switch (family_.kind) {
    case FamilyKind::gaussian_lr: return update_gaussian_lr(state, y, family_.delta);
    case FamilyKind::t_lr: return update_t_lr(state, y, family_.delta);
    case FamilyKind::mom: return update_mom(state, y, *prior_);
    }
    throw internal_error("unreachable family kind");
}

double merge_average(std::span<const double> e) {
    if (e.empty()) throw input_error("merge_average: empty list");
    double sum = 0.0;
    for (double v : e) {
        if (!std::isfinite(v) || v < 0.0) {
            throw input_error("merge_average: e-values must be finite and >= 0");
        }
        sum += v;
    }
    return sum / static_cast<double>(e.size());
}

double merge_product(std::span<const double> e) {
    if (e.empty()) throw input_error("merge_product: empty list");
    double prod = 1.0;
    for (double v : e) {
        if (!std::isfinite(v) || v < 0.0) {
            throw input_error("merge_product: e-values must be finite and >= 0");
        }
        prod *= v;
    }
    return prod;
}

std::vector<double> e_to_p_process(std::span<const double> e_series) {
    std::vector<double> p;
    p.reserve(e_series.size());
    double running = 1.0;
    for (double e : e_series) {
        if (!std::isfinite(e) || e < 0.0) {
            throw input_error("e_to_p_process: e-values must be finite and >= 0");
        }
        const double cap = e > 1.0 ? 1.0 / e : 1.0; // e = 0 contributes 1
        running = std::min(running, cap);
        p.push_back(running);
    }
    return p;
}

bool local_test(double e, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw config_error("local_test: alpha must be in (0, 1)");
    }
    if (!(e >= 0.0)) throw input_error("local_test: e-value must be >= 0");
    return e >= 1.0 / alpha;
}

EValueMatrix make_evalue_matrix(int m, int horizon) {
    if (m < 1) throw config_error("e-value matrix: m must be positive");
    if (horizon < 0) throw config_error("e-value matrix: horizon must be >= 0");
    EValueMatrix matrix;
    matrix.m = m;
    matrix.values.assign(static_cast<std::size_t>(horizon) + 1,
                         std::vector<double>(m, 1.0));
    return matrix;
}

void validate_evalue_matrix(const EValueMatrix& matrix) {
    if (matrix.m < 1) throw input_error("e-value matrix: m must be positive");
    if (matrix.values.empty()) {
        throw input_error("e-value matrix: missing time-0 row");
    }
    for (std::size_t t = 0; t < matrix.values.size(); ++t) {
        const auto& row = matrix.values[t];
        if (static_cast<int>(row.size()) != matrix.m) {
            throw input_error("e-value matrix: row " + std::to_string(t) +
                              " has wrong width");
        }
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0) {
                throw input_error("e-value matrix: entries must be finite and >= 0");
            }
            if (t == 0 && v != 1.0) {
                throw input_error("e-value matrix: time-0 row must be all ones");
            }
        }
    }
}

} // namespace etdp
