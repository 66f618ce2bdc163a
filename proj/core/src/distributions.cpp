#include "etdp/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include "etdp/errors.hpp"

namespace etdp {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Above this |q| the linear-space series can overflow; switch to the
// integral representation.
constexpr double kSeriesMaxQ = 40.0;

// Largest tolerated ratio between the biggest series term and the final sum.
// Beyond this, alternating cancellation has eaten too many digits.
constexpr double kSeriesMaxCancellation = 1e5;

constexpr std::size_t kSeriesMaxTerms = 200000;

double sign_of(double x) {
    if (x > 0.0) return 1.0;
    if (x < 0.0) return -1.0;
    return 0.0;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

TStatistic one_sample_t_from_sums(std::int64_t n, double sum, double sumsq) {
    if (n < 2) {
        throw input_error("one_sample_t requires at least 2 observations, got " +
                          std::to_string(n));
    }
    if (!std::isfinite(sum) || !std::isfinite(sumsq)) {
        throw input_error("one_sample_t: non-finite running sums");
    }
    const double nd = static_cast<double>(n);
    const double mean = sum / nd;
    // Sample variance from running sums; roundoff can push it slightly
    // negative, clamp to zero.
    const double var = std::max(0.0, (sumsq - nd * mean * mean) / (nd - 1.0));
    const double sd = std::sqrt(var);

    TStatistic stat;
    stat.n_t = static_cast<int>(n);
    stat.lambda = static_cast<int>(n - 1);
    if (sd == 0.0) {
        stat.t = sign_of(mean) * kTStatCap;
        stat.capped = true;
    } else {
        stat.t = mean * std::sqrt(nd) / sd;
    }
    return stat;
}

TStatistic one_sample_t(std::span<const double> ys) {
    double sum = 0.0;
    double sumsq = 0.0;
    for (double y : ys) {
        if (!std::isfinite(y)) throw input_error("one_sample_t: non-finite observation");
        sum += y;
        sumsq += y * y;
    }
    return one_sample_t_from_sums(static_cast<std::int64_t>(ys.size()), sum, sumsq);
}

double central_t_logpdf(double t, int lambda) {
    if (lambda < 1) {
        throw config_error("central_t_logpdf: lambda must be >= 1, got " +
                           std::to_string(lambda));
    }
    if (!std::isfinite(t)) throw input_error("central_t_logpdf: non-finite t");
    const double lam = static_cast<double>(lambda);
    return std::lgamma((lam + 1.0) / 2.0) - std::lgamma(lam / 2.0) -
           0.5 * std::log(lam * kPi) -
           (lam + 1.0) / 2.0 * std::log1p(t * t / lam);
}

TLikelihoodRatioKernel::TLikelihoodRatioKernel(double t, int lambda)
    : t_(t), lambda_(lambda) {
    if (lambda < 1) {
        throw config_error("TLikelihoodRatioKernel: lambda must be >= 1, got " +
                           std::to_string(lambda));
    }
    if (!std::isfinite(t)) throw input_error("TLikelihoodRatioKernel: non-finite t");
    const double lam = static_cast<double>(lambda);
    scale_ = std::sqrt(2.0) * t / std::sqrt(lam + t * t);
}

void TLikelihoodRatioKernel::extend_ratios(std::size_t upto) const {
    // ratio_[j] = g_{j+1}/g_j = exp(lgamma((lam+j+2)/2) - lgamma((lam+j+1)/2)) / (j+1)
    const double lam = static_cast<double>(lambda_);
    while (ratio_.size() < upto) {
        const double j = static_cast<double>(ratio_.size());
        const double lg = std::lgamma((lam + j + 2.0) / 2.0) -
                          std::lgamma((lam + j + 1.0) / 2.0);
        ratio_.push_back(std::exp(lg) / (j + 1.0));
    }
}

bool TLikelihoodRatioKernel::series_linear(double q, double& out) const {
    // sum_j g_j q^j with g_0 = 1 and term recurrence term *= q * ratio_[j].
    // Terms grow up to j ~ q^2/2 before decaying, so the stopping rule only
    // fires once the decay ratio has dropped below one.
    double term = 1.0;
    double sum = 1.0;
    double max_abs = 1.0;
    for (std::size_t j = 0;; ++j) {
        if (j + 2 > ratio_.size()) extend_ratios(j + 2);
        term *= q * ratio_[j];
        sum += term;
        max_abs = std::max(max_abs, std::abs(term));
        if (!std::isfinite(sum)) return false;
        const double decay = std::abs(q) * ratio_[j + 1];
        if (decay < 0.9) {
            const double tail_bound = std::abs(term) * decay / (1.0 - decay);
            if (tail_bound <= 1e-15 * std::abs(sum)) break;
        }
        if (j > kSeriesMaxTerms) {
            std::ostringstream msg;
            msg << "noncentral t series did not converge: t=" << t_
                << " lambda=" << lambda_ << " q=" << q << " after " << j << " terms";
            throw internal_error(msg.str());
        }
    }
    if (sum <= 0.0 || max_abs / sum > kSeriesMaxCancellation) return false;
    out = sum;
    return true;
}

double TLikelihoodRatioKernel::log_ratio_integral(double mu) const {
    // Completing the square in the defining mixture gives
    //   ratio = exp(-(mu^2 - a^2)/2) * I(a)/I(0) with
    //   I(a) = int_0^inf y^lambda exp(-(y-a)^2/2) dy,
    //   a = t mu / sqrt(lambda + t^2),
    //   I(0) = 2^((lambda-1)/2) Gamma((lambda+1)/2).
    // The log-integrand is strictly concave, so two Gauss-Legendre panels
    // around the mode evaluated in log space cover it without cancellation.
    const double lam = static_cast<double>(lambda_);
    const double a = t_ * mu / std::sqrt(lam + t_ * t_);
    const double mode = (a + std::sqrt(a * a + 4.0 * lam)) / 2.0;
    const double sigma = 1.0 / std::sqrt(lam / (mode * mode) + 1.0);

    const double left = std::max(0.0, mode - 12.0 * sigma);
    const double mid = mode + 12.0 * sigma;
    const double right = mid + 12.0;

    static const auto gl = gauss_legendre(64);
    const auto& nodes = gl.first;
    const auto& weights = gl.second;

    auto log_integrand = [&](double y) {
        if (y <= 0.0) return -std::numeric_limits<double>::infinity();
        return lam * std::log(y) - 0.5 * (y - a) * (y - a);
    };

    // logsumexp of w_i * f(y_i) over both panels
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    logs.reserve(2 * nodes.size());
    auto add_panel = [&](double lo, double hi) {
        const double half = (hi - lo) / 2.0;
        const double mid_pt = (hi + lo) / 2.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double y = mid_pt + half * nodes[i];
            const double lg = log_integrand(y) + std::log(weights[i] * half);
            logs.push_back(lg);
            max_log = std::max(max_log, lg);
        }
    };
    add_panel(left, mid);
    add_panel(mid, right);

    double acc = 0.0;
    for (double lg : logs) acc += std::exp(lg - max_log);
    const double log_integral = max_log + std::log(acc);

    const double log_i0 = (lam - 1.0) / 2.0 * std::log(2.0) +
                          std::lgamma((lam + 1.0) / 2.0);
    return -0.5 * (mu * mu - a * a) + log_integral - log_i0;
}

double TLikelihoodRatioKernel::log_ratio(double mu) const {
    if (!std::isfinite(mu)) throw input_error("log_ratio: non-finite noncentrality");
    if (mu == 0.0) return 0.0;
    const double q = scale_ * mu;
    if (q == 0.0) return -0.5 * mu * mu;
    if (std::abs(q) <= kSeriesMaxQ) {
        double sum = 0.0;
        if (series_linear(q, sum)) {
            return -0.5 * mu * mu + std::log(sum);
        }
    }
    return log_ratio_integral(mu);
}

double noncentral_t_logpdf(double t, int lambda, double mu) {
    TLikelihoodRatioKernel kernel(t, lambda);
    return central_t_logpdf(t, lambda) + kernel.log_ratio(mu);
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    if (n < 1) throw config_error("gauss_legendre: need at least one node");
    std::vector<double> nodes(n), weights(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence for P_n(x) and its derivative.
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if (n == 1) {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    return {nodes, weights};
}

void validate_model(const EquicorrelatedModel& model) {
    if (model.m < 1) throw config_error("equicorrelated model: m must be positive");
    if (!(model.rho >= 0.0 && model.rho < 1.0)) {
        throw config_error("equicorrelated model: rho must be in [0, 1), got " +
                           std::to_string(model.rho));
    }
    if (static_cast<int>(model.mu.size()) != model.m) {
        throw config_error("equicorrelated model: mean vector length mismatch");
    }
}

std::mt19937_64 substream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed;
    (void)splitmix64(state);
    state ^= 0x9E3779B97F4A7C15ULL * (stream + 0x632BE59BD9B4E019ULL);
    std::uint64_t w[4];
    for (auto& wi : w) wi = splitmix64(state);
    std::seed_seq seq{
        static_cast<std::uint32_t>(w[0]), static_cast<std::uint32_t>(w[0] >> 32),
        static_cast<std::uint32_t>(w[1]), static_cast<std::uint32_t>(w[1] >> 32),
        static_cast<std::uint32_t>(w[2]), static_cast<std::uint32_t>(w[2] >> 32),
        static_cast<std::uint32_t>(w[3]), static_cast<std::uint32_t>(w[3] >> 32)};
    return std::mt19937_64(seq);
}

double standard_normal(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53; // (0, 1]
    const double u2 = static_cast<double>(rng() >> 11) * 0x1p-53;         // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void sample_equicorrelated(const EquicorrelatedModel& model, std::mt19937_64& rng,
                           std::span<double> out) {
    validate_model(model);
    if (out.size() != static_cast<std::size_t>(model.m)) {
        throw input_error("sample_equicorrelated: output span length mismatch");
    }
    const double shared_w = std::sqrt(model.rho);
    const double own_w = std::sqrt(1.0 - model.rho);
    const double z0 = standard_normal(rng);
    for (int i = 0; i < model.m; ++i) {
        out[i] = model.mu[i] + shared_w * z0 + own_w * standard_normal(rng);
    }
}

std::vector<double> sample_equicorrelated(const EquicorrelatedModel& model,
                                          std::mt19937_64& rng) {
    std::vector<double> out(model.m);
    sample_equicorrelated(model, rng, out);
    return out;
}

} // namespace etdp
