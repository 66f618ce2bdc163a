#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace etdp {

// Clamp applied to the one-sample t statistic when the sample standard
// deviation is exactly zero.
inline constexpr double kTStatCap = 1e6;

struct TStatistic {
    double t = 0.0;
    int n_t = 0;         // effective sample size
    int lambda = 0;      // degrees of freedom, n_t - 1
    bool capped = false; // zero sample sd, t clamped to sign(mean) * kTStatCap
};

TStatistic one_sample_t(std::span<const double> ys);
TStatistic one_sample_t_from_sums(std::int64_t n, double sum, double sumsq);

// Log density of the central t distribution with lambda degrees of freedom.
double central_t_logpdf(double t, int lambda);

// Log density of the noncentral t distribution with noncentrality mu.
double noncentral_t_logpdf(double t, int lambda, double mu);

// Evaluates log[L(t | mu, lambda) / L(t | 0, lambda)] for one fixed (t, lambda)
// and many noncentralities mu. The series coefficients depend only on
// (t, lambda), so sharing the kernel across quadrature nodes makes the
// moment-prior update cheap.
class TLikelihoodRatioKernel {
public:
    TLikelihoodRatioKernel(double t, int lambda);

    double log_ratio(double mu) const;

    double t() const { return t_; }
    int lambda() const { return lambda_; }

private:
    double t_;
    int lambda_;
    double scale_; // sqrt(2) * t / sqrt(lambda + t^2); the series variable is q = scale_ * mu

    // ratio_[j] = g_{j+1} / g_j for the series sum_j g_j q^j with
    // g_j = Gamma((lambda+j+1)/2) / (Gamma((lambda+1)/2) j!).
    mutable std::vector<double> ratio_;

    void extend_ratios(std::size_t upto) const;
    bool series_linear(double q, double& out) const;
    double log_ratio_integral(double mu) const;
};

// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

struct EquicorrelatedModel {
    int m = 0;
    double rho = 0.0;       // common correlation, in [0, 1)
    std::vector<double> mu; // mean vector, length m
};

void validate_model(const EquicorrelatedModel& model);

// Deterministic generator for substream `stream` of a seeded family.
// Derived via splitmix64 so that (seed, i) and (seed, j) decorrelate.
std::mt19937_64 substream_rng(std::uint64_t seed, std::uint64_t stream);

// Standard normal draw via Box-Muller on the raw 64-bit output, so the
// sequence is pinned by the generator alone.
double standard_normal(std::mt19937_64& rng);

// One subject vector: mu + sqrt(rho) z0 + sqrt(1-rho) z, exact covariance
// with unit variances and constant off-diagonal rho.
void sample_equicorrelated(const EquicorrelatedModel& model, std::mt19937_64& rng,
                           std::span<double> out);
std::vector<double> sample_equicorrelated(const EquicorrelatedModel& model, std::mt19937_64& rng);

} // namespace etdp
