#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "etdp/distributions.hpp"
#include "etdp/errors.hpp"
#include "support/noncentral_oracle.hpp"

using namespace etdp;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_SUITE("distributions") {

TEST_CASE("one-sample t statistic from raw observations") {
    const std::vector<double> ys{1.0, 2.0, 3.0};
    const TStatistic stat = one_sample_t(ys);
    CHECK(stat.n_t == 3);
    CHECK(stat.lambda == 2);
    CHECK(!stat.capped);
    CHECK(stat.t == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("zero-variance samples clamp the t statistic") {
    const TStatistic pos = one_sample_t(std::vector<double>{2.0, 2.0, 2.0, 2.0});
    CHECK(pos.capped);
    CHECK(pos.t == kTStatCap);

    const TStatistic neg = one_sample_t(std::vector<double>{-1.0, -1.0});
    CHECK(neg.capped);
    CHECK(neg.t == -kTStatCap);

    const TStatistic zero = one_sample_t(std::vector<double>{0.0, 0.0, 0.0});
    CHECK(zero.capped);
    CHECK(zero.t == 0.0);
}

TEST_CASE("t statistic rejects degenerate input") {
    CHECK_THROWS_AS((void)one_sample_t(std::vector<double>{1.0}), input_error);
    CHECK_THROWS_AS((void)one_sample_t(std::vector<double>{}), input_error);
    CHECK_THROWS_AS((void)one_sample_t(std::vector<double>{1.0, std::nan("")}),
                    input_error);
    CHECK_THROWS_AS((void)one_sample_t_from_sums(3, 1.0, std::nan("")), input_error);
}

TEST_CASE("running-sum form agrees with the direct form") {
    std::mt19937_64 rng = substream_rng(99, 0);
    std::vector<double> ys;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < 25; ++i) {
        const double y = standard_normal(rng) * 2.0 + 0.3;
        ys.push_back(y);
        sum += y;
        sumsq += y * y;
        if (i >= 1) {
            const TStatistic a = one_sample_t(ys);
            const TStatistic b =
                one_sample_t_from_sums(static_cast<std::int64_t>(ys.size()), sum, sumsq);
            CHECK(a.t == doctest::Approx(b.t).epsilon(1e-12));
            CHECK(a.lambda == b.lambda);
        }
    }
}

TEST_CASE("central t log density closed forms") {
    // lambda = 1 is Cauchy: f(0) = 1/pi, f(1) = 1/(2 pi)
    CHECK(central_t_logpdf(0.0, 1) == doctest::Approx(-std::log(kPi)).epsilon(1e-14));
    CHECK(central_t_logpdf(1.0, 1) ==
          doctest::Approx(-std::log(2.0 * kPi)).epsilon(1e-14));
    // lambda = 2 at zero: Gamma(1.5) / (sqrt(2 pi) Gamma(1)) = 1 / (2 sqrt 2)
    CHECK(central_t_logpdf(0.0, 2) ==
          doctest::Approx(std::log(1.0 / (2.0 * std::sqrt(2.0)))).epsilon(1e-14));
    // symmetry
    for (int lambda : {1, 4, 17}) {
        for (double t : {0.3, 1.7, 6.0}) {
            CHECK(central_t_logpdf(t, lambda) ==
                  doctest::Approx(central_t_logpdf(-t, lambda)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS((void)central_t_logpdf(0.0, 0), config_error);
}

TEST_CASE("central density matches the mixture oracle at mu = 0") {
    for (int lambda : {1, 5, 30}) {
        for (double t : {0.0, -1.2, 2.5, 7.0}) {
            const double ours = std::exp(central_t_logpdf(t, lambda));
            const double oracle = etdp_test::oracle_noncentral_t_pdf(t, lambda, 0.0);
            INFO("lambda=", lambda, " t=", t);
            const double rel = std::abs(ours - oracle) / std::max(oracle, 1e-300);
            CHECK(rel <= 1e-9);
        }
    }
}

TEST_CASE("noncentral t density matches the mixture oracle") {
    for (int lambda : {1, 5, 30}) {
        for (double mu : {0.0, 1.0, 3.0}) {
            for (double t : {-4.0, -1.0, -0.3, 0.0, 0.7, 2.0, 5.0, 10.0}) {
                const double ours = std::exp(noncentral_t_logpdf(t, lambda, mu));
                const double oracle = etdp_test::oracle_noncentral_t_pdf(t, lambda, mu);
                INFO("lambda=", lambda, " mu=", mu, " t=", t);
                // plain relative error: Approx would silently go absolute on
                // far-tail densities around 1e-11
                const double rel =
                    std::abs(ours - oracle) / std::max(oracle, 1e-300);
                CHECK(rel <= 1e-8);
            }
        }
    }
}

TEST_CASE("noncentral t density integrates to one") {
    for (int lambda : {1, 5, 30}) {
        for (double mu : {0.0, 1.0, 3.0}) {
            const double total = etdp_test::integrate_over_reals(
                [&](double t) { return std::exp(noncentral_t_logpdf(t, lambda, mu)); });
            INFO("lambda=", lambda, " mu=", mu);
            CHECK(std::abs(total - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("noncentral t reflection symmetry") {
    for (int lambda : {1, 5, 30}) {
        for (double mu : {0.5, 2.0}) {
            for (double t : {-3.0, 0.4, 1.8}) {
                CHECK(noncentral_t_logpdf(t, lambda, mu) ==
                      doctest::Approx(noncentral_t_logpdf(-t, lambda, -mu))
                          .epsilon(1e-11));
            }
        }
    }
}

TEST_CASE("likelihood ratio kernel against the oracle ratio") {
    const std::pair<double, int> cases[] = {{1.3, 4}, {-2.1, 9}, {17.0, 2}, {0.3, 30}};
    for (const auto& [t, lambda] : cases) {
        const TLikelihoodRatioKernel kernel(t, lambda);
        for (double mu : {0.2, 1.0, 2.5}) {
            const double oracle_ratio =
                std::log(etdp_test::oracle_noncentral_t_pdf(t, lambda, mu)) -
                central_t_logpdf(t, lambda);
            INFO("t=", t, " lambda=", lambda, " mu=", mu);
            CHECK(kernel.log_ratio(mu) == doctest::Approx(oracle_ratio).epsilon(1e-7));
        }
        CHECK(kernel.log_ratio(0.0) == 0.0);
    }
}

TEST_CASE("kernel stays accurate across the series / integral handover") {
    // t = 5, lambda = 9: q = mu * sqrt(2) * 5 / sqrt(34), so mu near 33
    // straddles the branch switch at |q| = 40.
    const TLikelihoodRatioKernel kernel(5.0, 9);
    for (double mu : {6.0, 20.0, 31.0, 34.0, 45.0}) {
        const double oracle_ratio =
            std::log(etdp_test::oracle_noncentral_t_pdf(5.0, 9, mu)) -
            central_t_logpdf(5.0, 9);
        INFO("mu=", mu);
        CHECK(kernel.log_ratio(mu) == doctest::Approx(oracle_ratio).epsilon(1e-6));
    }
    // negative q: alternating series must either converge or fall back
    // (mu capped where the density itself still fits in a double)
    const TLikelihoodRatioKernel neg(-5.0, 9);
    for (double mu : {2.0, 8.0, 15.0}) {
        const double oracle_ratio =
            std::log(etdp_test::oracle_noncentral_t_pdf(-5.0, 9, mu)) -
            central_t_logpdf(-5.0, 9);
        INFO("mu=", mu);
        CHECK(neg.log_ratio(mu) == doctest::Approx(oracle_ratio).epsilon(1e-6));
    }
}

TEST_CASE("gauss-legendre rules are exact on polynomials") {
    const auto [nodes, weights] = gauss_legendre(5);
    REQUIRE(nodes.size() == 5);
    for (int k = 0; k <= 9; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            acc += weights[i] * std::pow(nodes[i], k);
        const double expected = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1.0);
        CHECK(acc == doctest::Approx(expected).epsilon(1e-13));
    }

    const auto [n64, w64] = gauss_legendre(64);
    double acc = 0.0;
    for (std::size_t i = 0; i < n64.size(); ++i) acc += w64[i] * std::exp(n64[i]);
    CHECK(acc == doctest::Approx(std::exp(1.0) - std::exp(-1.0)).epsilon(1e-14));

    const auto [n1, w1] = gauss_legendre(1);
    CHECK(n1[0] == 0.0);
    CHECK(w1[0] == 2.0);
    CHECK_THROWS_AS((void)gauss_legendre(0), config_error);
}

TEST_CASE("substreams are deterministic and decorrelated") {
    std::mt19937_64 a = substream_rng(7, 3);
    std::mt19937_64 b = substream_rng(7, 3);
    std::mt19937_64 c = substream_rng(7, 4);
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) {
        const auto va = a();
        CHECK(va == b());
        any_diff = any_diff || (va != c());
    }
    CHECK(any_diff);
}

TEST_CASE("equicorrelated sampler hits its moments") {
    EquicorrelatedModel model;
    model.m = 3;
    model.rho = 0.5;
    model.mu = {0.0, 1.0, 2.0};
    std::mt19937_64 rng = substream_rng(123, 0);

    const int n = 200000;
    std::vector<double> mean(3, 0.0), var(3, 0.0);
    double cross01 = 0.0;
    std::vector<double> y(3);
    for (int i = 0; i < n; ++i) {
        sample_equicorrelated(model, rng, y);
        for (int j = 0; j < 3; ++j) {
            mean[j] += y[j];
            var[j] += y[j] * y[j];
        }
        cross01 += y[0] * y[1];
    }
    for (int j = 0; j < 3; ++j) {
        mean[j] /= n;
        var[j] = var[j] / n - mean[j] * mean[j];
        CHECK(mean[j] == doctest::Approx(model.mu[j]).epsilon(0.03));
        CHECK(var[j] == doctest::Approx(1.0).epsilon(0.03));
    }
    const double cov = cross01 / n - mean[0] * mean[1];
    CHECK(cov == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("sampler overloads agree") {
    EquicorrelatedModel model;
    model.m = 4;
    model.rho = 0.2;
    model.mu = {0.0, 0.0, 1.0, 1.0};
    std::mt19937_64 r1 = substream_rng(5, 9);
    std::mt19937_64 r2 = substream_rng(5, 9);
    std::vector<double> a(4);
    sample_equicorrelated(model, r1, a);
    const std::vector<double> b = sample_equicorrelated(model, r2);
    CHECK(a == b);
}

TEST_CASE("model validation") {
    EquicorrelatedModel model;
    model.m = 2;
    model.rho = 1.0;
    model.mu = {0.0, 0.0};
    CHECK_THROWS_AS(validate_model(model), config_error);
    model.rho = 0.3;
    model.mu = {0.0};
    CHECK_THROWS_AS(validate_model(model), config_error);
    model.mu = {0.0, 0.0};
    CHECK_NOTHROW(validate_model(model));
}

} // TEST_SUITE
