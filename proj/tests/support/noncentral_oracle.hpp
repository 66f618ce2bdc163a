#pragma once

// Independent numerical oracle for the noncentral t density, built from the
// defining mixture: T = (Z + mu) / Y with Z standard normal and
// Y = sqrt(V / lambda), V ~ chi-square(lambda). Conditioning on Y,
//   f_T(t) = int_0^inf y phi(t y - mu) f_Y(y) dy,
// evaluated by adaptive Simpson. Shares no code with the library's series /
// integral evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace etdp_test {

inline double normal_logpdf(double x) {
    return -0.5 * x * x - 0.5 * std::log(2.0 * 3.14159265358979323846);
}

// y * phi(t y - mu) * f_Y(y); assembled in logs so lambda = 30 tails cannot
// underflow pairwise.
inline double mixture_integrand(double y, double t, int lambda, double mu) {
    if (y <= 0.0) return 0.0;
    const double lam = static_cast<double>(lambda);
    // f_Y(y) = 2 lambda y chi2pdf(lambda y^2; lambda)
    const double v = lam * y * y;
    const double log_chi2 = (lam / 2.0 - 1.0) * std::log(v) - v / 2.0 -
                            lam / 2.0 * std::log(2.0) - std::lgamma(lam / 2.0);
    const double log_fy = std::log(2.0 * lam * y) + log_chi2;
    const double lg = std::log(y) + normal_logpdf(t * y - mu) + log_fy;
    return std::exp(lg);
}

inline double simpson_piece(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson_piece(a, m, fa, flm, fm);
    const double right = simpson_piece(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    const double whole = simpson_piece(a, b, fa, fm, fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, eps, depth);
}

// Rough pass fixes the panel's scale; the refined pass then aims for relative
// accuracy of that panel alone. The floor keeps subnormal noise from forcing
// full-depth recursion on panels that contribute nothing.
inline double oracle_panel(const std::function<double(double)>& f, double a,
                           double b) {
    const double rough = adaptive_simpson(f, a, b, 1e-9, 18);
    const double eps = std::max(std::abs(rough) * 1e-11, 1e-310);
    return adaptive_simpson(f, a, b, eps, 34);
}

inline double oracle_noncentral_t_pdf(double t, int lambda, double mu) {
    const auto f = [&](double y) { return mixture_integrand(y, t, lambda, mu); };
    // The Y-mass sits near 1 with width about 1/sqrt(2 lambda); the Gaussian
    // factor concentrates near y = mu/t with width 1/|t|. Placing panel edges
    // at both features keeps every panel a few widths wide, so the adaptive
    // pass never has to find a needle in a long interval. 60 covers every
    // (lambda, mu, t) exercised here.
    std::vector<double> pts{0.0, 0.5, 1.0, 1.5, 2.5, 5.0, 60.0};
    if (t != 0.0) {
        const double yc = mu / t;
        const double w = 1.0 / std::abs(t);
        if (yc > 0.0) {
            for (double p : {yc - 8.0 * w, yc - 2.0 * w, yc, yc + 2.0 * w,
                             yc + 10.0 * w}) {
                if (p > 0.0 && p < 60.0) pts.push_back(p);
            }
        }
    }
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i] > pts[i - 1]) total += oracle_panel(f, pts[i - 1], pts[i]);
    }
    return total;
}

// int_R f(t) dt via t = tan(theta), composite Simpson on a uniform grid. The
// endpoint inset drops only ~1e-8 of tail mass for lambda >= 1.
inline double integrate_over_reals(const std::function<double(double)>& pdf,
                                   int panels = 20000) {
    const double pi = 3.14159265358979323846;
    const double inset = 1e-8;
    const double lo = -pi / 2.0 + inset;
    const double hi = pi / 2.0 - inset;
    const auto g = [&](double theta) {
        const double t = std::tan(theta);
        return pdf(t) * (1.0 + t * t);
    };
    const int n = panels % 2 == 0 ? panels : panels + 1;
    const double step = (hi - lo) / n;
    double acc = g(lo) + g(hi);
    for (int i = 1; i < n; ++i) acc += g(lo + i * step) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * step / 3.0;
}

} // namespace etdp_test
