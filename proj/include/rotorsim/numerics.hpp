#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rotorsim {

using cplx = std::complex<double>;
using State = std::vector<cplx>;

inline constexpr double two_pi = 6.28318530717958647692528676656;

// Euclidean scalar product on C ~ R^2: z1.z2 = Re z1 Re z2 + Im z1 Im z2.
inline double rdot(cplx z1, cplx z2) {
    return z1.real() * z2.real() + z1.imag() * z2.imag();
}

inline bool all_finite(const State& u) {
    for (const auto& z : u)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Compensated accumulator for long quadrature and norm sums.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Deterministic Gaussian source. std::normal_distribution is
// implementation-defined, which would break the byte-identical output
// contract, so Box-Muller is done by hand on top of mt19937_64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        spare_ = r * std::sin(two_pi * u2);
        have_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

    // two independent normals packed as (re, im)
    cplx normal_pair() {
        double a = normal();
        double b = normal();
        return {a, b};
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// 16-point Gauss-Legendre nodes/weights on [-1,1], computed once by Newton
// iteration on the Legendre recurrence.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre_16() {
    static const auto nw = [] {
        const int n = 16;
        std::vector<double> x(n), w(n);
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int k = 0; k < n; ++k) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2 * k + 1) * z * p1 - k * p2) / (k + 1);
                }
                pp = n * (z * p0 - p1) / (z * z - 1.0);
                double dz = p0 / pp;
                z -= dz;
                if (std::abs(dz) < 1e-15) break;
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
        return std::make_pair(x, w);
    }();
    return nw;
}

// Panel-composite Gauss-Legendre integral of a smooth integrand.
template <class F>
double integrate_gl(F&& f, double a, double b, int panels = 8) {
    if (a == b) return 0.0;
    const auto& [x, w] = gauss_legendre_16();
    const double h = (b - a) / panels;
    KahanSum s;
    for (int p = 0; p < panels; ++p) {
        double mid = a + (p + 0.5) * h;
        double half = 0.5 * h;
        for (std::size_t i = 0; i < x.size(); ++i) s.add(w[i] * f(mid + half * x[i]));
    }
    return s.value() * 0.5 * h;
}

namespace detail {

template <class F>
double simpson_adapt(F&& f, double a, double fa, double b, double fb, double m, double fm,
                     double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-11) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    double fa = f(a), fb = f(b), fm = f(m);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_adapt(f, a, fa, b, fb, m, fm, whole, tol, 40);
}

// Regularized lower incomplete gamma P(s, x); series for x < s+1, continued
// fraction otherwise.
inline double regularized_gamma_p(double s, double x) {
    if (s <= 0.0 || x < 0.0) throw std::invalid_argument("regularized_gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    if (x < s + 1.0) {
        double ap = s;
        double sum = 1.0 / s;
        double del = sum;
        for (int n = 0; n < 1000; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
    }
    double b = x + 1.0 - s;
    double c = 1e300;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        double an = -static_cast<double>(i) * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    double q = std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
    return 1.0 - q;
}

// Survival function of the chi-squared law with `dof` degrees of freedom.
inline double chi2_sf(double stat, int dof) {
    if (dof < 1) throw std::invalid_argument("chi2_sf: dof must be >= 1");
    if (stat <= 0.0) return 1.0;
    return 1.0 - regularized_gamma_p(0.5 * dof, 0.5 * stat);
}

}  // namespace rotorsim
