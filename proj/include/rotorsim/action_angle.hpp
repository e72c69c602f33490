#pragma once

#include <type_traits>

#include "rotorsim/model.hpp"

namespace rotorsim {

// Per-node polar coordinates: I_k = |u_k|^2 / 2, phi_k = arg u_k in [0, 2pi),
// with phi_k = 0 whenever I_k = 0.
struct ActionAngleState {
    std::vector<double> actions;
    std::vector<double> angles;
};

inline ActionAngleState to_action_angle(const State& u) {
    ActionAngleState aa;
    aa.actions.resize(u.size());
    aa.angles.resize(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        aa.actions[k] = 0.5 * std::norm(u[k]);
        if (u[k] == cplx(0.0, 0.0)) {
            aa.angles[k] = 0.0;
        } else {
            double phi = std::arg(u[k]);
            if (phi < 0.0) phi += two_pi;
            if (phi >= two_pi) phi = 0.0;
            aa.angles[k] = phi;
        }
    }
    return aa;
}

inline State from_action_angle(const std::vector<double>& actions,
                               const std::vector<double>& angles) {
    if (actions.size() != angles.size())
        throw std::invalid_argument("from_action_angle: size mismatch");
    State u(actions.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (actions[k] < 0.0) throw std::invalid_argument("from_action_angle: negative action");
        u[k] = std::polar(std::sqrt(2.0 * actions[k]), angles[k]);
    }
    return u;
}

inline State from_action_angle(const ActionAngleState& aa) {
    return from_action_angle(aa.actions, aa.angles);
}

// How <.> is evaluated: tensor trapezoid over the torus of the stencil
// angles (spectrally accurate for the smooth periodic built-ins), or Monte
// Carlo with a variance estimate for anything bigger than the tensor cap.
struct AveragingScheme {
    enum class Method { tensor, monte_carlo };

    Method method = Method::tensor;
    int points_per_angle = 64;
    int mc_samples = 4096;
    std::uint64_t seed = 1;
    int tensor_cap = 7;
};

inline void validate(const AveragingScheme& s) {
    if (s.points_per_angle < 8)
        throw std::invalid_argument("averaging: points per angle must be >= 8");
    if (s.mc_samples < 1000) throw std::invalid_argument("averaging: MC samples must be >= 1000");
}

template <class T>
struct Averaged {
    T value;
    double std_error = 0.0;
};

namespace detail {

inline double var_term(double d1, double d2) { return d1 * d2; }
inline double var_term(cplx d1, cplx d2) { return rdot(d1, d2); }

// Mean of f over the torus T^nangles. f receives the angle tuple.
template <class T, class F>
Averaged<T> torus_average(int nangles, F&& f, const AveragingScheme& scheme) {
    validate(scheme);
    if (nangles == 0) {
        std::vector<double> none;
        return {f(none), 0.0};
    }
    if (scheme.method == AveragingScheme::Method::tensor) {
        if (nangles > scheme.tensor_cap)
            throw std::invalid_argument(
                "averaging: stencil exceeds the tensor quadrature cap; use Monte Carlo");
        const int mpts = scheme.points_per_angle;
        std::vector<double> theta(nangles, 0.0);
        std::vector<int> digit(nangles, 0);
        double total = 1.0;
        for (int i = 0; i < nangles; ++i) total *= mpts;
        T acc{};
        double comp_re = 0.0, comp_im = 0.0;  // Kahan on components
        auto accumulate = [&](T val) {
            if constexpr (std::is_same_v<T, double>) {
                double y = val - comp_re;
                double t = acc + y;
                comp_re = (t - acc) - y;
                acc = t;
            } else {
                double yr = val.real() - comp_re;
                double tr = acc.real() + yr;
                comp_re = (tr - acc.real()) - yr;
                double yi = val.imag() - comp_im;
                double ti = acc.imag() + yi;
                comp_im = (ti - acc.imag()) - yi;
                acc = {tr, ti};
            }
        };
        const double step = two_pi / mpts;
        bool done = false;
        while (!done) {
            for (int i = 0; i < nangles; ++i) theta[i] = digit[i] * step;
            accumulate(f(theta));
            done = true;
            for (int i = nangles - 1; i >= 0; --i) {
                if (++digit[i] < mpts) {
                    done = false;
                    break;
                }
                digit[i] = 0;
            }
        }
        return {acc / total, 0.0};
    }
    // Monte Carlo with Welford accumulation
    Rng rng(scheme.seed);
    std::vector<double> theta(nangles);
    T mean{};
    double m2 = 0.0;
    for (int s = 0; s < scheme.mc_samples; ++s) {
        for (int i = 0; i < nangles; ++i) theta[i] = two_pi * rng.uniform();
        T val = f(theta);
        T delta = val - mean;
        mean += delta / static_cast<double>(s + 1);
        m2 += var_term(delta, val - mean);
    }
    double var = m2 / (scheme.mc_samples - 1);
    return {mean, std::sqrt(var / scheme.mc_samples)};
}

}  // namespace detail

// A local observable together with the declared set of nodes whose angles it
// reads. The declaration is explicit metadata, never inferred.
template <class T>
struct AngleObservableT {
    std::vector<int> stencil;
    std::function<T(const State&)> eval;
};

using AngleObservable = AngleObservableT<double>;
using AngleObservableC = AngleObservableT<cplx>;

// <P>(I): integral of P over the torus of the stencil angles only; all other
// angles are held at 0 (irrelevant by the stencil declaration; zero-action
// nodes are angle-independent automatically).
template <class T>
Averaged<T> angle_average(const AngleObservableT<T>& obs, const std::vector<double>& actions,
                          const AveragingScheme& scheme = {}) {
    State base(actions.size());
    for (std::size_t k = 0; k < actions.size(); ++k) {
        if (actions[k] < 0.0) throw std::invalid_argument("angle_average: negative action");
        base[k] = cplx(std::sqrt(2.0 * actions[k]), 0.0);
    }
    for (int s : obs.stencil)
        if (s < 0 || s >= static_cast<int>(actions.size()))
            throw std::invalid_argument("angle_average: stencil node out of range");
    State work = base;
    auto f = [&](const std::vector<double>& theta) -> T {
        for (std::size_t i = 0; i < obs.stencil.size(); ++i)
            work[obs.stencil[i]] = std::polar(std::abs(base[obs.stencil[i]]), theta[i]);
        return obs.eval(work);
    };
    return detail::torus_average<T>(static_cast<int>(obs.stencil.size()), f, scheme);
}

inline std::vector<int> dissipation_stencil(const ModelSpec& m, int j) {
    std::vector<int> st{j};
    for (int k : m.lattice.neighbors[j]) st.push_back(k);
    return st;
}

// R_j(I) = < g_j(u) . u_j >, evaluated by quadrature over the stencil torus.
inline std::vector<double> averaged_drift_quadrature(const std::vector<double>& actions,
                                                     const ModelSpec& m,
                                                     const AveragingScheme& scheme = {}) {
    std::vector<double> out(actions.size());
    for (int j = 0; j < m.size(); ++j) {
        AngleObservable obs;
        obs.stencil = dissipation_stencil(m, j);
        obs.eval = [&, j](const State& u) { return rdot(dissipation_at(u, m, j), u[j]); };
        out[j] = angle_average(obs, actions, scheme).value;
    }
    return out;
}

// Closed forms of R_j for the built-in stencils; the quadrature route above
// is kept as an independent cross-check.
inline std::vector<double> averaged_drift(const std::vector<double>& I, const ModelSpec& m,
                                          const AveragingScheme& scheme = {}) {
    const int n = m.size();
    if (static_cast<int>(I.size()) != n)
        throw std::invalid_argument("averaged_drift: action size mismatch");
    std::vector<double> out(n, 0.0);
    switch (m.diss.kind) {
        case Dissipation::Kind::none: break;
        case Dissipation::Kind::diagonal:
            for (int j = 0; j < n; ++j) out[j] = -std::pow(2.0 * I[j], 0.5 * m.p);
            break;
        case Dissipation::Kind::linear_coupled:
            for (int j = 0; j < n; ++j) out[j] = -2.0 * I[j];
            break;
        case Dissipation::Kind::flow_chain:
            for (int j = 0; j < n; ++j) {
                double right = (j + 1 < n) ? I[j + 1] : 0.0;
                double left = (j - 1 >= 0) ? I[j - 1] : 0.0;
                out[j] = right * I[j] - left * I[j] - I[j] * I[j];
            }
            break;
        default: return averaged_drift_quadrature(I, m, scheme);
    }
    return out;
}

// K_j(v) = int e^{-i theta_j} g_j(Psi_theta v) d theta over the stencil torus.
inline State effective_drift_quadrature(const State& v, const ModelSpec& m,
                                        const AveragingScheme& scheme = {}) {
    check_state(v, m, "effective_drift");
    State out(v.size());
    for (int j = 0; j < m.size(); ++j) {
        auto stencil = dissipation_stencil(m, j);
        int jpos = 0;
        for (std::size_t i = 0; i < stencil.size(); ++i)
            if (stencil[i] == j) jpos = static_cast<int>(i);
        State work = v;
        auto f = [&](const std::vector<double>& theta) -> cplx {
            for (std::size_t i = 0; i < stencil.size(); ++i)
                work[stencil[i]] = v[stencil[i]] * std::polar(1.0, theta[i]);
            return std::polar(1.0, -theta[jpos]) * dissipation_at(work, m, j);
        };
        out[j] = detail::torus_average<cplx>(static_cast<int>(stencil.size()), f, scheme).value;
    }
    return out;
}

inline State effective_drift(const State& v, const ModelSpec& m,
                             const AveragingScheme& scheme = {}) {
    check_state(v, m, "effective_drift");
    const int n = m.size();
    State out(n, cplx(0.0, 0.0));
    switch (m.diss.kind) {
        case Dissipation::Kind::none: break;
        case Dissipation::Kind::diagonal:
            for (int j = 0; j < n; ++j) {
                double n2 = std::norm(v[j]);
                double amp = (m.p == 2) ? 1.0 : std::pow(n2, 0.5 * (m.p - 2));
                out[j] = -amp * v[j];
            }
            break;
        case Dissipation::Kind::linear_coupled:
            for (int j = 0; j < n; ++j) out[j] = -v[j];
            break;
        case Dissipation::Kind::flow_chain:
            for (int j = 0; j < n; ++j) {
                double right = (j + 1 < n) ? std::norm(v[j + 1]) : 0.0;
                double left = (j - 1 >= 0) ? std::norm(v[j - 1]) : 0.0;
                out[j] = 0.25 * (right - left - std::norm(v[j])) * v[j];
            }
            break;
        default: return effective_drift_quadrature(v, m, scheme);
    }
    return out;
}

// Bond quantity Theta(j) = 2 I_{j+1} I_j on a chain (zero beyond the
// boundary) and its discrete gradient (Theta(j) - Theta(j-1)) / 2.
struct ActionFlow {
    std::vector<double> theta;
    std::vector<double> grad;
};

inline ActionFlow flow_of_actions(const Lattice& lat, const std::vector<double>& I) {
    if (lat.dim != 1) throw std::invalid_argument("flow_of_actions: requires a 1-D chain");
    if (static_cast<int>(I.size()) != lat.size())
        throw std::invalid_argument("flow_of_actions: action size mismatch");
    const int n = lat.size();
    ActionFlow out;
    out.theta.resize(n);
    out.grad.resize(n);
    for (int j = 0; j < n; ++j) {
        double next = (j + 1 < n) ? I[j + 1] : 0.0;
        out.theta[j] = 2.0 * next * I[j];
    }
    for (int j = 0; j < n; ++j) {
        double prev = (j - 1 >= 0) ? out.theta[j - 1] : 0.0;
        out.grad[j] = 0.5 * (out.theta[j] - prev);
    }
    return out;
}

}  // namespace rotorsim
