#pragma once

#include "rotorsim/action_angle.hpp"

namespace rotorsim {

// Substep count for the time-one map of the generator flow.
struct FlowParams {
    int substeps = 16;
    double max_amplitude = 1e6;
};

inline void validate(const FlowParams& fp) {
    if (fp.substeps < 8) throw std::invalid_argument("flow: substeps must be >= 8");
}

namespace detail {

struct Bond {
    int j, n;  // ordered, |j-n|_1 = 1
};

// Ordered bond list entering the generator: both endpoints outside the
// defect closure. Equal spin signs across an included bond would make the
// frequency denominator resonant, so such bonds are refused.
inline std::vector<Bond> generator_bonds(const Lattice& lat) {
    std::vector<Bond> bonds;
    for (int j = 0; j < lat.size(); ++j) {
        if (lat.in_defect_closure[j]) continue;
        for (int n : lat.neighbors[j]) {
            if (lat.in_defect_closure[n]) continue;
            if (lat.signs[j] == lat.signs[n])
                throw std::domain_error(
                    "generator: equal spin signs on a non-defect bond (resonant denominator)");
            bonds.push_back({j, n});
        }
    }
    return bonds;
}

// One bond in the theta representation:
// G(J_j, J_n, theta) = G(2J_j + 2J_n - 4 sqrt(J_j J_n) cos theta).
struct BondTheta {
    const Potential* pot;
    double base;  // 2J_j + 2J_n
    double amp;   // 4 sqrt(J_j J_n)

    double at(double theta) const { return (*pot)(base - amp * std::cos(theta)); }

    double mean(int points) const {
        if (amp == 0.0) return (*pot)(base);
        KahanSum s;
        for (int k = 0; k < points; ++k) s.add(at(two_pi * k / points));
        return s.value() / points;
    }

    // periodic antiderivative of G - <G>, pinned to 0 at theta = 0
    double antiderivative(double theta, double mean_value) const {
        if (amp == 0.0 || theta == 0.0) return 0.0;
        int panels = std::max(8, static_cast<int>(std::ceil(std::abs(theta) / 0.5)));
        return integrate_gl([&](double t) { return at(t) - mean_value; }, 0.0, theta, panels);
    }
};

inline double freq_denominator(const ModelSpec& m, const State& u, int j, int n) {
    double denom = m.f_at(j, std::norm(u[j])) - m.f_at(n, std::norm(u[n]));
    if (std::abs(denom) < 1e-9)
        throw std::domain_error("generator: frequency denominator not separated from zero");
    return denom;
}

// Value of the (j,n) term of Phi at the given state.
inline double phi_bond_term(const ModelSpec& m, const State& u, const ActionAngleState& aa,
                            int j, int n, int theta_points) {
    double Jj = aa.actions[j], Jn = aa.actions[n];
    BondTheta bt{&m.pot, 2.0 * (Jj + Jn), 4.0 * std::sqrt(Jj * Jn)};
    if (bt.amp == 0.0) return 0.0;
    double theta = aa.angles[j] - aa.angles[n];
    double denom = freq_denominator(m, u, j, n);
    return 0.25 * bt.antiderivative(theta, bt.mean(theta_points)) / denom;
}

}  // namespace detail

// Generator of the near-identity change of variables:
// Phi = sum_{|j-n|=1} (1/4) [ int_0^{theta_jn} (G - <G>) ] / (f_j - f_n),
// summed over ordered bonds away from the defect closure.
inline double phi_value(const State& u, const ModelSpec& m, int theta_points = 256) {
    check_state(u, m, "phi_value");
    auto bonds = detail::generator_bonds(m.lattice);
    auto aa = to_action_angle(u);
    KahanSum s;
    for (const auto& b : bonds) s.add(detail::phi_bond_term(m, u, aa, b.j, b.n, theta_points));
    return s.value();
}

// Closed form of Phi for the linear potential G(x) = x:
// Phi_jn = -sqrt(J_j J_n) sin(theta_jn) / (f_j - f_n).
inline double phi_value_linear(const State& u, const ModelSpec& m) {
    check_state(u, m, "phi_value_linear");
    if (m.pot.kind != Potential::Kind::linear)
        throw std::invalid_argument("phi_value_linear: needs the linear potential");
    auto bonds = detail::generator_bonds(m.lattice);
    KahanSum s;
    for (const auto& b : bonds) {
        double denom = detail::freq_denominator(m, u, b.j, b.n);
        s.add(-0.5 * std::imag(u[b.j] * std::conj(u[b.n])) / denom);
    }
    return s.value();
}

// Residual of the homological identity G~ + {F~, Phi} - <G~>, assembled from
// independently evaluated pieces: G~ straight from the state, <G~> from the
// quadrature mean, and the bracket from a finite difference of the
// quadrature antiderivative (never from the algebraic cancellation).
inline double homological_residual(const State& u, const ModelSpec& m, int theta_points = 256) {
    check_state(u, m, "homological_residual");
    auto bonds = detail::generator_bonds(m.lattice);
    auto aa = to_action_angle(u);
    KahanSum g_direct, g_mean, bracket;
    const double h = 1e-5;
    for (const auto& b : bonds) {
        g_direct.add(0.25 * m.pot(std::norm(u[b.j] - u[b.n])));
        double Jj = aa.actions[b.j], Jn = aa.actions[b.n];
        detail::BondTheta bt{&m.pot, 2.0 * (Jj + Jn), 4.0 * std::sqrt(Jj * Jn)};
        double mean = bt.mean(theta_points);
        g_mean.add(0.25 * mean);
        double denom = detail::freq_denominator(m, u, b.j, b.n);
        double theta = aa.angles[b.j] - aa.angles[b.n];
        double dphi = 0.25 *
                      (bt.antiderivative(theta + h, mean) - bt.antiderivative(theta - h, mean)) /
                      (2.0 * h) / denom;
        bracket.add(-denom * dphi);
    }
    return std::abs(g_direct.value() + bracket.value() - g_mean.value());
}

namespace detail {

// grad_j Phi = 2 d Phi / d conj(u_j). Analytic for the linear potential,
// finite differences of the incident-bond sum otherwise.
inline State grad_phi_linear(const State& u, const ModelSpec& m,
                             const std::vector<Bond>& bonds) {
    State out(u.size(), cplx(0.0, 0.0));
    const cplx iu(0.0, 1.0);
    for (const auto& b : bonds) {
        // ordered bonds visit each unordered pair twice; accumulate the
        // derivative of both copies at the first endpoint
        double denom = freq_denominator(m, u, b.j, b.n);
        double im = std::imag(u[b.j] * std::conj(u[b.n]));
        double fprime = m.lattice.signs[b.j] * m.freq.derivative(std::norm(u[b.j]));
        out[b.j] += -iu * u[b.n] / denom + 2.0 * im * fprime * u[b.j] / (denom * denom);
    }
    return out;
}

inline double phi_local(const State& u, const ModelSpec& m, const std::vector<Bond>& bonds,
                        int node, int theta_points) {
    auto aa = to_action_angle(u);
    KahanSum s;
    for (const auto& b : bonds)
        if (b.j == node || b.n == node)
            s.add(phi_bond_term(m, u, aa, b.j, b.n, theta_points));
    return s.value();
}

inline State grad_phi_fd(const State& u, const ModelSpec& m, const std::vector<Bond>& bonds,
                         int theta_points) {
    double amp = 0.0;
    for (const auto& z : u) amp = std::max(amp, std::abs(z));
    const double h = 1e-6 * std::max(1.0, amp);
    State out(u.size(), cplx(0.0, 0.0));
    State w = u;
    for (int j = 0; j < static_cast<int>(u.size()); ++j) {
        w[j] = u[j] + h;
        double pr = phi_local(w, m, bonds, j, theta_points);
        w[j] = u[j] - h;
        double mr = phi_local(w, m, bonds, j, theta_points);
        w[j] = u[j] + cplx(0.0, h);
        double pi = phi_local(w, m, bonds, j, theta_points);
        w[j] = u[j] - cplx(0.0, h);
        double mi = phi_local(w, m, bonds, j, theta_points);
        w[j] = u[j];
        out[j] = cplx((pr - mr) / (2.0 * h), (pi - mi) / (2.0 * h));
    }
    return out;
}

inline State grad_phi(const State& u, const ModelSpec& m, const std::vector<Bond>& bonds,
                      int theta_points) {
    if (m.pot.kind == Potential::Kind::linear) return grad_phi_linear(u, m, bonds);
    return grad_phi_fd(u, m, bonds, theta_points);
}

// Classical one-step 4th order integration of v' = scale * i grad Phi(v)
// over unit time.
inline State generator_flow(const State& u0, const ModelSpec& m, double scale,
                            const FlowParams& fp, int theta_points) {
    validate(fp);
    check_state(u0, m, "generator_flow");
    if (scale == 0.0) return u0;
    auto bonds = generator_bonds(m.lattice);
    const cplx iu(0.0, 1.0);
    auto field = [&](const State& v) {
        State g = grad_phi(v, m, bonds, theta_points);
        for (auto& z : g) z = scale * iu * z;
        return g;
    };
    State v = u0;
    const double h = 1.0 / fp.substeps;
    State k1, k2, k3, k4, tmp(v.size());
    for (int s = 0; s < fp.substeps; ++s) {
        k1 = field(v);
        for (std::size_t i = 0; i < v.size(); ++i) tmp[i] = v[i] + 0.5 * h * k1[i];
        k2 = field(tmp);
        for (std::size_t i = 0; i < v.size(); ++i) tmp[i] = v[i] + 0.5 * h * k2[i];
        k3 = field(tmp);
        for (std::size_t i = 0; i < v.size(); ++i) tmp[i] = v[i] + h * k3[i];
        k4 = field(tmp);
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (const auto& z : v)
            if (!(std::abs(z) <= fp.max_amplitude))
                throw std::runtime_error("generator_flow: amplitude blow-up, aborting");
    }
    return v;
}

}  // namespace detail

// u -> v: time-one map of v' = -eps^a i grad Phi, the direction that removes
// the order-eps^a interaction from the Hamiltonian.
inline State forward_map(const State& u, const ModelSpec& m, const FlowParams& fp = {},
                         int theta_points = 256) {
    return detail::generator_flow(u, m, -m.interaction_scale(), fp, theta_points);
}

// v -> u: the +eps^a direction.
inline State inverse_map(const State& v, const ModelSpec& m, const FlowParams& fp = {},
                         int theta_points = 256) {
    return detail::generator_flow(v, m, +m.interaction_scale(), fp, theta_points);
}

// |I_j(u) - J_j(forward_map(u))| per node; the sqrt(eps)-closeness diagnostic.
inline std::vector<double> action_shift(const State& u, const ModelSpec& m,
                                        const FlowParams& fp = {}, int theta_points = 256) {
    auto before = to_action_angle(u).actions;
    auto after = to_action_angle(forward_map(u, m, fp, theta_points)).actions;
    std::vector<double> out(before.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(before[k] - after[k]);
    return out;
}

}  // namespace rotorsim
