#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "rotorsim/lattice.hpp"

namespace rotorsim {

// Frequency function f applied per node as f_j(x) = sign_j * f(x).
// Built-in family: f(x) = 1 + x^k. The antiderivative F (with F(0) = 0) is
// closed-form for the built-in; custom f falls back to cached adaptive
// quadrature from 0.
struct Frequency {
    enum class Kind { one_plus_pow, custom };

    Kind kind = Kind::one_plus_pow;
    int k = 1;
    std::function<double(double)> fn;   // custom f
    std::function<double(double)> dfn;  // custom f' (optional; FD fallback)

    double operator()(double x) const {
        if (kind == Kind::one_plus_pow) return 1.0 + std::pow(x, k);
        return fn(x);
    }

    double derivative(double x) const {
        if (kind == Kind::one_plus_pow) return k == 0 ? 0.0 : k * std::pow(x, k - 1);
        if (dfn) return dfn(x);
        double h = 1e-6 * std::max(1.0, std::abs(x));
        double lo = std::max(0.0, x - h);
        return (fn(x + h) - fn(lo)) / (x + h - lo);
    }

    double antiderivative(double x) const {
        if (kind == Kind::one_plus_pow) return x + std::pow(x, k + 1) / (k + 1);
        std::lock_guard<std::mutex> lock(cache_->mu);
        auto& vals = cache_->vals;
        if (vals.empty()) vals.emplace(0.0, 0.0);
        auto it = vals.upper_bound(x);
        double x0 = 0.0, f0 = 0.0;
        if (it != vals.begin()) {
            --it;
            x0 = it->first;
            f0 = it->second;
        }
        double val = f0 + integrate_adaptive(fn, x0, x);
        vals.emplace(x, val);
        return val;
    }

private:
    struct Cache {
        std::mutex mu;
        std::map<double, double> vals;
    };
    std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

inline Frequency one_plus_pow_frequency(int k) {
    Frequency f;
    f.kind = Frequency::Kind::one_plus_pow;
    f.k = k;
    return f;
}

inline Frequency custom_frequency(std::function<double(double)> fn,
                                  std::function<double(double)> dfn = nullptr) {
    Frequency f;
    f.kind = Frequency::Kind::custom;
    f.fn = std::move(fn);
    f.dfn = std::move(dfn);
    return f;
}

// Interaction potential G with derivative G'. Built-ins: linear G(x) = x and
// the smooth bounded family G(x) = cos(sqrt(x + varsigma)).
struct Potential {
    enum class Kind { linear, cos_sqrt, custom };

    Kind kind = Kind::linear;
    double varsigma = 0.1;
    std::function<double(double)> fn;   // custom G
    std::function<double(double)> dfn;  // custom G'

    double operator()(double x) const {
        switch (kind) {
            case Kind::linear: return x;
            case Kind::cos_sqrt: return std::cos(std::sqrt(x + varsigma));
            default: return fn(x);
        }
    }

    double derivative(double x) const {
        switch (kind) {
            case Kind::linear: return 1.0;
            case Kind::cos_sqrt: {
                double r = std::sqrt(x + varsigma);
                return -std::sin(r) / (2.0 * r);
            }
            default: return dfn(x);
        }
    }
};

inline Potential linear_potential() { return Potential{}; }

inline Potential cos_sqrt_potential(double varsigma = 0.1) {
    Potential p;
    p.kind = Potential::Kind::cos_sqrt;
    p.varsigma = varsigma;
    return p;
}

inline Potential custom_potential(std::function<double(double)> g,
                                  std::function<double(double)> gp) {
    Potential p;
    p.kind = Potential::Kind::custom;
    p.fn = std::move(g);
    p.dfn = std::move(gp);
    return p;
}

// Dissipation stencils. Everything is local: g_j may read the state only
// through the radius-1 neighbourhood of j (contract for custom stencils).
//   diagonal:        g_j = -|u_j|^{p-2} u_j
//   linear_coupled:  g_j = -u_j + sum_{|k-j|=1} b u_k            (p = 2)
//   flow_chain:      g_j = (|u_{j+1}|^2 - |u_{j-1}|^2 - |u_j|^2) u_j / 4,
//                    1-D chains only, zero beyond the boundary    (p = 4)
struct Dissipation {
    enum class Kind { none, diagonal, linear_coupled, flow_chain, custom };

    Kind kind = Kind::diagonal;
    cplx coupling{0.0, 0.0};
    std::function<cplx(const Lattice&, const State&, int)> stencil;
};

struct ModelSpec {
    Lattice lattice;
    Frequency freq;
    Potential pot;
    Dissipation diss;
    std::vector<double> temperatures;
    double epsilon = 0.1;
    double a = 0.5;
    int p = 2;
    std::vector<std::string> warnings;

    int size() const { return lattice.size(); }
    double f_at(int j, double x) const { return lattice.signs[j] * freq(x); }
    double F_at(int j, double x) const { return lattice.signs[j] * freq.antiderivative(x); }
    double interaction_scale() const { return epsilon == 0.0 ? 0.0 : std::pow(epsilon, a); }
};

// Assembles and validates a model. Structural violations (negative
// temperature, bad exponents, a stencil incompatible with the lattice) are
// hard errors. Violations of the growth/dissipativity assumptions only
// degrade the long-time theory, so they are recorded as warnings.
inline ModelSpec make_model(Lattice lattice, Frequency freq, Potential pot, Dissipation diss,
                            std::vector<double> temperatures, double epsilon, double a = 0.5,
                            int p = 2) {
    ModelSpec m;
    m.lattice = std::move(lattice);
    m.freq = std::move(freq);
    m.pot = std::move(pot);
    m.diss = std::move(diss);

    const int n = m.lattice.size();
    if (temperatures.empty()) throw std::invalid_argument("model: temperatures are required");
    if (static_cast<int>(temperatures.size()) == n) {
        m.temperatures = std::move(temperatures);
    } else {
        m.temperatures.resize(n);
        for (int j = 0; j < n; ++j) m.temperatures[j] = temperatures[j % temperatures.size()];
    }
    for (double t : m.temperatures)
        if (!(t >= 0.0)) throw std::invalid_argument("model: temperatures must be >= 0");
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("model: epsilon must lie in [0, 1]");
    if (!(a >= 0.5)) throw std::invalid_argument("model: coupling exponent a must be >= 1/2");
    if (p < 2) throw std::invalid_argument("model: p must be an integer >= 2");
    m.epsilon = epsilon;
    m.a = a;
    m.p = p;

    if (epsilon == 0.0) m.warnings.push_back("epsilon = 0: interaction disabled");
    for (int j = 0; j < n; ++j)
        if (m.temperatures[j] == 0.0) {
            m.warnings.push_back("some temperatures are 0: thermostat disabled there");
            break;
        }

    switch (m.diss.kind) {
        case Dissipation::Kind::none:
            m.warnings.push_back("no dissipation: long-time bounds are not uniform in time");
            break;
        case Dissipation::Kind::flow_chain:
            if (m.lattice.dim != 1)
                throw std::invalid_argument("model: flow_chain dissipation requires a 1-D chain");
            if (m.p != 4) m.warnings.push_back("flow_chain stencil has cubic growth; p = 4 expected");
            break;
        case Dissipation::Kind::linear_coupled: {
            if (m.p != 2) m.warnings.push_back("linear_coupled stencil is linear; p = 2 expected");
            int d = m.lattice.dim;
            double cap = 1.0 / (8.0 * d * (2 * d + 1) * (2 * d + 1));
            if (std::abs(m.diss.coupling) >= cap)
                m.warnings.push_back("linear_coupled: |b| large, dissipative condition may fail");
            break;
        }
        case Dissipation::Kind::custom:
            if (!m.diss.stencil)
                throw std::invalid_argument("model: custom dissipation needs a stencil function");
            break;
        default: break;
    }

    // growth spot-check of f on a grid: f(x) >= c (1 + x^{p/2}) with c > 0
    double c_min = 1e300;
    for (int i = 0; i <= 40; ++i) {
        double x = 0.25 * i;
        c_min = std::min(c_min, m.freq(x) / (1.0 + std::pow(x, 0.5 * p)));
    }
    if (!(c_min > 0.0))
        m.warnings.push_back("frequency fails the growth condition on the sample grid");

    return m;
}

// --- full-equation building blocks ------------------------------------

inline void check_state(const State& u, const ModelSpec& m, const char* who) {
    if (static_cast<int>(u.size()) != m.size())
        throw std::invalid_argument(std::string(who) + ": state size mismatch");
    if (!all_finite(u)) throw std::invalid_argument(std::string(who) + ": non-finite state");
}

// H = 1/2 sum_j F_j(|u_j|^2) + (eps^a/4) sum_{j,k: |j-k|=1} G(|u_j-u_k|^2);
// the double sum runs over ordered pairs, so every bond is counted twice.
inline double hamiltonian(const State& u, const ModelSpec& m) {
    check_state(u, m, "hamiltonian");
    KahanSum s;
    for (int j = 0; j < m.size(); ++j) s.add(0.5 * m.F_at(j, std::norm(u[j])));
    double ia = m.interaction_scale();
    if (ia != 0.0) {
        KahanSum b;
        for (int j = 0; j < m.size(); ++j)
            for (int k : m.lattice.neighbors[j]) b.add(m.pot(std::norm(u[j] - u[k])));
        s.add(0.25 * ia * b.value());
    }
    return s.value();
}

// i grad_j H: the rotation term i f_j(|u_j|^2) u_j plus the coupling
// i eps^a sum_k G'(|u_j-u_k|^2)(u_j-u_k).
inline State grad_full(const State& u, const ModelSpec& m) {
    check_state(u, m, "grad_full");
    State out(u.size());
    const double ia = m.interaction_scale();
    const cplx iu(0.0, 1.0);
    for (int j = 0; j < m.size(); ++j) {
        cplx acc = m.f_at(j, std::norm(u[j])) * u[j];
        if (ia != 0.0) {
            cplx bond(0.0, 0.0);
            for (int k : m.lattice.neighbors[j])
                bond += m.pot.derivative(std::norm(u[j] - u[k])) * (u[j] - u[k]);
            acc += ia * bond;
        }
        out[j] = iu * acc;
    }
    return out;
}

inline cplx dissipation_at(const State& u, const ModelSpec& m, int j) {
    switch (m.diss.kind) {
        case Dissipation::Kind::none: return {0.0, 0.0};
        case Dissipation::Kind::diagonal: {
            double n2 = std::norm(u[j]);
            double amp = (m.p == 2) ? 1.0 : std::pow(n2, 0.5 * (m.p - 2));
            return -amp * u[j];
        }
        case Dissipation::Kind::linear_coupled: {
            cplx acc = -u[j];
            for (int k : m.lattice.neighbors[j]) acc += m.diss.coupling * u[k];
            return acc;
        }
        case Dissipation::Kind::flow_chain: {
            const int n = m.size();
            double right = (j + 1 < n) ? std::norm(u[j + 1]) : 0.0;
            double left = (j - 1 >= 0) ? std::norm(u[j - 1]) : 0.0;
            return 0.25 * (right - left - std::norm(u[j])) * u[j];
        }
        default: return m.diss.stencil(m.lattice, u, j);
    }
}

inline State dissipation(const State& u, const ModelSpec& m) {
    check_state(u, m, "dissipation");
    State out(u.size());
    for (int j = 0; j < m.size(); ++j) out[j] = dissipation_at(u, m, j);
    return out;
}

// Local energy H_j = 1/2 F_j(|u_j|^2) + (eps^a/4) sum_{k: |j-k|=1} G(|u_j-u_k|^2).
// Summed over j this reproduces the Hamiltonian exactly (each bond once per
// endpoint here, twice in the double sum there).
inline std::vector<double> local_energy(const State& u, const ModelSpec& m) {
    check_state(u, m, "local_energy");
    std::vector<double> out(u.size());
    const double ia = m.interaction_scale();
    for (int j = 0; j < m.size(); ++j) {
        double e = 0.5 * m.F_at(j, std::norm(u[j]));
        if (ia != 0.0) {
            KahanSum b;
            for (int k : m.lattice.neighbors[j]) b.add(m.pot(std::norm(u[j] - u[k])));
            e += 0.25 * ia * b.value();
        }
        out[j] = e;
    }
    return out;
}

}  // namespace rotorsim
