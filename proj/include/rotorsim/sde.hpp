#pragma once

#include <cstdio>
#include <string>
#include <thread>

#include "rotorsim/action_angle.hpp"

namespace rotorsim {

enum class Scheme { euler_maruyama, splitting, rk4 };
enum class TimeFrame { fast, slow };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::euler_maruyama: return "euler";
        case Scheme::splitting: return "splitting";
        default: return "rk4";
    }
}

// One trajectory request. dt and horizon are in the declared frame: fast
// time t for the full equation, slow time tau = eps * t for the averaged and
// effective equations.
struct SdeRun {
    Scheme scheme = Scheme::splitting;
    double dt = 1e-2;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    long stride = 1;
    TimeFrame frame = TimeFrame::fast;
};

inline void validate(const SdeRun& r) {
    if (!(r.dt > 0.0)) throw std::invalid_argument("run: dt must be positive");
    if (!(r.horizon > 0.0)) throw std::invalid_argument("run: horizon must be positive");
    if (r.stride < 1) throw std::invalid_argument("run: stride must be >= 1");
}

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;                 // full / effective
    std::vector<std::vector<double>> actions;  // averaged
    std::string kind;
    std::string scheme;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_finite_step(const State& u, double t, const char* who) {
    for (std::size_t j = 0; j < u.size(); ++j)
        if (!std::isfinite(u[j].real()) || !std::isfinite(u[j].imag()))
            throw std::runtime_error(std::string(who) + ": non-finite state at node " +
                                     std::to_string(j) + ", t = " + std::to_string(t));
}

inline State deterministic_field(const State& u, const ModelSpec& m) {
    State f = grad_full(u, m);
    if (m.diss.kind != Dissipation::Kind::none) {
        for (int j = 0; j < m.size(); ++j) f[j] += m.epsilon * dissipation_at(u, m, j);
    }
    return f;
}

}  // namespace detail

// One step of the full equation in fast time:
//   du_j = [i f_j u_j + i eps^a sum G'(u_j - u_k) + eps g_j] dt
//          + sqrt(eps T_j) dbeta_j,  beta_j complex standard.
// The splitting scheme rotates each node exactly by e^{i f_j(|u_j|^2) dt}
// (|u_j| is invariant under the rotation term) and Euler-steps the rest.
inline State step_full(const State& u, double dt, const ModelSpec& m, Rng& rng,
                       Scheme scheme = Scheme::splitting) {
    const int n = m.size();
    State out(n);
    if (scheme == Scheme::splitting) {
        for (int j = 0; j < n; ++j) out[j] = u[j] * std::polar(1.0, m.f_at(j, std::norm(u[j])) * dt);
        const double ia = m.interaction_scale();
        const cplx iu(0.0, 1.0);
        State incr(n, cplx(0.0, 0.0));
        for (int j = 0; j < n; ++j) {
            cplx drift(0.0, 0.0);
            if (ia != 0.0) {
                cplx bond(0.0, 0.0);
                for (int k : m.lattice.neighbors[j])
                    bond += m.pot.derivative(std::norm(out[j] - out[k])) * (out[j] - out[k]);
                drift += iu * ia * bond;
            }
            if (m.diss.kind != Dissipation::Kind::none)
                drift += m.epsilon * dissipation_at(out, m, j);
            incr[j] = dt * drift;
        }
        for (int j = 0; j < n; ++j) {
            double sigma = std::sqrt(m.epsilon * m.temperatures[j] * dt);
            out[j] += incr[j] + sigma * rng.normal_pair();
        }
    } else if (scheme == Scheme::euler_maruyama) {
        State f = detail::deterministic_field(u, m);
        for (int j = 0; j < n; ++j) {
            double sigma = std::sqrt(m.epsilon * m.temperatures[j] * dt);
            out[j] = u[j] + dt * f[j] + sigma * rng.normal_pair();
        }
    } else {
        // deterministic RK4 on the drift; thermostats must be off
        State k1 = detail::deterministic_field(u, m);
        State tmp(n);
        for (int j = 0; j < n; ++j) tmp[j] = u[j] + 0.5 * dt * k1[j];
        State k2 = detail::deterministic_field(tmp, m);
        for (int j = 0; j < n; ++j) tmp[j] = u[j] + 0.5 * dt * k2[j];
        State k3 = detail::deterministic_field(tmp, m);
        for (int j = 0; j < n; ++j) tmp[j] = u[j] + dt * k3[j];
        State k4 = detail::deterministic_field(tmp, m);
        for (int j = 0; j < n; ++j)
            out[j] = u[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    return out;
}

// Truncated Euler step of the averaged action equation in slow time:
//   dI_j = (R_j(I) + T_j) dtau + sqrt(2 I_j T_j) dbeta~_j.
// The square-root diffusion is evaluated at max(I_j, 0) and the proposal is
// clamped at 0, which keeps the actions nonnegative.
inline std::vector<double> step_averaged(const std::vector<double>& I, double dtau,
                                         const ModelSpec& m, Rng& rng,
                                         const AveragingScheme& scheme = {}) {
    auto drift = averaged_drift(I, m, scheme);
    std::vector<double> out(I.size());
    for (int j = 0; j < m.size(); ++j) {
        double ipos = std::max(I[j], 0.0);
        double prop = I[j] + dtau * (drift[j] + m.temperatures[j]) +
                      std::sqrt(2.0 * ipos * m.temperatures[j] * dtau) * rng.normal();
        out[j] = std::max(prop, 0.0);
    }
    return out;
}

// Euler step of the effective equation in slow time:
//   dv_j = K_j(v) dtau + sqrt(T_j) dbeta_j, beta_j complex standard.
inline State step_effective(const State& v, double dtau, const ModelSpec& m, Rng& rng,
                            const AveragingScheme& scheme = {}) {
    State drift = effective_drift(v, m, scheme);
    State out(v.size());
    for (int j = 0; j < m.size(); ++j) {
        double sigma = std::sqrt(m.temperatures[j] * dtau);
        out[j] = v[j] + dtau * drift[j] + sigma * rng.normal_pair();
    }
    return out;
}

namespace detail {

inline long step_count(const SdeRun& r) {
    long n = std::lround(r.horizon / r.dt);
    return n < 1 ? 1 : n;
}

inline void warn_fast_timestep(const State& u0, const ModelSpec& m, const SdeRun& r) {
    double fmax = 0.0;
    for (int j = 0; j < m.size(); ++j) fmax = std::max(fmax, std::abs(m.f_at(j, std::norm(u0[j]))));
    if (m.epsilon * r.dt * fmax > 0.5)
        std::fprintf(stderr, "warning: eps*dt*max|f| = %.3g > 0.5, step too coarse\n",
                     m.epsilon * r.dt * fmax);
}

}  // namespace detail

inline Trajectory run_full(const State& u0, const SdeRun& r, const ModelSpec& m) {
    validate(r);
    check_state(u0, m, "run_full");
    if (r.frame != TimeFrame::fast)
        throw std::invalid_argument("run_full: the full equation runs in fast time");
    if (r.scheme == Scheme::rk4) {
        for (double t : m.temperatures)
            if (t > 0.0)
                throw std::invalid_argument("run_full: rk4 is deterministic; thermostats must be off");
    }
    detail::warn_fast_timestep(u0, m, r);
    Rng rng(r.seed);
    Trajectory traj;
    traj.kind = "full";
    traj.scheme = to_string(r.scheme);
    traj.seed = r.seed;
    const long nsteps = detail::step_count(r);
    State u = u0;
    traj.times.push_back(0.0);
    traj.states.push_back(u);
    for (long s = 1; s <= nsteps; ++s) {
        u = step_full(u, r.dt, m, rng, r.scheme);
        detail::check_finite_step(u, s * r.dt, "run_full");
        if (s % r.stride == 0) {
            traj.times.push_back(s * r.dt);
            traj.states.push_back(u);
        }
    }
    return traj;
}

inline Trajectory run_averaged(const std::vector<double>& I0, const SdeRun& r, const ModelSpec& m,
                               const AveragingScheme& scheme = {}) {
    validate(r);
    if (r.frame != TimeFrame::slow)
        throw std::invalid_argument("run_averaged: the averaged equation runs in slow time");
    for (double x : I0)
        if (x < 0.0) throw std::invalid_argument("run_averaged: negative initial action");
    Rng rng(r.seed);
    Trajectory traj;
    traj.kind = "averaged";
    traj.scheme = "euler";
    traj.seed = r.seed;
    const long nsteps = detail::step_count(r);
    std::vector<double> I = I0;
    traj.times.push_back(0.0);
    traj.actions.push_back(I);
    for (long s = 1; s <= nsteps; ++s) {
        I = step_averaged(I, r.dt, m, rng, scheme);
        if (!all_finite(I)) throw std::runtime_error("run_averaged: non-finite actions");
        if (s % r.stride == 0) {
            traj.times.push_back(s * r.dt);
            traj.actions.push_back(I);
        }
    }
    return traj;
}

inline Trajectory run_effective(const State& v0, const SdeRun& r, const ModelSpec& m,
                                const AveragingScheme& scheme = {}) {
    validate(r);
    check_state(v0, m, "run_effective");
    if (r.frame != TimeFrame::slow)
        throw std::invalid_argument("run_effective: the effective equation runs in slow time");
    Rng rng(r.seed);
    Trajectory traj;
    traj.kind = "effective";
    traj.scheme = "euler";
    traj.seed = r.seed;
    const long nsteps = detail::step_count(r);
    State v = v0;
    traj.times.push_back(0.0);
    traj.states.push_back(v);
    for (long s = 1; s <= nsteps; ++s) {
        v = step_effective(v, r.dt, m, rng, scheme);
        detail::check_finite_step(v, s * r.dt, "run_effective");
        if (s % r.stride == 0) {
            traj.times.push_back(s * r.dt);
            traj.states.push_back(v);
        }
    }
    return traj;
}

// --- ensemble drivers ---------------------------------------------------
//
// Trajectory i uses seed r.seed + i and writes into slot i, so the result is
// independent of the worker count.

enum class EquationKind { full, averaged, effective };

namespace detail {

template <class Work>
void parallel_indices(int count, int workers, Work&& work) {
    if (workers < 1) workers = 1;
    if (workers == 1) {
        for (int i = 0; i < count; ++i) work(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < count; i += workers) work(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace detail

// Final-time action samples of an ensemble: result[node][trajectory].
inline std::vector<std::vector<double>> ensemble_final_actions(
    EquationKind kind, const State& init, const SdeRun& r, const ModelSpec& m, int ensemble,
    int workers = 1) {
    if (ensemble < 1) throw std::invalid_argument("ensemble size must be >= 1");
    const int n = m.size();
    std::vector<std::vector<double>> out(n, std::vector<double>(ensemble, 0.0));
    auto initial_actions = to_action_angle(init).actions;
    detail::parallel_indices(ensemble, workers, [&](int i) {
        SdeRun ri = r;
        ri.seed = r.seed + static_cast<std::uint64_t>(i);
        ri.stride = detail::step_count(r);  // record endpoints only
        if (kind == EquationKind::full) {
            auto traj = run_full(init, ri, m);
            auto acts = to_action_angle(traj.states.back()).actions;
            for (int j = 0; j < n; ++j) out[j][i] = acts[j];
        } else if (kind == EquationKind::averaged) {
            auto traj = run_averaged(initial_actions, ri, m);
            for (int j = 0; j < n; ++j) out[j][i] = traj.actions.back()[j];
        } else {
            auto traj = run_effective(init, ri, m);
            auto acts = to_action_angle(traj.states.back()).actions;
            for (int j = 0; j < n; ++j) out[j][i] = acts[j];
        }
    });
    return out;
}

// --- trajectory dump ------------------------------------------------------

// CSV rows: `time,node,re,im,action,angle` for complex trajectories,
// `time,node,action` for action-only ones. One row per recorded node-time.
inline void write_trajectory_csv(std::FILE* f, const Trajectory& traj) {
    if (!traj.states.empty()) {
        std::fprintf(f, "time,node,re,im,action,angle\n");
        for (std::size_t s = 0; s < traj.states.size(); ++s) {
            auto aa = to_action_angle(traj.states[s]);
            for (std::size_t j = 0; j < traj.states[s].size(); ++j)
                std::fprintf(f, "%.17g,%zu,%.17g,%.17g,%.17g,%.17g\n", traj.times[s], j,
                             traj.states[s][j].real(), traj.states[s][j].imag(), aa.actions[j],
                             aa.angles[j]);
        }
    } else {
        std::fprintf(f, "time,node,action\n");
        for (std::size_t s = 0; s < traj.actions.size(); ++s)
            for (std::size_t j = 0; j < traj.actions[s].size(); ++j)
                std::fprintf(f, "%.17g,%zu,%.17g\n", traj.times[s], j, traj.actions[s][j]);
    }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    write_trajectory_csv(f, traj);
    std::fclose(f);
}

}  // namespace rotorsim
