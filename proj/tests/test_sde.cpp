#include <catch2/catch_amalgamated.hpp>

#include "rotorsim/sde.hpp"
#include "rotorsim/stats.hpp"

using namespace rotorsim;

namespace {

ModelSpec make_chain(int n, double eps, Dissipation::Kind kind, std::vector<double> temps,
                     int p = 2, int k = 1) {
    Dissipation d;
    d.kind = kind;
    return make_model(build_lattice(1, {n}), one_plus_pow_frequency(k), linear_potential(), d,
                      std::move(temps), eps, 0.5, p);
}

State seeded_state(std::uint64_t seed, int n, double lo = 0.5, double hi = 1.5) {
    Rng rng(seed);
    State u(n);
    for (auto& z : u) {
        double action = lo + (hi - lo) * rng.uniform();
        z = std::polar(std::sqrt(2.0 * action), two_pi * rng.uniform());
    }
    return u;
}

}  // namespace

TEST_CASE("splitting integrates the free rotation exactly") {
    // eps = 0 and f = 1 + x^k with zero coupling: u_j(t) = u_j(0) e^{i f t}
    auto m = make_chain(3, 0.0, Dissipation::Kind::none, {0.0});
    State u0 = seeded_state(11, 3);
    SdeRun run;
    run.scheme = Scheme::splitting;
    run.dt = 0.05;
    run.horizon = 10.0;
    run.stride = 200;
    auto traj = run_full(u0, run, m);
    const State& uT = traj.states.back();
    for (int j = 0; j < 3; ++j) {
        double f = m.f_at(j, std::norm(u0[j]));
        cplx expect = u0[j] * std::polar(1.0, f * 10.0);
        REQUIRE(std::abs(uT[j] - expect) < 1e-10);
        REQUIRE(std::abs(std::abs(uT[j]) - std::abs(u0[j])) < 1e-12);
    }
}

TEST_CASE("deterministic dissipative decay matches the closed form") {
    // f = 0, diagonal p = 2, no noise: du/dt = -eps u, so |u(t)| = |u0| e^{-eps t}
    Dissipation d;
    d.kind = Dissipation::Kind::diagonal;
    auto m = make_model(build_lattice(1, {4}), custom_frequency([](double) { return 0.0; }),
                        linear_potential(), d, {0.0}, 0.1);
    State u0 = seeded_state(13, 4);
    SdeRun run;
    run.scheme = Scheme::rk4;
    run.dt = 0.01;
    run.horizon = 10.0;
    run.stride = 1000;
    auto traj = run_full(u0, run, m);
    for (int j = 0; j < 4; ++j) {
        cplx expect = u0[j] * std::exp(-0.1 * 10.0);
        REQUIRE(std::abs(traj.states.back()[j] - expect) < 1e-6);
    }
}

TEST_CASE("Hamiltonian-only flow conserves the total action") {
    auto m = make_chain(6, 0.04, Dissipation::Kind::none, {0.0});
    State u0 = seeded_state(17, 6);
    auto total_action = [](const State& u) {
        KahanSum s;
        for (const auto& z : u) s.add(0.5 * std::norm(z));
        return s.value();
    };
    SdeRun run;
    run.scheme = Scheme::rk4;
    run.dt = 1e-3;
    run.horizon = 10.0;
    run.stride = 1000;
    auto traj = run_full(u0, run, m);
    double i0 = total_action(u0);
    for (const auto& u : traj.states)
        REQUIRE(std::abs(total_action(u) - i0) / i0 < 1e-7);
}

TEST_CASE("rk4 refuses live thermostats") {
    auto m = make_chain(3, 0.04, Dissipation::Kind::diagonal, {1.0});
    SdeRun run;
    run.scheme = Scheme::rk4;
    run.dt = 0.01;
    run.horizon = 1.0;
    REQUIRE_THROWS_AS(run_full(seeded_state(1, 3), run, m), std::invalid_argument);
}

TEST_CASE("averaged equation") {
    SECTION("noiseless diagonal p=2 decays as e^{-2 tau}") {
        auto m = make_chain(3, 0.1, Dissipation::Kind::diagonal, {0.0});
        SdeRun run;
        run.frame = TimeFrame::slow;
        run.dt = 1e-4;
        run.horizon = 1.0;
        run.stride = 10000;
        Rng unused(0);
        auto traj = run_averaged({1.0, 1.0, 1.0}, run, m);
        for (double x : traj.actions.back())
            REQUIRE(std::abs(x - std::exp(-2.0)) < 1e-4);
    }

    SECTION("long-run mean approaches T/2 for the CIR-type law") {
        auto m = make_chain(2, 0.1, Dissipation::Kind::diagonal, {1.0, 0.5});
        SdeRun run;
        run.frame = TimeFrame::slow;
        run.dt = 1e-3;
        run.horizon = 2000.0;
        run.seed = 23;
        run.stride = 100;
        auto traj = run_averaged({1.0, 1.0}, run, m);
        for (int j = 0; j < 2; ++j) {
            std::vector<double> series;
            for (const auto& I : traj.actions) series.push_back(I[j]);
            auto avg = ergodic_average(traj.times, series, 200.0);
            REQUIRE(std::abs(avg.mean - 0.5 * m.temperatures[j]) <= 3.0 * avg.std_error);
        }
    }

    SECTION("actions never go negative") {
        auto m = make_chain(4, 0.1, Dissipation::Kind::diagonal, {2.0});
        SdeRun run;
        run.frame = TimeFrame::slow;
        run.dt = 0.01;
        run.horizon = 50.0;
        run.seed = 29;
        auto traj = run_averaged({0.01, 0.01, 0.01, 0.01}, run, m);
        for (const auto& I : traj.actions)
            for (double x : I) REQUIRE(x >= 0.0);
    }

    SECTION("frame validation") {
        auto m = make_chain(2, 0.1, Dissipation::Kind::diagonal, {1.0});
        SdeRun run;  // fast frame
        REQUIRE_THROWS_AS(run_averaged({1.0, 1.0}, run, m), std::invalid_argument);
    }
}

TEST_CASE("effective equation") {
    SECTION("diagonal p=2 is an OU process with E I_j -> T_j/2") {
        auto m = make_chain(2, 0.1, Dissipation::Kind::diagonal, {1.0, 0.5});
        SdeRun run;
        run.frame = TimeFrame::slow;
        run.dt = 2e-3;
        run.horizon = 2000.0;
        run.seed = 31;
        run.stride = 100;
        auto traj = run_effective(seeded_state(31, 2), run, m);
        for (int j = 0; j < 2; ++j) {
            std::vector<double> series;
            for (const auto& v : traj.states) series.push_back(0.5 * std::norm(v[j]));
            auto avg = ergodic_average(traj.times, series, 200.0);
            REQUIRE(std::abs(avg.mean - 0.5 * m.temperatures[j]) <=
                    std::max(3.0 * avg.std_error, 0.01));
        }
    }

    SECTION("the law of the actions is rotation invariant") {
        auto m = make_chain(3, 0.1, Dissipation::Kind::diagonal, {1.0});
        State v0 = seeded_state(37, 3);
        State rotated(3);
        for (int j = 0; j < 3; ++j) rotated[j] = v0[j] * std::polar(1.0, 0.7 + 0.9 * j);
        SdeRun run;
        run.frame = TimeFrame::slow;
        run.dt = 5e-3;
        run.horizon = 1.0;
        run.seed = 41;
        auto a = ensemble_final_actions(EquationKind::effective, v0, run, m, 1500);
        run.seed = 4100;
        auto b = ensemble_final_actions(EquationKind::effective, rotated, run, m, 1500);
        for (int j = 0; j < 3; ++j) {
            double d = ks_two_sample(a[j], b[j]);
            REQUIRE(d < ks_critical_two_sample(0.01, a[j].size(), b[j].size()));
        }
    }
}

TEST_CASE("trajectory recording") {
    auto m = make_chain(2, 0.04, Dissipation::Kind::diagonal, {1.0});

    SECTION("stride 1 records initial plus every step") {
        SdeRun run;
        run.dt = 0.1;
        run.horizon = 1.0;
        run.stride = 1;
        auto traj = run_full(seeded_state(43, 2), run, m);
        REQUIRE(traj.states.size() == 11);
        REQUIRE(traj.times.front() == 0.0);
        for (std::size_t i = 1; i < traj.times.size(); ++i)
            REQUIRE(traj.times[i] > traj.times[i - 1]);
    }

    SECTION("same seed reproduces the trajectory bit for bit") {
        SdeRun run;
        run.dt = 0.05;
        run.horizon = 2.0;
        run.seed = 47;
        auto t1 = run_full(seeded_state(43, 2), run, m);
        auto t2 = run_full(seeded_state(43, 2), run, m);
        REQUIRE(t1.states.size() == t2.states.size());
        for (std::size_t i = 0; i < t1.states.size(); ++i)
            for (int j = 0; j < 2; ++j) {
                REQUIRE(t1.states[i][j].real() == t2.states[i][j].real());
                REQUIRE(t1.states[i][j].imag() == t2.states[i][j].imag());
            }
    }

    SECTION("ensembles derive trajectory seeds from the root seed") {
        SdeRun run;
        run.dt = 0.05;
        run.horizon = 1.0;
        run.seed = 53;
        auto ens = ensemble_final_actions(EquationKind::full, seeded_state(43, 2), run, m, 4);
        SdeRun r2 = run;
        r2.seed = 53 + 2;
        r2.stride = detail::step_count(run);
        auto traj = run_full(seeded_state(43, 2), r2, m);
        auto acts = to_action_angle(traj.states.back()).actions;
        REQUIRE(ens[0][2] == acts[0]);
        REQUIRE(ens[1][2] == acts[1]);

        SECTION("and the result is worker-count independent") {
            auto ens4 = ensemble_final_actions(EquationKind::full, seeded_state(43, 2), run, m, 4,
                                               4);
            for (int j = 0; j < 2; ++j)
                for (int i = 0; i < 4; ++i) REQUIRE(ens[j][i] == ens4[j][i]);
        }
    }

    SECTION("non-finite states abort with a diagnostic") {
        auto stiff = make_chain(2, 1.0, Dissipation::Kind::diagonal, {0.0}, 4, 2);
        SdeRun run;
        run.scheme = Scheme::euler_maruyama;
        run.dt = 10.0;
        run.horizon = 1000.0;
        REQUIRE_THROWS_AS(run_full(seeded_state(59, 2, 2.0, 3.0), run, stiff),
                          std::runtime_error);
    }
}

TEST_CASE("weak order sanity: halving dt moves ensemble means less than the MC error") {
    auto m = make_chain(2, 0.1, Dissipation::Kind::diagonal, {1.0});
    std::vector<double> I0{1.0, 1.0};
    auto mean_at = [&](double dt, std::uint64_t seed) {
        SdeRun run;
        run.frame = TimeFrame::slow;
        run.dt = dt;
        run.horizon = 1.0;
        run.seed = seed;
        const int M = 2000;
        std::vector<double> finals(M);
        for (int i = 0; i < M; ++i) {
            SdeRun ri = run;
            ri.seed = run.seed + i;
            ri.stride = detail::step_count(run);
            finals[i] = run_averaged(I0, ri, m).actions.back()[0];
        }
        return std::make_pair(mean_of(finals), std::sqrt(variance_of(finals) / M));
    };
    auto [m1, se1] = mean_at(2e-3, 61);
    auto [m2, se2] = mean_at(1e-3, 8000061);
    REQUIRE(std::abs(m1 - m2) < std::sqrt(se1 * se1 + se2 * se2));
}

TEST_CASE("csv dump formats") {
    auto m = make_chain(2, 0.04, Dissipation::Kind::diagonal, {1.0});
    SdeRun run;
    run.dt = 0.1;
    run.horizon = 0.2;
    auto traj = run_full(seeded_state(67, 2), run, m);

    std::string path = "traj_test.csv";
    write_trajectory_csv(path, traj);
    std::FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    char line[256];
    REQUIRE(std::fgets(line, sizeof line, f) != nullptr);
    REQUIRE(std::string(line) == "time,node,re,im,action,angle\n");
    int rows = 0;
    while (std::fgets(line, sizeof line, f)) ++rows;
    std::fclose(f);
    std::remove(path.c_str());
    REQUIRE(rows == 2 * 3);  // two nodes, three records

    SdeRun arun;
    arun.frame = TimeFrame::slow;
    arun.dt = 0.1;
    arun.horizon = 0.2;
    auto atraj = run_averaged({1.0, 1.0}, arun, m);
    write_trajectory_csv(path, atraj);
    f = std::fopen(path.c_str(), "rb");
    REQUIRE(std::fgets(line, sizeof line, f) != nullptr);
    REQUIRE(std::string(line) == "time,node,action\n");
    std::fclose(f);
    std::remove(path.c_str());
}
