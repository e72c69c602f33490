#include <catch2/catch_amalgamated.hpp>

#include "rotorsim/action_angle.hpp"

using namespace rotorsim;

namespace {

ModelSpec chain_model(int n, Dissipation::Kind kind, int p = 2, cplx b = {0.0, 0.0}) {
    Dissipation d;
    d.kind = kind;
    d.coupling = b;
    return make_model(build_lattice(1, {n}), one_plus_pow_frequency(p / 2), linear_potential(), d,
                      {1.0}, 0.1, 0.5, p);
}

std::vector<double> random_actions(Rng& rng, int n, double lo = 0.05, double hi = 2.0) {
    std::vector<double> I(n);
    for (auto& x : I) x = lo + (hi - lo) * rng.uniform();
    return I;
}

}  // namespace

TEST_CASE("action-angle transform") {
    SECTION("definition") {
        State u{{1.0, 1.0}};
        auto aa = to_action_angle(u);
        REQUIRE(aa.actions[0] == Catch::Approx(1.0));
        REQUIRE(aa.angles[0] == Catch::Approx(two_pi / 8.0));
    }

    SECTION("zero maps to (0, 0)") {
        auto aa = to_action_angle(State{cplx(0.0, 0.0)});
        REQUIRE(aa.actions[0] == 0.0);
        REQUIRE(aa.angles[0] == 0.0);
    }

    SECTION("negative action is rejected on the inverse") {
        REQUIRE_THROWS_AS(from_action_angle({-0.1}, {0.0}), std::invalid_argument);
    }

    SECTION("round trip is the identity") {
        Rng rng(31);
        for (int trial = 0; trial < 200; ++trial) {
            State u(6);
            for (auto& z : u) z = 2.0 * rng.normal_pair();
            State back = from_action_angle(to_action_angle(u));
            for (int j = 0; j < 6; ++j) REQUIRE(std::abs(back[j] - u[j]) < 1e-12);
        }
    }
}

TEST_CASE("angle averaging") {
    SECTION("linear bond potential has the closed-form average") {
        std::vector<double> I{0.5, 0.5};
        Potential pot = linear_potential();
        AngleObservable obs;
        obs.stencil = {0, 1};
        obs.eval = [&](const State& u) { return pot(std::norm(u[0] - u[1])); };
        auto r = angle_average(obs, I);
        REQUIRE(r.value == Catch::Approx(2.0).epsilon(1e-12));
    }

    SECTION("angle-independent observables are left alone") {
        AngleObservable obs;
        obs.stencil = {0};
        obs.eval = [](const State& u) { return std::norm(u[0]); };
        auto r = angle_average(obs, {0.7});
        REQUIRE(r.value == Catch::Approx(1.4).epsilon(1e-13));
    }

    SECTION("pure harmonic averages to zero") {
        AngleObservable obs;
        obs.stencil = {0, 1};
        obs.eval = [](const State& u) { return std::cos(std::arg(u[0]) - std::arg(u[1])); };
        auto r = angle_average(obs, {1.0, 1.0});
        REQUIRE(std::abs(r.value) < 1e-12);
    }

    SECTION("oversized stencils refuse tensor quadrature") {
        AngleObservable obs;
        obs.stencil = {0, 1, 2, 3, 4, 5, 6, 7};
        obs.eval = [](const State&) { return 1.0; };
        std::vector<double> I(8, 1.0);
        REQUIRE_THROWS_AS(angle_average(obs, I), std::invalid_argument);
        AveragingScheme mc;
        mc.method = AveragingScheme::Method::monte_carlo;
        mc.mc_samples = 1000;
        REQUIRE(angle_average(obs, I, mc).value == Catch::Approx(1.0));
    }

    SECTION("scheme invariants") {
        AngleObservable obs;
        obs.stencil = {0};
        obs.eval = [](const State&) { return 1.0; };
        AveragingScheme s;
        s.points_per_angle = 4;
        REQUIRE_THROWS_AS(angle_average(obs, {1.0}, s), std::invalid_argument);
        AveragingScheme mc;
        mc.method = AveragingScheme::Method::monte_carlo;
        mc.mc_samples = 10;
        REQUIRE_THROWS_AS(angle_average(obs, {1.0}, mc), std::invalid_argument);
    }
}

TEST_CASE("averaged drift closed forms vs quadrature") {
    Rng rng(101);

    SECTION("diagonal") {
        for (int p : {2, 4}) {
            auto m = chain_model(4, Dissipation::Kind::diagonal, p);
            for (int trial = 0; trial < 5; ++trial) {
                auto I = random_actions(rng, 4);
                auto closed = averaged_drift(I, m);
                auto quad = averaged_drift_quadrature(I, m);
                for (int j = 0; j < 4; ++j) {
                    REQUIRE(closed[j] == Catch::Approx(-std::pow(2.0 * I[j], 0.5 * p)));
                    REQUIRE(std::abs(closed[j] - quad[j]) < 1e-10);
                }
            }
        }
    }

    SECTION("linear coupling averages out") {
        auto m = chain_model(4, Dissipation::Kind::linear_coupled, 2, cplx(0.01, 0.004));
        for (int trial = 0; trial < 5; ++trial) {
            auto I = random_actions(rng, 4);
            auto closed = averaged_drift(I, m);
            auto quad = averaged_drift_quadrature(I, m);
            for (int j = 0; j < 4; ++j) {
                REQUIRE(closed[j] == Catch::Approx(-2.0 * I[j]));
                REQUIRE(std::abs(closed[j] - quad[j]) < 1e-10);
            }
        }
    }

    SECTION("chain stencil") {
        auto m = chain_model(4, Dissipation::Kind::flow_chain, 4);
        for (int trial = 0; trial < 5; ++trial) {
            auto I = random_actions(rng, 4);
            auto closed = averaged_drift(I, m);
            auto quad = averaged_drift_quadrature(I, m);
            for (int j = 0; j < 4; ++j) {
                double right = (j + 1 < 4) ? I[j + 1] : 0.0;
                double left = (j - 1 >= 0) ? I[j - 1] : 0.0;
                REQUIRE(closed[j] == Catch::Approx(right * I[j] - left * I[j] - I[j] * I[j]));
                REQUIRE(std::abs(closed[j] - quad[j]) < 1e-10);
            }
        }
    }
}

TEST_CASE("Monte Carlo agrees with quadrature within 3 standard errors") {
    auto m = chain_model(4, Dissipation::Kind::linear_coupled, 2, cplx(0.01, 0.0));
    Rng rng(7);
    auto I = random_actions(rng, 4, 0.3, 1.5);
    for (int j = 0; j < 4; ++j) {
        AngleObservable obs;
        obs.stencil = dissipation_stencil(m, j);
        obs.eval = [&, j](const State& u) { return rdot(dissipation_at(u, m, j), u[j]); };
        auto quad = angle_average(obs, I);
        AveragingScheme mc;
        mc.method = AveragingScheme::Method::monte_carlo;
        mc.mc_samples = 20000;
        mc.seed = 77 + j;
        auto est = angle_average(obs, I, mc);
        REQUIRE(est.std_error > 0.0);
        REQUIRE(std::abs(est.value - quad.value) <= 3.0 * est.std_error);
    }
}

TEST_CASE("stencil reduction is exact") {
    // full-torus averaging (all N angles) equals the stencil-reduced one
    auto m = chain_model(3, Dissipation::Kind::flow_chain, 4);
    Rng rng(19);
    auto I = random_actions(rng, 3);
    for (int j = 0; j < 3; ++j) {
        auto eval = [&, j](const State& u) { return rdot(dissipation_at(u, m, j), u[j]); };
        AngleObservable reduced{dissipation_stencil(m, j), eval};
        AngleObservable full{{0, 1, 2}, eval};
        AveragingScheme s;
        s.points_per_angle = 16;
        REQUIRE(std::abs(angle_average(reduced, I, s).value - angle_average(full, I, s).value) <
                1e-10);
    }
}

TEST_CASE("MC average of the drift is invariant under a common angle shift") {
    auto m = chain_model(3, Dissipation::Kind::linear_coupled, 2, cplx(0.02, 0.01));
    Rng rng(29);
    auto I = random_actions(rng, 3);
    const double shift = 1.234;
    for (int j = 0; j < 3; ++j) {
        auto stencil = dissipation_stencil(m, j);
        AngleObservable plain{stencil, [&, j](const State& u) {
                                  return rdot(dissipation_at(u, m, j), u[j]);
                              }};
        AngleObservable shifted{stencil, [&, j, shift](const State& u) {
                                    State w = u;
                                    for (auto& z : w) z *= std::polar(1.0, shift);
                                    return rdot(dissipation_at(w, m, j), w[j]);
                                }};
        AveragingScheme mc;
        mc.method = AveragingScheme::Method::monte_carlo;
        mc.mc_samples = 2000;
        mc.seed = 5;
        double a = angle_average(plain, I, mc).value;
        double b = angle_average(shifted, I, mc).value;
        REQUIRE(a == Catch::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("averaged Hamiltonian action drift vanishes") {
    // <i grad_j h . u_j> = 0 for smooth bond observables h
    Potential pot = cos_sqrt_potential(0.2);
    const int j = 0, k = 1;
    AngleObservable obs;
    obs.stencil = {j, k};
    obs.eval = [&](const State& u) {
        // i grad_j h . u_j with h = G(|u_j - u_k|^2)
        cplx grad = 2.0 * pot.derivative(std::norm(u[j] - u[k])) * (u[j] - u[k]);
        return rdot(cplx(0.0, 1.0) * grad, u[j]);
    };
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        auto I = random_actions(rng, 2, 0.1, 2.0);
        REQUIRE(std::abs(angle_average(obs, I).value) < 1e-10);
    }
}

TEST_CASE("effective drift") {
    SECTION("diagonal p=2 is minus the identity") {
        auto m = chain_model(3, Dissipation::Kind::diagonal, 2);
        Rng rng(3);
        State v(3);
        for (auto& z : v) z = rng.normal_pair();
        auto K = effective_drift(v, m);
        for (int j = 0; j < 3; ++j) REQUIRE(std::abs(K[j] + v[j]) < 1e-14);
        auto Kq = effective_drift_quadrature(v, m);
        for (int j = 0; j < 3; ++j) REQUIRE(std::abs(Kq[j] + v[j]) < 1e-10);
    }

    SECTION("rotation equivariance") {
        auto m = chain_model(4, Dissipation::Kind::flow_chain, 4);
        Rng rng(47);
        State v(4);
        for (auto& z : v) z = rng.normal_pair();
        std::vector<double> xi(4);
        for (auto& x : xi) x = two_pi * rng.uniform();
        State rotated(4);
        for (int j = 0; j < 4; ++j) rotated[j] = v[j] * std::polar(1.0, xi[j]);
        auto K = effective_drift_quadrature(v, m);
        auto Kr = effective_drift_quadrature(rotated, m);
        for (int j = 0; j < 4; ++j)
            REQUIRE(std::abs(Kr[j] - K[j] * std::polar(1.0, xi[j])) < 1e-10);
    }

    SECTION("K_j . v_j recovers the averaged drift") {
        for (auto kind : {Dissipation::Kind::diagonal, Dissipation::Kind::linear_coupled,
                          Dissipation::Kind::flow_chain}) {
            int p = kind == Dissipation::Kind::flow_chain ? 4 : 2;
            auto m = chain_model(4, kind, p, cplx(0.01, 0.002));
            Rng rng(53);
            State v(4);
            for (auto& z : v) z = 1.3 * rng.normal_pair();
            auto K = effective_drift_quadrature(v, m);
            auto R = averaged_drift(to_action_angle(v).actions, m);
            for (int j = 0; j < 4; ++j) REQUIRE(std::abs(rdot(K[j], v[j]) - R[j]) < 1e-8);
        }
    }
}

TEST_CASE("flow of actions") {
    auto lat = build_lattice(1, {3});

    SECTION("hand value with the zero boundary") {
        auto flow = flow_of_actions(lat, {1.0, 1.0, 1.0});
        REQUIRE(flow.theta == std::vector<double>{2.0, 2.0, 0.0});
        REQUIRE(flow.grad == std::vector<double>{1.0, 0.0, -1.0});
    }

    SECTION("zero actions give zero flow") {
        auto flow = flow_of_actions(lat, {0.0, 0.0, 0.0});
        for (double x : flow.theta) REQUIRE(x == 0.0);
    }

    SECTION("drift decomposition R_j + I_j^2 = grad Theta(j)") {
        Dissipation d;
        d.kind = Dissipation::Kind::flow_chain;
        auto m =
            make_model(lat, one_plus_pow_frequency(2), linear_potential(), d, {1.0}, 0.1, 0.5, 4);
        Rng rng(59);
        for (int trial = 0; trial < 20; ++trial) {
            auto I = random_actions(rng, 3);
            auto R = averaged_drift(I, m);
            auto flow = flow_of_actions(lat, I);
            for (int j = 0; j < 3; ++j)
                REQUIRE(R[j] + I[j] * I[j] == Catch::Approx(flow.grad[j]).margin(1e-12));
        }
    }

    SECTION("requires a chain") {
        auto grid = build_lattice(2, {2, 2});
        REQUIRE_THROWS_AS(flow_of_actions(grid, {1, 1, 1, 1}), std::invalid_argument);
    }
}
