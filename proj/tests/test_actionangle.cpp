#include <boost/math/quadrature/tanh_sinh.hpp>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "holonomy/actionangle.hpp"
#include "holonomy/quadrature.hpp"

using namespace holonomy;
using Catch::Approx;

namespace {

// H = p^2/2 + q^2/2 + a q^4, no analytic maps; exercises the generic paths
class Anharmonic final : public HamiltonianFamily {
  public:
    int n_params() const override { return 1; }
    std::string name() const override { return "anharmonic"; }
    std::vector<std::string> param_names() const override { return {"a"}; }
    double hamiltonian(const PhasePoint& z, const ParamPoint& lam) const override {
        return 0.5 * z.p * z.p + 0.5 * z.q * z.q + lam[0] * std::pow(z.q, 4);
    }
    double dH_dq(const PhasePoint& z, const ParamPoint& lam) const override {
        return z.q + 4.0 * lam[0] * z.q * z.q * z.q;
    }
    double dH_dp(const PhasePoint& z, const ParamPoint&) const override { return z.p; }
    double dH_dlambda(int, const PhasePoint& z, const ParamPoint&) const override {
        return std::pow(z.q, 4);
    }
    void validate(const ParamPoint& lam) const override {
        check_params(lam);
        if (lam.size() != 1 || lam[0] < 0.0) throw InvalidParams("need a >= 0");
    }
};

// quadrature period oracle T = sqrt(2m) int dq / sqrt(E - V(q))
double period_quadrature(double m, const std::function<double(double)>& V, double E, double qp) {
    boost::math::quadrature::tanh_sinh<double> quad;
    auto f = [&](double q) { return 1.0 / std::sqrt(std::max(E - V(q), 1e-300)); };
    return std::sqrt(2.0 * m) * quad.integrate(f, -qp, qp, 1e-12);
}

}  // namespace

TEST_CASE("gauss-legendre and running-simpson utilities") {
    GaussLegendre gl(16);
    CHECK(gl.integrate([](double) { return 1.0; }, 0.0, 2.0) == Approx(2.0).epsilon(1e-14));
    // order 16 is exact through degree 31
    CHECK(gl.integrate([](double x) { return std::pow(x, 30); }, 0.0, 1.0) ==
          Approx(1.0 / 31.0).epsilon(1e-13));
    CHECK(gl.integrate([](double x) { return std::sin(x); }, 0.0, M_PI) ==
          Approx(2.0).epsilon(1e-13));

    const int N = 200;
    const double h = two_pi / N;
    std::vector<double> f(N + 1);
    for (int j = 0; j <= N; ++j) f[j] = std::cos(j * h);
    const auto F = cumulative_simpson(f, h);
    for (int j = 0; j <= N; ++j) CHECK(F[j] == Approx(std::sin(j * h)).margin(1e-7));
}

TEST_CASE("oscillator orbits close with the closed-form period and action") {
    EngineOptions opts;
    GeneralizedOscillator fam;

    auto check = [&](double X, double Y, double Z, double E) {
        const double w = genosc_frequency({X, Y, Z});
        const Orbit o = trace_orbit(fam, {X, Y, Z}, E, opts);
        CHECK(o.T == Approx(two_pi / w).epsilon(1e-9));
        CHECK(o.I == Approx(E / w).epsilon(1e-9));
        CHECK(o.closure_error < 1e-8);
        CHECK(int(o.samples.size()) == opts.orbit_samples);
        // every sample stays on the level set
        for (int j = 0; j < 256; j += 37)
            CHECK(fam.hamiltonian(o.samples[j], {X, Y, Z}) == Approx(E).epsilon(1e-8));
    };
    check(1.0, 0.0, 1.0, 0.5);  // T = 2 pi
    check(4.0, 0.0, 1.0, 1.0);  // T = pi
    check(1.5, 0.4, 0.8, 0.7);
    check(0.6, -0.3, 2.0, 1.4);
}

TEST_CASE("quartic period and action match quadrature oracles") {
    EngineOptions opts;
    const auto fam = quartic_family(1.0, 1.0);

    const Orbit o = trace_orbit(*fam, {1.0, 1.0}, 1.0, opts);
    CHECK(o.T == Approx(3.7081493546027087).epsilon(1e-9));
    const double Tq = period_quadrature(
        1.0, [](double q) { return std::pow(q, 4); }, 1.0, 1.0);
    CHECK(o.T == Approx(Tq).epsilon(1e-8));
    CHECK(o.I == Approx(0.7868937326773976).epsilon(1e-9));

    // I(E) scales as E^{3/4} for the pure quartic well
    const double I2 = action_of_energy(*fam, {1.0, 1.0}, 2.0, opts);
    CHECK(I2 / o.I == Approx(std::pow(2.0, 0.75)).epsilon(1e-8));

    // mass rescaling: T ~ sqrt(m) at fixed (k, E)
    const Orbit om = trace_orbit(*fam, {2.0, 1.0}, 1.0, opts);
    CHECK(om.T == Approx(std::sqrt(2.0) * o.T).epsilon(1e-8));
}

TEST_CASE("energy_of_action inverts the action map") {
    EngineOptions opts;
    const auto fam = quartic_family(1.0, 1.0);
    const double I1 = action_of_energy(*fam, {1.0, 1.0}, 1.0, opts);
    CHECK(energy_of_action(*fam, {1.0, 1.0}, I1, opts) == Approx(1.0).epsilon(1e-9));
    // warm start from a nearby energy takes the same root
    CHECK(energy_of_action(*fam, {1.0, 1.0}, I1, opts, 1.3) == Approx(1.0).epsilon(1e-9));

    GeneralizedOscillator osc;
    const double w = genosc_frequency({1.5, 0.4, 0.8});
    CHECK(energy_of_action(osc, {1.5, 0.4, 0.8}, 0.7, opts) == Approx(0.7 * w).epsilon(1e-9));

    CHECK_THROWS_AS(energy_of_action(*fam, {1.0, 1.0}, -0.3, opts), InvalidParams);
}

TEST_CASE("numeric chart agrees with the closed-form oscillator chart") {
    EngineOptions opts;
    GeneralizedOscillator fam;
    const ParamPoint lam{1.5, 0.4, 0.8};
    const double I0 = 0.7;
    const GenOscParams g = genosc_from_lambda(lam);
    const TorusChart ch = build_chart(fam, lam, I0, opts);

    CHECK(ch.omega == Approx(genosc_frequency(g)).epsilon(1e-9));
    CHECK(ch.I0 == Approx(I0).epsilon(1e-10));
    CHECK(std::abs(ch.centroid.q) < 1e-9);
    CHECK(std::abs(ch.centroid.p) < 1e-9);

    // the chart's angle origin is the maximal-q crossing, which is exactly
    // the closed-form convention; the two charts must agree pointwise
    for (int j = 0; j < 64; ++j) {
        const double phi = two_pi * j / 64;
        const PhasePoint za = genosc_torus_to_phase(g, {I0, phi});
        const PhasePoint zc = chart_torus_to_phase(ch, {I0, phi});
        CHECK(zc.q == Approx(za.q).margin(1e-8));
        CHECK(zc.p == Approx(za.p).margin(1e-8));
    }

    // coordinate measurement inverts the analytic map, on and off the chart torus
    for (int j = 0; j < 16; ++j) {
        const double phi = two_pi * (j + 0.31) / 16;
        const TorusPoint t0 = measure_torus(fam, ch, genosc_torus_to_phase(g, {I0, phi}), opts);
        CHECK(t0.action == Approx(I0).epsilon(1e-8));
        CHECK(std::abs(wrap_pi(t0.angle - phi)) < 1e-7);
        // nearby torus, still inside the energy trust region
        const double I1 = I0 * (1.0 + 2e-4);
        const TorusPoint t1 = measure_torus(fam, ch, genosc_torus_to_phase(g, {I1, phi}), opts);
        CHECK(t1.action == Approx(I1).epsilon(1e-8));
        CHECK(std::abs(wrap_pi(t1.angle - phi)) < 1e-7);
    }

    // far off the chart torus the measurement re-traces and stays correct
    const double I2 = I0 * 1.05;
    const TorusPoint t2 = measure_torus(fam, ch, genosc_torus_to_phase(g, {I2, 1.1}), opts);
    CHECK(t2.action == Approx(I2).epsilon(1e-8));
    CHECK(std::abs(wrap_pi(t2.angle - 1.1)) < 1e-7);

    CHECK_THROWS_AS(chart_torus_to_phase(ch, {2.0 * I0, 0.0}), InvalidParams);
}

TEST_CASE("quartic chart round-trips its own torus") {
    EngineOptions opts;
    const auto fam = quartic_family(1.0, 1.0);
    const ParamPoint lam{1.0, 1.0};
    const TorusChart ch = build_chart(*fam, lam, 0.7868937326773976, opts);

    CHECK(ch.omega == Approx(two_pi / 3.7081493546027087).epsilon(1e-9));
    CHECK(ch.model.I.deriv(0.0) == Approx(ch.T0 / two_pi).epsilon(1e-5));  // dI/dE = 1/w
    CHECK(std::abs(ch.centroid.q) < 1e-9);  // symmetric well
    CHECK(std::abs(ch.centroid.p) < 1e-9);

    for (int j = 0; j < 32; ++j) {
        const double phi = two_pi * (j + 0.17) / 32;
        const TorusPoint t = measure_torus(*fam, ch, chart_torus_to_phase(ch, {ch.I0, phi}), opts);
        CHECK(t.action == Approx(ch.I0).epsilon(1e-8));
        CHECK(std::abs(wrap_pi(t.angle - phi)) < 1e-7);
    }

    // q(phi) of the symmetric quartic carries odd harmonics only
    CHECK(std::abs(ch.q_series.coeff(2)) < 1e-9);
    CHECK(std::abs(ch.q_series.coeff(4)) < 1e-9);
    CHECK(std::abs(ch.q_series.coeff(1)) > 0.1);
    CHECK(std::abs(ch.q_series.coeff(3)) > 1e-3);
}

TEST_CASE("generic-family chart works end to end") {
    EngineOptions opts;
    Anharmonic fam;
    const ParamPoint lam{0.1};
    const double E = 0.8;

    const Orbit o = trace_orbit(fam, lam, E, opts);
    const double u = (-0.5 + std::sqrt(0.25 + 4.0 * lam[0] * E)) / (2.0 * lam[0]);
    const double Tq = period_quadrature(
        1.0, [&](double q) { return 0.5 * q * q + lam[0] * std::pow(q, 4); }, E, std::sqrt(u));
    CHECK(o.T == Approx(Tq).epsilon(1e-8));

    const TorusChart ch = build_chart(fam, lam, o.I, opts);
    CHECK(ch.E0 == Approx(E).epsilon(1e-9));
    for (int j = 0; j < 8; ++j) {
        const double phi = two_pi * (j + 0.4) / 8;
        const TorusPoint t = measure_torus(fam, ch, chart_torus_to_phase(ch, {ch.I0, phi}), opts);
        CHECK(t.action == Approx(ch.I0).epsilon(1e-7));
        CHECK(std::abs(wrap_pi(t.angle - phi)) < 1e-6);
    }
}

TEST_CASE("action averages of parameter derivatives vanish") {
    EngineOptions opts;
    GeneralizedOscillator osc;
    for (int mu = 0; mu < 3; ++mu)
        CHECK(std::abs(dI_dlambda_avg(osc, {1.5, 0.4, 0.8}, 0.7, mu, opts)) < 1e-8);

    const auto fam = quartic_family(1.0, 1.0);
    for (int mu = 0; mu < 2; ++mu)
        CHECK(std::abs(dI_dlambda_avg(*fam, {1.0, 1.0}, 0.7868937326773976, mu, opts)) < 1e-6);
}

TEST_CASE("oscillator connection entries match the closed forms") {
    // <dphi/dX> = 0, <dphi/dY> = -1/(2w), <dphi/dZ> = Y/(2Zw)
    EngineOptions opts;
    GeneralizedOscillator osc;
    auto check = [&](double X, double Y, double Z, double I) {
        const double w = genosc_frequency({X, Y, Z});
        CHECK(dphi_dlambda_avg(osc, {X, Y, Z}, I, 0, opts) == Approx(0.0).margin(1e-7));
        CHECK(dphi_dlambda_avg(osc, {X, Y, Z}, I, 1, opts) ==
              Approx(-0.5 / w).epsilon(1e-6).margin(1e-7));
        CHECK(dphi_dlambda_avg(osc, {X, Y, Z}, I, 2, opts) ==
              Approx(0.5 * Y / (Z * w)).epsilon(1e-6).margin(1e-7));
    };
    check(1.0, 0.0, 1.0, 1.0);
    check(1.5, 0.4, 0.8, 0.7);
    check(0.6, -0.3, 2.0, 1.4);
}

TEST_CASE("trace guards reject bad inputs") {
    EngineOptions opts;
    GeneralizedOscillator osc;
    CHECK_THROWS_AS(trace_orbit(osc, {1.0, 0.0, 1.0}, -0.5, opts), InvalidParams);
    CHECK_THROWS_AS(trace_orbit(osc, {1.0, 2.0, 1.0}, 0.5, opts), DegenerateFrequency);
}
