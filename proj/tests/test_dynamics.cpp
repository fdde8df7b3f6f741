#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "holonomy/dynamics.hpp"

using namespace holonomy;
using Catch::Approx;

namespace {
const ParamPoint tilt_center{1.5, 0.0, 1.5};
const ParamPoint tilt_u{0.3, 0.1, 0.0};
const ParamPoint tilt_v{0.0, 0.15, 0.3};
constexpr double tilt_hannay = 0.027361793284278;
}  // namespace

TEST_CASE("polyfit recovers exact low-order polynomials") {
    // quadratic through three points is the interpolant
    const std::vector<double> x{1e-2, 5e-3, 2.5e-3};
    std::vector<double> y;
    for (const double xi : x) y.push_back(0.7 - 3.0 * xi + 40.0 * xi * xi);
    const auto q = detail::polyfit(x, y, 2);
    REQUIRE(q[0] == Approx(0.7).margin(1e-12));
    REQUIRE(q[1] == Approx(-3.0).margin(1e-8));
    REQUIRE(q[2] == Approx(40.0).margin(1e-6));

    // affine least squares through collinear points
    const std::vector<double> xs{0.1, 0.2, 0.3, 0.4};
    std::vector<double> ys;
    for (const double xi : xs) ys.push_back(2.0 + 5.0 * xi);
    const auto l = detail::polyfit(xs, ys, 1);
    REQUIRE(l[0] == Approx(2.0).margin(1e-12));
    REQUIRE(l[1] == Approx(5.0).margin(1e-11));
}

TEST_CASE("loop model interpolates the oscillator frequency spectrally") {
    GeneralizedOscillator fam;
    const LoopPath loop = circle_loop(tilt_center, tilt_u, tilt_v, 64);
    const LoopModel m = build_loop_model(fam, loop, 1.0);
    for (const double s : {0.0, 0.1371, 0.5, 0.803}) {
        const ParamPoint lam = loop.at(s);
        const double w = fam.frequency(1.0, lam);
        REQUIRE(m.omega(s) == Approx(w).margin(1e-10));
        // torus energy is I w for this family
        REQUIRE(m.energy0(s) == Approx(w).margin(1e-10));
        // the action response is exactly linear: I(E) = E / w
        const double E = m.energy0(s) + 0.05;
        REQUIRE(m.action_of(E, s) == Approx(E / w).margin(1e-9));
    }
}

TEST_CASE("loop model matches traced orbits for the quartic family") {
    const auto fam = quartic_family(1.0, 1.0);
    const LoopPath loop = circle_loop({1.0, 1.0}, {0.2, 0.0}, {0.0, 0.2}, 64);
    EngineOptions opts;
    const LoopModel m = build_loop_model(*fam, loop, 1.0, opts);

    const ParamPoint lam0 = loop.at(0.0);  // (1.2, 1.0)
    REQUIRE(m.omega(0.0) == Approx(frequency_of(*fam, lam0, 1.0, opts)).margin(1e-8));
    REQUIRE(action_of_energy(*fam, lam0, m.energy0(0.0), opts) == Approx(1.0).margin(1e-8));
    // local quadratic action response against a re-traced orbit
    const double E = m.energy0(0.0) + 1e-3;
    REQUIRE(m.action_of(E, 0.0) ==
            Approx(action_of_energy(*fam, lam0, E, opts)).margin(1e-8));
    // interpolated values off the node grid stay consistent with direct traces
    const ParamPoint lam_s = loop.at(0.30771);
    REQUIRE(m.omega(0.30771) == Approx(frequency_of(*fam, lam_s, 1.0, opts)).margin(1e-7));
}

TEST_CASE("static drive reduces to clockwork") {
    GeneralizedOscillator fam;
    // zero-radius loop: parameters never move
    const LoopPath still = circle_loop({1.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 8);
    const AdiabaticEngine eng(fam, still, 1.0);
    const AdiabaticRun r = eng.run(1e-2, 0.7);
    REQUIRE(r.T_loop == Approx(two_pi / 1e-2));
    REQUIRE(r.theta == Approx(r.T_loop).epsilon(1e-12));  // w = 1 on this torus
    REQUIRE(std::abs(r.drift) < 1e-7);
    REQUIRE(r.I_drift_max < 5e-9);
    REQUIRE(r.I_end == Approx(1.0).margin(1e-9));
    REQUIRE_THROWS_AS(eng.run(-1.0, 0.0), InvalidParams);
}

TEST_CASE("slow drive around the tilted loop recovers the geometric angle") {
    GeneralizedOscillator fam;
    const LoopPath loop = circle_loop(tilt_center, tilt_u, tilt_v, 64);
    EngineOptions opts;
    opts.phi0_count = 4;
    opts.jobs = 4;
    const HannayExtrapolation hx = dynamical_hannay(fam, loop, 1.0, opts);

    REQUIRE(hx.runs.size() == 12);
    REQUIRE(hx.angle == Approx(tilt_hannay).margin(2e-6));
    REQUIRE(hx.consistency < 2e-5);
    // action excursion shrinks linearly with the drive rate
    const double expo = drift_exponent(hx);
    REQUIRE(expo > 0.9);
    REQUIRE(expo < 1.1);
    // each drift is already close; extrapolation only trims the O(eps) tail
    for (const double d : hx.drift_mean) REQUIRE(d == Approx(tilt_hannay).margin(2e-4));
}

TEST_CASE("quartic single run stays on its torus and picks up no angle") {
    const auto fam = quartic_family(1.0, 1.0);
    const LoopPath loop = circle_loop({1.0, 1.0}, {0.2, 0.0}, {0.0, 0.2}, 64);
    const AdiabaticEngine eng(*fam, loop, 1.0);
    const AdiabaticRun r = eng.run(1e-2, 0.0);
    REQUIRE(r.I_drift_max < 2e-3);
    REQUIRE(r.I_end == Approx(1.0).margin(1e-4));
    REQUIRE(std::abs(r.drift) < 5e-3);
}

TEST_CASE("extrapolation guards") {
    GeneralizedOscillator fam;
    const LoopPath still = circle_loop({1.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 8);
    EngineOptions opts;
    opts.epsilons = {1e-2, 5e-3};
    REQUIRE_THROWS_AS(dynamical_hannay(fam, still, 1.0, opts), InvalidParams);

    EngineOptions strict;
    strict.phi0_count = 1;
    strict.jobs = 3;
    strict.extrap_tol = 1e-16;  // no numeric pipeline is this consistent
    REQUIRE_THROWS_AS(dynamical_hannay(fam, still, 1.0, strict), NoConvergence);
}

TEST_CASE("measured chart derivatives close the generator bracket identity") {
    GeneralizedOscillator gos;
    const ParamPoint lam{1.5, 0.4, 0.8};
    const double I = 0.7;
    const double w2 = lam[0] * lam[2] - lam[1] * lam[1];

    // <{W_X, W_Y}> = Z I / 4 w^3 and <{W_Y, W_Z}> = X I / 4 w^3
    const IdentityCheck xy = bracket_identity_check(gos, lam, I, 0, 1);
    REQUIRE(xy.abs_error() < 1e-8);
    REQUIRE(xy.rhs == Approx(lam[2] * I / (4.0 * w2 * std::sqrt(w2))).margin(1e-10));
    const IdentityCheck yz = bracket_identity_check(gos, lam, I, 1, 2);
    REQUIRE(yz.abs_error() < 1e-8);
    REQUIRE(yz.rhs == Approx(lam[0] * I / (4.0 * w2 * std::sqrt(w2))).margin(1e-10));

    // flat family: both sides vanish
    const auto quart = quartic_family(1.0, 1.0);
    const IdentityCheck q = bracket_identity_check(*quart, {1.0, 1.0}, 1.0, 0, 1);
    REQUIRE(std::abs(q.lhs) < 1e-9);
    REQUIRE(std::abs(q.rhs) < 1e-9);
}

TEST_CASE("finite transport step agrees with measured coordinates") {
    GeneralizedOscillator gos;
    const TransportCheck g1 = parallel_transport_check(gos, {1.5, 0.4, 0.8}, 0.7, 1, 1e-3);
    const TransportCheck g2 = parallel_transport_check(gos, {1.5, 0.4, 0.8}, 0.7, 1, 5e-4);
    REQUIRE(g1.max_error < 1e-6);
    REQUIRE(g1.mean_drift < 5e-7);
    // the frozen-field error is quadratic in the step
    const double ratio_g = g1.max_error / g2.max_error;
    REQUIRE(ratio_g > 3.0);
    REQUIRE(ratio_g < 5.0);

    const auto quart = quartic_family(1.0, 1.0);
    const TransportCheck q1 = parallel_transport_check(*quart, {1.0, 1.0}, 1.0, 0, 1e-3);
    const TransportCheck q2 = parallel_transport_check(*quart, {1.0, 1.0}, 1.0, 0, 5e-4);
    REQUIRE(q1.mean_drift < 1e-8);
    const double ratio_q = q1.max_error / q2.max_error;
    REQUIRE(ratio_q > 3.0);
    REQUIRE(ratio_q < 5.0);

    REQUIRE_THROWS_AS(parallel_transport_check(gos, {1.0, 0.0, 1.0}, 1.0, 7, 1e-3),
                      InvalidParams);
}
