#pragma once
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "holonomy/errors.hpp"

namespace holonomy {

// Point in the parameter manifold, lambda_0..lambda_{N-1}.
using ParamPoint = std::vector<double>;

struct PhasePoint {
    double q = 0.0;
    double p = 0.0;
};

// Action-angle pair. angle is kept in [0, 2pi).
struct TorusPoint {
    double action = 0.0;
    double angle = 0.0;
};

constexpr double two_pi = 6.283185307179586476925286766559;

inline double wrap_angle(double phi) {  // -> [0, 2pi)
    double r = std::fmod(phi, two_pi);
    return r < 0 ? r + two_pi : r;
}

inline double wrap_pi(double d) {  // -> (-pi, pi]
    double r = std::fmod(d, two_pi);
    if (r <= -two_pi / 2) r += two_pi;
    if (r > two_pi / 2) r -= two_pi;
    return r;
}

inline void check_params(const ParamPoint& lam) {
    if (lam.empty()) throw InvalidParams("parameter point must have N >= 1");
    for (double x : lam) check_finite(x, "parameter");
}

// Contract for a parametrized 1-DOF Hamiltonian family. All evaluators are
// pure; lambda is passed per call so one family value can serve a whole
// parameter sweep. Analytic torus maps are optional; families without them
// go through the orbit-traced chart machinery.
class HamiltonianFamily {
  public:
    virtual ~HamiltonianFamily() = default;

    virtual int n_params() const = 0;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> param_names() const = 0;

    virtual double hamiltonian(const PhasePoint& z, const ParamPoint& lam) const = 0;
    virtual double dH_dq(const PhasePoint& z, const ParamPoint& lam) const = 0;
    virtual double dH_dp(const PhasePoint& z, const ParamPoint& lam) const = 0;
    // dH/dlambda_mu at a fixed phase-space point
    virtual double dH_dlambda(int mu, const PhasePoint& z, const ParamPoint& lam) const = 0;

    // throws if lam is outside the family's domain
    virtual void validate(const ParamPoint& lam) const = 0;

    virtual bool has_analytic_maps() const { return false; }
    virtual PhasePoint torus_to_phase(const TorusPoint&, const ParamPoint&) const {
        throw Error(name() + ": no analytic torus map");
    }
    virtual TorusPoint phase_to_torus(const PhasePoint&, const ParamPoint&) const {
        throw Error(name() + ": no analytic torus map");
    }
    virtual double frequency(double /*I*/, const ParamPoint&) const {
        throw Error(name() + ": no analytic frequency");
    }

    // smallest reachable energy (bottom of the well)
    virtual double min_energy(const ParamPoint&) const { return 0.0; }

    // interior point of the bounded level sets
    virtual PhasePoint reference_center(const ParamPoint&) const { return {0.0, 0.0}; }

    // Point of maximal q on the level set H = E. Orbit tracing starts here;
    // it is also where the angle origin lives. The default solves
    // dH/dp = 0 in p, then moves outward in q, which assumes H convex in p
    // and increasing level sets around reference_center.
    virtual PhasePoint max_q_on_level_set(double E, const ParamPoint& lam) const;
};

// ---------------------------------------------------------------------------
// generalized oscillator H = (X q^2 + 2Y qp + Z p^2)/2

struct GenOscParams {
    double X = 1.0, Y = 0.0, Z = 1.0;
};

inline GenOscParams genosc_from_lambda(const ParamPoint& lam) {
    if (lam.size() != 3) throw InvalidParams("generalized oscillator expects 3 parameters");
    return {lam[0], lam[1], lam[2]};
}

inline double genosc_frequency(const GenOscParams& g) {
    const double disc = g.X * g.Z - g.Y * g.Y;
    if (!(disc > 0.0))
        throw DegenerateFrequency("XZ - Y^2 = " + std::to_string(disc) + " <= 0");
    return std::sqrt(disc);
}

// q = sqrt(2IZ/w) cos(phi), p = -sqrt(2IZ/w) ((Y/Z) cos(phi) + (w/Z) sin(phi)).
// This fixes the angle origin at the point of maximal q.
inline PhasePoint genosc_torus_to_phase(const GenOscParams& g, const TorusPoint& t) {
    const double w = genosc_frequency(g);
    if (t.action < 0.0) throw InvalidParams("action must be >= 0");
    const double A = std::sqrt(2.0 * t.action * g.Z / w);
    const double c = std::cos(t.angle), s = std::sin(t.angle);
    return {A * c, -A * ((g.Y / g.Z) * c + (w / g.Z) * s)};
}

// inverse of the map above: I = H/w, cos = q/A, sin = -(Zp + Yq)/(wA)
inline TorusPoint genosc_phase_to_torus(const GenOscParams& g, const PhasePoint& z) {
    const double w = genosc_frequency(g);
    const double H = 0.5 * (g.X * z.q * z.q + 2.0 * g.Y * z.q * z.p + g.Z * z.p * z.p);
    const double I = H / w;
    if (I <= 0.0) return {0.0, 0.0};
    const double A = std::sqrt(2.0 * I * g.Z / w);
    const double c = z.q / A;
    const double s = -(g.Z * z.p + g.Y * z.q) / (w * A);
    return {I, wrap_angle(std::atan2(s, c))};
}

// (dH/dX, dH/dY, dH/dZ) on the torus at fixed (q, p)
inline std::array<double, 3> genosc_dH(const GenOscParams& g, const TorusPoint& t) {
    const double w = genosc_frequency(g);
    const double c = std::cos(t.angle), s = std::sin(t.angle);
    const double ZIw = g.Z * t.action / w;
    const double r = g.Y / g.Z, u = w / g.Z;
    return {ZIw * c * c,
            -2.0 * ZIw * (r * c * c + u * s * c),
            ZIw * (r * r * c * c + u * u * s * s + 2.0 * r * u * s * c)};
}

class GeneralizedOscillator final : public HamiltonianFamily {
  public:
    int n_params() const override { return 3; }
    std::string name() const override { return "genosc"; }
    std::vector<std::string> param_names() const override { return {"X", "Y", "Z"}; }

    double hamiltonian(const PhasePoint& z, const ParamPoint& lam) const override {
        const auto g = genosc_from_lambda(lam);
        return 0.5 * (g.X * z.q * z.q + 2.0 * g.Y * z.q * z.p + g.Z * z.p * z.p);
    }
    double dH_dq(const PhasePoint& z, const ParamPoint& lam) const override {
        const auto g = genosc_from_lambda(lam);
        return g.X * z.q + g.Y * z.p;
    }
    double dH_dp(const PhasePoint& z, const ParamPoint& lam) const override {
        const auto g = genosc_from_lambda(lam);
        return g.Y * z.q + g.Z * z.p;
    }
    double dH_dlambda(int mu, const PhasePoint& z, const ParamPoint& lam) const override {
        genosc_from_lambda(lam);
        switch (mu) {
            case 0: return 0.5 * z.q * z.q;
            case 1: return z.q * z.p;
            case 2: return 0.5 * z.p * z.p;
        }
        throw InvalidParams("parameter index out of range");
    }

    void validate(const ParamPoint& lam) const override {
        check_params(lam);
        genosc_frequency(genosc_from_lambda(lam));  // throws if degenerate
    }

    bool has_analytic_maps() const override { return true; }
    PhasePoint torus_to_phase(const TorusPoint& t, const ParamPoint& lam) const override {
        return genosc_torus_to_phase(genosc_from_lambda(lam), t);
    }
    TorusPoint phase_to_torus(const PhasePoint& z, const ParamPoint& lam) const override {
        return genosc_phase_to_torus(genosc_from_lambda(lam), z);
    }
    double frequency(double, const ParamPoint& lam) const override {
        return genosc_frequency(genosc_from_lambda(lam));
    }

    PhasePoint max_q_on_level_set(double E, const ParamPoint& lam) const override {
        const auto g = genosc_from_lambda(lam);
        const double w = genosc_frequency(g);
        if (E <= 0.0) throw InvalidParams("energy must be positive");
        const double q = std::sqrt(2.0 * E * g.Z) / w;  // maximal q, reached at dH/dp = 0
        return {q, -(g.Y / g.Z) * q};
    }
};

// ---------------------------------------------------------------------------
// quartic family H = p^2/(2m) + k q^4, lambda = (m, k). No analytic maps:
// this is the designated exerciser of the numeric chart path.

class QuarticFamily final : public HamiltonianFamily {
  public:
    QuarticFamily(double m = 1.0, double k = 1.0) : m0_(m), k0_(k) {
        validate({m, k});
    }

    int n_params() const override { return 2; }
    std::string name() const override { return "quartic"; }
    std::vector<std::string> param_names() const override { return {"m", "k"}; }

    double hamiltonian(const PhasePoint& z, const ParamPoint& lam) const override {
        const double q2 = z.q * z.q;
        return z.p * z.p / (2.0 * lam[0]) + lam[1] * q2 * q2;
    }
    double dH_dq(const PhasePoint& z, const ParamPoint& lam) const override {
        return 4.0 * lam[1] * z.q * z.q * z.q;
    }
    double dH_dp(const PhasePoint& z, const ParamPoint& lam) const override {
        return z.p / lam[0];
    }
    double dH_dlambda(int mu, const PhasePoint& z, const ParamPoint& lam) const override {
        if (mu == 0) return -z.p * z.p / (2.0 * lam[0] * lam[0]);
        if (mu == 1) {
            const double q2 = z.q * z.q;
            return q2 * q2;
        }
        throw InvalidParams("parameter index out of range");
    }

    void validate(const ParamPoint& lam) const override {
        if (lam.size() != 2) throw InvalidParams("quartic family expects 2 parameters");
        check_params(lam);
        if (!(lam[0] > 0.0) || !(lam[1] > 0.0))
            throw InvalidParams("quartic family needs m > 0 and k > 0");
    }

    PhasePoint max_q_on_level_set(double E, const ParamPoint& lam) const override {
        if (E <= 0.0) throw InvalidParams("energy must be positive");
        return {std::pow(E / lam[1], 0.25), 0.0};
    }

    ParamPoint base_point() const { return {m0_, k0_}; }

  private:
    double m0_, k0_;
};

inline std::unique_ptr<HamiltonianFamily> quartic_family(double m, double k) {
    return std::make_unique<QuarticFamily>(m, k);
}

// generic max-q search: inner Newton for dH/dp = 0 at fixed q, outer
// expanding bracket plus bisection on H(q, p*(q)) = E
inline PhasePoint HamiltonianFamily::max_q_on_level_set(double E, const ParamPoint& lam) const {
    const PhasePoint c = reference_center(lam);
    auto p_star = [&](double q) {
        double p = c.p;
        for (int it = 0; it < 80; ++it) {
            const double g = dH_dp({q, p}, lam);
            const double dp = 1e-6 * (1.0 + std::abs(p));
            const double g2 = dH_dp({q, p + dp}, lam);
            const double slope = (g2 - g) / dp;
            if (!(std::abs(slope) > 0.0)) break;
            const double step = g / slope;
            p -= step;
            if (std::abs(step) < 1e-14 * (1.0 + std::abs(p))) break;
        }
        return p;
    };
    auto f = [&](double q) { return hamiltonian({q, p_star(q)}, lam) - E; };
    double lo = c.q, hi = c.q + 1.0;
    if (f(lo) >= 0.0) throw InvalidParams("level set does not enclose the reference center");
    int guard = 0;
    while (f(hi) < 0.0) {
        hi = c.q + 2.0 * (hi - c.q);
        if (++guard > 200) throw RootFindFailure("no max-q bracket for the level set");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    return {q, p_star(q)};
}

}  // namespace holonomy
