#pragma once
#include <algorithm>
#include <array>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

#include "holonomy/errors.hpp"
#include "holonomy/family.hpp"
#include "holonomy/fourier.hpp"
#include "holonomy/options.hpp"

namespace holonomy {
namespace detail {

using State2 = std::array<double, 2>;
using State3 = std::array<double, 3>;

template <class State>
auto make_dense(double rtol, double atol) {
    namespace ode = boost::numeric::odeint;
    return ode::make_dense_output(atol, rtol, ode::runge_kutta_dopri5<State>());
}

// quadratic model f(x) = c0 + c1 x + c2 x^2 through (-d, 0, +d) values
struct Quad {
    double c0 = 0, c1 = 0, c2 = 0;
    double operator()(double x) const { return c0 + (c1 + c2 * x) * x; }
    double deriv(double x) const { return c1 + 2.0 * c2 * x; }
};

inline Quad fit_quad(double fm, double f0, double fp, double d) {
    return {f0, (fp - fm) / (2.0 * d), (fp - 2.0 * f0 + fm) / (2.0 * d * d)};
}

// refine a sign change of g on the dense interpolant over [ta, tb]
template <class Stepper, class G>
double bisect_time(Stepper& st, G&& g, double ta, double tb) {
    State2 tmp;
    st.calc_state(ta, tmp);
    double ga = g(tmp);
    for (int it = 0; it < 90; ++it) {
        const double tm = 0.5 * (ta + tb);
        st.calc_state(tm, tmp);
        const double gm = g(tmp);
        if ((ga < 0.0) == (gm < 0.0)) {
            ta = tm;
            ga = gm;
        } else {
            tb = tm;
        }
        if (tb - ta < 1e-15 * std::max(1.0, std::abs(tb))) break;
    }
    return 0.5 * (ta + tb);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// orbit tracing

struct Orbit {
    ParamPoint lambda;
    double E = 0, T = 0, I = 0;
    PhasePoint start;                 // maximal-q point on the level set
    std::vector<PhasePoint> samples;  // z(j T / N), N = samples.size()
    double closure_error = 0;         // |z(T) - z(0)| / (1 + |z(0)|)
};

// Two passes: locate the period via the first ascending return through the
// transverse section at the start point, then resample uniformly in time
// while accumulating the loop integral of p dq for the action.
inline Orbit trace_orbit(const HamiltonianFamily& fam, const ParamPoint& lam, double E,
                         const EngineOptions& opts = {}) {
    fam.validate(lam);
    if (!(E > fam.min_energy(lam))) throw InvalidParams("energy below the bottom of the well");
    const PhasePoint z0 = fam.max_q_on_level_set(E, lam);

    auto rhs2 = [&](const detail::State2& s, detail::State2& d, double) {
        const PhasePoint z{s[0], s[1]};
        d[0] = fam.dH_dp(z, lam);
        d[1] = -fam.dH_dq(z, lam);
    };

    detail::State2 f0;
    {
        detail::State2 s{z0.q, z0.p};
        rhs2(s, f0, 0.0);
    }
    const double fn = std::hypot(f0[0], f0[1]);
    if (!(fn > 0.0)) throw OpenOrbit("stationary start point");
    const double nq = f0[0] / fn, np = f0[1] / fn;
    auto g = [&](const detail::State2& s) { return nq * (s[0] - z0.q) + np * (s[1] - z0.p); };
    const double dt0 = 1e-3 * (1.0 + std::hypot(z0.q, z0.p)) / fn;

    // pass A: period
    double T = -1.0;
    {
        auto st = detail::make_dense<detail::State2>(opts.trace_rtol, opts.trace_atol);
        detail::State2 x{z0.q, z0.p};
        st.initialize(x, 0.0, dt0);
        bool seen_negative = false;
        double t_a = 0.0, g_a = 0.0;
        while (st.current_time() < opts.trace_t_max && T < 0.0) {
            const auto iv = st.do_step(rhs2);
            // scan a few interpolant samples per step so no crossing slips by
            const int nsub = 4;
            for (int k = 1; k <= nsub; ++k) {
                const double t_b = iv.first + (iv.second - iv.first) * k / nsub;
                detail::State2 tmp;
                st.calc_state(t_b, tmp);
                const double g_b = g(tmp);
                if (!seen_negative && g_a >= 0.0 && g_b < 0.0) {
                    seen_negative = true;
                } else if (seen_negative && g_a < 0.0 && g_b >= 0.0) {
                    T = detail::bisect_time(st, g, t_a, t_b);
                    break;
                }
                t_a = t_b;
                g_a = g_b;
            }
        }
        if (T <= 0.0) throw OpenOrbit("no return to the section before t_max");
    }

    // pass B: uniform samples plus the action accumulator da/dt = p dq/dt
    auto rhs3 = [&](const detail::State3& s, detail::State3& d, double) {
        const PhasePoint z{s[0], s[1]};
        d[0] = fam.dH_dp(z, lam);
        d[1] = -fam.dH_dq(z, lam);
        d[2] = s[1] * d[0];
    };
    Orbit orb;
    orb.lambda = lam;
    orb.E = E;
    orb.T = T;
    orb.start = z0;
    const int N = opts.orbit_samples;
    orb.samples.resize(N);
    auto st = detail::make_dense<detail::State3>(opts.trace_rtol, opts.trace_atol);
    detail::State3 y{z0.q, z0.p, 0.0};
    st.initialize(y, 0.0, dt0);
    int j = 0;
    while (st.current_time() < T) {
        st.do_step(rhs3);
        while (j < N && T * j / N <= st.current_time()) {
            detail::State3 tmp;
            st.calc_state(T * j / N, tmp);
            orb.samples[j] = {tmp[0], tmp[1]};
            ++j;
        }
    }
    detail::State3 zT;
    st.calc_state(T, zT);
    while (j < N) {  // only possible if the last sample time rounds past T
        orb.samples[j++] = {zT[0], zT[1]};
    }
    orb.closure_error = std::hypot(zT[0] - z0.q, zT[1] - z0.p) / (1.0 + std::hypot(z0.q, z0.p));
    if (orb.closure_error > opts.closure_tol) throw OpenOrbit("orbit failed to close");
    orb.I = zT[2] / two_pi;
    return orb;
}

inline double action_of_energy(const HamiltonianFamily& fam, const ParamPoint& lam, double E,
                               const EngineOptions& opts = {}) {
    return trace_orbit(fam, lam, E, opts).I;
}

// invert I(E) with a geometrically expanded bracket around the guess
inline double energy_of_action(const HamiltonianFamily& fam, const ParamPoint& lam, double I,
                               const EngineOptions& opts = {}, double E_guess = 0.0) {
    if (!(I > 0.0)) throw InvalidParams("action must be positive");
    auto f = [&](double E) { return action_of_energy(fam, lam, E, opts) - I; };
    const double floorE = fam.min_energy(lam);
    double Eb = E_guess > floorE ? E_guess : std::max(1e-8, I);
    double fb = f(Eb);
    double Ea = Eb, fa = fb;
    int it = 0;
    if (fb > 0.0) {
        while (fa > 0.0 && it++ < 200) {
            Eb = Ea;
            fb = fa;
            Ea = floorE + 0.5 * (Ea - floorE);
            fa = f(Ea);
        }
    } else {
        while (fb < 0.0 && it++ < 200) {
            Ea = Eb;
            fa = fb;
            Eb = floorE + 2.0 * (Eb - floorE);
            fb = f(Eb);
        }
    }
    if (fa > 0.0 || fb < 0.0) throw RootFindFailure("no energy bracket for requested action");
    if (fa == 0.0) return Ea;
    if (fb == 0.0) return Eb;
    boost::math::tools::eps_tolerance<double> tol(48);
    std::uintmax_t max_it = 80;
    const auto r = boost::math::tools::toms748_solve(f, Ea, Eb, fa, fb, tol, max_it);
    return 0.5 * (r.first + r.second);
}

// ---------------------------------------------------------------------------
// torus charts

// local quadratic models in E - E0 for the torus geometry near a level set
struct EModel {
    double E0 = 0, delta = 0;
    detail::Quad I, T;    // action and period
    detail::Quad cq, cp;  // orbit centroid
    detail::Quad uq, up;  // section ray direction (maximal-q point - centroid)
};

struct TorusChart {
    ParamPoint lambda;
    double I0 = 0, E0 = 0, T0 = 0, omega = 0;
    AngleSeries q_series, p_series;  // on the I0 torus, angle zero at maximal q
    PhasePoint centroid;
    EModel model;
};

namespace detail {
inline PhasePoint centroid_of(const Orbit& o) {
    double q = 0, p = 0;
    for (const auto& z : o.samples) q += z.q, p += z.p;
    const double n = double(o.samples.size());
    return {q / n, p / n};
}
}  // namespace detail

inline TorusChart build_chart(const HamiltonianFamily& fam, const ParamPoint& lam, double I,
                              const EngineOptions& opts = {}, double E_guess = 0.0) {
    const double E0 = energy_of_action(fam, lam, I, opts, E_guess);
    const double d =
        std::min(opts.emodel_delta * std::max(1.0, std::abs(E0)), 0.45 * (E0 - fam.min_energy(lam)));
    const Orbit o0 = trace_orbit(fam, lam, E0, opts);
    const Orbit om = trace_orbit(fam, lam, E0 - d, opts);
    const Orbit op = trace_orbit(fam, lam, E0 + d, opts);

    TorusChart ch;
    ch.lambda = lam;
    ch.E0 = E0;
    ch.I0 = o0.I;
    ch.T0 = o0.T;
    ch.omega = two_pi / o0.T;
    if (!(ch.omega > opts.omega_floor)) throw DegenerateFrequency("chart frequency below floor");
    ch.centroid = detail::centroid_of(o0);

    const PhasePoint cm = detail::centroid_of(om), cp2 = detail::centroid_of(op);
    const PhasePoint mq0 = fam.max_q_on_level_set(E0, lam);
    const PhasePoint mqm = fam.max_q_on_level_set(E0 - d, lam);
    const PhasePoint mqp = fam.max_q_on_level_set(E0 + d, lam);
    ch.model.E0 = E0;
    ch.model.delta = d;
    ch.model.I = detail::fit_quad(om.I, o0.I, op.I, d);
    ch.model.T = detail::fit_quad(om.T, o0.T, op.T, d);
    ch.model.cq = detail::fit_quad(cm.q, ch.centroid.q, cp2.q, d);
    ch.model.cp = detail::fit_quad(cm.p, ch.centroid.p, cp2.p, d);
    ch.model.uq = detail::fit_quad(mqm.q - cm.q, mq0.q - ch.centroid.q, mqp.q - cp2.q, d);
    ch.model.up = detail::fit_quad(mqm.p - cm.p, mq0.p - ch.centroid.p, mqp.p - cp2.p, d);

    // fit the orbit in the time angle and pin the origin to the refined
    // maximal-q crossing (the start point already sits there)
    const int N = int(o0.samples.size());
    std::vector<double> qs(N), ps(N);
    for (int j = 0; j < N; ++j) qs[j] = o0.samples[j].q, ps[j] = o0.samples[j].p;
    AngleSeries qf = fit_series(qs, opts.fourier_M, ch.I0, lam);
    AngleSeries pf = fit_series(ps, opts.fourier_M, ch.I0, lam);
    const double th = wrap_pi(refine_extremum(qf, 0.0));
    if (std::abs(th) > 0.5) throw ConventionMismatch("angle origin drifted from the maximal-q point");
    if (!(qf.eval_derivative2(th) < 0.0)) throw ConventionMismatch("origin is not a maximum of q");
    ch.q_series = shift_angle(qf, th);
    ch.p_series = shift_angle(pf, th);
    return ch;
}

// evaluate the chart's own torus; other actions need a fresh chart
inline PhasePoint chart_torus_to_phase(const TorusChart& ch, const TorusPoint& t) {
    if (std::abs(t.action - ch.I0) > 1e-6 * std::max(1.0, std::abs(ch.I0)))
        throw InvalidParams("chart evaluates phase points on its own torus only");
    return {ch.q_series.eval(t.angle), ch.p_series.eval(t.angle)};
}

// Angle of a phase point: flow forward to the next descending crossing of the
// section ray (centroid toward maximal q), where the angle is zero; then
// phi = omega (T - t*). Both families circulate clockwise, so the crossing is
// g = cross(u, z - c) falling through zero on the positive-u side.
inline double measure_angle(const HamiltonianFamily& fam, const ParamPoint& lam,
                            const PhasePoint& z, double T, const PhasePoint& c,
                            const PhasePoint& u, const EngineOptions& opts = {}) {
    auto rhs2 = [&](const detail::State2& s, detail::State2& d, double) {
        const PhasePoint w{s[0], s[1]};
        d[0] = fam.dH_dp(w, lam);
        d[1] = -fam.dH_dq(w, lam);
    };
    auto g = [&](const detail::State2& s) {
        return u.q * (s[1] - c.p) - u.p * (s[0] - c.q);
    };
    auto side = [&](const detail::State2& s) {
        return u.q * (s[0] - c.q) + u.p * (s[1] - c.p);
    };

    auto st = detail::make_dense<detail::State2>(opts.trace_rtol, opts.trace_atol);
    detail::State2 x{z.q, z.p};
    detail::State2 fz;
    rhs2(x, fz, 0.0);
    const double fn = std::hypot(fz[0], fz[1]);
    if (!(fn > 0.0)) throw OpenOrbit("stationary point has no angle");
    st.initialize(x, 0.0, 1e-3 * (1.0 + std::hypot(z.q, z.p)) / fn);

    double t_a = 0.0, g_a = g(x);
    while (st.current_time() < 1.6 * T) {
        st.do_step(rhs2);
        const int nsub = 4;
        const double t_lo = t_a;
        for (int k = 1; k <= nsub; ++k) {
            const double t_b = t_lo + (st.current_time() - t_lo) * k / nsub;
            detail::State2 tmp;
            st.calc_state(t_b, tmp);
            const double g_b = g(tmp);
            if (g_a > 0.0 && g_b <= 0.0) {
                const double t_star = detail::bisect_time(st, g, t_a, t_b);
                st.calc_state(t_star, tmp);
                if (side(tmp) > 0.0) return wrap_angle(two_pi * (T - t_star) / T);
            }
            t_a = t_b;
            g_a = g_b;
        }
    }
    throw OpenOrbit("no section crossing within 1.6 periods");
}

// torus coordinates of a phase point under this chart's convention; energies
// outside the model trust region fall back to a fresh trace at that level
inline TorusPoint measure_torus(const HamiltonianFamily& fam, const TorusChart& ch,
                                const PhasePoint& z, const EngineOptions& opts = {}) {
    const double E = fam.hamiltonian(z, ch.lambda);
    const double dE = E - ch.model.E0;
    double I, T;
    PhasePoint c, u;
    if (std::abs(dE) <= 0.8 * ch.model.delta) {
        I = ch.model.I(dE);
        T = ch.model.T(dE);
        c = {ch.model.cq(dE), ch.model.cp(dE)};
        u = {ch.model.uq(dE), ch.model.up(dE)};
    } else {
        const Orbit o = trace_orbit(fam, ch.lambda, E, opts);
        I = o.I;
        T = o.T;
        c = detail::centroid_of(o);
        const PhasePoint mq = fam.max_q_on_level_set(E, ch.lambda);
        u = {mq.q - c.q, mq.p - c.p};
    }
    return {I, measure_angle(fam, ch.lambda, z, T, c, u, opts)};
}

template <class F>
double torus_average(const TorusChart& ch, F&& f, int n = 256) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        const double phi = two_pi * j / n;
        acc += f(PhasePoint{ch.q_series.eval(phi), ch.p_series.eval(phi)});
    }
    return acc / n;
}

inline double frequency_of(const HamiltonianFamily& fam, const ParamPoint& lam, double I,
                           const EngineOptions& opts = {}) {
    double w;
    if (fam.has_analytic_maps())
        w = fam.frequency(I, lam);
    else
        w = build_chart(fam, lam, I, opts).omega;
    if (!(w > opts.omega_floor)) throw DegenerateFrequency("frequency below floor");
    return w;
}

// ---------------------------------------------------------------------------
// parameter derivatives of the chart coordinates at fixed phase point

// fluctuating fields dphi/dlambda_mu and dI/dlambda_mu versus angle at fixed
// (I, lambda), from a centered parameter stencil of coordinate measurements
struct TangentSeries {
    AngleSeries dphi, dI;
};

inline std::vector<TangentSeries> dlambda_series_all(const HamiltonianFamily& fam,
                                                     const ParamPoint& lam, double I,
                                                     const EngineOptions& opts = {}) {
    fam.validate(lam);
    const int P = fam.n_params();
    const int N = opts.angle_samples;
    std::vector<TangentSeries> out;
    out.reserve(P);

    if (fam.has_analytic_maps()) {
        for (int mu = 0; mu < P; ++mu) {
            const double h = opts.lambda_step * std::max(1.0, std::abs(lam[mu]));
            ParamPoint lp = lam, lm = lam;
            lp[mu] += h;
            lm[mu] -= h;
            std::vector<double> dphi(N), dI(N);
            for (int j = 0; j < N; ++j) {
                const double phi = two_pi * j / N;
                const PhasePoint z = fam.torus_to_phase({I, phi}, lam);
                const TorusPoint tp = fam.phase_to_torus(z, lp);
                const TorusPoint tm = fam.phase_to_torus(z, lm);
                dphi[j] = wrap_pi(tp.angle - tm.angle) / (2.0 * h);
                dI[j] = (tp.action - tm.action) / (2.0 * h);
            }
            out.push_back({fit_series(dphi, opts.fourier_M, I, lam),
                           fit_series(dI, opts.fourier_M, I, lam)});
        }
        return out;
    }

    const TorusChart ch0 = build_chart(fam, lam, I, opts);
    std::vector<PhasePoint> zs(N);
    for (int j = 0; j < N; ++j)
        zs[j] = {ch0.q_series.eval(two_pi * j / N), ch0.p_series.eval(two_pi * j / N)};
    for (int mu = 0; mu < P; ++mu) {
        const double h = opts.lambda_step * std::max(1.0, std::abs(lam[mu]));
        ParamPoint lp = lam, lm = lam;
        lp[mu] += h;
        lm[mu] -= h;
        const TorusChart chp = build_chart(fam, lp, I, opts, ch0.E0);
        const TorusChart chm = build_chart(fam, lm, I, opts, ch0.E0);
        std::vector<double> dphi(N), dI(N);
        for (int j = 0; j < N; ++j) {
            const TorusPoint tp = measure_torus(fam, chp, zs[j], opts);
            const TorusPoint tm = measure_torus(fam, chm, zs[j], opts);
            dphi[j] = wrap_pi(tp.angle - tm.angle) / (2.0 * h);
            dI[j] = (tp.action - tm.action) / (2.0 * h);
        }
        out.push_back(
            {fit_series(dphi, opts.fourier_M, I, lam), fit_series(dI, opts.fourier_M, I, lam)});
    }
    return out;
}

inline TangentSeries dlambda_series(const HamiltonianFamily& fam, const ParamPoint& lam, double I,
                                    int mu, const EngineOptions& opts = {}) {
    if (mu < 0 || mu >= fam.n_params()) throw InvalidParams("parameter index out of range");
    return dlambda_series_all(fam, lam, I, opts)[mu];
}

// torus average of dphi/dlambda_mu at fixed phase points (connection entry)
inline double dphi_dlambda_avg(const HamiltonianFamily& fam, const ParamPoint& lam, double I,
                               int mu, const EngineOptions& opts = {}) {
    return torus_average(dlambda_series(fam, lam, I, mu, opts).dphi);
}

// torus average of dI/dlambda_mu; vanishes when the action is an adiabatic
// invariant of the family, which is the standing consistency check
inline double dI_dlambda_avg(const HamiltonianFamily& fam, const ParamPoint& lam, double I, int mu,
                             const EngineOptions& opts = {}) {
    return torus_average(dlambda_series(fam, lam, I, mu, opts).dI);
}

}  // namespace holonomy
