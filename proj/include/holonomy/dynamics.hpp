#pragma once
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "holonomy/holonomy.hpp"

namespace holonomy {

// ---------------------------------------------------------------------------
// Slow-drive dynamics: integrate real trajectories while the parameters crawl
// once around a closed loop, and extrapolate the measured angle drift to the
// adiabatic limit. This is the independent third route against which the line
// and surface routes are validated.
// ---------------------------------------------------------------------------

// Frequency and local action model of the fixed-I0 torus family along a loop,
// interpolated trigonometrically from uniformly spaced nodes. Everything the
// drive integrator needs per right-hand-side call is two series evaluations.
struct LoopModel {
    double I0 = 0.0;
    AngleSeries omega_s;  // frequency of the I0 torus at loop fraction s
    AngleSeries e0_s;     // energy of the I0 torus
    AngleSeries c1_s;     // d I / d E at the torus
    AngleSeries c2_s;     // second-order action response

    double omega(double s) const { return omega_s.eval(two_pi * s); }
    double energy0(double s) const { return e0_s.eval(two_pi * s); }
    // local inverse of E(I) near the I0 torus at loop fraction s
    double action_of(double E, double s) const {
        const double dE = E - e0_s.eval(two_pi * s);
        return I0 + c1_s.eval(two_pi * s) * dE + c2_s.eval(two_pi * s) * dE * dE;
    }
};

inline LoopModel build_loop_model(const HamiltonianFamily& fam, const LoopPath& loop, double I0,
                                  const EngineOptions& opts = {}) {
    if (loop.dim != fam.n_params())
        throw InvalidParams("build_loop_model: loop dimension != family parameter count");
    const int N = opts.loop_samples;
    std::vector<double> ws(static_cast<size_t>(N)), es(static_cast<size_t>(N)),
        c1(static_cast<size_t>(N)), c2(static_cast<size_t>(N));

    if (fam.has_analytic_maps()) {
        const double hI = opts.action_step * std::max(1.0, std::abs(I0));
        for (int k = 0; k < N; ++k) {
            const ParamPoint lam = loop.at(static_cast<double>(k) / N);
            const double w = fam.frequency(I0, lam);
            if (!(w > opts.omega_floor)) throw DegenerateFrequency("loop crosses a degenerate torus");
            const double wp = fam.frequency(I0 + hI, lam);
            const double wm = fam.frequency(I0 - hI, lam);
            const double dw = (wp - wm) / (2.0 * hI);
            ws[static_cast<size_t>(k)] = w;
            es[static_cast<size_t>(k)] = fam.hamiltonian(fam.torus_to_phase({I0, 0.0}, lam), lam);
            c1[static_cast<size_t>(k)] = 1.0 / w;
            c2[static_cast<size_t>(k)] = -dw / (2.0 * w * w * w);
        }
    } else {
        double guess = 0.0;
        for (int k = 0; k < N; ++k) {
            const ParamPoint lam = loop.at(static_cast<double>(k) / N);
            const double E0 = energy_of_action(fam, lam, I0, opts, guess);
            guess = E0;  // warm-start the next node
            const double d = std::min(opts.emodel_delta * std::max(1.0, std::abs(E0)),
                                      0.45 * (E0 - fam.min_energy(lam)));
            const Orbit o0 = trace_orbit(fam, lam, E0, opts);
            const Orbit om = trace_orbit(fam, lam, E0 - d, opts);
            const Orbit op = trace_orbit(fam, lam, E0 + d, opts);
            const detail::Quad Iq = detail::fit_quad(om.I, o0.I, op.I, d);
            const double w = two_pi / o0.T;
            if (!(w > opts.omega_floor)) throw DegenerateFrequency("loop crosses a degenerate torus");
            ws[static_cast<size_t>(k)] = w;
            es[static_cast<size_t>(k)] = E0;
            c1[static_cast<size_t>(k)] = Iq.c1;
            c2[static_cast<size_t>(k)] = Iq.c2;
        }
    }

    const int M = N / 2 - 1;
    LoopModel m;
    m.I0 = I0;
    m.omega_s = fit_series(ws, M, I0);
    m.e0_s = fit_series(es, M, I0);
    m.c1_s = fit_series(c1, M, I0);
    m.c2_s = fit_series(c2, M, I0);
    return m;
}

struct AdiabaticRun {
    double epsilon = 0.0;
    double phi0 = 0.0;
    double T_loop = 0.0;
    double theta = 0.0;        // accumulated dynamical angle, integral of omega dt
    double phi_end = 0.0;      // measured chart angle after the loop closes
    double I_end = 0.0;
    double drift = 0.0;        // phi_end - phi0 - theta, wrapped to (-pi, pi]
    double I_drift_max = 0.0;  // worst action excursion along the run
};

// One loop traversal at drive rate epsilon: lambda(t) = loop(epsilon t / 2 pi),
// so the loop closes at T = 2 pi / epsilon. State is (q, p, theta).
class AdiabaticEngine {
public:
    AdiabaticEngine(const HamiltonianFamily& fam, LoopPath loop, double I0,
                    EngineOptions opts = {})
        : fam_(fam),
          loop_(std::move(loop)),
          I0_(I0),
          opts_(std::move(opts)),
          model_(build_loop_model(fam_, loop_, I0_, opts_)) {
        if (!fam_.has_analytic_maps())
            chart0_.emplace(build_chart(fam_, loop_.at(0.0), I0_, opts_));
    }

    const LoopModel& model() const { return model_; }

    AdiabaticRun run(double epsilon, double phi0) const {
        if (!(epsilon > 0.0)) throw InvalidParams("drive rate must be positive");
        const double Tl = two_pi / epsilon;
        const ParamPoint lam0 = loop_.at(0.0);
        const PhasePoint z0 = chart0_ ? chart_torus_to_phase(*chart0_, {I0_, phi0})
                                      : fam_.torus_to_phase({I0_, phi0}, lam0);

        auto rhs = [&](const detail::State3& s, detail::State3& d, double t) {
            const double u = t / Tl;
            const ParamPoint lam = loop_.at(u);
            const PhasePoint z{s[0], s[1]};
            d[0] = fam_.dH_dp(z, lam);
            d[1] = -fam_.dH_dq(z, lam);
            d[2] = model_.omega(u);
        };

        auto st = detail::make_dense<detail::State3>(opts_.adiabatic_rtol, opts_.adiabatic_atol);
        detail::State3 s{z0.q, z0.p, 0.0};
        st.initialize(s, 0.0, std::min(0.01 * two_pi / model_.omega(0.0), Tl));

        AdiabaticRun out;
        out.epsilon = epsilon;
        out.phi0 = phi0;
        out.T_loop = Tl;

        const int NS = 4096;  // uniform monitor grid for the action excursion
        int j = 1;
        long steps = 0;
        detail::State3 si;
        while (st.current_time() < Tl) {
            st.do_step(rhs);
            if (++steps > 10'000'000) throw IntegrationFailure("slow-drive run exceeded step budget");
            while (j <= NS && Tl * j / NS <= st.current_time()) {
                const double ts = Tl * j / NS;
                st.calc_state(ts, si);
                const double u = ts / Tl;
                const double E = fam_.hamiltonian({si[0], si[1]}, loop_.at(u));
                out.I_drift_max =
                    std::max(out.I_drift_max, std::abs(model_.action_of(E, u) - I0_));
                ++j;
            }
        }
        st.calc_state(Tl, si);
        out.theta = si[2];
        const PhasePoint z_end{si[0], si[1]};
        const TorusPoint tp = chart0_ ? measure_torus(fam_, *chart0_, z_end, opts_)
                                      : fam_.phase_to_torus(z_end, lam0);
        out.phi_end = tp.angle;
        out.I_end = tp.action;
        out.drift = wrap_pi(out.phi_end - phi0 - out.theta);
        return out;
    }

private:
    const HamiltonianFamily& fam_;
    LoopPath loop_;
    double I0_;
    EngineOptions opts_;
    LoopModel model_;
    std::optional<TorusChart> chart0_;
};

namespace detail {

// least-squares polynomial fit by normal equations; fine for degree <= 2
inline std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y,
                                   int deg) {
    const int n = deg + 1;
    std::vector<double> A(static_cast<size_t>(n) * n, 0.0), b(static_cast<size_t>(n), 0.0);
    for (size_t k = 0; k < x.size(); ++k) {
        double xp_i = 1.0;  // x^i
        for (int i = 0; i < n; ++i) {
            double xp_j = xp_i * xp_i;  // x^(i+j) starting at j = i
            for (int j = i; j < n; ++j) {
                A[static_cast<size_t>(i) * n + j] += xp_j;
                xp_j *= x[k];
            }
            b[static_cast<size_t>(i)] += xp_i * y[k];
            xp_i *= x[k];
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            A[static_cast<size_t>(i) * n + j] = A[static_cast<size_t>(j) * n + i];
    // Gaussian elimination with partial pivoting
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[static_cast<size_t>(r) * n + c]) >
                std::abs(A[static_cast<size_t>(piv) * n + c]))
                piv = r;
        if (piv != c) {
            for (int j = 0; j < n; ++j)
                std::swap(A[static_cast<size_t>(c) * n + j], A[static_cast<size_t>(piv) * n + j]);
            std::swap(b[static_cast<size_t>(c)], b[static_cast<size_t>(piv)]);
        }
        const double p = A[static_cast<size_t>(c) * n + c];
        if (p == 0.0) throw InvalidParams("polyfit: singular normal equations");
        for (int r = c + 1; r < n; ++r) {
            const double f = A[static_cast<size_t>(r) * n + c] / p;
            for (int j = c; j < n; ++j)
                A[static_cast<size_t>(r) * n + j] -= f * A[static_cast<size_t>(c) * n + j];
            b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(c)];
        }
    }
    std::vector<double> coef(static_cast<size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[static_cast<size_t>(r)];
        for (int j = r + 1; j < n; ++j) acc -= A[static_cast<size_t>(r) * n + j] * coef[static_cast<size_t>(j)];
        coef[static_cast<size_t>(r)] = acc / A[static_cast<size_t>(r) * n + r];
    }
    return coef;
}

}  // namespace detail

struct HannayExtrapolation {
    std::vector<double> epsilons;      // as driven, any order
    std::vector<double> drift_mean;    // start-angle-averaged drift per rate
    std::vector<double> I_excursion;   // worst action excursion per rate
    std::vector<AdiabaticRun> runs;    // all (epsilon, phi0) runs
    double angle = 0.0;                // quadratic-in-epsilon extrapolation
    double linear_estimate = 0.0;      // affine fit over the two slowest rates
    double consistency = 0.0;          // |angle - linear_estimate|
};

// Power-law exponent of the action excursion between the fastest and slowest
// drive; first-order adiabatic response means a value near one.
inline double drift_exponent(const HannayExtrapolation& hx) {
    const auto [lo, hi] = std::minmax_element(hx.epsilons.begin(), hx.epsilons.end());
    const size_t a = static_cast<size_t>(hi - hx.epsilons.begin());
    const size_t b = static_cast<size_t>(lo - hx.epsilons.begin());
    return std::log(hx.I_excursion[a] / hx.I_excursion[b]) /
           std::log(hx.epsilons[a] / hx.epsilons[b]);
}

inline HannayExtrapolation dynamical_hannay(const HamiltonianFamily& fam, const LoopPath& loop,
                                            double I0, const EngineOptions& opts = {}) {
    const int NE = static_cast<int>(opts.epsilons.size());
    const int NP = opts.phi0_count;
    if (NE < 3) throw InvalidParams("dynamical_hannay: need at least three drive rates");
    if (NP < 1) throw InvalidParams("dynamical_hannay: need at least one start angle");

    const AdiabaticEngine eng(fam, loop, I0, opts);
    HannayExtrapolation hx;
    hx.epsilons = opts.epsilons;
    hx.runs.resize(static_cast<size_t>(NE) * NP);
    parallel_for(NE * NP, opts.jobs, [&](int idx) {
        const int e = idx / NP, j = idx % NP;
        hx.runs[static_cast<size_t>(idx)] =
            eng.run(opts.epsilons[static_cast<size_t>(e)], two_pi * j / NP);
    });

    hx.drift_mean.assign(static_cast<size_t>(NE), 0.0);
    hx.I_excursion.assign(static_cast<size_t>(NE), 0.0);
    for (int e = 0; e < NE; ++e) {
        for (int j = 0; j < NP; ++j) {
            const AdiabaticRun& r = hx.runs[static_cast<size_t>(e) * NP + j];
            hx.drift_mean[static_cast<size_t>(e)] += r.drift / NP;
            hx.I_excursion[static_cast<size_t>(e)] =
                std::max(hx.I_excursion[static_cast<size_t>(e)], r.I_drift_max);
        }
    }

    const std::vector<double> quad = detail::polyfit(hx.epsilons, hx.drift_mean, 2);
    hx.angle = quad[0];

    // affine fit through the two slowest rates as an independent estimate
    std::vector<size_t> order(static_cast<size_t>(NE));
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return hx.epsilons[a] < hx.epsilons[b]; });
    const std::vector<double> xs{hx.epsilons[order[0]], hx.epsilons[order[1]]};
    const std::vector<double> ys{hx.drift_mean[order[0]], hx.drift_mean[order[1]]};
    hx.linear_estimate = detail::polyfit(xs, ys, 1)[0];
    hx.consistency = std::abs(hx.angle - hx.linear_estimate);
    if (hx.consistency > opts.extrap_tol)
        throw NoConvergence("drift extrapolation orders disagree beyond tolerance");
    return hx;
}

// ---------------------------------------------------------------------------
// Determinism cross-checks tying the kinematic chart derivatives to the gauge
// generators.
// ---------------------------------------------------------------------------

// Torus-average identity: <d_mu phi d_nu I - d_nu phi d_mu I> equals
// <{W_mu, W_nu}>. The left side uses only measured chart derivatives, the
// right side only the generator algebra.
struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double abs_error() const { return std::abs(lhs - rhs); }
};

inline IdentityCheck bracket_identity_check(const HamiltonianFamily& fam, const ParamPoint& lam,
                                             double action, int mu, int nu,
                                             const EngineOptions& opts = {}) {
    const std::vector<TangentSeries> tang = dlambda_series_all(fam, lam, action, opts);
    const auto& tm = tang[static_cast<size_t>(mu)];
    const auto& tn = tang[static_cast<size_t>(nu)];
    IdentityCheck c;
    c.lhs = torus_average(product(tm.dphi, tn.dI)) - torus_average(product(tn.dphi, tm.dI));
    const TorusFrame fr = build_frame(fam, lam, action, opts);
    c.rhs = bracket_average(fr, mu, nu);
    return c;
}

// One finite transport step: push the I0 torus grid with the canonical flow
// of the gauge generator (frozen at the base parameters, linearized in I) and
// compare against the measured chart coordinates at lambda + h e_mu.
//   mean_drift : |mean angle residual| after crediting the connection advance
//                h <d_mu phi>; an O(h^2) null.
//   max_error  : worst fluctuating residual (angle demeaned, action raw);
//                O(h^2), so halving h should shrink it about fourfold.
struct TransportCheck {
    double h = 0.0;
    double max_error = 0.0;
    double mean_drift = 0.0;
};

inline TransportCheck parallel_transport_check(const HamiltonianFamily& fam, const ParamPoint& lam,
                                               double I0, int mu, double h,
                                               const EngineOptions& opts = {}) {
    if (mu < 0 || mu >= fam.n_params()) throw InvalidParams("parameter index out of range");
    if (!(h > 0.0)) throw InvalidParams("transport step must be positive");
    const TorusFrame fr = build_frame(fam, lam, I0, opts);
    const GaugeGenerator gen = gauge_generator(fr, mu);
    const AngleSeries& Wm = gen.mid();
    const AngleSeries WI = gen.dI();
    const double conn = dphi_dlambda_avg(fam, lam, I0, mu, opts);

    // dphi/dh = dW/dI, dI/dh = -dW/dphi with W(phi, I) ~ Wm(phi) + (I - I0) WI(phi)
    auto field = [&](double phi, double I) {
        return std::pair<double, double>{
            WI.eval(phi), -(Wm.eval_derivative(phi) + (I - I0) * WI.eval_derivative(phi))};
    };
    auto rk4 = [&](double phi, double I) {
        const auto [k1p, k1i] = field(phi, I);
        const auto [k2p, k2i] = field(phi + 0.5 * h * k1p, I + 0.5 * h * k1i);
        const auto [k3p, k3i] = field(phi + 0.5 * h * k2p, I + 0.5 * h * k2i);
        const auto [k4p, k4i] = field(phi + h * k3p, I + h * k3i);
        return std::pair<double, double>{phi + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
                                         I + h / 6.0 * (k1i + 2 * k2i + 2 * k3i + k4i)};
    };

    ParamPoint lp = lam;
    lp[static_cast<size_t>(mu)] += h;
    std::optional<TorusChart> ch0, chp;
    if (!fam.has_analytic_maps()) {
        ch0.emplace(build_chart(fam, lam, I0, opts));
        chp.emplace(build_chart(fam, lp, I0, opts, ch0->E0));
    }

    const int NG = 16;
    std::vector<double> rphi(NG), rI(NG);
    for (int j = 0; j < NG; ++j) {
        const double phi = two_pi * j / NG;
        const PhasePoint z = ch0 ? chart_torus_to_phase(*ch0, {I0, phi})
                                 : fam.torus_to_phase({I0, phi}, lam);
        const TorusPoint tp =
            chp ? measure_torus(fam, *chp, z, opts) : fam.phase_to_torus(z, lp);
        const auto [phi_pred, I_pred] = rk4(phi, I0);
        rphi[static_cast<size_t>(j)] = wrap_pi(tp.angle - (phi_pred + h * conn));
        rI[static_cast<size_t>(j)] = tp.action - I_pred;
    }
    double mean = 0.0;
    for (const double r : rphi) mean += r / NG;
    TransportCheck out;
    out.h = h;
    out.mean_drift = std::abs(mean);
    for (int j = 0; j < NG; ++j)
        out.max_error = std::max({out.max_error, std::abs(rphi[static_cast<size_t>(j)] - mean),
                                  std::abs(rI[static_cast<size_t>(j)])});
    return out;
}

}  // namespace holonomy
