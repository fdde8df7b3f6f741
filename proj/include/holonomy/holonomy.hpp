#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "holonomy/agp.hpp"
#include "holonomy/parallel.hpp"
#include "holonomy/quadrature.hpp"

namespace holonomy {

// ---------------------------------------------------------------------------
// Curvature of the adiabatic connection, per unit eigenindex.
//
// The reduced two-form entry is d/dI of the torus average of the Poisson
// bracket {W_mu, W_nu}. Eigenindex n multiplies the whole form, so we store
// the n-independent part and let callers scale.
// ---------------------------------------------------------------------------

struct CurvatureForm {
    ParamPoint lambda;
    double I = 0.0;
    int P = 0;
    std::vector<double> entries;  // row-major P x P, antisymmetric

    double entry(int mu, int nu) const { return entries[static_cast<size_t>(mu) * P + nu]; }
};

// Torus average of {W_mu, W_nu} on one frame (fixed I, fixed lambda).
inline double bracket_average(const TorusFrame& fr, int mu, int nu) {
    const GaugeGenerator a = gauge_generator(fr, mu);
    const GaugeGenerator b = gauge_generator(fr, nu);
    return torus_average(poisson_bracket(a.W, b.W));
}

inline CurvatureForm curvature_form(const HamiltonianFamily& fam, const ParamPoint& lam,
                                    double action, const EngineOptions& opts = {}) {
    const int P = fam.n_params();
    const double h = opts.action_step * std::max(1.0, std::abs(action));
    const TorusFrame lo = build_frame(fam, lam, action - h, opts);
    const TorusFrame hi = build_frame(fam, lam, action + h, opts);
    CurvatureForm F;
    F.lambda = lam;
    F.I = action;
    F.P = P;
    F.entries.assign(static_cast<size_t>(P) * P, 0.0);
    for (int mu = 0; mu < P; ++mu) {
        for (int nu = mu + 1; nu < P; ++nu) {
            const double e =
                (bracket_average(hi, mu, nu) - bracket_average(lo, mu, nu)) / (2.0 * h);
            F.entries[static_cast<size_t>(mu) * P + nu] = e;
            F.entries[static_cast<size_t>(nu) * P + mu] = -e;
        }
    }
    return F;
}

inline double curvature_entry(const HamiltonianFamily& fam, const ParamPoint& lam, double action,
                              int mu, int nu, const EngineOptions& opts = {}) {
    if (mu == nu) return 0.0;
    const double h = opts.action_step * std::max(1.0, std::abs(action));
    const TorusFrame lo = build_frame(fam, lam, action - h, opts);
    const TorusFrame hi = build_frame(fam, lam, action + h, opts);
    return (bracket_average(hi, mu, nu) - bracket_average(lo, mu, nu)) / (2.0 * h);
}

// Closed form for the quadratic family: cyclic entries (X, Y, Z)/(4 w^3).
// Independent of the action, so CurvatureForm::I is left at the query value
// purely for reporting.
inline CurvatureForm genosc_curvature_analytic(const ParamPoint& lam, double action = 0.0) {
    const GenOscParams g = genosc_from_lambda(lam);
    const double w = genosc_frequency(g);
    const double d = 4.0 * w * w * w;
    CurvatureForm F;
    F.lambda = lam;
    F.I = action;
    F.P = 3;
    F.entries = {0.0,      g.Z / d,  -g.Y / d,   // entry(X,Y) = Z/4w^3
                 -g.Z / d, 0.0,      g.X / d,    // entry(Y,Z) = X/4w^3
                 g.Y / d,  -g.X / d, 0.0};       // entry(Z,X) = Y/4w^3
    return F;
}

// The naive curvature formula also contains derivative-of-average terms
// d/dI [ d_mu <W_nu> - d_nu <W_mu> ]. In the secular-free gauge <W> == 0
// identically in (lambda, I), so these terms vanish. This check recomputes
// them through the same finite-difference stencils used everywhere else and
// returns the worst magnitude over both orderings.
inline double verify_derivative_terms_vanish(const HamiltonianFamily& fam, const ParamPoint& lam,
                                             double action, int mu, int nu,
                                             const EngineOptions& opts = {}) {
    const double hI = opts.action_step * std::max(1.0, std::abs(action));
    auto dmu_avg_w = [&](int a, int b, double Iv) {
        const double h = opts.lambda_step * std::max(1.0, std::abs(lam[static_cast<size_t>(a)]));
        ParamPoint lp = lam, lm = lam;
        lp[static_cast<size_t>(a)] += h;
        lm[static_cast<size_t>(a)] -= h;
        const TorusFrame frp = build_frame(fam, lp, Iv, opts);
        const TorusFrame frm = build_frame(fam, lm, Iv, opts);
        const double cp = torus_average(gauge_generator(frp, b).mid());
        const double cm = torus_average(gauge_generator(frm, b).mid());
        return (cp - cm) / (2.0 * h);
    };
    double worst = 0.0;
    for (const auto& [a, b] : {std::pair<int, int>{mu, nu}, std::pair<int, int>{nu, mu}}) {
        const double d = (dmu_avg_w(a, b, action + hI) - dmu_avg_w(a, b, action - hI)) / (2.0 * hI);
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Closed loops and spanning surfaces in parameter space.
// ---------------------------------------------------------------------------

struct LoopPath {
    int dim = 0;
    std::vector<ParamPoint> nodes;                  // uniform samples s_k = k/N, for reporting
    std::function<ParamPoint(double)> at;           // lambda(s), s in [0, 1]
    std::function<ParamPoint(double)> velocity;     // d lambda / d s
};

namespace detail {

inline std::vector<ParamPoint> sample_loop_nodes(const std::function<ParamPoint(double)>& at,
                                                 int n) {
    std::vector<ParamPoint> out;
    out.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) out.push_back(at(static_cast<double>(k) / n));
    return out;
}

}  // namespace detail

// lambda(s) = C + cos(2 pi s) U + sin(2 pi s) V.
inline LoopPath circle_loop(const ParamPoint& center, const ParamPoint& axis_u,
                            const ParamPoint& axis_v, int samples = 64) {
    const size_t P = center.size();
    if (axis_u.size() != P || axis_v.size() != P)
        throw InvalidParams("circle_loop: axis dimension mismatch");
    if (samples < 4) throw InvalidParams("circle_loop: need at least 4 samples");
    LoopPath l;
    l.dim = static_cast<int>(P);
    l.at = [=](double s) {
        const double c = std::cos(two_pi * s), sn = std::sin(two_pi * s);
        ParamPoint z(P);
        for (size_t i = 0; i < P; ++i) z[i] = center[i] + c * axis_u[i] + sn * axis_v[i];
        return z;
    };
    l.velocity = [=](double s) {
        const double c = std::cos(two_pi * s), sn = std::sin(two_pi * s);
        ParamPoint z(P);
        for (size_t i = 0; i < P; ++i) z[i] = two_pi * (-sn * axis_u[i] + c * axis_v[i]);
        return z;
    };
    l.nodes = detail::sample_loop_nodes(l.at, samples);
    return l;
}

// Closed loop through uniformly spaced nodes, trigonometric interpolation per
// coordinate. Node k is lambda(k/N); the path closes back to node 0 at s = 1.
inline LoopPath sampled_loop(std::vector<ParamPoint> nodes) {
    const int N = static_cast<int>(nodes.size());
    if (N < 4) throw InvalidParams("sampled_loop: need at least 4 nodes");
    const size_t P = nodes.front().size();
    for (const auto& z : nodes)
        if (z.size() != P) throw InvalidParams("sampled_loop: ragged node dimensions");
    const int M = N / 2 - 1;
    std::vector<AngleSeries> coord;
    coord.reserve(P);
    std::vector<double> samples(static_cast<size_t>(N));
    for (size_t i = 0; i < P; ++i) {
        for (size_t k = 0; k < static_cast<size_t>(N); ++k) samples[k] = nodes[k][i];
        coord.push_back(fit_series(samples, M));
    }
    LoopPath l;
    l.dim = static_cast<int>(P);
    l.nodes = std::move(nodes);
    l.at = [coord, P](double s) {
        ParamPoint z(P);
        for (size_t i = 0; i < P; ++i) z[i] = coord[i].eval(two_pi * s);
        return z;
    };
    l.velocity = [coord, P](double s) {
        ParamPoint z(P);
        for (size_t i = 0; i < P; ++i) z[i] = two_pi * coord[i].eval_derivative(two_pi * s);
        return z;
    };
    return l;
}

// Same loop traversed backwards: s -> 1 - s.
inline LoopPath reversed(const LoopPath& loop) {
    LoopPath l;
    l.dim = loop.dim;
    const auto at = loop.at;
    const auto vel = loop.velocity;
    l.at = [at](double s) { return at(1.0 - s); };
    l.velocity = [vel](double s) {
        ParamPoint v = vel(1.0 - s);
        for (double& x : v) x = -x;
        return v;
    };
    l.nodes = detail::sample_loop_nodes(l.at, static_cast<int>(loop.nodes.empty()
                                                                   ? 64
                                                                   : loop.nodes.size()));
    return l;
}

// The loop traversed k times as a single s in [0, 1] parametrization.
inline LoopPath repeated(const LoopPath& loop, int k) {
    if (k < 1) throw InvalidParams("repeated: winding count must be >= 1");
    LoopPath l;
    l.dim = loop.dim;
    const auto at = loop.at;
    const auto vel = loop.velocity;
    l.at = [at, k](double s) {
        double frac = s * k;
        frac -= std::floor(frac);
        return at(frac);
    };
    l.velocity = [vel, k](double s) {
        double frac = s * k;
        frac -= std::floor(frac);
        ParamPoint v = vel(frac);
        for (double& x : v) x *= k;
        return v;
    };
    l.nodes = detail::sample_loop_nodes(
        l.at, k * static_cast<int>(loop.nodes.empty() ? 64 : loop.nodes.size()));
    return l;
}

struct SurfacePatch {
    int dim = 0;
    std::function<ParamPoint(double, double)> at;  // lambda(u, v), (u, v) in [0,1]^2
    // tangents(u, v) = { d lambda/du, d lambda/dv }
    std::function<std::array<ParamPoint, 2>(double, double)> tangents;
};

// Disc spanning circle_loop(C, U, V): lambda(u, v) = C + u (cos(2 pi v) U +
// sin(2 pi v) V). The u = 1 edge traverses the loop with s = v, so the
// induced boundary orientation matches the loop orientation.
inline SurfacePatch spanning_disc(const ParamPoint& center, const ParamPoint& axis_u,
                                  const ParamPoint& axis_v) {
    const size_t P = center.size();
    if (axis_u.size() != P || axis_v.size() != P)
        throw InvalidParams("spanning_disc: axis dimension mismatch");
    SurfacePatch sp;
    sp.dim = static_cast<int>(P);
    sp.at = [=](double u, double v) {
        const double c = std::cos(two_pi * v), sn = std::sin(two_pi * v);
        ParamPoint z(P);
        for (size_t i = 0; i < P; ++i) z[i] = center[i] + u * (c * axis_u[i] + sn * axis_v[i]);
        return z;
    };
    sp.tangents = [=](double u, double v) {
        const double c = std::cos(two_pi * v), sn = std::sin(two_pi * v);
        ParamPoint du(P), dv(P);
        for (size_t i = 0; i < P; ++i) {
            du[i] = c * axis_u[i] + sn * axis_v[i];
            dv[i] = two_pi * u * (-sn * axis_u[i] + c * axis_v[i]);
        }
        return std::array<ParamPoint, 2>{du, dv};
    };
    return sp;
}

// Max distance between the patch's u = 1 edge and the loop, sampled at n
// boundary points. Zero (to roundoff) when the patch actually spans the loop.
inline double boundary_mismatch(const SurfacePatch& patch, const LoopPath& loop, int n = 64) {
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
        const double s = static_cast<double>(k) / n;
        const ParamPoint a = patch.at(1.0, s);
        const ParamPoint b = loop.at(s);
        double d2 = 0.0;
        for (size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
        worst = std::max(worst, std::sqrt(d2));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Geometric angle routes.
//
// The drift of the instantaneous-chart angle under one slow traversal of a
// closed parameter loop is, per unit eigenindex-independent orbit,
//     loop integral of sum_mu <d_mu phi> d lambda_mu,
// and by Stokes' theorem equals the curvature flux through any spanning
// surface. Route 3 (slow dynamics + extrapolation) lives in dynamics.hpp.
// ---------------------------------------------------------------------------

// Line-integral route: periodic trapezoid over opts.loop_samples nodes of the
// averaged angle connection contracted with the loop velocity.
inline double hannay_angle_line(const HamiltonianFamily& fam, const LoopPath& loop, double action,
                                const EngineOptions& opts = {}) {
    if (loop.dim != fam.n_params())
        throw InvalidParams("hannay_angle_line: loop dimension != family parameter count");
    const int N = opts.loop_samples;
    std::vector<double> contrib(static_cast<size_t>(N), 0.0);
    parallel_for(N, opts.jobs, [&](int k) {
        const double s = static_cast<double>(k) / N;
        const ParamPoint lam = loop.at(s);
        const ParamPoint vel = loop.velocity(s);
        const std::vector<TangentSeries> tang = dlambda_series_all(fam, lam, action, opts);
        double acc = 0.0;
        for (int mu = 0; mu < fam.n_params(); ++mu) {
            if (vel[static_cast<size_t>(mu)] == 0.0) continue;
            acc += torus_average(tang[static_cast<size_t>(mu)].dphi) * vel[static_cast<size_t>(mu)];
        }
        contrib[static_cast<size_t>(k)] = acc;
    });
    double total = 0.0;
    for (const double c : contrib) total += c;
    return total / N;
}

// Surface route: Gauss-Legendre flux of the curvature two-form through the
// patch, sum_{mu<nu} F_mu_nu (d_u lambda_mu d_v lambda_nu - d_u lambda_nu
// d_v lambda_mu) du dv.
inline double hannay_angle_surface(const HamiltonianFamily& fam, const SurfacePatch& patch,
                                   double action, const EngineOptions& opts = {}) {
    if (patch.dim != fam.n_params())
        throw InvalidParams("hannay_angle_surface: patch dimension != family parameter count");
    const GaussLegendre gu(opts.quad_u), gv(opts.quad_v);
    const int P = fam.n_params();
    std::vector<double> row(static_cast<size_t>(opts.quad_u), 0.0);
    parallel_for(opts.quad_u, opts.jobs, [&](int i) {
        // map nodes from [-1, 1] to [0, 1]
        const double u = 0.5 * (gu.nodes()[static_cast<size_t>(i)] + 1.0);
        const double wu = 0.5 * gu.weights()[static_cast<size_t>(i)];
        double acc = 0.0;
        for (int j = 0; j < opts.quad_v; ++j) {
            const double v = 0.5 * (gv.nodes()[static_cast<size_t>(j)] + 1.0);
            const double wv = 0.5 * gv.weights()[static_cast<size_t>(j)];
            const ParamPoint lam = patch.at(u, v);
            const auto tan = patch.tangents(u, v);
            const CurvatureForm F = curvature_form(fam, lam, action, opts);
            double flux = 0.0;
            for (int mu = 0; mu < P; ++mu)
                for (int nu = mu + 1; nu < P; ++nu) {
                    const double jac = tan[0][static_cast<size_t>(mu)] * tan[1][static_cast<size_t>(nu)] -
                                       tan[0][static_cast<size_t>(nu)] * tan[1][static_cast<size_t>(mu)];
                    flux += F.entry(mu, nu) * jac;
                }
            acc += wu * wv * flux;
        }
        row[static_cast<size_t>(i)] = acc;
    });
    double total = 0.0;
    for (const double r : row) total += r;
    return total;
}

// Geometric phase factor picked up by the eigenindex-n mode for a given
// geometric angle drift.
inline std::complex<double> kvn_phase(double hannay_angle, int n) {
    return std::exp(std::complex<double>(0.0, -static_cast<double>(n) * hannay_angle));
}

// Diagonal connection entry for mode n in direction mu: -n <d_mu phi>. Its
// loop integral is -n times the geometric angle, i.e. the phase exponent.
inline double wz_diagonal_potential(const HamiltonianFamily& fam, const ParamPoint& lam,
                                    double action, int mu, int n,
                                    const EngineOptions& opts = {}) {
    return -static_cast<double>(n) * dphi_dlambda_avg(fam, lam, action, mu, opts);
}

}  // namespace holonomy
