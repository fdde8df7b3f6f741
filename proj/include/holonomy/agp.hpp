#pragma once
#include <array>
#include <complex>
#include <vector>

#include "holonomy/actionangle.hpp"
#include "holonomy/quadrature.hpp"

namespace holonomy {

// Everything the matrix-element routes need at one (lambda, I): the coupling
// series dH/dlambda_mu on three neighbouring tori plus the frequencies there.
struct TorusFrame {
    ParamPoint lambda;
    double I0 = 0, h_I = 0;
    std::array<double, 3> omega{};  // at I0 - h_I, I0, I0 + h_I
    std::vector<SeriesStencil> dH;  // per parameter

    int n_params() const { return int(dH.size()); }
    double w() const { return omega[1]; }
    double domega_dI() const { return (omega[2] - omega[0]) / (2.0 * h_I); }
};

inline TorusFrame build_frame(const HamiltonianFamily& fam, const ParamPoint& lam, double I,
                              const EngineOptions& opts = {}) {
    fam.validate(lam);
    if (!(I > 0.0)) throw InvalidParams("action must be positive");
    TorusFrame fr;
    fr.lambda = lam;
    fr.I0 = I;
    fr.h_I = opts.action_step * std::max(1.0, std::abs(I));
    const int N = opts.angle_samples, P = fam.n_params();
    fr.dH.resize(P);
    const std::array<double, 3> levels{I - fr.h_I, I, I + fr.h_I};
    double e_guess = 0.0;
    for (int li = 0; li < 3; ++li) {
        const double Il = levels[li];
        std::vector<PhasePoint> zs(N);
        if (fam.has_analytic_maps()) {
            for (int j = 0; j < N; ++j) zs[j] = fam.torus_to_phase({Il, two_pi * j / N}, lam);
            fr.omega[li] = fam.frequency(Il, lam);
        } else {
            const TorusChart ch = build_chart(fam, lam, Il, opts, e_guess);
            for (int j = 0; j < N; ++j)
                zs[j] = chart_torus_to_phase(ch, {ch.I0, two_pi * j / N});
            fr.omega[li] = ch.omega;
            e_guess = ch.E0;
        }
        if (!(fr.omega[li] > opts.omega_floor))
            throw DegenerateFrequency("frame frequency below floor");
        for (int mu = 0; mu < P; ++mu) {
            AngleSeries s;
            {
                std::vector<double> f(N);
                for (int j = 0; j < N; ++j) f[j] = fam.dH_dlambda(mu, zs[j], lam);
                s = fit_series(f, opts.fourier_M, Il, lam);
            }
            auto& st = fr.dH[mu];
            (li == 0 ? st.lo : li == 1 ? st.mid : st.hi) = s;
            st.h_I = fr.h_I;
        }
    }
    return fr;
}

// ---------------------------------------------------------------------------
// gauge generator W_mu: the torus function whose canonical flow drags the
// chart along lambda_mu. W = -(1/w) * zero-mean antiderivative of dH/dlambda,
// so dI/dlambda = -dW/dphi exactly and dphi/dlambda = dW/dI up to a
// phi-independent gauge term.

struct GaugeGenerator {
    int mu = 0;
    SeriesStencil W;

    const AngleSeries& mid() const& { return W.mid; }
    AngleSeries mid() const&& { return W.mid; }  // keep temporaries safe to use
    AngleSeries dI() const { return di_derivative(W.lo, W.hi, W.h_I); }
};

inline GaugeGenerator gauge_generator(const TorusFrame& fr, int mu) {
    if (mu < 0 || mu >= fr.n_params()) throw InvalidParams("parameter index out of range");
    GaugeGenerator g;
    g.mu = mu;
    g.W.lo = scale(secular_free_antiderivative(fr.dH[mu].lo), -1.0 / fr.omega[0]);
    g.W.mid = scale(secular_free_antiderivative(fr.dH[mu].mid), -1.0 / fr.omega[1]);
    g.W.hi = scale(secular_free_antiderivative(fr.dH[mu].hi), -1.0 / fr.omega[2]);
    g.W.h_I = fr.h_I;
    return g;
}

// ---------------------------------------------------------------------------
// adiabatic gauge potential matrix elements in the drift eigenbasis
// e^{i n phi}/sqrt(2 pi), eigenvalue l_n = n w. Off-diagonal only; the
// zero-mean gauge makes the diagonal vanish identically.

enum class AgpRoute { generator, direct, timeavg };

struct AGPElement {
    int mu = 0, m = 0, n = 0;
    std::complex<double> value{0.0, 0.0};
    AgpRoute route = AgpRoute::generator;
};

// finite-time average of the Heisenberg-evolved coupling: the (m, n) element
// of (1/T) int_0^T dt int_0^t ds e^{-is L} (dL/dlambda) e^{is L}, integrated
// numerically with the running-Simpson rule
inline AGPElement agp_element_timeavg(const TorusFrame& fr, int mu, int m, int n, double T,
                                      int steps = 8192) {
    if (mu < 0 || mu >= fr.n_params()) throw InvalidParams("parameter index out of range");
    AGPElement el{mu, m, n, {0.0, 0.0}, AgpRoute::timeavg};
    const int k = m - n;
    if (k == 0) return el;
    if (!(T > 0.0) || steps < 8) throw InvalidParams("bad averaging window");
    const AngleSeries dHdI = di_derivative(fr.dH[mu].lo, fr.dH[mu].hi, fr.h_I);
    const std::complex<double> D = double(n) * dHdI.coeff(k);  // <m| d_mu L |n>
    const double b = double(n - m) * fr.w();                   // l_n - l_m
    const double h = T / steps;
    std::vector<std::complex<double>> f(steps + 1);
    for (int j = 0; j <= steps; ++j) {
        const double s = h * j;
        f[j] = D * std::complex<double>(std::cos(b * s), std::sin(b * s));
    }
    const auto inner = cumulative_simpson(f, h);
    const auto outer = cumulative_simpson(inner, h);
    el.value = outer.back() / T;
    return el;
}

inline AGPElement agp_element(const TorusFrame& fr, int mu, int m, int n,
                              AgpRoute route = AgpRoute::generator) {
    if (mu < 0 || mu >= fr.n_params()) throw InvalidParams("parameter index out of range");
    AGPElement el{mu, m, n, {0.0, 0.0}, route};
    const int k = m - n;
    if (k == 0) return el;
    switch (route) {
        case AgpRoute::generator: {
            const GaugeGenerator g = gauge_generator(fr, mu);
            el.value = -double(n) * g.dI().coeff(k);
            break;
        }
        case AgpRoute::direct: {
            const AngleSeries dHdI = di_derivative(fr.dH[mu].lo, fr.dH[mu].hi, fr.h_I);
            el.value = std::complex<double>(0.0, -1.0) * (double(n) / double(k)) * dHdI.coeff(k) /
                       fr.w();
            break;
        }
        case AgpRoute::timeavg:
            el = agp_element_timeavg(fr, mu, m, n, 100.0 / fr.w());
            break;
    }
    return el;
}

// diagonal of the geometric connection in this basis and gauge; the zero-mean
// generator makes it vanish identically, which downstream checks rely on
inline double berry_simon_diagonal(const TorusFrame& fr, int mu, int n) {
    const GaugeGenerator g = gauge_generator(fr, mu);
    return -double(n) * g.dI().coeff(0).real();
}

// ---------------------------------------------------------------------------
// finite-window diagnostics for the time-average route

// complex mean of the finite-T element over one beat period centered at T
inline std::complex<double> timeavg_window_mean(const TorusFrame& fr, int mu, int m, int n,
                                                double T, int window_samples = 16,
                                                int steps = 8192) {
    if (m == n) return {0.0, 0.0};
    const double b = std::abs(double(n - m)) * fr.w();
    std::complex<double> acc = 0.0;
    for (int j = 0; j < window_samples; ++j) {
        const double tau = T - M_PI / b + (two_pi / b) * j / (window_samples - 1);
        acc += agp_element_timeavg(fr, mu, m, n, tau, steps).value;
    }
    return acc / double(window_samples);
}

// mean absolute defect against the direct route over the same window; decays
// like 1/T, so halving T should roughly double it
inline double timeavg_window_error(const TorusFrame& fr, int mu, int m, int n, double T,
                                   int window_samples = 16, int steps = 8192) {
    const std::complex<double> ref = agp_element(fr, mu, m, n, AgpRoute::direct).value;
    const double b = std::abs(double(n - m)) * fr.w();
    double acc = 0.0;
    for (int j = 0; j < window_samples; ++j) {
        const double tau = T - M_PI / b + (two_pi / b) * j / (window_samples - 1);
        acc += std::abs(agp_element_timeavg(fr, mu, m, n, tau, steps).value - ref);
    }
    return acc / window_samples;
}

// 1/T -> 0 extrapolation from two window means an octave apart
inline std::complex<double> timeavg_richardson(const TorusFrame& fr, int mu, int m, int n,
                                               double T, int window_samples = 16,
                                               int steps = 8192) {
    const std::complex<double> a = timeavg_window_mean(fr, mu, m, n, T, window_samples, steps);
    const std::complex<double> b = timeavg_window_mean(fr, mu, m, n, 0.5 * T, window_samples, steps);
    return 2.0 * a - b;
}

}  // namespace holonomy
