#pragma once
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "holonomy/family.hpp"

namespace holonomy {

// Truncated Fourier series on the angle circle at fixed (I, lambda).
// Coefficients c_m = (1/2pi) int f e^{-im phi} dphi, m in [-M, M], so c_0 is
// the torus average. Real-valued series keep c_{-m} = conj(c_m).
struct AngleSeries {
    int M = 0;
    std::vector<std::complex<double>> c;  // index m + M
    double I = 0.0;
    ParamPoint lambda;
    double tail = 0.0;  // max |c_m| over M/2 < |m| <= M
    bool alias_warning = false;
    bool truncation_warning = false;

    AngleSeries() = default;
    explicit AngleSeries(int M_, double I_ = 0.0, ParamPoint lam = {})
        : M(M_), c(2 * M_ + 1, 0.0), I(I_), lambda(std::move(lam)) {}

    std::complex<double> coeff(int m) const {
        return std::abs(m) <= M ? c[m + M] : std::complex<double>(0.0);
    }
    std::complex<double>& at(int m) { return c[m + M]; }

    double eval(double phi) const {
        std::complex<double> acc = c[M];  // m = 0
        for (int m = 1; m <= M; ++m) {
            const std::complex<double> e(std::cos(m * phi), std::sin(m * phi));
            acc += c[M + m] * e + c[M - m] * std::conj(e);
        }
        return acc.real();
    }

    double eval_derivative(double phi) const {
        std::complex<double> acc = 0.0;
        for (int m = 1; m <= M; ++m) {
            const std::complex<double> e(std::cos(m * phi), std::sin(m * phi));
            const std::complex<double> im(0.0, double(m));
            acc += im * c[M + m] * e - im * c[M - m] * std::conj(e);
        }
        return acc.real();
    }

    double eval_derivative2(double phi) const {
        std::complex<double> acc = 0.0;
        for (int m = 1; m <= M; ++m) {
            const std::complex<double> e(std::cos(m * phi), std::sin(m * phi));
            const double w = -double(m) * double(m);
            acc += w * (c[M + m] * e + c[M - m] * std::conj(e));
        }
        return acc.real();
    }

    void record_tail() {
        tail = 0.0;
        double total = 0.0;
        for (int m = -M; m <= M; ++m) {
            const double a = std::abs(coeff(m));
            total += a;
            if (2 * std::abs(m) > M) tail = std::max(tail, a);
        }
        alias_warning = tail > 1e-8 * std::max(total, 1e-300);
    }
};

// DFT of real samples on the uniform grid phi_j = 2pi j / N. Needs
// N >= 2M + 2 so the band [-M, M] is alias-free up to the recorded tail.
inline AngleSeries fit_series(const std::vector<double>& f, int M, double I = 0.0,
                              ParamPoint lam = {}) {
    const int N = static_cast<int>(f.size());
    if (N < 2 * M + 2) throw InvalidParams("fit_series needs at least 2M + 2 samples");
    AngleSeries s(M, I, std::move(lam));
    for (int m = 0; m <= M; ++m) {
        std::complex<double> acc = 0.0;
        for (int j = 0; j < N; ++j) {
            const double a = two_pi * m * j / N;
            acc += f[j] * std::complex<double>(std::cos(a), -std::sin(a));
        }
        acc /= double(N);
        s.at(m) = acc;
        if (m > 0) s.at(-m) = std::conj(acc);
    }
    s.record_tail();
    return s;
}

inline AngleSeries derivative_phi(const AngleSeries& s) {
    AngleSeries r = s;
    for (int m = -s.M; m <= s.M; ++m) r.at(m) = std::complex<double>(0.0, double(m)) * s.coeff(m);
    return r;
}

// zero-mean antiderivative: a_m = c_m / (i m), a_0 = 0, so that
// d/dphi(output) = f - <f>
inline AngleSeries secular_free_antiderivative(const AngleSeries& s) {
    AngleSeries r = s;
    r.at(0) = 0.0;
    for (int m = -s.M; m <= s.M; ++m)
        if (m != 0) r.at(m) = s.coeff(m) / std::complex<double>(0.0, double(m));
    return r;
}

// scalar combinations, used by the I-stencil derivative
inline AngleSeries linear_combo(double a, const AngleSeries& A, double b, const AngleSeries& B) {
    if (A.M != B.M) throw InvalidParams("series truncations differ");
    AngleSeries r = A;
    for (int m = -A.M; m <= A.M; ++m) r.at(m) = a * A.coeff(m) + b * B.coeff(m);
    return r;
}

inline AngleSeries scale(const AngleSeries& A, double a) {
    AngleSeries r = A;
    for (auto& x : r.c) x *= a;
    return r;
}

// series of f(phi + delta)
inline AngleSeries shift_angle(const AngleSeries& s, double delta) {
    AngleSeries r = s;
    for (int m = -s.M; m <= s.M; ++m) {
        const std::complex<double> e(std::cos(m * delta), std::sin(m * delta));
        r.at(m) = s.coeff(m) * e;
    }
    return r;
}

// truncated convolution; mass pushed beyond M is recorded, not silently lost
inline AngleSeries product(const AngleSeries& A, const AngleSeries& B) {
    if (A.M != B.M) throw InvalidParams("series truncations differ");
    const int M = A.M;
    AngleSeries r(M, A.I, A.lambda);
    double lost = 0.0, kept = 0.0;
    for (int m = -2 * M; m <= 2 * M; ++m) {
        std::complex<double> acc = 0.0;
        const int klo = std::max(-M, m - M), khi = std::min(M, m + M);
        for (int k = klo; k <= khi; ++k) acc += A.coeff(k) * B.coeff(m - k);
        if (std::abs(m) <= M)
            r.at(m) = acc, kept += std::abs(acc);
        else
            lost += std::abs(acc);
    }
    r.record_tail();
    r.truncation_warning = lost > 1e-10 * std::max(kept, 1e-300);
    return r;
}

inline double torus_average(const AngleSeries& s) { return s.coeff(0).real(); }

// centered I-derivative of a coefficient table
inline AngleSeries di_derivative(const AngleSeries& lo, const AngleSeries& hi, double h_I) {
    AngleSeries r = linear_combo(0.5 / h_I, hi, -0.5 / h_I, lo);
    r.I = 0.5 * (lo.I + hi.I);
    return r;
}

// series for one quantity at three neighbouring actions, for d/dI
struct SeriesStencil {
    AngleSeries lo, mid, hi;
    double h_I = 0.0;
};

// {A, B} = dA/dphi dB/dI - dA/dI dB/dphi at the stencil midpoint. The
// ordering is fixed by dphi/dt = {phi, H} = dH/dI = w > 0.
inline AngleSeries poisson_bracket(const SeriesStencil& A, const SeriesStencil& B) {
    if (A.h_I != B.h_I) throw InvalidParams("stencil steps differ");
    const AngleSeries dA_phi = derivative_phi(A.mid);
    const AngleSeries dB_phi = derivative_phi(B.mid);
    const AngleSeries dA_I = di_derivative(A.lo, A.hi, A.h_I);
    const AngleSeries dB_I = di_derivative(B.lo, B.hi, B.h_I);
    AngleSeries r = linear_combo(1.0, product(dA_phi, dB_I), -1.0, product(dA_I, dB_phi));
    r.I = A.mid.I;
    r.lambda = A.mid.lambda;
    return r;
}

// Newton refinement of an extremum of the trig polynomial near theta0
inline double refine_extremum(const AngleSeries& s, double theta0) {
    double th = theta0;
    for (int it = 0; it < 60; ++it) {
        const double d1 = s.eval_derivative(th);
        const double d2 = s.eval_derivative2(th);
        if (!(std::abs(d2) > 0.0)) break;
        const double step = d1 / d2;
        th -= step;
        if (std::abs(step) < 1e-14) break;
    }
    return th;
}

}  // namespace holonomy
