#pragma once
#include <vector>

namespace holonomy {

// Numeric knobs shared across the engine. Steps marked "scaled" are applied
// as step * max(1, |x|) at the point of use.
struct EngineOptions {
    int angle_samples = 256;  // torus grid density for series fits and averages
    int fourier_M = 32;       // series truncation
    int n_max = 8;            // eigenindex band for matrix elements

    double trace_rtol = 1e-10;  // orbit tracing
    double trace_atol = 1e-12;
    double adiabatic_rtol = 1e-11;  // slow-drive runs
    double adiabatic_atol = 1e-13;

    double lambda_step = 1e-4;  // parameter stencil, scaled
    double action_step = 1e-4;  // action stencil, scaled
    double omega_floor = 1e-8;  // below this the torus is treated as degenerate

    double emodel_delta = 2e-3;  // energy model half-width, scaled
    int orbit_samples = 256;     // uniform-time samples kept per orbit
    double trace_t_max = 1e5;    // give up on closure beyond this time
    double closure_tol = 1e-7;   // relative return mismatch allowed

    int quad_u = 16, quad_v = 16;  // surface quadrature orders
    int loop_samples = 64;         // nodes along a parameter loop
    int phi0_count = 8;            // initial angles averaged per drive rate
    std::vector<double> epsilons{1e-2, 5e-3, 2.5e-3};
    double extrap_tol = 1e-3;  // max quadratic-vs-linear extrapolation gap
    int jobs = 1;
};

}  // namespace holonomy
