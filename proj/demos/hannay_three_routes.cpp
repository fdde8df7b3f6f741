#include <cstdio>

#include "holonomy/dynamics.hpp"
#include "holonomy/holonomy.hpp"

// Computes the geometric angle of a tilted parameter loop three independent
// ways: integrating the averaged connection along the loop, integrating the
// curvature two-form over a spanning disc, and extrapolating slow-drive
// trajectories to the ideal-adiabatic limit. The three numbers agreeing is
// the core claim of the library.

using namespace holonomy;

int main() {
    GeneralizedOscillator fam;
    const ParamPoint center{1.5, 0.0, 1.5};
    const ParamPoint axis_u{0.3, 0.1, 0.0}, axis_v{0.0, 0.15, 0.3};
    const double I = 1.0;

    EngineOptions opts;
    opts.epsilons = {0.02, 0.01, 0.005};
    opts.phi0_count = 8;
    opts.jobs = 4;

    const LoopPath loop = circle_loop(center, axis_u, axis_v);
    const SurfacePatch patch = spanning_disc(center, axis_u, axis_v);

    const double line = hannay_angle_line(fam, loop, I, opts);
    const double surf = hannay_angle_surface(fam, patch, I, opts);
    std::printf("line route     %+.12f\n", line);
    std::printf("surface route  %+.12f\n", surf);

    std::printf("running %zu drive rates x %d start angles ...\n", opts.epsilons.size(),
                opts.phi0_count);
    const HannayExtrapolation hx = dynamical_hannay(fam, loop, I, opts);
    for (size_t k = 0; k < hx.epsilons.size(); ++k)
        std::printf("  eps=%-7g mean drift %+.9f  max action excursion %.2e\n", hx.epsilons[k],
                    hx.drift_mean[k], hx.I_excursion[k]);
    std::printf("dynamics route %+.12f (extrapolated)\n", hx.angle);

    std::printf("\nspread across routes: %.2e\n",
                std::max({std::abs(line - surf), std::abs(line - hx.angle),
                          std::abs(surf - hx.angle)}));
    for (const int n : {1, 2, 3}) {
        const auto ph = kvn_phase(line, n);
        std::printf("mode n=%d phase factor %+.9f %+.9fi\n", n, ph.real(), ph.imag());
    }
    return 0;
}
