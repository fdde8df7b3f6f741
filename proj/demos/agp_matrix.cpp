#include <cstdio>

#include "holonomy/agp.hpp"

// Prints the adiabatic-generator matrix elements of the oscillator family at
// a base point, comparing the generator route (Fourier data of the gauge
// generator) with the direct route (derivative couplings over the level
// spacing). Off-diagonal elements couple modes two apart; everything else
// vanishes for a quadratic Hamiltonian.

using namespace holonomy;

int main() {
    GeneralizedOscillator fam;
    const ParamPoint lam{1.0, 0.0, 1.0};
    const double I = 1.0;
    const EngineOptions opts;
    const TorusFrame fr = build_frame(fam, lam, I, opts);
    const char* dirn[3] = {"X", "Y", "Z"};

    std::printf("base point X=%g Y=%g Z=%g, I=%g, frequency %.6f\n", lam[0], lam[1], lam[2], I,
                fr.w());
    for (int mu = 0; mu < 3; ++mu) {
        std::printf("\nd/d%s coupling, modes -3..3\n", dirn[mu]);
        std::printf("%4s %4s  %-28s %-28s %s\n", "m", "n", "generator", "direct", "|gap|");
        for (int m = -3; m <= 3; ++m)
            for (int n = -3; n <= 3; ++n) {
                if (m == n) continue;
                const auto g = agp_element(fr, mu, m, n, AgpRoute::generator).value;
                const auto d = agp_element(fr, mu, m, n, AgpRoute::direct).value;
                if (std::abs(g) < 1e-12 && std::abs(d) < 1e-12) continue;
                std::printf("%4d %4d  %+.6f%+.6fi        %+.6f%+.6fi        %.1e\n", m, n,
                            g.real(), g.imag(), d.real(), d.imag(), std::abs(g - d));
            }
    }
    return 0;
}
