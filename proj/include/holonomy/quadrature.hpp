#pragma once
#include <cmath>
#include <stdexcept>
#include <vector>

#include "holonomy/errors.hpp"

namespace holonomy {

// Gauss-Legendre rule on [-1, 1]; nodes by Newton on P_n with the usual
// Chebyshev-based starting guesses.
class GaussLegendre {
  public:
    explicit GaussLegendre(int n) : x_(n), w_(n) {
        if (n < 2) throw InvalidParams("quadrature order must be >= 2");
        for (int i = 0; i < n; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            x_[i] = x;
            w_[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0.0;
        for (size_t i = 0; i < x_.size(); ++i) acc += w_[i] * f(mid + half * x_[i]);
        return half * acc;
    }

    const std::vector<double>& nodes() const { return x_; }
    const std::vector<double>& weights() const { return w_; }

  private:
    std::vector<double> x_, w_;
};

// Running integral F_j = int_0^{t_j} f dt for uniform samples, composite
// Simpson on even indices and the 3-point closed rule on odd ones.
template <class T>
std::vector<T> cumulative_simpson(const std::vector<T>& f, double h) {
    const size_t n = f.size();
    if (n < 3) throw InvalidParams("cumulative_simpson needs at least 3 samples");
    std::vector<T> F(n);
    F[0] = T(0);
    for (size_t j = 1; j < n; ++j) {
        if (j % 2 == 0) {
            F[j] = F[j - 2] + (h / 3.0) * (f[j - 2] + 4.0 * f[j - 1] + f[j]);
        } else if (j + 1 < n) {
            F[j] = F[j - 1] + (h / 12.0) * (5.0 * f[j - 1] + 8.0 * f[j] - f[j + 1]);
        } else {
            F[j] = F[j - 1] + (h / 12.0) * (-f[j - 2] + 8.0 * f[j - 1] + 5.0 * f[j]);
        }
    }
    return F;
}

}  // namespace holonomy
