// Stationary Wigner ellipse of the linear-coupling model at a few points,
// next to the Born-Markov state at the same parameters.

#include <cstdio>

#include "lqbm/lqbm.hpp"

int main() {
    using namespace lqbm;
    std::printf("%6s %6s %6s | %9s %9s %9s %9s %9s | %9s\n", "g", "lam", "tau", "dx*dp", "dl2", "eta", "theta/pi",
                "chi", "BMME dxdp");
    const ModelParams points[] = {{0.1, 10, 1}, {0.8, 10, 0.5}, {0.8, 100, 1}, {0.8, 5, 0.05}, {0.5, 20, 4}};
    for (const ModelParams& p : points) {
        const LinearLmeCoefficients c = linear_lme_coefficients(p);
        const PhaseSpaceDiagnostics d = diagnose(stationary_gaussian(c), p.tau);
        const BmmeStationary b = bmme_stationary(c);
        std::printf("%6.2f %6.1f %6.2f | %9.5f %9.5f %9.5f %9.5f %9.5f | %9.5f%s\n", p.g, p.lam, p.tau, d.hup_product,
                    d.dl2, d.eta, d.theta ? *d.theta / std::numbers::pi : 0.0, d.chi, b.state.hup_product(),
                    b.hup_violation ? "  (violates HUP)" : "");
    }
}
