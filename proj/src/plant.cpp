#include "plant.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace kflow {

void plant_config::validate() const {
    if (!(lambda > 0.0)) throw config_error("lambda must be positive");
    if (!(mu > 0.0)) throw config_error("mu must be positive");
    for (int i = 0; i < 4; ++i) {
        if (!(m_bar[i] > 0.0)) throw config_error("m_bar must be positive");
        if (std::abs(m[i]) > m_bar[i])
            throw config_error("true parameter m" + std::to_string(i + 1) +
                               " exceeds its bound");
        if (!(rho[i] > 0.0)) throw config_error("rho must be positive");
    }
}

void check_cfl(const plant_config& cfg, double dt, double dx) {
    if (cfg.lambda * dt / dx > 1.0 + 1e-12)
        throw config_error("CFL violation for speed lambda");
    if (cfg.mu * dt / dx > 1.0 + 1e-12)
        throw config_error("CFL violation for speed mu");
}

field_pair step_plant(const field_pair& state, const plant_config& cfg, double U, double dt) {
    const spatial_grid g = state.psi.grid;
    if (state.phi.grid != g) throw config_error("step_plant: grid mismatch");
    check_cfl(cfg, dt, g.dx);

    const int n = g.n_points;
    const double cl = cfg.lambda * dt / g.dx;
    const double cm = cfg.mu * dt / g.dx;
    const auto& psi = state.psi.values;
    const auto& phi = state.phi.values;

    field_pair out(g);
    for (int k = 1; k < n; ++k)
        out.psi[k] = psi[k] - cl * (psi[k] - psi[k - 1]) +
                     dt * (cfg.m[0] * psi[k] + cfg.m[1] * phi[k]);
    for (int k = 0; k < n - 1; ++k)
        out.phi[k] = phi[k] + cm * (phi[k + 1] - phi[k]) +
                     dt * (cfg.m[2] * psi[k] + cfg.m[3] * phi[k]);
    out.phi[n - 1] = U;
    out.psi[0] = cfg.q * out.phi[0];

    check_finite(out.psi, "step_plant psi");
    check_finite(out.phi, "step_plant phi");
    return out;
}

}  // namespace kflow
