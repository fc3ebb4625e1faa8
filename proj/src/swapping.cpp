#include "swapping.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace kflow {

void filter_bank::apply_inflow(double phi0, double U) {
    n1[0] = 0.0;
    n2[0] = 0.0;
    n3[0] = phi0;
    const int last = z1.size() - 1;
    z1[last] = 0.0;
    z2[last] = 0.0;
    z3[last] = U;
}

namespace {

// Same stencils as step_plant; the estimate identities cancel exactly only
// if plant and filters share them.
void upwind_right(const field& u, const field* src, double c, double dt, double bc,
                  field& out) {
    const int n = u.size();
    for (int k = 1; k < n; ++k)
        out[k] = u[k] - c * (u[k] - u[k - 1]) + (src ? dt * (*src)[k] : 0.0);
    out[0] = bc;
}

void upwind_left(const field& u, const field* src, double c, double dt, double bc,
                 field& out) {
    const int n = u.size();
    for (int k = 0; k < n - 1; ++k)
        out[k] = u[k] + c * (u[k + 1] - u[k]) + (src ? dt * (*src)[k] : 0.0);
    out[n - 1] = bc;
}

double dot_trapezoid(const field& a, const field& b) {
    const int n = a.size();
    double s = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
    for (int k = 1; k < n - 1; ++k) s += a[k] * b[k];
    return s * a.grid.dx;
}

}  // namespace

filter_bank step_filters(const filter_bank& bank, const field_pair& state, double U,
                         const plant_config& cfg, double dt) {
    const spatial_grid g = state.psi.grid;
    if (bank.n1.grid != g) throw config_error("step_filters: grid mismatch");
    check_cfl(cfg, dt, g.dx);

    const double cl = cfg.lambda * dt / g.dx;
    const double cm = cfg.mu * dt / g.dx;
    const int n = g.n_points;

    // n3 inflow carries the plant's updated phi(0); reproduce step_plant's
    // k = 0 update so the estimate boundary identity holds exactly.
    const double phi0_new = state.phi[0] + cm * (state.phi[1] - state.phi[0]) +
                            dt * (cfg.m[2] * state.psi[0] + cfg.m[3] * state.phi[0]);

    filter_bank out(g);
    upwind_right(bank.n1, &state.psi, cl, dt, 0.0, out.n1);
    upwind_right(bank.n2, &state.phi, cl, dt, 0.0, out.n2);
    upwind_right(bank.n3, nullptr, cl, dt, phi0_new, out.n3);
    upwind_left(bank.z1, &state.psi, cm, dt, 0.0, out.z1);
    upwind_left(bank.z2, &state.phi, cm, dt, 0.0, out.z2);
    upwind_left(bank.z3, nullptr, cm, dt, U, out.z3);

    check_finite(out.n1, "step_filters n1");
    check_finite(out.n2, "step_filters n2");
    check_finite(out.n3, "step_filters n3");
    check_finite(out.z1, "step_filters z1");
    check_finite(out.z2, "step_filters z2");
    check_finite(out.z3, "step_filters z3");
    (void)n;
    return out;
}

void estimates(const filter_bank& bank, const param_estimate& est, double q,
               field& psi_hat, field& phi_hat) {
    const int n = bank.n1.size();
    psi_hat = field(bank.n1.grid);
    phi_hat = field(bank.n1.grid);
    for (int k = 0; k < n; ++k) {
        psi_hat[k] = est.m_hat[0] * bank.n1[k] + est.m_hat[1] * bank.n2[k] +
                     q * bank.n3[k];
        phi_hat[k] = est.m_hat[2] * bank.z1[k] + est.m_hat[3] * bank.z2[k] +
                     bank.z3[k];
    }
}

double projection(double theta, double m_hat_i, double m_bar_i) {
    if (std::abs(m_hat_i) >= m_bar_i && theta * m_hat_i >= 0.0) return 0.0;
    return theta;
}

param_estimate step_adaptive_law(const filter_bank& bank, const error_fields& err,
                                 const param_estimate& est,
                                 const std::array<double, 4>& rho, double dt) {
    const double nn1 = l2_norm(bank.n1), nn2 = l2_norm(bank.n2), nn3 = l2_norm(bank.n3);
    const double nz1 = l2_norm(bank.z1), nz2 = l2_norm(bank.z2);
    const double den_n = 1.0 + nn1 * nn1 + nn2 * nn2 + nn3 * nn3;
    const double den_z = 1.0 + nz1 * nz1 + nz2 * nz2;
    const double z10 = bank.z1[0], z20 = bank.z2[0];
    const double den_z0 = 1.0 + z10 * z10 + z20 * z20;
    const double tau0 = err.tau_hat[0];

    const double theta[4] = {
        rho[0] * dot_trapezoid(bank.n1, err.e_hat) / den_n,
        rho[1] * dot_trapezoid(bank.n2, err.e_hat) / den_n,
        rho[2] * (dot_trapezoid(bank.z1, err.tau_hat) / den_z + z10 * tau0 / den_z0),
        rho[3] * (dot_trapezoid(bank.z2, err.tau_hat) / den_z + z20 * tau0 / den_z0),
    };

    param_estimate out = est;
    for (int i = 0; i < 4; ++i) {
        const double rate = projection(theta[i], est.m_hat[i], est.bounds[i]);
        out.m_hat[i] = std::clamp(est.m_hat[i] + dt * rate, -est.bounds[i], est.bounds[i]);
    }
    return out;
}

error_fields prediction_errors(const field_pair& state, const field& psi_hat,
                               const field& phi_hat) {
    if (psi_hat.grid != state.psi.grid)
        throw config_error("prediction_errors: grid mismatch");
    const int n = state.psi.size();
    error_fields out;
    out.e_hat = field(state.psi.grid);
    out.tau_hat = field(state.psi.grid);
    for (int k = 0; k < n; ++k) {
        out.e_hat[k] = state.psi[k] - psi_hat[k];
        out.tau_hat[k] = state.phi[k] - phi_hat[k];
    }
    return out;
}

}  // namespace kflow
