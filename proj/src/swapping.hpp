#pragma once

#include <array>

#include "field.hpp"
#include "plant.hpp"

namespace kflow {

// Boundary parameter filters. n1..n3 transport rightward with speed lambda
// (sources psi, phi, 0; inflow n1(0)=n2(0)=0, n3(0)=phi(0)); z1..z3 transport
// leftward with speed mu (sources psi, phi, 0; inflow z1(1)=z2(1)=0, z3(1)=U).
struct filter_bank {
    field n1, n2, n3;
    field z1, z2, z3;

    filter_bank() = default;
    explicit filter_bank(spatial_grid g) : n1(g), n2(g), n3(g), z1(g), z2(g), z3(g) {}

    // Overwrites inflow nodes so the boundary relations hold on the
    // initial row as well (published constant initial data violates them).
    void apply_inflow(double phi0, double U);
};

struct param_estimate {
    std::array<double, 4> m_hat{};
    std::array<double, 4> bounds{};
};

struct error_fields {
    field e_hat;    // psi - psi_hat
    field tau_hat;  // phi - phi_hat
};

filter_bank step_filters(const filter_bank& bank, const field_pair& state, double U,
                         const plant_config& cfg, double dt);

// psi_hat = m1^ n1 + m2^ n2 + q n3 ; phi_hat = m3^ z1 + m4^ z2 + z3.
void estimates(const filter_bank& bank, const param_estimate& est, double q,
               field& psi_hat, field& phi_hat);

// Zeroes rate components that push an estimate outward at its bound.
double projection(double theta, double m_hat_i, double m_bar_i);

param_estimate step_adaptive_law(const filter_bank& bank, const error_fields& err,
                                 const param_estimate& est,
                                 const std::array<double, 4>& rho, double dt);

error_fields prediction_errors(const field_pair& state, const field& psi_hat,
                               const field& phi_hat);

}  // namespace kflow
