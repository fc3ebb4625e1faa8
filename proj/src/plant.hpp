#pragma once

#include <array>

#include "field.hpp"

namespace kflow {

struct plant_config {
    double lambda = 1.0;  // transport speed of psi (rightward)
    double mu = 1.0;      // transport speed of phi (leftward)
    double q = 1.0;       // reflection coefficient at x = 0
    std::array<double, 4> m{};      // true coupling coefficients
    std::array<double, 4> m_bar{};  // parameter bounds
    std::array<double, 4> rho{};    // adaptation gains

    void validate() const;
};

struct field_pair {
    field psi;
    field phi;

    field_pair() = default;
    explicit field_pair(spatial_grid g) : psi(g), phi(g) {}
};

void check_cfl(const plant_config& cfg, double dt, double dx);

// One explicit upwind step: interior update with sources at the old time
// level, then phi(1) = U, then psi(0) = q*phi(0) using the updated phi.
field_pair step_plant(const field_pair& state, const plant_config& cfg, double U, double dt);

}  // namespace kflow
