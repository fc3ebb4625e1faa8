#pragma once

#include <array>

#include "kernel.hpp"

namespace kflow::testref {

// Independent reference for the kernel Goursat system at lambda = mu = 1:
// RK4 along the two characteristic families on a lattice `refine` times
// finer than tri, with Picard alternation between the coupled passes,
// sampled back onto tri's nodes.
kernel_pair reference_kernels(const std::array<double, 4>& m, double q,
                              const triangle_grid& tri, int refine);

// Control integral evaluated by composite Simpson on the refined x = 1
// kernel row with linearly interpolated states.
double reference_control(const std::array<double, 4>& m, double q, const field& psi_hat,
                         const field& phi_hat, int refine);

}  // namespace kflow::testref
