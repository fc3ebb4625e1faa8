#pragma once

// Shared trained-surrogate fixtures. Training is expensive, so each corpus
// and model pair is built lazily on first use and reused across test files
// within one binary. Recipes are frozen; the assertions that consume them
// pin the resulting accuracy.

#include <array>

#include "loop.hpp"
#include "neuralop.hpp"

namespace fixtures {

inline kflow::triangle_grid desk_triangle() {
    return kflow::triangle_grid(kflow::spatial_grid::from_dx(0.05));
}

inline std::array<std::array<double, 2>, 4> box(double lo, double hi) {
    return {{{lo, hi}, {lo, hi}, {lo, hi}, {lo, hi}}};
}

// Broad coverage corpus: couplings across the full training box.
inline const kflow::kernel_dataset& wide_dataset() {
    static const kflow::kernel_dataset d =
        kflow::generate_dataset(200, box(-4.0, 4.0), desk_triangle(), {1.0, 1.0, 1.0}, 7);
    return d;
}

// Corpus concentrated on the region the adaptive estimates actually visit.
inline const kflow::kernel_dataset& operating_dataset() {
    static const kflow::kernel_dataset d =
        kflow::generate_dataset(200, box(-1.5, 1.5), desk_triangle(), {1.0, 1.0, 1.0}, 7);
    return d;
}

struct trained_model {
    kflow::deeponet_model model;
    kflow::loss_history history;
};

inline trained_model train_on(const kflow::kernel_dataset& data, const char* kernel, int hidden,
                              int p, int epochs, int decay_every, double decay_factor, int batch,
                              std::uint64_t seed) {
    trained_model t{kflow::make_model(kernel, hidden, p, data.tri.base.dx, seed), {}};
    kflow::train_config cfg;
    cfg.epochs = epochs;
    cfg.lr = 1e-3;
    cfg.decay_every = decay_every;
    cfg.decay_factor = decay_factor;
    cfg.batch = batch;
    cfg.seed = seed;
    t.history = kflow::train(t.model, data, cfg);
    return t;
}

// Full-batch pair on the wide corpus; hits test MSE well under 1e-3.
inline const trained_model& wide_alpha() {
    static const trained_model t = train_on(wide_dataset(), "alpha", 64, 64, 2000, 150, 0.8, 0, 3);
    return t;
}
inline const trained_model& wide_beta() {
    static const trained_model t = train_on(wide_dataset(), "beta", 64, 64, 2000, 150, 0.8, 0, 4);
    return t;
}

// High-accuracy pair on the operating corpus; drives the closed loop.
inline const trained_model& desk_alpha() {
    static const trained_model t =
        train_on(operating_dataset(), "alpha", 96, 64, 4000, 250, 0.85, 45, 3);
    return t;
}
inline const trained_model& desk_beta() {
    static const trained_model t =
        train_on(operating_dataset(), "beta", 96, 64, 4000, 250, 0.85, 45, 4);
    return t;
}

// Small fast pair for timing comparisons.
inline const trained_model& speed_alpha() {
    static const trained_model t =
        train_on(operating_dataset(), "alpha", 16, 8, 2000, 250, 0.85, 45, 3);
    return t;
}
inline const trained_model& speed_beta() {
    static const trained_model t =
        train_on(operating_dataset(), "beta", 16, 8, 2000, 250, 0.85, 45, 4);
    return t;
}

}  // namespace fixtures
