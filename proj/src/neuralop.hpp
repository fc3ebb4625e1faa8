#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "field.hpp"
#include "kernel.hpp"

namespace kflow {

// Deterministic uniform stream: raw mt19937_64 words scaled by hand, since
// std::uniform_real_distribution output is implementation-defined.
struct rng_stream {
    std::mt19937_64 engine;
    explicit rng_stream(std::uint64_t seed) : engine(seed) {}
    double next_unit();                       // [0, 1), 53-bit resolution
    double next_uniform(double lo, double hi);
};

struct mlp_layer {
    int in = 0, out = 0;
    std::vector<double> w;  // row-major [out x in]
    std::vector<double> b;  // [out]
};

struct mlp {
    std::array<mlp_layer, 3> layers;  // in -> H -> H -> out, tanh on hidden
};

struct deeponet_model {
    mlp branch;  // 4 -> H -> H -> p
    mlp trunk;   // 2 -> H -> H -> p
    double bias0 = 0.0;
    int p = 0;
    int hidden = 0;
    std::string activation = "tanh";
    std::array<double, 4> scaling{};  // input divisors for the parameters
    std::string kernel_name;          // "alpha" | "beta"
    double dx = 0.0;                  // training grid spacing
    std::uint64_t seed = 0;
};

deeponet_model make_model(const std::string& kernel_name, int hidden, int p,
                          double dx, std::uint64_t seed);

// Branch once, trunk per point, p-term dot product plus bias0.
std::vector<double> forward(const deeponet_model& model, const std::array<double, 4>& params,
                            const std::vector<std::array<double, 2>>& points);

struct physics_triplet {
    double lambda = 1.0, mu = 1.0, q = 1.0;
};

struct kernel_dataset {
    triangle_grid tri;
    std::array<std::array<double, 2>, 4> bounds{};
    std::uint64_t seed = 0;
    int n_samples = 0;
    int n_train = 0;  // deterministic 9:1 split by index
    physics_triplet physics;
    std::vector<double> params;  // [n x 4]
    std::vector<double> alpha;   // [n x M] ragged triangles, M = node count
    std::vector<double> beta;    // [n x M]
};

kernel_dataset generate_dataset(int n, const std::array<std::array<double, 2>, 4>& bounds,
                                const triangle_grid& tri, const physics_triplet& physics,
                                std::uint64_t seed);

struct train_config {
    int epochs = 2000;
    double lr = 1e-3;
    int decay_every = 100;
    double decay_factor = 0.5;
    int batch = 0;  // 0 = full batch
    std::uint64_t seed = 0;
    double target_loss = 0.0;  // 0 = run all epochs
};

struct loss_history {
    std::vector<double> train_mse;  // per epoch, normalized target scale
    std::vector<double> test_mse;
    double target_scale = 1.0;      // divisor folded back into the model
};

// Full-gradient MSE objective for a sample batch; used by the trainer and
// by the finite-difference gradient check. Parameter order of the flat
// gradient: branch layers 1..3 (w then b each), trunk layers, bias0.
double loss_and_gradient(const deeponet_model& model, const std::vector<double>& params_scaled,
                         int n_samples, const std::vector<std::array<double, 2>>& points,
                         const std::vector<double>& targets, std::vector<double>& grad);

std::size_t parameter_count(const deeponet_model& model);
void flatten_parameters(const deeponet_model& model, std::vector<double>& out);
void unflatten_parameters(deeponet_model& model, const std::vector<double>& flat);

// Adam with step-decayed learning rate; minibatches are drawn by a seeded
// shuffle with fixed in-batch accumulation order, so results are
// deterministic for a given config. Targets are regressed on a normalized
// scale (divisor = max |train target|) that is folded back into the output
// layer on return, so the trained model emits raw kernel values.
loss_history train(deeponet_model& model, const kernel_dataset& data, const train_config& cfg);

// Surrogate kernels over the full triangle (no boundary-rule enforcement).
kernel_pair kernel_grid_from_model(const deeponet_model& model_alpha,
                                   const deeponet_model& model_beta,
                                   const std::array<double, 4>& params,
                                   const triangle_grid& tri);

// Trunk outputs cached per grid: full triangle stored basis-major [p x M]
// for streaming accumulation, the x = 1 row node-major [n x p].
// Input-independent, computed once at provider setup.
struct trunk_basis {
    int p = 0;
    std::vector<double> full;
    std::vector<double> boundary;
};

trunk_basis make_trunk_basis(const deeponet_model& model, const triangle_grid& tri);

void branch_coefficients(const deeponet_model& model, const std::array<double, 4>& params,
                         std::vector<double>& g);

void combine_row(const trunk_basis& basis, const std::vector<double>& g, double bias0,
                 int n, double* out);
void combine_full(const trunk_basis& basis, const std::vector<double>& g, double bias0,
                  std::size_t m, double* out);

void save_model(const deeponet_model& model, const std::string& path);
deeponet_model load_model(const std::string& path);

void save_dataset(const kernel_dataset& data, const std::string& dir);
kernel_dataset load_dataset(const std::string& dir);

std::vector<std::array<double, 2>> triangle_points(const triangle_grid& tri);

int worker_threads();  // KF_THREADS cap, default hardware concurrency

}  // namespace kflow
