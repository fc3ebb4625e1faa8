#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "neuralop.hpp"
#include "plant.hpp"
#include "swapping.hpp"

namespace kflow {

// Produces the kernel pair for the current parameter estimate. seconds()
// accumulates the wall-clock cost of kernel production only: the full
// numerical solve, or for the neural provider the branch passes plus the
// x = 1 row assembly consumed by the controller. Full-triangle surrogate
// materialization for diagnostics is not timed.
class kernel_provider {
  public:
    virtual ~kernel_provider() = default;
    virtual void refresh(const std::array<double, 4>& m_hat, kernel_pair& k) = 0;
    virtual kernel_provenance mode() const = 0;
    virtual const triangle_grid& triangle() const = 0;
    double seconds() const { return seconds_; }
    long calls() const { return calls_; }

  protected:
    double seconds_ = 0.0;
    long calls_ = 0;
};

std::unique_ptr<kernel_provider> make_numerical_provider(double lambda, double mu, double q,
                                                         const triangle_grid& tri);
std::unique_ptr<kernel_provider> make_neural_provider(deeponet_model model_alpha,
                                                      deeponet_model model_beta,
                                                      const triangle_grid& tri);

struct sim_config {
    plant_config plant;
    double dx = 0.02;
    double dt = 0.005;
    double t_end = 10.0;
    std::array<double, 4> m_hat0{0.4, 0.4, 0.4, 0.4};
    double filter_init = 2.0;
    double lyap_a = 2.0;
    double lyap_b = 2.0;
    // Empty means the published scenario: psi = 1, phi = 2 sin(10x) + 3.
    std::vector<double> psi0;
    std::vector<double> phi0;
};

struct sim_trace {
    std::vector<double> t;
    std::vector<double> psi_norm, phi_norm, U;
    std::array<std::vector<double>, 4> m_hat;
    std::vector<double> e_hat_norm, tau_hat_norm;  // adaptive prediction errors
    std::vector<double> kerr_alpha, kerr_beta;     // abs-mean kernel errors
    std::vector<double> v11;
    std::vector<double> r_left, r_right;
    std::vector<std::array<double, 11>> v;         // full Lyapunov vector per row
    std::vector<double> tri_err;                   // triangle-integral kernel error
    std::vector<double> e_norm, tau_norm;          // non-adaptive errors, true m
    std::vector<double> psi_final, phi_final;
    double provider_seconds = 0.0;
    long provider_calls = 0;
    int abort_index = -1;  // -1 = ran to completion
    double dt = 0.0;
};

sim_trace run_closed_loop(const sim_config& cfg, kernel_provider& provider);

struct lyapunov_weights {
    double a = 2.0, b = 2.0;
    std::array<double, 8> d{};
};

lyapunov_weights make_lyapunov_weights(double lambda, double mu, double q, double a = 2.0,
                                       double b = 2.0);

// V1..V3 = |n_i|^2 at weight e^{-ax}; V4..V6 = |z_i|^2 at e^{bx}; V7 = |f2|^2
// at e^{-ax}; V8 = |h2|^2 at e^{bx}; V9, V10 = the non-adaptive errors at the
// same pair; V11 = d-weighted combination.
std::array<double, 11> lyapunov_report(const filter_bank& bank, const field& f2, const field& h2,
                                       const field& e, const field& tau,
                                       const lyapunov_weights& w);

// r_left = f2(0) - q h2(0) - q tau_hat(0); r_right = h2(1) - (U_applied - U_hat).
std::array<double, 2> boundary_residuals(const field& f2, const field& h2, const field& tau_hat,
                                         double q, double u_applied, double u_hat);

// Plain means of |alpha - alpha_ref| and |beta - beta_ref| over the nodes.
std::array<double, 2> kernel_error_metrics(const kernel_pair& reference, const kernel_pair& k);

// Triangle integral of |alpha error| + |beta error| (the time-series metric).
double kernel_error_integral(const kernel_pair& reference, const kernel_pair& k);

// (1/T) integral in time of the per-step triangle metric.
double time_averaged_error(const sim_trace& trace);

struct trace_summary {
    int rows = 0;
    double t_end = 0.0;
    double final_psi_norm = 0.0, final_phi_norm = 0.0, final_u = 0.0;
    double max_dm_per_step_tail = 0.0;  // largest estimate move per step, t >= 8
    double max_r_left = 0.0, max_r_right = 0.0;
    double max_kerr_alpha = 0.0, max_kerr_beta = 0.0;
    double v11_initial = 0.0, v11_final = 0.0;
};

trace_summary summarize_trace_csv(const std::string& path);
std::string summary_to_json(const trace_summary& s);

struct bench_row {
    double dx = 0.0;
    double numerical_seconds = 0.0;
    double neural_seconds = 0.0;
    double speedup = 0.0;
    double time_avg_error = 0.0;
};

// 2000-step (configurable) closed-loop runs per dx at dt = cfl dx / max(lambda,
// mu); numerical and neural providers are timed on the identical scenario.
std::vector<bench_row> run_bench(const std::vector<double>& dx_list, int steps,
                                 const deeponet_model& model_alpha,
                                 const deeponet_model& model_beta, const plant_config& plant,
                                 double cfl = 0.25);

}  // namespace kflow
