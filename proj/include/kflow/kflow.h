#ifndef KFLOW_H
#define KFLOW_H

/* C interface to the kflow control library.
 *
 * Every entry point returns 0 on success or a nonzero status:
 *   2  invalid configuration or arguments
 *   3  numerical divergence
 *   4  I/O or file-format failure
 * kf_last_error() returns a message for the most recent failure on the
 * calling thread; the pointer stays valid until the next kflow call on
 * that thread. Output files are written atomically (temp + rename).
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

const char* kf_version(void);
const char* kf_last_error(void);

/* Plant physics plus run settings. Fill with kf_sim_params_defaults()
 * (the published scenario) and override fields as needed. */
typedef struct kf_sim_params {
    double lambda, mu, q;
    double m[4];      /* true couplings */
    double m_bar[4];  /* estimate bounds */
    double rho[4];    /* adaptation gains */
    double m_hat0[4]; /* initial estimates */
    double dx, dt, t_end;
    double lyap_a, lyap_b;
} kf_sim_params;

void kf_sim_params_defaults(kf_sim_params* p);

/* Solves the kernel equations for n parameter draws inside bounds
 * (lo0,hi0,...,lo3,hi3) and writes manifest.json + samples.bin into
 * out_dir. Only the physics fields of params are read. */
int kf_gen_data(const kf_sim_params* params, int n, double dx, const double bounds[8],
                unsigned long long seed, const char* out_dir);

/* Trains a kernel surrogate ("alpha" or "beta") on a generated dataset and
 * writes the model JSON to out_model and per-epoch losses to out_loss_csv
 * (NULL skips the loss file). batch <= 0 trains full-batch. */
int kf_train(const char* data_dir, const char* kernel, int hidden, int p, int epochs,
             double lr, int decay_every, double decay_factor, int batch,
             unsigned long long seed, const char* out_model, const char* out_loss_csv);

/* Runs the closed loop and writes the trace CSV. mode is "numerical" or
 * "neural"; the model paths are required only for neural mode. Returns 3
 * and writes the partial trace if the state diverges. */
int kf_simulate(const kf_sim_params* params, const char* mode, const char* model_alpha,
                const char* model_beta, const char* out_trace_csv);

/* Times numerical vs neural kernel production over closed-loop runs of
 * `steps` control steps per dx and writes dx,numerical_s,neural_s,speedup,
 * time_avg_error rows. Only the physics fields of params are read; dt is
 * 0.25 dx / max(lambda, mu) per run. */
int kf_bench(const kf_sim_params* params, const double* dx_list, int n_dx, int steps,
             const char* model_alpha, const char* model_beta, const char* out_csv);

/* Summarizes a trace CSV. Writes JSON to out_json_path unless it is NULL;
 * if json_text is non-NULL it receives a thread-local copy of the JSON. */
int kf_report(const char* trace_csv, const char* out_json_path, const char** json_text);

/* Direct surrogate evaluation. */
typedef struct kf_model kf_model;

kf_model* kf_model_load(const char* path); /* NULL on failure, see kf_last_error */
void kf_model_free(kf_model* model);

/* Evaluates the surrogate at n_points (x, xi) pairs for the given
 * parameter vector; out receives n_points values. */
int kf_model_eval(const kf_model* model, const double params[4], const double* xy_pairs,
                  int n_points, double* out);

/* kernel_out (>= 8 bytes) receives "alpha" or "beta"; any output pointer
 * may be NULL. */
int kf_model_info(const kf_model* model, char* kernel_out, int* hidden, int* p, double* dx);

#ifdef __cplusplus
}
#endif

#endif /* KFLOW_H */
