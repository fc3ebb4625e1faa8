#include "kflow/kflow.h"

#include <cstring>
#include <exception>
#include <string>

#include "errors.hpp"
#include "io.hpp"
#include "loop.hpp"

namespace {

thread_local std::string g_error;
thread_local std::string g_json;

int fail(int code, const std::string& message) {
    g_error = message;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const kflow::config_error& e) {
        return fail(2, e.what());
    } catch (const kflow::divergence_error& e) {
        return fail(3, e.what());
    } catch (const kflow::io_error& e) {
        return fail(4, e.what());
    } catch (const std::exception& e) {
        return fail(4, e.what());
    }
}

kflow::plant_config plant_from(const kf_sim_params& p) {
    kflow::plant_config cfg;
    cfg.lambda = p.lambda;
    cfg.mu = p.mu;
    cfg.q = p.q;
    for (int i = 0; i < 4; ++i) {
        cfg.m[static_cast<std::size_t>(i)] = p.m[i];
        cfg.m_bar[static_cast<std::size_t>(i)] = p.m_bar[i];
        cfg.rho[static_cast<std::size_t>(i)] = p.rho[i];
    }
    return cfg;
}

const std::string trace_header =
    "t,psi_norm,phi_norm,U,m1_hat,m2_hat,m3_hat,m4_hat,e_hat_norm,tau_hat_norm,"
    "kerr_alpha,kerr_beta,V11,r_left,r_right";

void write_trace_csv(const kflow::sim_trace& trace, const std::string& path) {
    std::vector<std::vector<double>> rows;
    rows.reserve(trace.t.size());
    for (std::size_t r = 0; r < trace.t.size(); ++r)
        rows.push_back({trace.t[r], trace.psi_norm[r], trace.phi_norm[r], trace.U[r],
                        trace.m_hat[0][r], trace.m_hat[1][r], trace.m_hat[2][r],
                        trace.m_hat[3][r], trace.e_hat_norm[r], trace.tau_hat_norm[r],
                        trace.kerr_alpha[r], trace.kerr_beta[r], trace.v11[r],
                        trace.r_left[r], trace.r_right[r]});
    kflow::write_csv(path, trace_header, rows);
}

}  // namespace

extern "C" {

struct kf_model {
    kflow::deeponet_model model;
};

const char* kf_version(void) { return "kflow 1.0.0"; }

const char* kf_last_error(void) { return g_error.c_str(); }

void kf_sim_params_defaults(kf_sim_params* p) {
    if (!p) return;
    p->lambda = 1.0;
    p->mu = 1.0;
    p->q = 1.0;
    const double m[4] = {0.4, 0.6, 1.0, 0.8};
    for (int i = 0; i < 4; ++i) {
        p->m[i] = m[i];
        p->m_bar[i] = 4.0;
        p->rho[i] = 40.0;
        p->m_hat0[i] = 0.4;
    }
    p->dx = 0.02;
    p->dt = 0.005;
    p->t_end = 10.0;
    p->lyap_a = 2.0;
    p->lyap_b = 2.0;
}

int kf_gen_data(const kf_sim_params* params, int n, double dx, const double bounds[8],
                unsigned long long seed, const char* out_dir) {
    if (!params || !bounds || !out_dir) return fail(2, "kf_gen_data: null argument");
    return guarded([&] {
        std::array<std::array<double, 2>, 4> b{};
        for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = {bounds[2 * i], bounds[2 * i + 1]};
        const kflow::triangle_grid tri(kflow::spatial_grid::from_dx(dx));
        kflow::physics_triplet ph{params->lambda, params->mu, params->q};
        const kflow::kernel_dataset data = kflow::generate_dataset(n, b, tri, ph, seed);
        kflow::save_dataset(data, out_dir);
        return 0;
    });
}

int kf_train(const char* data_dir, const char* kernel, int hidden, int p, int epochs,
             double lr, int decay_every, double decay_factor, int batch,
             unsigned long long seed, const char* out_model, const char* out_loss_csv) {
    if (!data_dir || !kernel || !out_model) return fail(2, "kf_train: null argument");
    return guarded([&] {
        const kflow::kernel_dataset data = kflow::load_dataset(data_dir);
        kflow::deeponet_model model =
            kflow::make_model(kernel, hidden, p, data.tri.base.dx, seed);
        kflow::train_config cfg;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.decay_every = decay_every;
        cfg.decay_factor = decay_factor;
        cfg.batch = batch;
        cfg.seed = seed;
        const kflow::loss_history hist = kflow::train(model, data, cfg);
        kflow::save_model(model, out_model);
        if (out_loss_csv) {
            std::vector<std::vector<double>> rows;
            rows.reserve(hist.train_mse.size());
            for (std::size_t e = 0; e < hist.train_mse.size(); ++e)
                rows.push_back({static_cast<double>(e), hist.train_mse[e], hist.test_mse[e]});
            kflow::write_csv(out_loss_csv, "epoch,train_mse,test_mse", rows);
        }
        return 0;
    });
}

int kf_simulate(const kf_sim_params* params, const char* mode, const char* model_alpha,
                const char* model_beta, const char* out_trace_csv) {
    if (!params || !mode || !out_trace_csv) return fail(2, "kf_simulate: null argument");
    return guarded([&] {
        const std::string mode_s = mode;
        if (mode_s != "numerical" && mode_s != "neural")
            throw kflow::config_error("mode must be numerical or neural, got " + mode_s);
        kflow::sim_config cfg;
        cfg.plant = plant_from(*params);
        cfg.dx = params->dx;
        cfg.dt = params->dt;
        cfg.t_end = params->t_end;
        for (int i = 0; i < 4; ++i) cfg.m_hat0[static_cast<std::size_t>(i)] = params->m_hat0[i];
        cfg.lyap_a = params->lyap_a;
        cfg.lyap_b = params->lyap_b;
        const kflow::triangle_grid tri(kflow::spatial_grid::from_dx(cfg.dx));
        std::unique_ptr<kflow::kernel_provider> provider;
        if (mode_s == "numerical") {
            provider = kflow::make_numerical_provider(cfg.plant.lambda, cfg.plant.mu,
                                                      cfg.plant.q, tri);
        } else {
            if (!model_alpha || !model_beta)
                throw kflow::config_error("neural mode needs --model-alpha and --model-beta");
            provider = kflow::make_neural_provider(kflow::load_model(model_alpha),
                                                   kflow::load_model(model_beta), tri);
        }
        const kflow::sim_trace trace = kflow::run_closed_loop(cfg, *provider);
        write_trace_csv(trace, out_trace_csv);
        if (trace.abort_index >= 0)
            return fail(3, "simulation diverged at step " + std::to_string(trace.abort_index) +
                               "; partial trace written");
        return 0;
    });
}

int kf_bench(const kf_sim_params* params, const double* dx_list, int n_dx, int steps,
             const char* model_alpha, const char* model_beta, const char* out_csv) {
    if (!params || !dx_list || !model_alpha || !model_beta || !out_csv)
        return fail(2, "kf_bench: null argument");
    if (n_dx < 1) return fail(2, "kf_bench: empty dx list");
    return guarded([&] {
        const std::vector<double> dxs(dx_list, dx_list + n_dx);
        const std::vector<kflow::bench_row> rows =
            kflow::run_bench(dxs, steps, kflow::load_model(model_alpha),
                             kflow::load_model(model_beta), plant_from(*params));
        std::vector<std::vector<double>> out;
        out.reserve(rows.size());
        for (const auto& r : rows)
            out.push_back({r.dx, r.numerical_seconds, r.neural_seconds, r.speedup,
                           r.time_avg_error});
        kflow::write_csv(out_csv, "dx,numerical_s,neural_s,speedup,time_avg_error", out);
        return 0;
    });
}

int kf_report(const char* trace_csv, const char* out_json_path, const char** json_text) {
    if (!trace_csv) return fail(2, "kf_report: null trace path");
    return guarded([&] {
        const kflow::trace_summary s = kflow::summarize_trace_csv(trace_csv);
        g_json = kflow::summary_to_json(s);
        if (out_json_path) kflow::write_file_atomic(out_json_path, g_json);
        if (json_text) *json_text = g_json.c_str();
        return 0;
    });
}

kf_model* kf_model_load(const char* path) {
    if (!path) {
        fail(2, "kf_model_load: null path");
        return nullptr;
    }
    kf_model* handle = nullptr;
    guarded([&] {
        handle = new kf_model{kflow::load_model(path)};
        return 0;
    });
    return handle;
}

void kf_model_free(kf_model* model) { delete model; }

int kf_model_eval(const kf_model* model, const double params[4], const double* xy_pairs,
                  int n_points, double* out) {
    if (!model || !params || !xy_pairs || !out) return fail(2, "kf_model_eval: null argument");
    if (n_points < 1) return fail(2, "kf_model_eval: need at least one point");
    return guarded([&] {
        std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n_points));
        for (int i = 0; i < n_points; ++i)
            pts[static_cast<std::size_t>(i)] = {xy_pairs[2 * i], xy_pairs[2 * i + 1]};
        const std::array<double, 4> m{params[0], params[1], params[2], params[3]};
        const std::vector<double> values = kflow::forward(model->model, m, pts);
        std::memcpy(out, values.data(), values.size() * sizeof(double));
        return 0;
    });
}

int kf_model_info(const kf_model* model, char* kernel_out, int* hidden, int* p, double* dx) {
    if (!model) return fail(2, "kf_model_info: null model");
    if (kernel_out) {
        std::strncpy(kernel_out, model->model.kernel_name.c_str(), 7);
        kernel_out[7] = '\0';
    }
    if (hidden) *hidden = model->model.hidden;
    if (p) *p = model->model.p;
    if (dx) *dx = model->model.dx;
    return 0;
}

}  // extern "C"
