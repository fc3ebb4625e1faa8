#include "loop.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "errors.hpp"
#include "io.hpp"
#include "json.hpp"

namespace kflow {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

class numerical_provider final : public kernel_provider {
  public:
    numerical_provider(double lambda, double mu, double q, const triangle_grid& tri)
        : lambda_(lambda), mu_(mu), q_(q), tri_(tri) {}

    void refresh(const std::array<double, 4>& m_hat, kernel_pair& k) override {
        const auto t0 = clock_type::now();
        k = solve_kernels(m_hat, lambda_, mu_, q_, tri_);
        seconds_ += elapsed(t0);
        ++calls_;
    }

    kernel_provenance mode() const override { return kernel_provenance::numerical; }
    const triangle_grid& triangle() const override { return tri_; }

  private:
    double lambda_, mu_, q_;
    triangle_grid tri_;
};

class neural_provider final : public kernel_provider {
  public:
    neural_provider(deeponet_model ma, deeponet_model mb, const triangle_grid& tri)
        : ma_(std::move(ma)), mb_(std::move(mb)), tri_(tri) {
        if (ma_.kernel_name != "alpha" || mb_.kernel_name != "beta")
            throw config_error("neural provider needs an alpha model and a beta model");
        basis_a_ = make_trunk_basis(ma_, tri_);
        basis_b_ = make_trunk_basis(mb_, tri_);
        row_a_.resize(static_cast<std::size_t>(tri_.rows()));
        row_b_.resize(static_cast<std::size_t>(tri_.rows()));
    }

    void refresh(const std::array<double, 4>& m_hat, kernel_pair& k) override {
        const int n = tri_.rows();
        const auto t0 = clock_type::now();
        branch_coefficients(ma_, m_hat, ga_);
        branch_coefficients(mb_, m_hat, gb_);
        combine_row(basis_a_, ga_, ma_.bias0, n, row_a_.data());
        combine_row(basis_b_, gb_, mb_.bias0, n, row_b_.data());
        seconds_ += elapsed(t0);
        ++calls_;

        // Diagnostics triangle, excluded from production timing.
        if (k.alpha.grid != tri_) k.alpha = triangle_kernel_grid(tri_);
        if (k.beta.grid != tri_) k.beta = triangle_kernel_grid(tri_);
        k.provenance = kernel_provenance::neural;
        combine_full(basis_a_, ga_, ma_.bias0, tri_.node_count(), k.alpha.values.data());
        combine_full(basis_b_, gb_, mb_.bias0, tri_.node_count(), k.beta.values.data());
        std::memcpy(k.alpha.row(n - 1), row_a_.data(), static_cast<std::size_t>(n) * sizeof(double));
        std::memcpy(k.beta.row(n - 1), row_b_.data(), static_cast<std::size_t>(n) * sizeof(double));
    }

    kernel_provenance mode() const override { return kernel_provenance::neural; }
    const triangle_grid& triangle() const override { return tri_; }

  private:
    deeponet_model ma_, mb_;
    triangle_grid tri_;
    trunk_basis basis_a_, basis_b_;
    std::vector<double> ga_, gb_, row_a_, row_b_;
};

}  // namespace

std::unique_ptr<kernel_provider> make_numerical_provider(double lambda, double mu, double q,
                                                         const triangle_grid& tri) {
    return std::make_unique<numerical_provider>(lambda, mu, q, tri);
}

std::unique_ptr<kernel_provider> make_neural_provider(deeponet_model model_alpha,
                                                      deeponet_model model_beta,
                                                      const triangle_grid& tri) {
    return std::make_unique<neural_provider>(std::move(model_alpha), std::move(model_beta), tri);
}

lyapunov_weights make_lyapunov_weights(double lambda, double mu, double q, double a, double b) {
    if (!(a > 1.0) || !(b > 1.0)) throw config_error("Lyapunov exponents must exceed 1");
    lyapunov_weights w;
    w.a = a;
    w.b = b;
    const double d1 = std::exp(-a);
    const double d3 = std::exp(-(a + b));
    const double d5 = 1.0;
    w.d = {d1, d1, d3, d3, d5, (2.0 * d1 * lambda + 2.0 * d5 * lambda * q * q) / mu,
           std::exp(a + b), std::exp(b)};
    return w;
}

std::array<double, 11> lyapunov_report(const filter_bank& bank, const field& f2, const field& h2,
                                       const field& e, const field& tau,
                                       const lyapunov_weights& w) {
    std::array<double, 11> v{};
    v[0] = weighted_norm_sq(bank.n1, -w.a);
    v[1] = weighted_norm_sq(bank.n2, -w.a);
    v[2] = weighted_norm_sq(bank.n3, -w.a);
    v[3] = weighted_norm_sq(bank.z1, w.b);
    v[4] = weighted_norm_sq(bank.z2, w.b);
    v[5] = weighted_norm_sq(bank.z3, w.b);
    v[6] = weighted_norm_sq(f2, -w.a);
    v[7] = weighted_norm_sq(h2, w.b);
    v[8] = weighted_norm_sq(e, -w.a);
    v[9] = weighted_norm_sq(tau, w.b);
    const auto& d = w.d;
    v[10] = d[0] * (v[0] + v[1]) + d[1] * v[2] + d[2] * (v[3] + v[4]) + d[3] * v[5] +
            d[4] * v[6] + d[5] * v[7] + d[6] * v[8] + d[7] * v[9];
    return v;
}

std::array<double, 2> boundary_residuals(const field& f2, const field& h2, const field& tau_hat,
                                         double q, double u_applied, double u_hat) {
    const int n = f2.size();
    const double r_left = f2[0] - q * h2[0] - q * tau_hat[0];
    const double r_right = h2[n - 1] - (u_applied - u_hat);
    return {r_left, r_right};
}

std::array<double, 2> kernel_error_metrics(const kernel_pair& reference, const kernel_pair& k) {
    if (reference.alpha.grid != k.alpha.grid || reference.beta.grid != k.beta.grid)
        throw config_error("kernel error metrics need matching triangles");
    const std::size_t m = reference.alpha.values.size();
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sa += std::fabs(k.alpha.values[i] - reference.alpha.values[i]);
        sb += std::fabs(k.beta.values[i] - reference.beta.values[i]);
    }
    return {sa / static_cast<double>(m), sb / static_cast<double>(m)};
}

double kernel_error_integral(const kernel_pair& reference, const kernel_pair& k) {
    if (reference.alpha.grid != k.alpha.grid || reference.beta.grid != k.beta.grid)
        throw config_error("kernel error metrics need matching triangles");
    const std::size_t m = reference.alpha.values.size();
    std::vector<double> da(m), db(m);
    for (std::size_t i = 0; i < m; ++i) {
        da[i] = std::fabs(k.alpha.values[i] - reference.alpha.values[i]);
        db[i] = std::fabs(k.beta.values[i] - reference.beta.values[i]);
    }
    return triangle_integral(reference.alpha.grid, da) + triangle_integral(reference.beta.grid, db);
}

double time_averaged_error(const sim_trace& trace) {
    if (trace.tri_err.size() < 2 || trace.dt <= 0.0) return 0.0;
    const double T = trace.dt * static_cast<double>(trace.tri_err.size() - 1);
    return trapezoid(trace.tri_err, trace.dt) / T;
}

sim_trace run_closed_loop(const sim_config& cfg, kernel_provider& provider) {
    cfg.plant.validate();
    if (!(cfg.dt > 0.0)) throw config_error("dt must be positive");
    if (!(cfg.t_end >= 0.0)) throw config_error("t_end must be non-negative");
    const spatial_grid grid = spatial_grid::from_dx(cfg.dx);
    check_cfl(cfg.plant, cfg.dt, grid.dx);
    if (provider.triangle().base != grid)
        throw config_error("provider triangle does not match the simulation grid");
    const int n = grid.n_points;
    const int steps = static_cast<int>(std::llround(cfg.t_end / cfg.dt));

    field_pair state(grid);
    if (cfg.psi0.empty() && cfg.phi0.empty()) {
        for (int i = 0; i < n; ++i) {
            state.psi[i] = 1.0;
            state.phi[i] = 2.0 * std::sin(10.0 * grid.x(i)) + 3.0;
        }
    } else {
        if (static_cast<int>(cfg.psi0.size()) != n || static_cast<int>(cfg.phi0.size()) != n)
            throw config_error("initial data size does not match the grid");
        state.psi.values = cfg.psi0;
        state.phi.values = cfg.phi0;
    }

    filter_bank bank(grid);
    for (field* f : {&bank.n1, &bank.n2, &bank.n3, &bank.z1, &bank.z2, &bank.z3})
        std::fill(f->values.begin(), f->values.end(), cfg.filter_init);
    // Published constant filter data violates the inflow relations; pin the
    // inflow nodes (z3(1) keeps its initial value until a control is applied).
    bank.apply_inflow(state.phi[0], bank.z3[n - 1]);

    param_estimate est;
    est.m_hat = cfg.m_hat0;
    est.bounds = cfg.plant.m_bar;
    param_estimate true_est;
    true_est.m_hat = cfg.plant.m;
    true_est.bounds = cfg.plant.m_bar;

    const lyapunov_weights weights =
        make_lyapunov_weights(cfg.plant.lambda, cfg.plant.mu, cfg.plant.q, cfg.lyap_a, cfg.lyap_b);
    const triangle_grid tri(grid);

    sim_trace trace;
    trace.dt = cfg.dt;
    const auto cap = static_cast<std::size_t>(steps) + 1;
    trace.t.reserve(cap);

    kernel_pair k;
    field psi_hat(grid), phi_hat(grid), psi_true(grid), phi_true(grid);
    field f2(grid), h2(grid);

    try {
        for (int s = 0; s <= steps; ++s) {
            provider.refresh(est.m_hat, k);
            estimates(bank, est, cfg.plant.q, psi_hat, phi_hat);
            const error_fields err = prediction_errors(state, psi_hat, phi_hat);
            const double U = control_law_consistent(k, psi_hat, phi_hat);
            field phi_hat_d = phi_hat;
            phi_hat_d[n - 1] = U;
            backstepping_transform(k, psi_hat, phi_hat_d, f2, h2);

            estimates(bank, true_est, cfg.plant.q, psi_true, phi_true);
            const error_fields na = prediction_errors(state, psi_true, phi_true);

            double kerr_a = 0.0, kerr_b = 0.0, tri_e = 0.0;
            if (provider.mode() == kernel_provenance::neural) {
                const kernel_pair k_ref =
                    solve_kernels(est.m_hat, cfg.plant.lambda, cfg.plant.mu, cfg.plant.q, tri);
                const auto mm = kernel_error_metrics(k_ref, k);
                kerr_a = mm[0];
                kerr_b = mm[1];
                tri_e = kernel_error_integral(k_ref, k);
            }

            const auto v = lyapunov_report(bank, f2, h2, na.e_hat, na.tau_hat, weights);
            const auto rr = boundary_residuals(f2, h2, err.tau_hat, cfg.plant.q, U, U);

            // Norms can throw on non-finite data (first row with bad initial
            // state); compute everything before pushing so an aborted row
            // never leaves the trace vectors at different lengths.
            const double psi_n = l2_norm(state.psi);
            const double phi_n = l2_norm(state.phi);
            const double e_hat_n = l2_norm(err.e_hat);
            const double tau_hat_n = l2_norm(err.tau_hat);
            const double e_n = l2_norm(na.e_hat);
            const double tau_n = l2_norm(na.tau_hat);

            trace.t.push_back(static_cast<double>(s) * cfg.dt);
            trace.psi_norm.push_back(psi_n);
            trace.phi_norm.push_back(phi_n);
            trace.U.push_back(U);
            for (int i = 0; i < 4; ++i)
                trace.m_hat[static_cast<std::size_t>(i)].push_back(est.m_hat[static_cast<std::size_t>(i)]);
            trace.e_hat_norm.push_back(e_hat_n);
            trace.tau_hat_norm.push_back(tau_hat_n);
            trace.kerr_alpha.push_back(kerr_a);
            trace.kerr_beta.push_back(kerr_b);
            trace.v11.push_back(v[10]);
            trace.r_left.push_back(rr[0]);
            trace.r_right.push_back(rr[1]);
            trace.v.push_back(v);
            trace.tri_err.push_back(tri_e);
            trace.e_norm.push_back(e_n);
            trace.tau_norm.push_back(tau_n);

            if (s == steps) break;

            const field_pair next = step_plant(state, cfg.plant, U, cfg.dt);
            bank = step_filters(bank, state, U, cfg.plant, cfg.dt);
            state = next;

            estimates(bank, est, cfg.plant.q, psi_hat, phi_hat);
            const error_fields err2 = prediction_errors(state, psi_hat, phi_hat);
            est = step_adaptive_law(bank, err2, est, cfg.plant.rho, cfg.dt);
        }
    } catch (const divergence_error&) {
        trace.abort_index = static_cast<int>(trace.t.size());
    }

    trace.psi_final = state.psi.values;
    trace.phi_final = state.phi.values;
    trace.provider_seconds = provider.seconds();
    trace.provider_calls = provider.calls();
    return trace;
}

trace_summary summarize_trace_csv(const std::string& path) {
    static const std::string expected =
        "t,psi_norm,phi_norm,U,m1_hat,m2_hat,m3_hat,m4_hat,e_hat_norm,tau_hat_norm,"
        "kerr_alpha,kerr_beta,V11,r_left,r_right";
    const std::string raw = read_file(path);
    std::istringstream in(raw);
    std::string line;
    if (!std::getline(in, line)) throw io_error(path + ": empty trace");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected) throw io_error(path + ": unexpected trace header");
    std::vector<std::array<double, 15>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<double, 15> row{};
        const char* p = line.c_str();
        for (int c = 0; c < 15; ++c) {
            char* end = nullptr;
            row[static_cast<std::size_t>(c)] = std::strtod(p, &end);
            if (end == p) throw io_error(path + ": malformed row " + std::to_string(rows.size() + 1));
            p = end;
            if (c < 14) {
                if (*p != ',') throw io_error(path + ": expected comma in row " +
                                              std::to_string(rows.size() + 1));
                ++p;
            }
        }
        rows.push_back(row);
    }
    if (rows.empty()) throw io_error(path + ": no data rows");

    trace_summary s;
    s.rows = static_cast<int>(rows.size());
    s.t_end = rows.back()[0];
    s.final_psi_norm = rows.back()[1];
    s.final_phi_norm = rows.back()[2];
    s.final_u = rows.back()[3];
    s.v11_initial = rows.front()[12];
    s.v11_final = rows.back()[12];
    const double tail_start = 0.8 * s.t_end;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        s.max_r_left = std::max(s.max_r_left, std::fabs(rows[r][13]));
        s.max_r_right = std::max(s.max_r_right, std::fabs(rows[r][14]));
        s.max_kerr_alpha = std::max(s.max_kerr_alpha, rows[r][10]);
        s.max_kerr_beta = std::max(s.max_kerr_beta, rows[r][11]);
        if (r > 0 && rows[r][0] >= tail_start) {
            for (int i = 4; i < 8; ++i)
                s.max_dm_per_step_tail =
                    std::max(s.max_dm_per_step_tail,
                             std::fabs(rows[r][static_cast<std::size_t>(i)] -
                                       rows[r - 1][static_cast<std::size_t>(i)]));
        }
    }
    return s;
}

std::string summary_to_json(const trace_summary& s) {
    nlohmann::json j;
    j["rows"] = s.rows;
    j["t_end"] = s.t_end;
    j["final"] = {{"psi_norm", s.final_psi_norm},
                  {"phi_norm", s.final_phi_norm},
                  {"U", s.final_u}};
    j["settling"] = {{"max_dm_per_step_tail", s.max_dm_per_step_tail}};
    j["residuals"] = {{"max_r_left", s.max_r_left}, {"max_r_right", s.max_r_right}};
    j["kernel_error"] = {{"max_abs_mean_alpha", s.max_kerr_alpha},
                         {"max_abs_mean_beta", s.max_kerr_beta}};
    j["v11"] = {{"initial", s.v11_initial}, {"final", s.v11_final}};
    return j.dump(2) + "\n";
}

std::vector<bench_row> run_bench(const std::vector<double>& dx_list, int steps,
                                 const deeponet_model& model_alpha,
                                 const deeponet_model& model_beta, const plant_config& plant,
                                 double cfl) {
    if (dx_list.empty()) throw config_error("bench needs at least one dx");
    if (steps < 1) throw config_error("bench needs a positive step count");
    if (!(cfl > 0.0) || cfl > 1.0) throw config_error("bench CFL must lie in (0, 1]");
    std::vector<bench_row> rows;
    rows.reserve(dx_list.size());
    for (const double dx : dx_list) {
        sim_config cfg;
        cfg.plant = plant;
        cfg.dx = dx;
        cfg.dt = cfl * dx / std::max(plant.lambda, plant.mu);
        cfg.t_end = static_cast<double>(steps) * cfg.dt;
        const triangle_grid tri(spatial_grid::from_dx(dx));

        auto num = make_numerical_provider(plant.lambda, plant.mu, plant.q, tri);
        const sim_trace t_num = run_closed_loop(cfg, *num);
        if (t_num.abort_index >= 0)
            throw divergence_error("numerical bench run diverged at dx = " + fmt_g17(dx));

        auto neu = make_neural_provider(model_alpha, model_beta, tri);
        const sim_trace t_neu = run_closed_loop(cfg, *neu);
        if (t_neu.abort_index >= 0)
            throw divergence_error("neural bench run diverged at dx = " + fmt_g17(dx));

        bench_row row;
        row.dx = dx;
        row.numerical_seconds = t_num.provider_seconds;
        row.neural_seconds = t_neu.provider_seconds;
        row.speedup = t_neu.provider_seconds > 0.0
                          ? t_num.provider_seconds / t_neu.provider_seconds
                          : 0.0;
        row.time_avg_error = time_averaged_error(t_neu);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace kflow
