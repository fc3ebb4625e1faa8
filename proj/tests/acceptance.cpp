// Acceptance gate: runs the nine release criteria in order and prints one
// PASS/FAIL line per criterion with the measured numbers. Exit status is
// the number of failed criteria.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "loop.hpp"
#include "oracle.hpp"

using namespace kflow;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct check_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw check_failure(what);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

template <class F>
void criterion(const char* name, double budget_s, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::string detail = body();
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget_s > 0.0 && s > budget_s) {
            ++g_failures;
            std::printf("%s FAIL: took %.1fs, budget %.0fs (%s)\n", name, s, budget_s,
                        detail.c_str());
        } else {
            std::printf("%s PASS: %s [%.1fs]\n", name, detail.c_str(), s);
        }
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("%s FAIL: %s\n", name, e.what());
    }
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(in.good(), "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::array<double, 4> m_published{0.4, 0.6, 1.0, 0.8};

sim_config published_config() {
    sim_config cfg;
    cfg.plant.lambda = 1.0;
    cfg.plant.mu = 1.0;
    cfg.plant.q = 1.0;
    cfg.plant.m = m_published;
    cfg.plant.m_bar = {4.0, 4.0, 4.0, 4.0};
    cfg.plant.rho = {40.0, 40.0, 40.0, 40.0};
    return cfg;  // grid, horizon, initial estimates, filters: struct defaults
}

// The numerically-driven reference trajectory, shared by AC4/AC5/AC7.
const sim_trace& published_trace() {
    static const sim_trace tr = [] {
        const sim_config cfg = published_config();
        const triangle_grid tri(spatial_grid::from_dx(cfg.dx));
        auto provider = make_numerical_provider(1.0, 1.0, 1.0, tri);
        sim_trace t = run_closed_loop(cfg, *provider);
        if (t.abort_index >= 0) throw check_failure("reference run aborted");
        return t;
    }();
    return tr;
}

double sup_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), "triangle size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

// Residual of K_inv = K_direct + int_xi^x b(x,s) K_inv(s,xi) ds, trapezoid.
double volterra_residual(const triangle_kernel_grid& b_data, const triangle_kernel_grid& direct,
                         const triangle_kernel_grid& inv) {
    const triangle_grid& tri = direct.grid;
    const double dx = tri.base.dx;
    double worst = 0.0;
    for (int i = 0; i < tri.rows(); ++i)
        for (int j = 0; j <= i; ++j) {
            double integral = 0.0;
            if (j < i)
                for (int s = j; s <= i; ++s) {
                    const double w = (s == j || s == i) ? 0.5 : 1.0;
                    integral += w * dx * b_data.at(i, s) * inv.at(s, j);
                }
            worst = std::max(worst, std::abs(inv.at(i, j) - direct.at(i, j) - integral));
        }
    return worst;
}

std::string ac1_kernel_solver() {
    // A plant with no psi-to-phi coupling needs no feedback kernel at all.
    const triangle_grid tri_z(spatial_grid::from_dx(0.05));
    const kernel_pair kz = solve_kernels({0.7, -0.3, 0.0, 1.1}, 1.0, 1.0, 1.0, tri_z);
    double zero_max = 0.0;
    for (double v : kz.alpha.values) zero_max = std::max(zero_max, std::abs(v));
    for (double v : kz.beta.values) zero_max = std::max(zero_max, std::abs(v));
    require(zero_max == 0.0, fmt("decoupled plant gave nonzero kernels: %.3g", zero_max));

    const triangle_grid tri_fine(spatial_grid::from_dx(0.02));
    const kernel_pair kf = solve_kernels(m_published, 1.0, 1.0, 1.0, tri_fine);
    double diag = 0.0;
    for (int i = 0; i < tri_fine.rows(); ++i)
        diag = std::max(diag, std::abs(kf.alpha.at(i, i) + 0.5));
    require(diag <= 1e-14, fmt("diagonal rule violated by %.3g", diag));

    std::array<double, 2> errs{};
    const double dxs[2] = {0.05, 0.025};
    for (int c = 0; c < 2; ++c) {
        const triangle_grid tri(spatial_grid::from_dx(dxs[c]));
        const kernel_pair k = solve_kernels(m_published, 1.0, 1.0, 1.0, tri);
        const kernel_pair ref = testref::reference_kernels(m_published, 1.0, tri, 16);
        errs[c] = std::max(sup_abs_diff(k.alpha.values, ref.alpha.values),
                           sup_abs_diff(k.beta.values, ref.beta.values));
        require(errs[c] <= 5.0 * dxs[c],
                fmt("sup error %.3g at dx %.3g exceeds %.3g", errs[c], dxs[c], 5.0 * dxs[c]));
    }
    const double ratio = errs[0] / errs[1];
    require(ratio >= 1.8, fmt("halving dx only shrank the error by %.2fx", ratio));
    return fmt("sup err %.2e at dx 0.05, %.2e at 0.025, ratio %.2f, diag %.1e", errs[0], errs[1],
               ratio, diag);
}

std::string ac2_inverse_kernels() {
    const triangle_grid tri(spatial_grid::from_dx(0.02));
    const kernel_pair k = solve_kernels(m_published, 1.0, 1.0, 1.0, tri);
    const kernel_pair inv = solve_inverse_kernels(k);
    const double ra = volterra_residual(k.beta, k.alpha, inv.alpha);
    const double rb = volterra_residual(k.beta, k.beta, inv.beta);
    require(ra <= 1e-8, fmt("alpha plug-back residual %.3g", ra));
    require(rb <= 1e-8, fmt("beta plug-back residual %.3g", rb));

    // With a zero integral kernel the series must terminate immediately.
    kernel_pair k0 = k;
    std::fill(k0.beta.values.begin(), k0.beta.values.end(), 0.0);
    const kernel_pair inv0 = solve_inverse_kernels(k0, 1e-12, 1);
    require(inv0.alpha.values == k0.alpha.values, "zero-series case is not exact");
    for (double v : inv0.beta.values) require(v == 0.0, "zero-series beta is not zero");
    return fmt("plug-back residuals %.2e / %.2e, zero-series exact", ra, rb);
}

std::string ac3_estimate_bounds() {
    const double pi = std::acos(-1.0);
    double worst = 0.0;
    for (int r = 0; r < 20; ++r) {
        rng_stream rng(1000 + static_cast<std::uint64_t>(r));
        sim_config cfg;
        cfg.plant.lambda = 1.0;
        cfg.plant.mu = 1.0;
        cfg.plant.q = 1.0;
        for (auto& mi : cfg.plant.m) mi = rng.next_uniform(-0.9, 0.9);
        cfg.plant.m_bar = {1.0, 1.0, 1.0, 1.0};
        cfg.plant.rho = {40.0, 40.0, 40.0, 40.0};
        cfg.t_end = 4.0;
        cfg.m_hat0 = {0.0, 0.0, 0.0, 0.0};
        const spatial_grid g = spatial_grid::from_dx(cfg.dx);
        cfg.psi0.resize(static_cast<std::size_t>(g.n_points));
        cfg.phi0.resize(static_cast<std::size_t>(g.n_points));
        double a[3], b[3];
        for (int c = 0; c < 3; ++c) a[c] = rng.next_uniform(-2.0, 2.0);
        for (int c = 0; c < 3; ++c) b[c] = rng.next_uniform(-2.0, 2.0);
        for (int kx = 0; kx < g.n_points; ++kx) {
            const double x = g.x(kx);
            cfg.psi0[static_cast<std::size_t>(kx)] =
                a[0] + a[1] * std::sin(pi * x) + a[2] * std::sin(2.0 * pi * x);
            cfg.phi0[static_cast<std::size_t>(kx)] =
                b[0] + b[1] * std::sin(pi * x) + b[2] * std::sin(2.0 * pi * x);
        }
        auto provider = make_numerical_provider(1.0, 1.0, 1.0, triangle_grid(g));
        const sim_trace tr = run_closed_loop(cfg, *provider);
        require(tr.abort_index < 0, fmt("bounded-estimate run %d aborted", r));
        for (const auto& series : tr.m_hat)
            for (double v : series) {
                require(std::abs(v) <= 1.0 + 1e-15,
                        fmt("estimate left the bound box: %.17g in run %d", v, r));
                worst = std::max(worst, std::abs(v));
            }
    }

    int grid_points = 0;
    for (double theta : {-2.0, -1.0, -0.5, -1e-9, 0.0, 1e-9, 0.5, 1.0, 2.0})
        for (double mh : {-1.5, -1.0, -0.999, -0.5, 0.0, 0.5, 0.999, 1.0, 1.5}) {
            const double got = projection(theta, mh, 1.0);
            const double want = (std::abs(mh) >= 1.0 && theta * mh >= 0.0) ? 0.0 : theta;
            require(got == want, fmt("projection(%g, %g, 1) = %g, want %g", theta, mh, got, want));
            ++grid_points;
        }
    return fmt("20 runs stayed inside the box (max |est| %.4f), %d projection cases exact", worst,
               grid_points);
}

std::string ac4_error_flush() {
    const sim_trace& tr = published_trace();
    const double scale = tr.psi_norm.front() + tr.phi_norm.front();
    const double limit = 1e-3 * scale;
    double worst = 0.0;
    for (std::size_t r = 0; r < tr.t.size(); ++r) {
        if (tr.t[r] < 2.0) continue;
        worst = std::max({worst, tr.e_norm[r], tr.tau_norm[r]});
    }
    require(worst <= limit,
            fmt("prediction errors reach %.3g after t = 2, limit %.3g", worst, limit));
    return fmt("max prediction-error norm %.2e for t >= 2, limit %.2e", worst, limit);
}

std::string ac5_regulation() {
    const sim_trace& tr = published_trace();
    require(tr.psi_norm.back() <= 0.1 * tr.psi_norm.front(),
            fmt("psi norm only fell to %.3g", tr.psi_norm.back()));
    require(tr.phi_norm.back() <= 0.1 * tr.phi_norm.front(),
            fmt("phi norm only fell to %.3g", tr.phi_norm.back()));
    double worst_r = 0.0;
    for (double v : tr.r_right) worst_r = std::max(worst_r, std::abs(v));
    require(worst_r <= 1e-12, fmt("target-system boundary residual %.3g", worst_r));
    require(tr.v11.back() < tr.v11.front(),
            fmt("Lyapunov level rose: %.3g -> %.3g", tr.v11.front(), tr.v11.back()));
    return fmt("norms %.1e/%.1e from %.2f/%.2f, boundary residual %.1e, V %.4g -> %.2e",
               tr.psi_norm.back(), tr.phi_norm.back(), tr.psi_norm.front(), tr.phi_norm.front(),
               worst_r, tr.v11.front(), tr.v11.back());
}

std::string ac6_training() {
    const auto& wa = fixtures::wide_alpha();
    const auto& wb = fixtures::wide_beta();
    const double best_a = *std::min_element(wa.history.test_mse.begin(), wa.history.test_mse.end());
    const double best_b = *std::min_element(wb.history.test_mse.begin(), wb.history.test_mse.end());
    require(best_a <= 1e-3, fmt("alpha test MSE stalled at %.3g", best_a));
    require(best_b <= 1e-3, fmt("beta test MSE stalled at %.3g", best_b));

    // Analytic gradient against central differences on a small network.
    deeponet_model tiny = make_model("alpha", 3, 2, 0.5, 5);
    const triangle_grid tri(spatial_grid::from_dx(0.5));
    const auto pts = triangle_points(tri);
    const int samples = 2;
    const std::vector<double> ps{0.1, -0.2, 0.3, 0.05, -0.3, 0.2, -0.1, 0.4};
    std::vector<double> targets;
    targets.reserve(static_cast<std::size_t>(samples) * pts.size());
    for (int s = 0; s < samples; ++s)
        for (const auto& pt : pts) targets.push_back(0.3 * pt[0] - 0.1 * pt[1] + 0.05 * s);
    std::vector<double> grad, scratch;
    loss_and_gradient(tiny, ps, samples, pts, targets, grad);
    std::vector<double> theta;
    flatten_parameters(tiny, theta);
    require(grad.size() == theta.size(), "gradient length mismatch");
    const double h = 1e-6;
    double worst_diff = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        unflatten_parameters(tiny, theta);
        const double lp = loss_and_gradient(tiny, ps, samples, pts, targets, scratch);
        theta[i] = keep - h;
        unflatten_parameters(tiny, theta);
        const double lm = loss_and_gradient(tiny, ps, samples, pts, targets, scratch);
        theta[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double diff = std::abs(grad[i] - fd);
        require(diff <= 1e-4 * std::max(std::abs(fd), 1e-3),
                fmt("gradient entry %zu off by %.3g (fd %.3g)", i, diff, fd));
        worst_diff = std::max(worst_diff, diff);
    }
    unflatten_parameters(tiny, theta);
    return fmt("test MSE %.2e / %.2e, worst gradient deviation %.1e over %zu parameters", best_a,
               best_b, worst_diff, theta.size());
}

std::string ac7_neural_loop() {
    const sim_trace& num = published_trace();
    const sim_config cfg = published_config();
    const triangle_grid tri(spatial_grid::from_dx(cfg.dx));
    auto provider =
        make_neural_provider(fixtures::desk_alpha().model, fixtures::desk_beta().model, tri);
    const sim_trace nt = run_closed_loop(cfg, *provider);
    require(nt.abort_index < 0, "surrogate-driven run aborted");
    require(nt.t.size() == num.t.size(), "row count mismatch between modes");

    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t r = 0; r < num.t.size(); ++r) {
        const double dp = nt.psi_norm[r] - num.psi_norm[r];
        const double df = nt.phi_norm[r] - num.phi_norm[r];
        diff2 += dp * dp + df * df;
        ref2 += num.psi_norm[r] * num.psi_norm[r] + num.phi_norm[r] * num.phi_norm[r];
    }
    const double rel = std::sqrt(diff2 / ref2);
    require(rel <= 0.10, fmt("norm trajectory deviates by %.3g relative", rel));

    const double tavg = time_averaged_error(nt);
    require(tavg <= 1e-2, fmt("time-averaged kernel error %.3g", tavg));
    return fmt("trajectory deviation %.2e relative, time-averaged kernel error %.2e", rel, tavg);
}

std::string ac8_speedup() {
    const auto rows = run_bench({0.02, 0.01, 0.005}, 2000, fixtures::speed_alpha().model,
                                fixtures::speed_beta().model, published_config().plant);
    for (std::size_t i = 1; i < rows.size(); ++i)
        require(rows[i].speedup > rows[i - 1].speedup,
                fmt("speedup not increasing: %.2f after %.2f", rows[i].speedup,
                    rows[i - 1].speedup));
    require(rows.back().numerical_seconds >= 10.0 * rows.back().neural_seconds,
            fmt("only %.2fx at the finest grid", rows.back().speedup));
    return fmt("speedups %.1fx / %.1fx / %.1fx at dx 0.02 / 0.01 / 0.005", rows[0].speedup,
               rows[1].speedup, rows[2].speedup);
}

std::string ac9_reproducibility() {
    const fs::path root = fs::temp_directory_path() / "kflow_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    const triangle_grid tri(spatial_grid::from_dx(0.1));
    const auto bounds = fixtures::box(-4.0, 4.0);
    const kernel_dataset d1 = generate_dataset(10, bounds, tri, {1.0, 1.0, 1.0}, 21);
    const kernel_dataset d2 = generate_dataset(10, bounds, tri, {1.0, 1.0, 1.0}, 21);
    require(d1.params == d2.params && d1.alpha == d2.alpha && d1.beta == d2.beta,
            "regenerated dataset differs");
    save_dataset(d1, (root / "a").string());
    save_dataset(d2, (root / "b").string());
    require(slurp(root / "a" / "samples.bin") == slurp(root / "b" / "samples.bin"),
            "dataset payload bytes differ");
    require(slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json"),
            "dataset manifest bytes differ");

    train_config tc;
    tc.epochs = 10;
    tc.seed = 6;
    std::vector<double> p1, p2;
    {
        deeponet_model m = make_model("alpha", 8, 4, tri.base.dx, tc.seed);
        train(m, d1, tc);
        flatten_parameters(m, p1);
    }
    {
        deeponet_model m = make_model("alpha", 8, 4, tri.base.dx, tc.seed);
        train(m, d2, tc);
        flatten_parameters(m, p2);
    }
    require(p1 == p2, "retrained parameters differ");

    sim_config cfg = published_config();
    cfg.t_end = 2.0;
    const triangle_grid tri_run(spatial_grid::from_dx(cfg.dx));
    auto prov1 = make_numerical_provider(1.0, 1.0, 1.0, tri_run);
    auto prov2 = make_numerical_provider(1.0, 1.0, 1.0, tri_run);
    const sim_trace t1 = run_closed_loop(cfg, *prov1);
    const sim_trace t2 = run_closed_loop(cfg, *prov2);
    const bool same = t1.t == t2.t && t1.psi_norm == t2.psi_norm && t1.phi_norm == t2.phi_norm &&
                      t1.U == t2.U && t1.m_hat == t2.m_hat && t1.e_hat_norm == t2.e_hat_norm &&
                      t1.tau_hat_norm == t2.tau_hat_norm && t1.v11 == t2.v11 &&
                      t1.r_left == t2.r_left && t1.r_right == t2.r_right &&
                      t1.psi_final == t2.psi_final && t1.phi_final == t2.phi_final;
    require(same, "repeated simulation is not bit-identical");
    return fmt("dataset bytes, %zu trained parameters, and %zu-row traces all identical",
               p1.size(), t1.t.size());
}

}  // namespace

int main() {
    criterion("AC1", 5.0, ac1_kernel_solver);
    criterion("AC2", 5.0, ac2_inverse_kernels);
    criterion("AC3", 0.0, ac3_estimate_bounds);
    criterion("AC4", 30.0, ac4_error_flush);
    criterion("AC5", 120.0, ac5_regulation);
    criterion("AC6", 600.0, ac6_training);
    criterion("AC7", 0.0, ac7_neural_loop);
    criterion("AC8", 0.0, ac8_speedup);
    criterion("AC9", 0.0, ac9_reproducibility);
    if (g_failures) std::printf("%d of 9 criteria failed\n", g_failures);
    else std::printf("all 9 criteria passed\n");
    return g_failures;
}
