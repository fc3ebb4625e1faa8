#include "kernel.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace kflow {

kernel_pair solve_kernels(const std::array<double, 4>& m_hat, double lambda, double mu,
                          double q, const triangle_grid& tri) {
    if (!(lambda > 0.0) || !(mu > 0.0))
        throw config_error("solve_kernels: speeds must be positive");

    const int n = tri.rows();
    const double dx = tri.base.dx;
    const double diag = -m_hat[2] / (lambda + mu);

    const int nsub = std::max(1, static_cast<int>(std::ceil(lambda / mu - 1e-12)));
    const double dxs = dx / nsub;
    const double cl = lambda * dxs / (mu * dx);  // <= 1 by construction
    const double ca = dxs / mu * (m_hat[0] - m_hat[3]);
    const double cb = dxs / mu * m_hat[2];
    const double ct = dxs / dx;
    const double cs = dxs / mu * m_hat[1];
    const double base_coef = q * lambda / mu;

    kernel_pair out;
    out.alpha = triangle_kernel_grid(tri);
    out.beta = triangle_kernel_grid(tri);
    out.alpha.at(0, 0) = diag;
    out.beta.at(0, 0) = base_coef * diag;

    std::vector<double> a_cur(static_cast<std::size_t>(n)), b_cur(static_cast<std::size_t>(n));
    std::vector<double> a_nxt(static_cast<std::size_t>(n)), b_nxt(static_cast<std::size_t>(n));

    for (int i = 1; i < n; ++i) {
        const int w = i;  // sub-rows carry the previous row's width
        const double* ap = out.alpha.row(i - 1);
        const double* bp = out.beta.row(i - 1);
        for (int j = 0; j < w; ++j) {
            a_cur[static_cast<std::size_t>(j)] = ap[j];
            b_cur[static_cast<std::size_t>(j)] = bp[j];
        }

        for (int s = 0; s < nsub; ++s) {
            for (int j = 0; j < w; ++j) {
                const double aj = a_cur[static_cast<std::size_t>(j)];
                const double aj1 = (j + 1 < w) ? a_cur[static_cast<std::size_t>(j + 1)] : diag;
                a_nxt[static_cast<std::size_t>(j)] =
                    aj + cl * (aj1 - aj) + ca * aj + cb * b_cur[static_cast<std::size_t>(j)];
            }
            for (int j = 1; j < w; ++j)
                b_nxt[static_cast<std::size_t>(j)] =
                    b_cur[static_cast<std::size_t>(j)] -
                    ct * (b_cur[static_cast<std::size_t>(j)] - b_cur[static_cast<std::size_t>(j - 1)]) +
                    cs * a_cur[static_cast<std::size_t>(j)];
            b_nxt[0] = base_coef * a_nxt[0];
            std::swap(a_cur, a_nxt);
            std::swap(b_cur, b_nxt);
        }

        double* an = out.alpha.row(i);
        double* bn = out.beta.row(i);
        for (int j = 0; j < w; ++j) {
            an[j] = a_cur[static_cast<std::size_t>(j)];
            bn[j] = b_cur[static_cast<std::size_t>(j)];
        }
        an[i] = diag;
        bn[i] = b_cur[static_cast<std::size_t>(w - 1)] + cs * a_cur[static_cast<std::size_t>(w - 1)];
        bn[0] = base_coef * an[0];

        for (int j = 0; j <= i; ++j)
            if (!std::isfinite(an[j]) || !std::isfinite(bn[j]))
                throw divergence_error("solve_kernels: non-finite value at row " +
                                       std::to_string(i));
    }
    return out;
}

namespace {

void volterra_sweep(const triangle_kernel_grid& b, const triangle_kernel_grid& base,
                    const triangle_kernel_grid& prev, triangle_kernel_grid& next) {
    const int n = base.grid.rows();
    const double dx = base.grid.base.dx;
    for (int i = 0; i < n; ++i) {
        const double* bi = b.row(i);
        for (int j = 0; j <= i; ++j) {
            double s = 0.0;
            if (j < i) {
                s = 0.5 * (bi[j] * prev.at(j, j) + bi[i] * prev.at(i, j));
                for (int k = j + 1; k < i; ++k) s += bi[k] * prev.at(k, j);
                s *= dx;
            }
            next.at(i, j) = base.at(i, j) + s;
        }
    }
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

kernel_pair solve_inverse_kernels(const kernel_pair& k, double tol, int max_iter) {
    if (!(tol > 0.0)) throw config_error("solve_inverse_kernels: tol must be positive");
    kernel_pair out;
    out.provenance = k.provenance;
    out.alpha = k.alpha;
    out.beta = k.beta;
    triangle_kernel_grid next(k.alpha.grid);

    for (int pass = 0; pass < 2; ++pass) {
        const triangle_kernel_grid& base = pass == 0 ? k.alpha : k.beta;
        triangle_kernel_grid& cur = pass == 0 ? out.alpha : out.beta;
        bool converged = false;
        for (int it = 0; it < max_iter; ++it) {
            volterra_sweep(k.beta, base, cur, next);
            const double upd = sup_diff(next.values, cur.values);
            std::swap(cur.values, next.values);
            if (upd < tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw divergence_error("solve_inverse_kernels: no convergence after " +
                                   std::to_string(max_iter) + " iterations");
    }
    return out;
}

namespace {

double boundary_row_integral(const kernel_pair& k, const field& psi_hat,
                             const field& phi_hat) {
    const int n = psi_hat.size();
    const double* ar = k.alpha.row(n - 1);
    const double* br = k.beta.row(n - 1);
    double s = 0.5 * (ar[0] * psi_hat[0] + br[0] * phi_hat[0] +
                      ar[n - 1] * psi_hat[n - 1] + br[n - 1] * phi_hat[n - 1]);
    for (int j = 1; j < n - 1; ++j) s += ar[j] * psi_hat[j] + br[j] * phi_hat[j];
    return s * psi_hat.grid.dx;
}

}  // namespace

double control_law(const kernel_pair& k, const field& psi_hat, const field& phi_hat) {
    if (k.alpha.grid.rows() != psi_hat.size() || psi_hat.grid != phi_hat.grid)
        throw config_error("control_law: grid mismatch");
    return boundary_row_integral(k, psi_hat, phi_hat);
}

double control_law_consistent(const kernel_pair& k, const field& psi_hat,
                              const field& phi_hat) {
    const int n = psi_hat.size();
    const double u_raw = control_law(k, psi_hat, phi_hat);
    const double c = 0.5 * psi_hat.grid.dx * k.beta.at(n - 1, n - 1);
    return (u_raw - c * phi_hat[n - 1]) / (1.0 - c);
}

void backstepping_transform(const kernel_pair& k, const field& psi_hat,
                            const field& phi_hat, field& f2, field& h2) {
    if (k.alpha.grid.rows() != psi_hat.size() || psi_hat.grid != phi_hat.grid)
        throw config_error("backstepping_transform: grid mismatch");
    const int n = psi_hat.size();
    const double dx = psi_hat.grid.dx;
    f2 = psi_hat;
    h2 = field(phi_hat.grid);
    h2[0] = phi_hat[0];
    for (int i = 1; i < n; ++i) {
        const double* ar = k.alpha.row(i);
        const double* br = k.beta.row(i);
        double s = 0.5 * (ar[0] * psi_hat[0] + br[0] * phi_hat[0] +
                          ar[i] * psi_hat[i] + br[i] * phi_hat[i]);
        for (int j = 1; j < i; ++j) s += ar[j] * psi_hat[j] + br[j] * phi_hat[j];
        h2[i] = phi_hat[i] - s * dx;
    }
}

field inverse_transform(const kernel_pair& k_inv, const field& f2, const field& h2) {
    const int n = f2.size();
    const double dx = f2.grid.dx;
    field phi(f2.grid);
    phi[0] = h2[0];
    for (int i = 1; i < n; ++i) {
        const double* ar = k_inv.alpha.row(i);
        const double* br = k_inv.beta.row(i);
        double s = 0.5 * (ar[0] * f2[0] + br[0] * h2[0] + ar[i] * f2[i] + br[i] * h2[i]);
        for (int j = 1; j < i; ++j) s += ar[j] * f2[j] + br[j] * h2[j];
        phi[i] = h2[i] + s * dx;
    }
    return phi;
}

}  // namespace kflow
