#include "neuralop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "errors.hpp"
#include "io.hpp"
#include "json.hpp"

namespace kflow {

using nlohmann::json;

double rng_stream::next_unit() {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

double rng_stream::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
}

namespace {

// Dot product with four independent accumulators so the reduction
// vectorizes without reassociation flags; the lane order is fixed, which
// keeps results bit-identical across builds.
inline double dot4(const double* __restrict a, const double* __restrict b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline void axpy(double c, const double* __restrict x, double* __restrict y, int n) {
    for (int i = 0; i < n; ++i) y[i] += c * x[i];
}

mlp_layer make_layer(int in, int out, rng_stream& rng) {
    mlp_layer L;
    L.in = in;
    L.out = out;
    L.w.resize(static_cast<std::size_t>(in) * out);
    L.b.assign(static_cast<std::size_t>(out), 0.0);
    const double lim = std::sqrt(6.0 / (in + out));
    for (auto& v : L.w) v = rng.next_uniform(-lim, lim);
    return L;
}

mlp make_mlp(int in, int hidden, int out, rng_stream& rng) {
    mlp net;
    net.layers[0] = make_layer(in, hidden, rng);
    net.layers[1] = make_layer(hidden, hidden, rng);
    net.layers[2] = make_layer(hidden, out, rng);
    return net;
}

void layer_forward(const mlp_layer& L, const double* in, double* out, bool tanh_act) {
    for (int r = 0; r < L.out; ++r) {
        const double* wr = L.w.data() + static_cast<std::size_t>(r) * L.in;
        const double s = L.b[static_cast<std::size_t>(r)] + dot4(wr, in, L.in);
        out[r] = tanh_act ? std::tanh(s) : s;
    }
}

// a1, a2 receive the post-tanh hidden activations (needed for backprop).
void mlp_forward3(const mlp& net, const double* x, double* a1, double* a2, double* out) {
    layer_forward(net.layers[0], x, a1, true);
    layer_forward(net.layers[1], a1, a2, true);
    layer_forward(net.layers[2], a2, out, false);
}

std::size_t mlp_param_count(const mlp& net) {
    std::size_t n = 0;
    for (const auto& L : net.layers) n += L.w.size() + L.b.size();
    return n;
}

// Accumulates layer gradients for a batch of samples into g, laid out as
// w0,b0,w1,b1,w2,b2. X holds the raw inputs, A1/A2 the cached activations,
// dOut the loss gradient at the network output. Sample loop runs in index
// order so accumulation is deterministic.
void mlp_backward(const mlp& net, int n, const double* X, const double* A1, const double* A2,
                  const double* dOut, double* g) {
    const int in0 = net.layers[0].in;
    const int H = net.layers[0].out;
    const int P = net.layers[2].out;
    double* gw0 = g;
    double* gb0 = gw0 + static_cast<std::size_t>(H) * in0;
    double* gw1 = gb0 + H;
    double* gb1 = gw1 + static_cast<std::size_t>(H) * H;
    double* gw2 = gb1 + H;
    double* gb2 = gw2 + static_cast<std::size_t>(P) * H;
    std::vector<double> dz2(static_cast<std::size_t>(H));
    std::vector<double> dz1(static_cast<std::size_t>(H));
    const double* w2 = net.layers[2].w.data();
    const double* w1 = net.layers[1].w.data();
    std::vector<double> da(static_cast<std::size_t>(H));
    for (int s = 0; s < n; ++s) {
        const double* x = X + static_cast<std::size_t>(s) * in0;
        const double* a1 = A1 + static_cast<std::size_t>(s) * H;
        const double* a2 = A2 + static_cast<std::size_t>(s) * H;
        const double* d3 = dOut + static_cast<std::size_t>(s) * P;
        std::fill(da.begin(), da.end(), 0.0);
        for (int k = 0; k < P; ++k) {
            const double d = d3[k];
            axpy(d, a2, gw2 + static_cast<std::size_t>(k) * H, H);
            axpy(d, w2 + static_cast<std::size_t>(k) * H, da.data(), H);
            gb2[k] += d;
        }
        for (int j = 0; j < H; ++j)
            dz2[static_cast<std::size_t>(j)] = da[static_cast<std::size_t>(j)] * (1.0 - a2[j] * a2[j]);
        std::fill(da.begin(), da.end(), 0.0);
        for (int j = 0; j < H; ++j) {
            const double d = dz2[static_cast<std::size_t>(j)];
            axpy(d, a1, gw1 + static_cast<std::size_t>(j) * H, H);
            axpy(d, w1 + static_cast<std::size_t>(j) * H, da.data(), H);
            gb1[j] += d;
        }
        for (int i = 0; i < H; ++i)
            dz1[static_cast<std::size_t>(i)] = da[static_cast<std::size_t>(i)] * (1.0 - a1[i] * a1[i]);
        for (int i = 0; i < H; ++i) {
            const double d = dz1[static_cast<std::size_t>(i)];
            double* row = gw0 + static_cast<std::size_t>(i) * in0;
            for (int c = 0; c < in0; ++c) row[c] += d * x[c];
            gb0[i] += d;
        }
    }
}

void scale_params(const deeponet_model& model, const double* raw, double* scaled, int n) {
    for (int s = 0; s < n; ++s)
        for (int j = 0; j < 4; ++j)
            scaled[static_cast<std::size_t>(s) * 4 + j] =
                raw[static_cast<std::size_t>(s) * 4 + j] / model.scaling[static_cast<std::size_t>(j)];
}

// Forward-only MSE on a normalized target block.
double mse_only(const deeponet_model& model, const std::vector<double>& params_scaled, int S,
                const std::vector<double>& xt, int M, const std::vector<double>& targets) {
    const int H = model.hidden, P = model.p;
    std::vector<double> a1(static_cast<std::size_t>(H)), a2(static_cast<std::size_t>(H));
    std::vector<double> G(static_cast<std::size_t>(S) * P), F(static_cast<std::size_t>(M) * P);
    for (int s = 0; s < S; ++s)
        mlp_forward3(model.branch, params_scaled.data() + static_cast<std::size_t>(s) * 4,
                     a1.data(), a2.data(), G.data() + static_cast<std::size_t>(s) * P);
    for (int m = 0; m < M; ++m)
        mlp_forward3(model.trunk, xt.data() + static_cast<std::size_t>(m) * 2,
                     a1.data(), a2.data(), F.data() + static_cast<std::size_t>(m) * P);
    double loss = 0.0;
    for (int s = 0; s < S; ++s) {
        const double* gs = G.data() + static_cast<std::size_t>(s) * P;
        const double* ys = targets.data() + static_cast<std::size_t>(s) * M;
        for (int m = 0; m < M; ++m) {
            const double r = model.bias0 + dot4(gs, F.data() + static_cast<std::size_t>(m) * P, P) - ys[m];
            loss += r * r;
        }
    }
    return loss / (static_cast<double>(S) * M);
}

std::vector<double> flat_points(const std::vector<std::array<double, 2>>& points) {
    std::vector<double> xt(points.size() * 2);
    for (std::size_t m = 0; m < points.size(); ++m) {
        xt[m * 2] = points[m][0];
        xt[m * 2 + 1] = points[m][1];
    }
    return xt;
}

void fisher_yates(std::vector<int>& idx, rng_stream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_unit() * static_cast<double>(i));
        std::swap(idx[i - 1], idx[j < i ? j : i - 1]);
    }
}

json layer_to_json(const mlp_layer& L) {
    json jw = json::array();
    for (int r = 0; r < L.out; ++r) {
        json row = json::array();
        for (int c = 0; c < L.in; ++c) row.push_back(L.w[static_cast<std::size_t>(r) * L.in + c]);
        jw.push_back(std::move(row));
    }
    return json{{"w", std::move(jw)}, {"b", L.b}};
}

mlp_layer layer_from_json(const json& j, const std::string& path) {
    mlp_layer L;
    const auto& jw = j.at("w");
    const auto& jb = j.at("b");
    L.out = static_cast<int>(jw.size());
    if (L.out == 0 || jb.size() != jw.size()) throw io_error(path + ": malformed layer");
    L.in = static_cast<int>(jw.at(0).size());
    L.w.reserve(static_cast<std::size_t>(L.in) * L.out);
    for (const auto& row : jw) {
        if (static_cast<int>(row.size()) != L.in) throw io_error(path + ": ragged weight matrix");
        for (const auto& v : row) L.w.push_back(v.get<double>());
    }
    L.b = jb.get<std::vector<double>>();
    return L;
}

}  // namespace

deeponet_model make_model(const std::string& kernel_name, int hidden, int p, double dx,
                          std::uint64_t seed) {
    if (kernel_name != "alpha" && kernel_name != "beta")
        throw config_error("kernel must be alpha or beta, got " + kernel_name);
    if (hidden < 1 || p < 1) throw config_error("hidden and p must be positive");
    deeponet_model m;
    m.hidden = hidden;
    m.p = p;
    m.kernel_name = kernel_name;
    m.dx = dx;
    m.seed = seed;
    m.scaling = {4.0, 4.0, 4.0, 4.0};
    rng_stream rng(seed);
    m.branch = make_mlp(4, hidden, p, rng);
    m.trunk = make_mlp(2, hidden, p, rng);
    m.bias0 = 0.0;
    return m;
}

std::vector<double> forward(const deeponet_model& model, const std::array<double, 4>& params,
                            const std::vector<std::array<double, 2>>& points) {
    const int H = model.hidden, P = model.p;
    std::vector<double> g(static_cast<std::size_t>(P));
    branch_coefficients(model, params, g);
    std::vector<double> a1(static_cast<std::size_t>(H)), a2(static_cast<std::size_t>(H));
    std::vector<double> f(static_cast<std::size_t>(P));
    std::vector<double> out(points.size());
    for (std::size_t m = 0; m < points.size(); ++m) {
        mlp_forward3(model.trunk, points[m].data(), a1.data(), a2.data(), f.data());
        out[m] = model.bias0 + dot4(g.data(), f.data(), P);
    }
    return out;
}

std::vector<std::array<double, 2>> triangle_points(const triangle_grid& tri) {
    std::vector<std::array<double, 2>> pts;
    pts.reserve(tri.node_count());
    for (int i = 0; i < tri.rows(); ++i)
        for (int j = 0; j <= i; ++j) pts.push_back({tri.base.x(i), tri.base.x(j)});
    return pts;
}

int worker_threads() {
    if (const char* env = std::getenv("KF_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1 && v <= 1024) return static_cast<int>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

kernel_dataset generate_dataset(int n, const std::array<std::array<double, 2>, 4>& bounds,
                                const triangle_grid& tri, const physics_triplet& physics,
                                std::uint64_t seed) {
    if (n < 2) throw config_error("dataset needs at least 2 samples");
    for (const auto& b : bounds)
        if (!(b[0] < b[1])) throw config_error("parameter bounds must satisfy lo < hi");
    kernel_dataset d;
    d.tri = tri;
    d.bounds = bounds;
    d.seed = seed;
    d.n_samples = n;
    d.n_train = static_cast<int>(std::llround(0.9 * n));
    d.physics = physics;
    const std::size_t M = tri.node_count();
    d.params.resize(static_cast<std::size_t>(n) * 4);
    rng_stream rng(seed);
    for (int s = 0; s < n; ++s)
        for (int j = 0; j < 4; ++j)
            d.params[static_cast<std::size_t>(s) * 4 + j] = rng.next_uniform(bounds[j][0], bounds[j][1]);
    d.alpha.resize(static_cast<std::size_t>(n) * M);
    d.beta.resize(static_cast<std::size_t>(n) * M);
    auto solve_range = [&](int lo, int hi) {
        for (int s = lo; s < hi; ++s) {
            const std::array<double, 4> m{d.params[static_cast<std::size_t>(s) * 4],
                                          d.params[static_cast<std::size_t>(s) * 4 + 1],
                                          d.params[static_cast<std::size_t>(s) * 4 + 2],
                                          d.params[static_cast<std::size_t>(s) * 4 + 3]};
            const kernel_pair k = solve_kernels(m, physics.lambda, physics.mu, physics.q, tri);
            std::copy(k.alpha.values.begin(), k.alpha.values.end(),
                      d.alpha.begin() + static_cast<std::ptrdiff_t>(s * M));
            std::copy(k.beta.values.begin(), k.beta.values.end(),
                      d.beta.begin() + static_cast<std::ptrdiff_t>(s * M));
        }
    };
    const int T = std::min(worker_threads(), n);
    if (T > 1) {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(T));
        const int chunk = (n + T - 1) / T;
        for (int t = 0; t < T; ++t)
            pool.emplace_back(solve_range, t * chunk, std::min(n, (t + 1) * chunk));
        for (auto& th : pool) th.join();
    } else {
        solve_range(0, n);
    }
    return d;
}

std::size_t parameter_count(const deeponet_model& model) {
    return mlp_param_count(model.branch) + mlp_param_count(model.trunk) + 1;
}

void flatten_parameters(const deeponet_model& model, std::vector<double>& out) {
    out.clear();
    out.reserve(parameter_count(model));
    for (const mlp* net : {&model.branch, &model.trunk})
        for (const auto& L : net->layers) {
            out.insert(out.end(), L.w.begin(), L.w.end());
            out.insert(out.end(), L.b.begin(), L.b.end());
        }
    out.push_back(model.bias0);
}

void unflatten_parameters(deeponet_model& model, const std::vector<double>& flat) {
    if (flat.size() != parameter_count(model))
        throw config_error("parameter vector size mismatch");
    std::size_t off = 0;
    for (mlp* net : {&model.branch, &model.trunk})
        for (auto& L : net->layers) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + L.w.size()), L.w.begin());
            off += L.w.size();
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + L.b.size()), L.b.begin());
            off += L.b.size();
        }
    model.bias0 = flat[off];
}

double loss_and_gradient(const deeponet_model& model, const std::vector<double>& params_scaled,
                         int n_samples, const std::vector<std::array<double, 2>>& points,
                         const std::vector<double>& targets, std::vector<double>& grad) {
    const int H = model.hidden, P = model.p;
    const int S = n_samples;
    const int M = static_cast<int>(points.size());
    std::vector<double> a1b(static_cast<std::size_t>(S) * H), a2b(static_cast<std::size_t>(S) * H);
    std::vector<double> G(static_cast<std::size_t>(S) * P);
    for (int s = 0; s < S; ++s)
        mlp_forward3(model.branch, params_scaled.data() + static_cast<std::size_t>(s) * 4,
                     a1b.data() + static_cast<std::size_t>(s) * H,
                     a2b.data() + static_cast<std::size_t>(s) * H,
                     G.data() + static_cast<std::size_t>(s) * P);
    const std::vector<double> xt = flat_points(points);
    std::vector<double> a1t(static_cast<std::size_t>(M) * H), a2t(static_cast<std::size_t>(M) * H);
    std::vector<double> F(static_cast<std::size_t>(M) * P);
    for (int m = 0; m < M; ++m)
        mlp_forward3(model.trunk, xt.data() + static_cast<std::size_t>(m) * 2,
                     a1t.data() + static_cast<std::size_t>(m) * H,
                     a2t.data() + static_cast<std::size_t>(m) * H,
                     F.data() + static_cast<std::size_t>(m) * P);

    grad.assign(parameter_count(model), 0.0);
    std::vector<double> dG(static_cast<std::size_t>(S) * P, 0.0);
    std::vector<double> dF(static_cast<std::size_t>(M) * P, 0.0);
    double db0 = 0.0;
    double loss = 0.0;
    const double inv = 1.0 / (static_cast<double>(S) * M);

    // Head passes are tiled so a block of basis rows stays cache-resident
    // across the sample loop; per-element accumulation order is unchanged.
    constexpr int TILE = 64;
    std::vector<double> cmat(static_cast<std::size_t>(S) * M);
    for (int m0 = 0; m0 < M; m0 += TILE) {
        const int m1 = std::min(M, m0 + TILE);
        for (int s = 0; s < S; ++s) {
            const double* gs = G.data() + static_cast<std::size_t>(s) * P;
            double* cs = cmat.data() + static_cast<std::size_t>(s) * M;
            for (int m = m0; m < m1; ++m)
                cs[m] = model.bias0 + dot4(gs, F.data() + static_cast<std::size_t>(m) * P, P);
        }
    }
    for (int s = 0; s < S; ++s) {
        double* cs = cmat.data() + static_cast<std::size_t>(s) * M;
        const double* ys = targets.data() + static_cast<std::size_t>(s) * M;
        for (int m = 0; m < M; ++m) {
            const double r = cs[m] - ys[m];
            loss += r * r;
            const double c = 2.0 * r * inv;
            cs[m] = c;
            db0 += c;
        }
    }
    loss *= inv;
    for (int m0 = 0; m0 < M; m0 += TILE) {
        const int m1 = std::min(M, m0 + TILE);
        for (int s = 0; s < S; ++s) {
            double* dgs = dG.data() + static_cast<std::size_t>(s) * P;
            const double* cs = cmat.data() + static_cast<std::size_t>(s) * M;
            for (int m = m0; m < m1; ++m)
                axpy(cs[m], F.data() + static_cast<std::size_t>(m) * P, dgs, P);
        }
    }
    for (int s0 = 0; s0 < S; s0 += TILE) {
        const int s1 = std::min(S, s0 + TILE);
        for (int m = 0; m < M; ++m) {
            double* dfm = dF.data() + static_cast<std::size_t>(m) * P;
            for (int s = s0; s < s1; ++s)
                axpy(cmat[static_cast<std::size_t>(s) * M + m],
                     G.data() + static_cast<std::size_t>(s) * P, dfm, P);
        }
    }

    const std::size_t branch_n = mlp_param_count(model.branch);
    mlp_backward(model.branch, S, params_scaled.data(), a1b.data(), a2b.data(), dG.data(),
                 grad.data());
    mlp_backward(model.trunk, M, xt.data(), a1t.data(), a2t.data(), dF.data(),
                 grad.data() + branch_n);
    grad.back() = db0;
    return loss;
}

loss_history train(deeponet_model& model, const kernel_dataset& data, const train_config& cfg) {
    if (cfg.epochs < 1) throw config_error("epochs must be positive");
    if (!(cfg.lr > 0.0)) throw config_error("learning rate must be positive");
    if (cfg.decay_every < 1) throw config_error("decay period must be positive");
    if (!(cfg.decay_factor > 0.0)) throw config_error("decay factor must be positive");
    const int S_train = data.n_train;
    const int S_test = data.n_samples - data.n_train;
    if (S_train < 1 || S_test < 1) throw config_error("dataset split leaves an empty side");
    const std::size_t M = data.tri.node_count();
    const auto Mi = static_cast<int>(M);
    const std::vector<double>& src = model.kernel_name == "beta" ? data.beta : data.alpha;

    const std::vector<std::array<double, 2>> points = triangle_points(data.tri);
    const std::vector<double> xt = flat_points(points);

    double scale = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(S_train) * M; ++i)
        scale = std::max(scale, std::fabs(src[i]));
    if (scale <= 0.0) scale = 1.0;
    const double inv_scale = 1.0 / scale;

    std::vector<double> ytr(static_cast<std::size_t>(S_train) * M);
    std::vector<double> yte(static_cast<std::size_t>(S_test) * M);
    for (std::size_t i = 0; i < ytr.size(); ++i) ytr[i] = src[i] * inv_scale;
    for (std::size_t i = 0; i < yte.size(); ++i)
        yte[i] = src[static_cast<std::size_t>(S_train) * M + i] * inv_scale;

    std::vector<double> ptr_scaled(static_cast<std::size_t>(S_train) * 4);
    std::vector<double> pte_scaled(static_cast<std::size_t>(S_test) * 4);
    scale_params(model, data.params.data(), ptr_scaled.data(), S_train);
    scale_params(model, data.params.data() + static_cast<std::size_t>(S_train) * 4,
                 pte_scaled.data(), S_test);

    const std::size_t P = parameter_count(model);
    std::vector<double> theta;
    flatten_parameters(model, theta);
    std::vector<double> grad(P), mbuf(P, 0.0), vbuf(P, 0.0);

    const int B = cfg.batch <= 0 ? S_train : std::min(cfg.batch, S_train);
    std::vector<int> order(static_cast<std::size_t>(S_train));
    for (int i = 0; i < S_train; ++i) order[static_cast<std::size_t>(i)] = i;
    rng_stream shuffle_rng(cfg.seed);

    std::vector<double> bp(static_cast<std::size_t>(B) * 4);
    std::vector<double> by(static_cast<std::size_t>(B) * M);

    loss_history hist;
    hist.target_scale = scale;
    hist.train_mse.reserve(static_cast<std::size_t>(cfg.epochs));
    hist.test_mse.reserve(static_cast<std::size_t>(cfg.epochs));

    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
        if (B < S_train) fisher_yates(order, shuffle_rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < S_train; start += B) {
            const int b = std::min(B, S_train - start);
            for (int r = 0; r < b; ++r) {
                const auto src_i = static_cast<std::size_t>(order[static_cast<std::size_t>(start + r)]);
                std::memcpy(bp.data() + static_cast<std::size_t>(r) * 4,
                            ptr_scaled.data() + src_i * 4, 4 * sizeof(double));
                std::memcpy(by.data() + static_cast<std::size_t>(r) * M,
                            ytr.data() + src_i * M, M * sizeof(double));
            }
            unflatten_parameters(model, theta);
            epoch_loss += loss_and_gradient(model, bp, b, points, by, grad);
            ++batches;
            ++step;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            for (std::size_t i = 0; i < P; ++i) {
                mbuf[i] = b1 * mbuf[i] + (1.0 - b1) * grad[i];
                vbuf[i] = b2 * vbuf[i] + (1.0 - b2) * grad[i] * grad[i];
                theta[i] -= lr * (mbuf[i] / c1) / (std::sqrt(vbuf[i] / c2) + eps);
            }
        }
        unflatten_parameters(model, theta);
        const double train_mse = epoch_loss / batches;
        const double test_mse = mse_only(model, pte_scaled, S_test, xt, Mi, yte);
        if (!std::isfinite(train_mse) || !std::isfinite(test_mse))
            throw divergence_error("training diverged at epoch " + std::to_string(epoch));
        hist.train_mse.push_back(train_mse);
        hist.test_mse.push_back(test_mse);
        if (cfg.target_loss > 0.0 && train_mse <= cfg.target_loss) break;
    }

    // Fold the target normalization into the output layer so the model
    // emits raw kernel values.
    for (auto& v : model.branch.layers[2].w) v *= scale;
    for (auto& v : model.branch.layers[2].b) v *= scale;
    model.bias0 *= scale;
    return hist;
}

kernel_pair kernel_grid_from_model(const deeponet_model& model_alpha,
                                   const deeponet_model& model_beta,
                                   const std::array<double, 4>& params,
                                   const triangle_grid& tri) {
    const auto pts = triangle_points(tri);
    kernel_pair k;
    k.alpha = triangle_kernel_grid(tri);
    k.beta = triangle_kernel_grid(tri);
    k.provenance = kernel_provenance::neural;
    k.alpha.values = forward(model_alpha, params, pts);
    k.beta.values = forward(model_beta, params, pts);
    return k;
}

trunk_basis make_trunk_basis(const deeponet_model& model, const triangle_grid& tri) {
    const int H = model.hidden, P = model.p;
    trunk_basis basis;
    basis.p = P;
    const auto pts = triangle_points(tri);
    const std::size_t M = pts.size();
    std::vector<double> node_major(M * static_cast<std::size_t>(P));
    std::vector<double> a1(static_cast<std::size_t>(H)), a2(static_cast<std::size_t>(H));
    for (std::size_t m = 0; m < M; ++m)
        mlp_forward3(model.trunk, pts[m].data(), a1.data(), a2.data(),
                     node_major.data() + m * static_cast<std::size_t>(P));
    // Basis-major layout so combine_full streams contiguous rows.
    basis.full.resize(node_major.size());
    for (std::size_t m = 0; m < M; ++m)
        for (int k = 0; k < P; ++k)
            basis.full[static_cast<std::size_t>(k) * M + m] =
                node_major[m * static_cast<std::size_t>(P) + static_cast<std::size_t>(k)];
    const int n = tri.rows();
    basis.boundary.resize(static_cast<std::size_t>(n) * P);
    const std::size_t last = tri.row_offset(n - 1) * static_cast<std::size_t>(P);
    std::copy(node_major.begin() + static_cast<std::ptrdiff_t>(last), node_major.end(),
              basis.boundary.begin());
    return basis;
}

void branch_coefficients(const deeponet_model& model, const std::array<double, 4>& params,
                         std::vector<double>& g) {
    const int H = model.hidden, P = model.p;
    double xin[4];
    for (int j = 0; j < 4; ++j) xin[j] = params[static_cast<std::size_t>(j)] / model.scaling[static_cast<std::size_t>(j)];
    std::vector<double> a1(static_cast<std::size_t>(H)), a2(static_cast<std::size_t>(H));
    g.resize(static_cast<std::size_t>(P));
    mlp_forward3(model.branch, xin, a1.data(), a2.data(), g.data());
}

void combine_row(const trunk_basis& basis, const std::vector<double>& g, double bias0, int n,
                 double* out) {
    const int P = basis.p;
    for (int j = 0; j < n; ++j)
        out[j] = bias0 + dot4(g.data(), basis.boundary.data() + static_cast<std::size_t>(j) * P, P);
}

void combine_full(const trunk_basis& basis, const std::vector<double>& g, double bias0,
                  std::size_t m, double* out) {
    for (std::size_t j = 0; j < m; ++j) out[j] = bias0;
    for (int k = 0; k < basis.p; ++k)
        axpy(g[static_cast<std::size_t>(k)], basis.full.data() + static_cast<std::size_t>(k) * m,
             out, static_cast<int>(m));
}

void save_model(const deeponet_model& model, const std::string& path) {
    json j;
    j["magic"] = "DONET1";
    j["kernel"] = model.kernel_name;
    j["p"] = model.p;
    j["hidden"] = model.hidden;
    j["activation"] = model.activation;
    j["scaling"] = model.scaling;
    j["dx"] = model.dx;
    j["seed"] = model.seed;
    json branch = json::array();
    for (const auto& L : model.branch.layers) branch.push_back(layer_to_json(L));
    j["branch"] = std::move(branch);
    json trunk = json::array();
    for (const auto& L : model.trunk.layers) trunk.push_back(layer_to_json(L));
    j["trunk"] = std::move(trunk);
    j["bias0"] = model.bias0;
    write_file_atomic(path, j.dump());
}

deeponet_model load_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw io_error(path + ": " + e.what());
    }
    try {
        if (j.at("magic").get<std::string>() != "DONET1")
            throw io_error(path + ": bad magic, expected DONET1");
        deeponet_model m;
        m.kernel_name = j.at("kernel").get<std::string>();
        if (m.kernel_name != "alpha" && m.kernel_name != "beta")
            throw io_error(path + ": unknown kernel name " + m.kernel_name);
        m.p = j.at("p").get<int>();
        m.hidden = j.at("hidden").get<int>();
        m.activation = j.at("activation").get<std::string>();
        if (m.activation != "tanh") throw io_error(path + ": unsupported activation");
        m.scaling = j.at("scaling").get<std::array<double, 4>>();
        m.dx = j.at("dx").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto& jb = j.at("branch");
        const auto& jt = j.at("trunk");
        if (jb.size() != 3 || jt.size() != 3) throw io_error(path + ": expected 3 layers per net");
        for (int i = 0; i < 3; ++i) {
            m.branch.layers[static_cast<std::size_t>(i)] = layer_from_json(jb.at(static_cast<std::size_t>(i)), path);
            m.trunk.layers[static_cast<std::size_t>(i)] = layer_from_json(jt.at(static_cast<std::size_t>(i)), path);
        }
        if (m.branch.layers[0].in != 4 || m.trunk.layers[0].in != 2 ||
            m.branch.layers[2].out != m.p || m.trunk.layers[2].out != m.p ||
            m.branch.layers[0].out != m.hidden || m.trunk.layers[0].out != m.hidden)
            throw io_error(path + ": layer shapes disagree with header fields");
        m.bias0 = j.at("bias0").get<double>();
        return m;
    } catch (const json::exception& e) {
        throw io_error(path + ": " + e.what());
    }
}

void save_dataset(const kernel_dataset& data, const std::string& dir) {
    ensure_directory(dir);
    json j;
    j["magic"] = "KDS1";
    j["n"] = data.n_samples;
    j["dx"] = data.tri.base.dx;
    j["bounds"] = data.bounds;
    j["seed"] = data.seed;
    j["split"] = 0.9;
    j["physics"] = {{"lambda", data.physics.lambda}, {"mu", data.physics.mu}, {"q", data.physics.q}};
    const std::size_t M = data.tri.node_count();
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(data.n_samples) * (4 + 2 * M));
    for (int s = 0; s < data.n_samples; ++s) {
        const auto si = static_cast<std::size_t>(s);
        buf.insert(buf.end(), data.params.begin() + static_cast<std::ptrdiff_t>(si * 4),
                   data.params.begin() + static_cast<std::ptrdiff_t>(si * 4 + 4));
        buf.insert(buf.end(), data.alpha.begin() + static_cast<std::ptrdiff_t>(si * M),
                   data.alpha.begin() + static_cast<std::ptrdiff_t>((si + 1) * M));
        buf.insert(buf.end(), data.beta.begin() + static_cast<std::ptrdiff_t>(si * M),
                   data.beta.begin() + static_cast<std::ptrdiff_t>((si + 1) * M));
    }
    write_binary_atomic(dir + "/samples.bin", buf.data(), buf.size() * sizeof(double));
    write_file_atomic(dir + "/manifest.json", j.dump(2) + "\n");
}

kernel_dataset load_dataset(const std::string& dir) {
    const std::string mpath = dir + "/manifest.json";
    json j;
    try {
        j = json::parse(read_file(mpath));
    } catch (const json::exception& e) {
        throw io_error(mpath + ": " + e.what());
    }
    try {
        if (j.at("magic").get<std::string>() != "KDS1")
            throw io_error(mpath + ": bad magic, expected KDS1");
        kernel_dataset d;
        d.n_samples = j.at("n").get<int>();
        d.tri = triangle_grid(spatial_grid::from_dx(j.at("dx").get<double>()));
        d.bounds = j.at("bounds").get<std::array<std::array<double, 2>, 4>>();
        d.seed = j.at("seed").get<std::uint64_t>();
        const double split = j.at("split").get<double>();
        d.n_train = static_cast<int>(std::llround(split * d.n_samples));
        const auto& ph = j.at("physics");
        d.physics.lambda = ph.at("lambda").get<double>();
        d.physics.mu = ph.at("mu").get<double>();
        d.physics.q = ph.at("q").get<double>();
        const std::size_t M = d.tri.node_count();
        const std::vector<double> buf = read_doubles(dir + "/samples.bin");
        const std::size_t rec = 4 + 2 * M;
        if (buf.size() != rec * static_cast<std::size_t>(d.n_samples))
            throw io_error(dir + "/samples.bin: size disagrees with manifest");
        d.params.resize(static_cast<std::size_t>(d.n_samples) * 4);
        d.alpha.resize(static_cast<std::size_t>(d.n_samples) * M);
        d.beta.resize(static_cast<std::size_t>(d.n_samples) * M);
        for (int s = 0; s < d.n_samples; ++s) {
            const auto si = static_cast<std::size_t>(s);
            const double* r = buf.data() + si * rec;
            std::copy(r, r + 4, d.params.begin() + static_cast<std::ptrdiff_t>(si * 4));
            std::copy(r + 4, r + 4 + M, d.alpha.begin() + static_cast<std::ptrdiff_t>(si * M));
            std::copy(r + 4 + M, r + rec, d.beta.begin() + static_cast<std::ptrdiff_t>(si * M));
        }
        return d;
    } catch (const json::exception& e) {
        throw io_error(mpath + ": " + e.what());
    }
}

}  // namespace kflow
