#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kflow/kflow.h"

namespace {

int report_failure(int rc) {
    std::fprintf(stderr, "error: %s\n", kf_last_error());
    return rc;
}

bool parse_double_list(const std::string& s, std::vector<double>& out) {
    out.clear();
    const char* p = s.c_str();
    while (*p) {
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p) return false;
        out.push_back(v);
        p = end;
        if (*p == ',') ++p;
        else if (*p) return false;
    }
    return !out.empty();
}

// Accepts "lo,hi" (applied to all four parameters) or eight values.
bool parse_bounds(const std::string& s, double bounds[8]) {
    std::vector<double> v;
    if (!parse_double_list(s, v)) return false;
    if (v.size() == 2) {
        for (int i = 0; i < 4; ++i) {
            bounds[2 * i] = v[0];
            bounds[2 * i + 1] = v[1];
        }
        return true;
    }
    if (v.size() == 8) {
        std::copy(v.begin(), v.end(), bounds);
        return true;
    }
    return false;
}

bool load_json_file(const std::string& path, nlohmann::json& j, std::string& err) {
    std::ifstream in(path);
    if (!in) {
        err = "cannot open config file " + path;
        return false;
    }
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        err = path + ": " + e.what();
        return false;
    }
    return true;
}

// Config file keys mirror the long flag names; flags given on the command
// line take precedence (applied after this).
bool apply_config(const nlohmann::json& j, kf_sim_params& p, std::string& err) {
    try {
        auto scalar = [&](const char* key, double& dst) {
            if (j.contains(key)) dst = j.at(key).get<double>();
        };
        auto quad = [&](const char* key, double* dst) {
            if (!j.contains(key)) return true;
            const auto v = j.at(key).get<std::vector<double>>();
            if (v.size() != 4) {
                err = std::string(key) + " must hold exactly 4 values";
                return false;
            }
            std::copy(v.begin(), v.end(), dst);
            return true;
        };
        scalar("lambda", p.lambda);
        scalar("mu", p.mu);
        scalar("q", p.q);
        if (!quad("m", p.m) || !quad("m-bar", p.m_bar) || !quad("rho", p.rho) ||
            !quad("m-hat0", p.m_hat0))
            return false;
        scalar("dx", p.dx);
        scalar("dt", p.dt);
        scalar("t-end", p.t_end);
        scalar("lyap-a", p.lyap_a);
        scalar("lyap-b", p.lyap_b);
        return true;
    } catch (const nlohmann::json::exception& e) {
        err = e.what();
        return false;
    }
}

std::string config_string(const nlohmann::json& j, const char* key, const std::string& fallback) {
    if (j.contains(key)) return j.at(key).get<std::string>();
    return fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive backstepping control of a 2x2 hyperbolic system with "
                 "neural-operator kernel surrogates"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate a kernel training dataset");
    int gen_n = 2000;
    double gen_dx = 0.02;
    std::string gen_bounds = "-4,4";
    unsigned long long gen_seed = 1;
    std::string gen_out;
    gen->add_option("--n", gen_n, "number of samples");
    gen->add_option("--dx", gen_dx, "triangle grid spacing");
    gen->add_option("--bounds", gen_bounds, "parameter box: lo,hi or 8 values");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    auto* train = app.add_subcommand("train", "Train a kernel surrogate");
    std::string tr_data, tr_kernel, tr_out, tr_loss;
    int tr_hidden = 64, tr_p = 64, tr_epochs = 2000, tr_decay_every = 150, tr_batch = 256;
    double tr_lr = 1e-3, tr_decay_factor = 0.8;
    unsigned long long tr_seed = 1;
    train->add_option("--data", tr_data, "dataset directory")->required();
    train->add_option("--kernel", tr_kernel, "alpha or beta")->required();
    train->add_option("--epochs", tr_epochs, "training epochs");
    train->add_option("--lr", tr_lr, "initial learning rate");
    train->add_option("--decay-every", tr_decay_every, "epochs between decays");
    train->add_option("--decay-factor", tr_decay_factor, "learning-rate decay factor");
    train->add_option("--seed", tr_seed, "init and shuffle seed");
    train->add_option("--out", tr_out, "model output path")->required();
    train->add_option("--hidden", tr_hidden, "hidden width");
    train->add_option("--p", tr_p, "basis size");
    train->add_option("--batch", tr_batch, "minibatch size, 0 = full batch");
    train->add_option("--loss-out", tr_loss, "loss CSV path (default: <out>.loss.csv)");

    auto* sim = app.add_subcommand("simulate", "Run the closed loop and write a trace");
    std::string sim_mode, sim_ma, sim_mb, sim_out, sim_config;
    double sim_dx = 0.02, sim_dt = 0.005, sim_tend = 10.0;
    sim->add_option("--mode", sim_mode, "numerical or neural");
    sim->add_option("--model-alpha", sim_ma, "alpha surrogate (neural mode)");
    sim->add_option("--model-beta", sim_mb, "beta surrogate (neural mode)");
    sim->add_option("--dx", sim_dx, "grid spacing");
    sim->add_option("--dt", sim_dt, "time step");
    sim->add_option("--t-end", sim_tend, "final time");
    sim->add_option("--out", sim_out, "trace CSV path")->required();
    sim->add_option("--config", sim_config, "JSON config (flags override)");

    auto* bench = app.add_subcommand("bench", "Time numerical vs neural kernel production");
    std::string be_list = "0.02,0.01,0.005", be_ma, be_mb, be_out, be_config;
    int be_steps = 2000;
    bench->add_option("--dx-list", be_list, "comma-separated grid spacings");
    bench->add_option("--steps", be_steps, "control steps per run");
    bench->add_option("--model-alpha", be_ma, "alpha surrogate")->required();
    bench->add_option("--model-beta", be_mb, "beta surrogate")->required();
    bench->add_option("--out", be_out, "bench CSV path")->required();
    bench->add_option("--config", be_config, "JSON config (flags override)");

    auto* rep = app.add_subcommand("report", "Summarize a trace CSV as JSON");
    std::string rep_trace, rep_out;
    rep->add_option("--trace", rep_trace, "trace CSV path")->required();
    rep->add_option("--out", rep_out, "summary JSON path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen->parsed()) {
        double bounds[8];
        if (!parse_bounds(gen_bounds, bounds)) {
            std::fprintf(stderr, "error: --bounds needs 2 or 8 comma-separated numbers\n");
            return 2;
        }
        kf_sim_params p;
        kf_sim_params_defaults(&p);
        const int rc = kf_gen_data(&p, gen_n, gen_dx, bounds, gen_seed, gen_out.c_str());
        return rc ? report_failure(rc) : 0;
    }

    if (train->parsed()) {
        if (tr_loss.empty()) tr_loss = tr_out + ".loss.csv";
        const int rc = kf_train(tr_data.c_str(), tr_kernel.c_str(), tr_hidden, tr_p, tr_epochs,
                                tr_lr, tr_decay_every, tr_decay_factor, tr_batch, tr_seed,
                                tr_out.c_str(), tr_loss.c_str());
        return rc ? report_failure(rc) : 0;
    }

    if (sim->parsed()) {
        kf_sim_params p;
        kf_sim_params_defaults(&p);
        if (!sim_config.empty()) {
            nlohmann::json j;
            std::string err;
            if (!load_json_file(sim_config, j, err)) {
                std::fprintf(stderr, "error: %s\n", err.c_str());
                return 4;
            }
            if (!apply_config(j, p, err)) {
                std::fprintf(stderr, "error: %s: %s\n", sim_config.c_str(), err.c_str());
                return 2;
            }
            if (sim_mode.empty()) sim_mode = config_string(j, "mode", "");
            if (sim_ma.empty()) sim_ma = config_string(j, "model-alpha", "");
            if (sim_mb.empty()) sim_mb = config_string(j, "model-beta", "");
            if (sim->count("--dx") == 0 && j.contains("dx")) sim_dx = p.dx;
            if (sim->count("--dt") == 0 && j.contains("dt")) sim_dt = p.dt;
            if (sim->count("--t-end") == 0 && j.contains("t-end")) sim_tend = p.t_end;
        }
        if (sim_mode.empty()) {
            std::fprintf(stderr, "error: --mode is required (numerical or neural)\n");
            return 2;
        }
        p.dx = sim_dx;
        p.dt = sim_dt;
        p.t_end = sim_tend;
        const int rc = kf_simulate(&p, sim_mode.c_str(),
                                   sim_ma.empty() ? nullptr : sim_ma.c_str(),
                                   sim_mb.empty() ? nullptr : sim_mb.c_str(), sim_out.c_str());
        return rc ? report_failure(rc) : 0;
    }

    if (bench->parsed()) {
        kf_sim_params p;
        kf_sim_params_defaults(&p);
        if (!be_config.empty()) {
            nlohmann::json j;
            std::string err;
            if (!load_json_file(be_config, j, err)) {
                std::fprintf(stderr, "error: %s\n", err.c_str());
                return 4;
            }
            if (!apply_config(j, p, err)) {
                std::fprintf(stderr, "error: %s: %s\n", be_config.c_str(), err.c_str());
                return 2;
            }
        }
        std::vector<double> dxs;
        if (!parse_double_list(be_list, dxs)) {
            std::fprintf(stderr, "error: --dx-list needs comma-separated numbers\n");
            return 2;
        }
        const int rc = kf_bench(&p, dxs.data(), static_cast<int>(dxs.size()), be_steps,
                                be_ma.c_str(), be_mb.c_str(), be_out.c_str());
        return rc ? report_failure(rc) : 0;
    }

    if (rep->parsed()) {
        const char* text = nullptr;
        const int rc = kf_report(rep_trace.c_str(), rep_out.empty() ? nullptr : rep_out.c_str(),
                                 rep_out.empty() ? &text : nullptr);
        if (rc) return report_failure(rc);
        if (text) std::fputs(text, stdout);
        return 0;
    }

    return 2;
}
