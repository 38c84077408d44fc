// Command-line front end: analytic queries (psi, alpha), scale-function
// tables, exact tree simulation, overshoot densities/samples, and the
// statistical verification suites.  All randomness is driven by a master
// seed with per-replicate substreams, so outputs are byte-identical across
// reruns and thread counts.
//
// Exit codes: 0 success / all checks passed, 1 verification failure,
// 2 configuration error.

#include <cstdio>
#include <fstream>
#include <algorithm>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmj/experiments.hpp"
#include "cmj/overshoot.hpp"
#include "cmj/parallel.hpp"
#include "cmj/report.hpp"
#include "cmj/scale.hpp"
#include "cmj/simulate.hpp"

namespace {

struct ModelOpts {
    double b = 0.0;
    std::string lifespan;

    cmj::LevyModel build() const { return {b, cmj::parse_lifespan(lifespan)}; }
};

void add_model_opts(CLI::App* cmd, ModelOpts& mo) {
    // --config is consumed by expand_config_args() before CLI11 parsing;
    // the option exists so that --help documents it.
    static std::string dummy;
    cmd->add_option("--config", dummy,
                    "Config file with plain 'key = value' lines (flags override the file)");
    cmd->add_option("--b", mo.b, "Birth rate b > 0")->required();
    cmd->add_option("--lifespan", mo.lifespan,
                    "Lifetime law: exp:<d> | det:<v0> | unif:<lo>,<hi> | gamma:<k>,<theta> | inf")
        ->required();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Replaces "--config <file>" with the file's "key = value" lines, turned
// into --key value pairs.  Keys already given as flags keep their
// command-line values; unknown keys surface as unrecognized options.
std::vector<std::string> expand_config_args(const std::vector<std::string>& in) {
    std::vector<std::string> args;
    std::vector<std::string> files;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto& a = in[i];
        if (a == "--config") {
            if (i + 1 >= in.size()) throw cmj::ConfigError("--config needs a file path");
            files.push_back(in[++i]);
        } else if (a.rfind("--config=", 0) == 0) {
            files.push_back(a.substr(9));
        } else {
            args.push_back(a);
        }
    }
    for (const auto& path : files) {
        std::ifstream f(path);
        if (!f) throw cmj::ConfigError("cannot open config file '" + path + "'");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const std::string stripped = trim(line);
            if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos)
                throw cmj::ConfigError("config file " + path + ":" + std::to_string(lineno) +
                                       ": expected 'key = value'");
            const std::string key = trim(stripped.substr(0, eq));
            const std::string value = trim(stripped.substr(eq + 1));
            if (key.empty() || value.empty())
                throw cmj::ConfigError("config file " + path + ":" + std::to_string(lineno) +
                                       ": empty key or value");
            const std::string flag = "--" + key;
            bool overridden = false;
            for (const auto& a : args)
                if (a == flag || a.rfind(flag + "=", 0) == 0) overridden = true;
            if (!overridden) {
                args.push_back(flag);
                args.push_back(value);
            }
        }
    }
    return args;
}

std::vector<double> parse_time_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const auto comma = csv.find(',', pos);
        const auto piece = csv.substr(pos, comma == std::string::npos ? std::string::npos
                                                                      : comma - pos);
        if (piece.empty()) throw cmj::ConfigError("empty entry in time list '" + csv + "'");
        out.push_back(cmj::detail::parse_number(piece, csv));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw cmj::ConfigError("cannot open output file '" + path + "'");
    return f;
}

void print12(const char* label, double v) { std::printf("%s %.12g\n", label, v); }

int run_verify(const std::string& suite, const cmj::LevyModel& m, double t, double delta,
               double u, std::size_t reps, std::uint64_t seed, unsigned threads,
               const std::string& tgrid_csv, const std::string& report_path) {
    const double a = m.alpha();
    std::vector<cmj::TestReport> reports;
    if (suite == "marginal") {
        const double tt = t > 0.0 ? t : 5.0 / a;
        reports = cmj::marginal_experiment(m, tt, reps, seed, threads);
    } else if (suite == "lln") {
        const double tt = t > 0.0 ? t : std::log(1000.0) / a;
        reports = cmj::lln_experiment(m, tt, reps, seed, threads);
    } else if (suite == "clt") {
        const double tt = t > 0.0 ? t : std::log(5000.0) / a;
        const double dd = delta > 0.0 ? delta : std::log(400.0) / a;
        reports = cmj::clt_experiment(m, tt, dd, reps, seed, threads);
    } else if (suite == "moments") {
        const auto grid = parse_time_list(tgrid_csv);
        const double dd = delta > 0.0 ? delta : std::log(400.0) / a;
        reports = cmj::moment_experiment(m, grid, dd, reps, seed, threads);
    } else if (suite == "subtree") {
        const double uu = u > 0.0 ? u : 20.0 / a;
        const double tt = t > 0.0 ? t : std::log(2000.0) / a;
        const double dd = delta > 0.0 ? delta : std::log(400.0) / a;
        reports = cmj::subtree_moment_experiment(m, uu, tt, dd, reps, seed, threads);
    } else {
        throw cmj::ConfigError("unknown verify suite '" + suite + "'");
    }
    for (const auto& r : reports) std::puts(cmj::format_line(r).c_str());
    if (!report_path.empty()) {
        auto f = open_output(report_path);
        f << cmj::to_json(reports).dump(2) << "\n";
    }
    return cmj::all_pass(reports) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Supercritical binary homogeneous CMJ (splitting tree) toolkit"};
    app.require_subcommand(1);

    ModelOpts psi_m, alpha_m, scale_m, sim_m, over_m, verify_m;

    auto* cmd_psi = app.add_subcommand("psi", "Evaluate the Laplace exponent psi(x)");
    double psi_x = 0.0;
    add_model_opts(cmd_psi, psi_m);
    cmd_psi->add_option("--x", psi_x, "Evaluation point x >= 0")->required();

    auto* cmd_alpha = app.add_subcommand(
        "alpha", "Malthusian parameter alpha, psi'(alpha) and 2 - psi'(alpha)");
    add_model_opts(cmd_alpha, alpha_m);

    auto* cmd_scale = app.add_subcommand("scale", "Tabulate W and derived quantities to CSV");
    double sc_tmax = 10.0, sc_step = 1e-3;
    std::string sc_out;
    add_model_opts(cmd_scale, scale_m);
    cmd_scale->add_option("--tmax", sc_tmax, "Table horizon")->required();
    cmd_scale->add_option("--step", sc_step, "Grid step (default 1e-3)");
    cmd_scale->add_option("--out", sc_out, "Output CSV path")->required();

    auto* cmd_sim = app.add_subcommand("simulate", "Exact splitting-tree replicates to CSV");
    double sim_T = 0.0;
    std::string sim_checkpoints, sim_out;
    std::size_t sim_reps = 1000;
    std::uint64_t sim_seed = 1, sim_cap = 100000000;
    unsigned sim_threads = cmj::default_thread_count();
    add_model_opts(cmd_sim, sim_m);
    cmd_sim->add_option("--horizon", sim_T, "Simulation horizon T")->required();
    cmd_sim->add_option("--checkpoints", sim_checkpoints, "Comma list of times in [0, T]");
    cmd_sim->add_option("--reps", sim_reps, "Replicates");
    cmd_sim->add_option("--seed", sim_seed, "Master seed");
    cmd_sim->add_option("--threads", sim_threads, "Worker threads (default: CMJ_THREADS or hw)");
    cmd_sim->add_option("--cap", sim_cap, "Per-replicate individual cap");
    cmd_sim->add_option("--out", sim_out, "Output CSV path")->required();

    auto* cmd_over = app.add_subcommand(
        "overshoot", "Residual-lifetime (overshoot) density table and sampled residuals");
    double ov_u = 0.0;
    std::string ov_out, ov_res_out;
    std::size_t ov_reps = 200, ov_grid = 400;
    std::uint64_t ov_seed = 1;
    add_model_opts(cmd_over, over_m);
    cmd_over->add_option("--u", ov_u, "Level u > 0")->required();
    cmd_over->add_option("--out", ov_out, "Density table CSV path")->required();
    cmd_over->add_option("--grid", ov_grid, "Number of density table rows");
    cmd_over->add_option("--residuals-out", ov_res_out,
                         "Optional CSV of simulated residual lifetimes");
    cmd_over->add_option("--reps", ov_reps, "Tree replicates for --residuals-out");
    cmd_over->add_option("--seed", ov_seed, "Master seed for --residuals-out");

    auto* cmd_verify = app.add_subcommand("verify", "Statistical verification suites");
    std::string vf_suite, vf_report, vf_tgrid = "0,0.5,1,2,4";
    double vf_t = 0.0, vf_delta = 0.0, vf_u = 0.0;
    std::size_t vf_reps = 20000;
    std::uint64_t vf_seed = 1;
    unsigned vf_threads = cmj::default_thread_count();
    cmd_verify->add_option("suite", vf_suite, "marginal|lln|clt|moments|subtree")->required();
    add_model_opts(cmd_verify, verify_m);
    cmd_verify->add_option("--t", vf_t, "Checkpoint time (suite-specific default)");
    cmd_verify->add_option("--delta", vf_delta, "Proxy horizon gap (default ln(400)/alpha)");
    cmd_verify->add_option("--u", vf_u, "Overshoot level for the subtree suite");
    cmd_verify->add_option("--tgrid", vf_tgrid, "Moment-suite t grid (comma list)");
    cmd_verify->add_option("--reps", vf_reps, "Replicates");
    cmd_verify->add_option("--seed", vf_seed, "Master seed");
    cmd_verify->add_option("--threads", vf_threads, "Worker threads");
    cmd_verify->add_option("--report", vf_report, "JSON report output path");

    try {
        std::vector<std::string> raw(argv + 1, argv + argc);
        std::vector<std::string> args = expand_config_args(raw);
        std::reverse(args.begin(), args.end());  // CLI11 consumes back-to-front
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const cmj::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    try {
        if (cmd_psi->parsed()) {
            const auto m = psi_m.build();
            if (psi_x < 0.0) throw cmj::ConfigError("--x must be >= 0");
            std::printf("%.12g\n", m.psi(psi_x));
            return 0;
        }
        if (cmd_alpha->parsed()) {
            const auto m = alpha_m.build();
            print12("alpha", m.alpha());
            print12("psi_prime_alpha", m.psi_prime_alpha());
            print12("clt_variance", cmj::clt_variance(m));
            return 0;
        }
        if (cmd_scale->parsed()) {
            const auto m = scale_m.build();
            const auto tbl = cmj::build_scale_table(m, sc_tmax, sc_step);
            auto f = open_output(sc_out);
            f << "t,W,WconvPV,meanN,survival,jointNE\n";
            char line[256];
            for (std::size_t k = 0; k < tbl.size(); ++k) {
                const double t = tbl.grid_time(k);
                std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", t,
                              tbl.w(t), tbl.w_star_pv(t), tbl.mean_nt(t), tbl.survival_prob(t),
                              tbl.joint_moment_ne(t));
                f << line;
            }
            return 0;
        }
        if (cmd_sim->parsed()) {
            const auto m = sim_m.build();
            cmj::TreeSimConfig cfg{.model = m, .horizon = sim_T};
            if (!sim_checkpoints.empty()) cfg.checkpoints = parse_time_list(sim_checkpoints);
            cfg.max_individuals = sim_cap;
            auto samples = cmj::run_replicates<cmj::PopulationSample>(
                sim_reps, sim_threads, sim_seed, [&cfg] {
                    return [sim = cmj::TreeSimulator(cfg)](std::size_t, cmj::Rng& rng) mutable {
                        return sim.run(rng);
                    };
                });
            auto f = open_output(sim_out);
            f << "rep,seed";
            for (double c : cfg.checkpoints) {
                char h[48];
                std::snprintf(h, sizeof(h), ",N_%g", c);
                f << h;
            }
            f << ",N_T,E_hat,truncated\n";
            char buf[96];
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto& s = samples[i];
                f << i << "," << cmj::substream_seed(sim_seed, i);
                for (const auto c : s.counts) f << "," << c;
                const double e_hat =
                    s.truncated ? std::numeric_limits<double>::quiet_NaN()
                                : cmj::estimate_E(s, m);
                std::snprintf(buf, sizeof(buf), ",%llu,%.12g,%d\n",
                              static_cast<unsigned long long>(s.alive_at_horizon), e_hat,
                              s.truncated ? 1 : 0);
                f << buf;
            }
            return 0;
        }
        if (cmd_over->parsed()) {
            const auto m = over_m.build();
            const auto tbl = cmj::build_scale_table(m, ov_u, 1e-3);
            const auto& dist = m.lifespan();
            double x_lo = 0.0, x_hi = dist.upper_point(1e-12);
            if (dist.kind() == cmj::LifespanDistribution::Kind::Deterministic) {
                x_lo = std::max(0.0, dist.param_a() - ov_u);
                x_hi = dist.param_a();
            }
            auto f = open_output(ov_out);
            f << "x,density,limit_density\n";
            char line[128];
            for (std::size_t j = 0; j <= ov_grid; ++j) {
                const double x =
                    x_lo + (x_hi - x_lo) * (static_cast<double>(j) + 0.5) /
                               (static_cast<double>(ov_grid) + 1.0);
                std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g\n", x,
                              cmj::overshoot_density(m, tbl, ov_u, x),
                              cmj::overshoot_limit_density(m, x));
                f << line;
            }
            if (!ov_res_out.empty()) {
                auto rf = open_output(ov_res_out);
                rf << "rep,index,residual\n";
                auto samples = cmj::run_replicates<cmj::OvershootSample>(
                    ov_reps, 1, ov_seed, [&m, u = ov_u] {
                        return [&m, u](std::size_t, cmj::Rng& rng) {
                            return cmj::extract_residual_lifetimes(m, u, rng);
                        };
                    });
                for (std::size_t i = 0; i < samples.size(); ++i)
                    for (std::size_t j = 0; j < samples[i].residuals.size(); ++j) {
                        std::snprintf(line, sizeof(line), "%zu,%zu,%.12g\n", i, j,
                                      samples[i].residuals[j]);
                        rf << line;
                    }
            }
            return 0;
        }
        if (cmd_verify->parsed()) {
            const auto m = verify_m.build();
            return run_verify(vf_suite, m, vf_t, vf_delta, vf_u, vf_reps, vf_seed, vf_threads,
                              vf_tgrid, vf_report);
        }
    } catch (const cmj::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const cmj::SubcriticalModel& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const cmj::GridTooFine& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
