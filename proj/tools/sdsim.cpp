// Command-line front end.
//
//   sdsim run   --config cfg.json --out dir [--resume snap.sdbf]
//   sdsim fit   --config cfg.json --out dir
//   sdsim sweep --config cfg.json --out dir
//   sdsim check --config cfg.json
//
// Exit codes: 0 success, 2 configuration error, 3 integration diverged,
// 4 I/O failure, 5 wrap guard tripped inside a requested fit window.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "sdsim/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;
constexpr int kExitWrapGuard = 5;

struct Options {
    std::string config;
    std::string out;
    std::string resume;
    int threads = 1; // reserved: execution is single-threaded and deterministic
    unsigned long long seed = 0; // reserved: the pipeline draws no random numbers
};

int do_run(const Options& opt) {
    auto cfg = sdsim::load_config(opt.config);
    std::optional<std::string> resume;
    if (!opt.resume.empty()) resume = opt.resume;
    auto manifest = sdsim::run_scenario(cfg, opt.out, resume);
    if (!manifest.completed) {
        std::fprintf(stderr, "sdsim: integration diverged at step %ld; partial outputs kept in %s\n",
                     manifest.diverged_step.value_or(-1), opt.out.c_str());
        return kExitDiverged;
    }
    std::printf("run complete: t_final=%.17g, outputs in %s\n", manifest.t_final,
                opt.out.c_str());
    return kExitOk;
}

int do_fit(const Options& opt) {
    auto cfg = sdsim::load_config(opt.config);
    sdsim::SimulationResult result;
    auto manifest = sdsim::run_scenario(cfg, opt.out, std::nullopt, &result);
    if (!manifest.completed) {
        std::fprintf(stderr, "sdsim: integration diverged at step %ld; nothing to fit\n",
                     manifest.diverged_step.value_or(-1));
        return kExitDiverged;
    }
    const auto window = sdsim::decay_window(result.series, cfg);

    nlohmann::json fits = nlohmann::json::array();
    const std::filesystem::path dir(opt.out);
    for (double p : cfg.p_list) {
        auto fit = sdsim::fit_decay(result.series, p, window, cfg.dim);
        nlohmann::json j;
        j["p"] = fit.p;
        j["fitted"] = fit.fitted;
        j["theoretical"] = fit.theoretical;
        j["extrapolated"] = fit.extrapolated;
        j["window"] = {fit.window_lo, fit.window_hi};
        j["residual_rms"] = fit.residual_rms;
        j["samples"] = fit.samples;
        fits.push_back(j);
        char name[48];
        std::snprintf(name, sizeof name, "plot_%s.csv", sdsim::detail::lp_column_name(p).c_str());
        sdsim::emit_plot_data((dir / name).string(), result.series, p, fit);
        std::printf("fit p=%g: slope %.6f (theory %.6f%s), rms %.3g, %zu samples\n", p,
                    fit.fitted, -fit.theoretical, fit.extrapolated ? ", extrapolated" : "",
                    fit.residual_rms, fit.samples);
    }
    std::ofstream f((dir / "decay_fit.json").string(), std::ios::binary);
    if (!f) throw sdsim::IoError("cannot open for writing: decay_fit.json");
    f << fits.dump(2) << '\n';
    return kExitOk;
}

int do_sweep(const Options& opt) {
    auto cfg = sdsim::load_config(opt.config);
    if (cfg.mu_list.empty())
        throw sdsim::ConfigError("sweep requires a nonempty 'mu_list' in the configuration");
    auto table = sdsim::mu_limit_sweep(cfg, cfg.mu_list);
    std::error_code ec;
    std::filesystem::create_directories(opt.out, ec);
    if (ec) throw sdsim::IoError("cannot create output directory: " + opt.out);
    const auto path = (std::filesystem::path(opt.out) / "sweep.csv").string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw sdsim::IoError("cannot open for writing: " + path);
    f << "mu,nls_divergence,diverged,diverged_step\n";
    for (const auto& row : table) {
        char line[128];
        std::snprintf(line, sizeof line, "%.17g,%.17g,%d,%ld\n", row.mu,
                      row.diverged ? 0.0 : row.divergence, row.diverged ? 1 : 0,
                      row.diverged_step);
        f << line;
        std::printf("mu=%.6g: %s\n", row.mu,
                    row.diverged ? "diverged" : sdsim::detail::g17(row.divergence).c_str());
    }
    return kExitOk;
}

int do_check(const Options& opt) {
    auto cfg = sdsim::load_config(opt.config);
    const auto g = sdsim::make_grid(cfg.dim, cfg.n, cfg.box_length, cfg.point_budget);
    const std::size_t points = g.point_count();
    const double steps = std::ceil(cfg.step.t_end / cfg.step.dt);
    std::printf("config ok: dim=%d n=%d L=%g points=%zu steps=%.0f digest=%s\n", cfg.dim, cfg.n,
                cfg.box_length, points, steps, sdsim::config_digest(cfg).c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pseudo-spectral simulator for a dispersive wave / relaxing medium system"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", opt.config, "JSON scenario configuration")->required();
        if (needs_out) sub->add_option("--out", opt.out, "output directory")->required();
        sub->add_option("--threads", opt.threads, "worker threads (reserved, must be >= 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "random seed (reserved; runs are deterministic)");
    };

    CLI::App* run = app.add_subcommand("run", "integrate a scenario and write its outputs");
    add_common(run, true);
    run->add_option("--resume", opt.resume, "resume from a state snapshot (.sdbf)");
    CLI::App* fit = app.add_subcommand("fit", "run a scenario and fit decay exponents");
    add_common(fit, true);
    CLI::App* sweep = app.add_subcommand("sweep", "sweep the relaxation constant against the cubic limit");
    add_common(sweep, true);
    CLI::App* check = app.add_subcommand("check", "validate a configuration and print its footprint");
    add_common(check, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) return do_run(opt);
        if (fit->parsed()) return do_fit(opt);
        if (sweep->parsed()) return do_sweep(opt);
        return do_check(opt);
    } catch (const sdsim::WrapGuardError& e) {
        std::fprintf(stderr, "sdsim: %s\n", e.what());
        return kExitWrapGuard;
    } catch (const sdsim::DivergenceError& e) {
        std::fprintf(stderr, "sdsim: %s\n", e.what());
        return kExitDiverged;
    } catch (const sdsim::ConfigError& e) {
        std::fprintf(stderr, "sdsim: %s\n", e.what());
        return kExitConfig;
    } catch (const sdsim::GridError& e) {
        std::fprintf(stderr, "sdsim: %s\n", e.what());
        return kExitConfig;
    } catch (const sdsim::IoError& e) {
        std::fprintf(stderr, "sdsim: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sdsim: unexpected error: %s\n", e.what());
        return kExitIo;
    }
}
