// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth | train | eval | infer | gradcheck.
// Exit codes: 0 success, 1 operational error, 2 verification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "marppg/checkpoint.hpp"
#include "marppg/config.hpp"
#include "marppg/csvio.hpp"
#include "marppg/errors.hpp"
#include "marppg/eval.hpp"
#include "marppg/gradcheck.hpp"
#include "marppg/losses.hpp"
#include "marppg/manifest.hpp"
#include "marppg/synth.hpp"
#include "marppg/train.hpp"

namespace fs = std::filesystem;
using namespace marppg;

namespace {

constexpr double kGradTolerance = 1e-4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool has_seed = false;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file (key = value lines)");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config out_dir)");
    cmd->add_option("--seed", opts.seed, "run seed (overrides config seed)")
        ->each([&opts](const std::string&) { opts.has_seed = true; });
    cmd->add_flag("--deterministic", opts.deterministic,
                  "omit timestamp comment lines from CSV outputs");
}

RunConfig load_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = RunConfig::parse_file(opts.config_path);
    if (opts.has_seed) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

EreaModel make_model(const RunConfig& cfg, bool init) {
    EreaModel model(cfg.model_config());
    if (init) {
        Rng rng = Rng::derive(cfg.seed, 0); // stream 0: parameter init
        model.init_params(rng);
    }
    return model;
}

SignalChain signal_chain(const RunConfig& cfg) {
    return {cfg.signal_band_lo_hz, cfg.signal_band_hi_hz, cfg.signal_detrend_lambda};
}

int cmd_synth(const CommonOpts& opts) {
    const RunConfig cfg = load_config(opts);
    synth_dataset(cfg.synth_config(), cfg.synth_n_train, cfg.synth_n_val, cfg.synth_n_test,
                  cfg.out_dir);
    std::cout << (fs::path(cfg.out_dir) / "manifest.txt").string() << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    const RunConfig cfg = load_config(opts);
    if (cfg.manifest.empty()) throw ValueError("train: config must set 'manifest'");
    const auto manifest = load_manifest(cfg.manifest);
    const auto chunks = load_split(manifest, Split::train);
    if (chunks.empty()) throw ValueError("train: manifest lists no train chunks");

    EreaModel model = make_model(cfg, true);
    const auto log = train(cfg.train_config(), model, chunks);

    fs::create_directories(cfg.out_dir);
    save_checkpoint(cfg.checkpoint_path(), model.named_parameters());
    write_training_log((fs::path(cfg.out_dir) / "training_log.csv").string(), log,
                       opts.deterministic);

    const double final_loss = log.empty() ? 0.0 : log.back().loss_total;
    std::cout << "steps " << log.size() << " final_loss " << format_g17(final_loss) << "\n";
    std::cout << "checkpoint " << cfg.checkpoint_path() << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts) {
    const RunConfig cfg = load_config(opts);
    if (cfg.manifest.empty()) throw ValueError("eval: config must set 'manifest'");
    const auto manifest = load_manifest(cfg.manifest);
    const auto chunks = load_split(manifest, Split::test);
    if (chunks.empty()) throw ValueError("eval: manifest lists no test chunks");

    EreaModel model = make_model(cfg, false);
    load_checkpoint_into(cfg.checkpoint_path(), model.named_parameters());

    const auto out = evaluate(model, chunks, signal_chain(cfg));
    fs::create_directories(cfg.out_dir);
    write_metrics_csv((fs::path(cfg.out_dir) / "metrics_report.csv").string(), out.metrics,
                      opts.deterministic);
    write_bland_altman_csv((fs::path(cfg.out_dir) / "bland_altman.csv").string(), out.agreement,
                           opts.deterministic);
    if (!out.hrv_rows.empty()) {
        write_hrv_csv((fs::path(cfg.out_dir) / "hrv_report.csv").string(), out.hrv_rows,
                      opts.deterministic);
    }
    std::cout << "n " << out.metrics.n << " mae " << format_g17(out.metrics.mae) << " rmse "
              << format_g17(out.metrics.rmse) << " mape " << format_g17(out.metrics.mape) << " r "
              << format_g17(out.metrics.pearson_r) << "\n";
    return 0;
}

int cmd_infer(const CommonOpts& opts, const std::string& chunk_path) {
    const RunConfig cfg = load_config(opts);
    const VideoChunk chunk = read_chunk(chunk_path);

    EreaModel model = make_model(cfg, false);
    load_checkpoint_into(cfg.checkpoint_path(), model.named_parameters());

    auto out = model.forward(frames_to_tensor(chunk));
    RppgSignal raw;
    raw.fs = static_cast<double>(chunk.fs);
    raw.samples = out.signal->data;

    fs::create_directories(cfg.out_dir);
    write_signal_csv((fs::path(cfg.out_dir) / "signal.csv").string(), raw, opts.deterministic);

    CsvWriter att((fs::path(cfg.out_dir) / "attention.csv").string(), opts.deterministic);
    att.row("t,expert,h,w,value");
    const auto& maps = *out.maps;
    const int t = maps.dim(0), e = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
    std::size_t idx = 0;
    for (int ti = 0; ti < t; ++ti)
        for (int ei = 0; ei < e; ++ei)
            for (int hi = 0; hi < h; ++hi)
                for (int wi = 0; wi < w; ++wi) {
                    att.row(std::to_string(ti) + "," + std::to_string(ei) + "," +
                            std::to_string(hi) + "," + std::to_string(wi) + "," +
                            format_g17(maps.data[idx++]));
                }

    const auto chain = signal_chain(cfg);
    const double bpm = estimate_hr_fft(postprocess_signal(raw, chain), chain.band_lo_hz,
                                       chain.band_hi_hz);
    std::cout << "hr_bpm " << format_g17(bpm) << "\n";
    return 0;
}

int cmd_gradcheck(const CommonOpts& opts, int points, const std::string& corrupt) {
    const RunConfig cfg = load_config(opts);
    const auto results = nn::run_gradcheck(cfg.seed, points, corrupt);
    bool all_ok = true;
    std::string first_bad;
    for (const auto& r : results) {
        const bool ok = r.max_rel_err < kGradTolerance;
        if (!ok && all_ok) first_bad = r.name;
        all_ok = all_ok && ok;
        std::printf("%-32s %12.3e  %s\n", r.name.c_str(), r.max_rel_err, ok ? "ok" : "FAIL");
    }
    if (!all_ok) {
        std::cerr << "gradcheck failed: " << first_bad << "\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale rPPG training and evaluation kit"};
    app.require_subcommand(1);

    CommonOpts synth_opts, train_opts, eval_opts, infer_opts, grad_opts;
    std::string infer_chunk;
    int grad_points = 10;
    std::string grad_corrupt;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth_cmd, synth_opts);

    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset manifest");
    add_common(train_cmd, train_opts);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval_cmd, eval_opts);

    auto* infer_cmd = app.add_subcommand("infer", "run one chunk through a checkpoint");
    add_common(infer_cmd, infer_opts);
    infer_cmd->add_option("--chunk", infer_chunk, "chunk file to process")->required();

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every primitive");
    add_common(grad_cmd, grad_opts);
    grad_cmd->add_option("--points", grad_points, "random points per primitive");
    grad_cmd->add_option("--corrupt", grad_corrupt,
                         "negative control: corrupt the named case's backward rule");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // usage problems are operational errors
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_opts);
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts);
        if (infer_cmd->parsed()) return cmd_infer(infer_opts, infer_chunk);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_opts, grad_points, grad_corrupt);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
