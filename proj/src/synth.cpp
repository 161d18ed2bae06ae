// SPDX-License-Identifier: Apache-2.0
#include "marppg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "marppg/errors.hpp"
#include "marppg/signal.hpp"

namespace fs = std::filesystem;

namespace marppg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBackground = 0.3;
// skin-tone base color (r, g, b); only green carries the full pulse
constexpr double kBase[3] = {0.45, 0.55, 0.40};
constexpr double kCoupling[3] = {0.25, 1.0, 0.25};

} // namespace

void SynthConfig::validate() const {
    if (t < 2 || h < 2 || w < 2 || c != 3) {
        throw ValueError("synth config: need T,H,W >= 2 and 3 channels");
    }
    if (!(fs > 0.0)) throw ValueError("synth config: fs must be positive");
    if (!(hr_lo_bpm > 0.0) || !(hr_hi_bpm > hr_lo_bpm)) {
        throw ValueError("synth config: bad heart-rate range");
    }
    if (hr_lo_bpm < 60.0 * kHrBandLoHz || hr_hi_bpm > 60.0 * kHrBandHiHz) {
        throw ValueError("synth config: heart-rate range must stay inside the spectral "
                         "search band (45-150 BPM)");
    }
    if (noise_sigma < 0.0) throw ValueError("synth config: noise sigma must be >= 0");
    if (motion_lo_px < 0.0 || motion_hi_px < motion_lo_px) {
        throw ValueError("synth config: bad motion range");
    }
}

VideoChunk synth_clip(const SynthConfig& cfg, Rng& rng, double forced_hr_bpm,
                      const std::string& source_id) {
    cfg.validate();

    const double hr_bpm =
        forced_hr_bpm >= 0.0 ? forced_hr_bpm : rng.uniform(cfg.hr_lo_bpm, cfg.hr_hi_bpm);
    const double f_pulse = hr_bpm / 60.0;
    const double f_drift = rng.uniform(0.02, 0.08);
    const double drift_phase = rng.uniform(0.0, 2.0 * kPi);
    const double motion_amp = rng.uniform(cfg.motion_lo_px, cfg.motion_hi_px);
    const double f_motion = rng.uniform(0.1, 0.3);
    const double motion_phase_x = rng.uniform(0.0, 2.0 * kPi);
    const double motion_phase_y = rng.uniform(0.0, 2.0 * kPi);

    VideoChunk chunk;
    chunk.t = cfg.t;
    chunk.h = cfg.h;
    chunk.w = cfg.w;
    chunk.c = cfg.c;
    chunk.fs = static_cast<float>(cfg.fs);
    chunk.source_id = source_id;
    chunk.frames.resize(chunk.frame_count() * chunk.frame_elems());
    chunk.ppg.resize(chunk.frame_count());

    const double cy = 0.5 * cfg.h, cx = 0.5 * cfg.w;
    const double ry = cfg.ellipse_ry * cfg.h, rx = cfg.ellipse_rx * cfg.w;

    std::vector<double> pulse(static_cast<std::size_t>(cfg.t));
    for (int ti = 0; ti < cfg.t; ++ti) {
        const double time = ti / cfg.fs;
        pulse[static_cast<std::size_t>(ti)] = std::sin(2.0 * kPi * f_pulse * time) +
                                              cfg.harmonic * std::sin(4.0 * kPi * f_pulse * time);
    }

    for (int ti = 0; ti < cfg.t; ++ti) {
        const double time = ti / cfg.fs;
        const double p = pulse[static_cast<std::size_t>(ti)];
        const double drift = cfg.drift_amp * std::sin(2.0 * kPi * f_drift * time + drift_phase);
        const double ecx = cx + motion_amp * std::sin(2.0 * kPi * f_motion * time + motion_phase_x);
        const double ecy = cy + motion_amp * std::cos(2.0 * kPi * f_motion * time + motion_phase_y);

        float* frame = chunk.frames.data() + static_cast<std::size_t>(ti) * chunk.frame_elems();
        for (int i = 0; i < cfg.h; ++i) {
            for (int j = 0; j < cfg.w; ++j) {
                const double dy = (i - ecy) / ry, dx = (j - ecx) / rx;
                const bool skin = dy * dy + dx * dx <= 1.0;
                float* px = frame + (static_cast<std::size_t>(i) * cfg.w + j) * 3;
                for (int k = 0; k < 3; ++k) {
                    double v = skin ? kBase[k] + kCoupling[k] * cfg.pulse_amp * p : kBackground;
                    v += drift;
                    if (cfg.noise_sigma > 0.0) v += rng.normal(0.0, cfg.noise_sigma);
                    px[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
    }

    // standardized label: zero mean, unit (population) variance
    double mean = 0.0;
    for (double p : pulse) mean += p;
    mean /= cfg.t;
    double var = 0.0;
    for (double p : pulse) var += (p - mean) * (p - mean);
    var /= cfg.t;
    const double inv_sd = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    for (int ti = 0; ti < cfg.t; ++ti) {
        chunk.ppg[static_cast<std::size_t>(ti)] =
            static_cast<float>((pulse[static_cast<std::size_t>(ti)] - mean) * inv_sd);
    }
    return chunk;
}

std::vector<double> synth_hr_grid(const SynthConfig& cfg, int n) {
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        grid[static_cast<std::size_t>(i)] =
            cfg.hr_lo_bpm + (i + 0.5) * (cfg.hr_hi_bpm - cfg.hr_lo_bpm) / n;
    }
    return grid;
}

std::vector<Split> synth_split_assignment(int n_train, int n_val, int n_test) {
    const int n = n_train + n_val + n_test;
    std::vector<Split> assign(static_cast<std::size_t>(n), Split::train);
    std::vector<int> remaining(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) remaining[static_cast<std::size_t>(i)] = i;

    // pick k evenly spaced positions out of the remaining grid slots
    auto take_evenly = [&remaining, &assign](int k, Split s) {
        std::vector<int> taken;
        for (int j = 0; j < k; ++j) {
            const auto pos = static_cast<std::size_t>(
                (j + 0.5) * static_cast<double>(remaining.size()) / k);
            taken.push_back(remaining[std::min(pos, remaining.size() - 1)]);
        }
        for (int idx : taken) {
            assign[static_cast<std::size_t>(idx)] = s;
            remaining.erase(std::find(remaining.begin(), remaining.end(), idx));
        }
    };
    if (n_test > 0) take_evenly(n_test, Split::test);
    if (n_val > 0) take_evenly(n_val, Split::val);
    return assign;
}

DatasetManifest synth_dataset(const SynthConfig& cfg, int n_train, int n_val, int n_test,
                              const std::string& out_dir) {
    cfg.validate();
    if (n_train < 0 || n_val < 0 || n_test < 0 || n_train + n_val + n_test < 1) {
        throw ValueError("synth_dataset: need at least one clip");
    }
    fs::create_directories(out_dir);

    const int n = n_train + n_val + n_test;
    const auto grid = synth_hr_grid(cfg, n);
    const auto assign = synth_split_assignment(n_train, n_val, n_test);

    DatasetManifest manifest;
    manifest.fs = cfg.fs;
    manifest.t = cfg.t;
    manifest.h = cfg.h;
    manifest.w = cfg.w;
    manifest.c = cfg.c;
    manifest.base_dir = out_dir;

    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "chunk_%04d.marc", i);
        Rng clip_rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(i));
        const VideoChunk chunk =
            synth_clip(cfg, clip_rng, grid[static_cast<std::size_t>(i)], name);
        write_chunk((fs::path(out_dir) / name).string(), chunk);
        manifest.entries.push_back({assign[static_cast<std::size_t>(i)], name});
    }
    save_manifest((fs::path(out_dir) / "manifest.txt").string(), manifest);
    return manifest;
}

std::vector<double> green_mean_signal(const VideoChunk& chunk) {
    if (chunk.c < 2) throw ValueError("green_mean_signal: chunk has no green channel");
    std::vector<double> out(chunk.frame_count());
    const std::size_t px = static_cast<std::size_t>(chunk.h) * chunk.w;
    for (int ti = 0; ti < chunk.t; ++ti) {
        const float* frame =
            chunk.frames.data() + static_cast<std::size_t>(ti) * chunk.frame_elems();
        double s = 0.0;
        for (std::size_t i = 0; i < px; ++i) s += frame[i * chunk.c + 1];
        out[static_cast<std::size_t>(ti)] = s / static_cast<double>(px);
    }
    return out;
}

} // namespace marppg
