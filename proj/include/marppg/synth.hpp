// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "marppg/chunk.hpp"
#include "marppg/manifest.hpp"
#include "marppg/rng.hpp"

namespace marppg {

/// Synthetic pulsatile-video generator. Renders a skin-toned ellipse on a
/// gray background whose green channel (with quarter-amplitude red/blue
/// coupling) follows a two-harmonic pulse waveform, with optional Gaussian
/// pixel noise, slow illumination drift, and rigid ellipse motion.
struct SynthConfig {
    int t = 60, h = 64, w = 64, c = 3;
    double fs = 30.0;
    double hr_lo_bpm = 48.0, hr_hi_bpm = 144.0;
    double harmonic = 0.35;    // second-harmonic amplitude ratio
    double pulse_amp = 0.02;   // green-channel pulsation amplitude
    double noise_sigma = 0.02; // per-pixel Gaussian noise
    double drift_amp = 0.05;   // global illumination drift, below 0.1 Hz
    double motion_lo_px = 0.0, motion_hi_px = 4.0;
    double ellipse_ry = 0.36, ellipse_rx = 0.28; // semi-axes as frame fractions
    std::uint64_t seed = 1234;

    void validate() const;
};

/// Renders one chunk. Per-clip draws, in order: heart rate (skipped when
/// `forced_hr_bpm` >= 0), drift frequency and phase, motion amplitude,
/// frequency and two phases, then per-frame/pixel/channel noise (skipped when
/// noise_sigma == 0). The PPG label is the pulse waveform standardized to
/// zero mean and unit variance.
VideoChunk synth_clip(const SynthConfig& cfg, Rng& rng, double forced_hr_bpm = -1.0,
                      const std::string& source_id = "synth");

/// Generates n_train + n_val + n_test clips with distinct HRs on a stratified
/// grid over [hr_lo, hr_hi] (splits are pairwise disjoint in HR by
/// construction), writes them plus manifest.txt into out_dir. Clip i draws
/// from the stream derived from (cfg.seed, i), so generation order never
/// matters.
DatasetManifest synth_dataset(const SynthConfig& cfg, int n_train, int n_val, int n_test,
                              const std::string& out_dir);

/// The HR grid and split assignment used by synth_dataset.
std::vector<double> synth_hr_grid(const SynthConfig& cfg, int n);
std::vector<Split> synth_split_assignment(int n_train, int n_val, int n_test);

/// Mean green-channel intensity per frame: the generator's self-oracle
/// readout (no knowledge of the ellipse location).
std::vector<double> green_mean_signal(const VideoChunk& chunk);

} // namespace marppg
