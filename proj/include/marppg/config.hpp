// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "marppg/model.hpp"
#include "marppg/signal.hpp"
#include "marppg/synth.hpp"
#include "marppg/train.hpp"

namespace marppg {

/// Whole-run configuration: one line-oriented `key = value` file with `#`
/// comments covers model, training, synthesis, the signal chain, and paths.
/// Every field has a default and serialization round-trips losslessly.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    std::string manifest;   // dataset index for train/eval
    std::string checkpoint; // defaults to <out_dir>/model.marw when empty

    int model_chunk_len = 60;
    int model_frame_size = 64;
    int model_in_channels = 3;
    int model_enc_channels = 32;

    double train_alpha = 0.3;
    double train_beta = 0.5;
    int train_mask_size = 16;
    double train_mask_fill = 0.0;
    int train_batch_size = 4;
    int train_epochs = 30;
    double train_max_lr = 1e-3;
    double train_warmup_fraction = 0.3;
    double train_start_div = 25.0;
    double train_final_div = 1e4;

    int synth_n_train = 10;
    int synth_n_val = 2;
    int synth_n_test = 4;
    double synth_fs = 30.0;
    double synth_hr_lo_bpm = 48.0;
    double synth_hr_hi_bpm = 144.0;
    double synth_harmonic = 0.35;
    double synth_pulse_amp = 0.02;
    double synth_noise_sigma = 0.02;
    double synth_drift_amp = 0.05;
    double synth_motion_lo_px = 0.0;
    double synth_motion_hi_px = 4.0;
    double synth_ellipse_ry = 0.36;
    double synth_ellipse_rx = 0.28;

    double signal_band_lo_hz = kHrBandLoHz;
    double signal_band_hi_hz = kHrBandHiHz;
    double signal_detrend_lambda = 100.0;

    bool operator==(const RunConfig&) const = default;

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    SynthConfig synth_config() const;
    std::string checkpoint_path() const;

    /// Assign one field by key; throws ValueError on unknown key or bad value.
    void set(const std::string& key, const std::string& value);

    std::string serialize() const;
    static RunConfig parse_string(const std::string& text);
    static RunConfig parse_file(const std::string& path);
    void save(const std::string& path) const;
};

} // namespace marppg
