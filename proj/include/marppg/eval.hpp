// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "marppg/chunk.hpp"
#include "marppg/metrics.hpp"
#include "marppg/model.hpp"
#include "marppg/signal.hpp"

namespace marppg {

struct SignalChain {
    double band_lo_hz = kHrBandLoHz;
    double band_hi_hz = kHrBandHiHz;
    double detrend_lambda = 100.0;
};

/// Raw model output as a sampled signal.
RppgSignal predict_signal(const EreaModel& model, const VideoChunk& chunk);

/// detrend -> bandpass applied to a predicted signal.
RppgSignal postprocess_signal(const RppgSignal& s, const SignalChain& chain);

/// Heart rate of a chunk's ground-truth PPG label.
double label_hr_bpm(const VideoChunk& chunk, const SignalChain& chain);

/// Heart rate of the model's prediction after the signal chain.
double predicted_hr_bpm(const EreaModel& model, const VideoChunk& chunk,
                        const SignalChain& chain);

struct HrvRow {
    std::string source_id;
    HrvReport hrv;
};

struct EvalOutputs {
    MetricsReport metrics;
    BlandAltman agreement;
    std::vector<HrvRow> hrv_rows; // only chunks long enough for HRV analysis
};

/// Per-chunk HR readout over a test set, rows sorted by source_id. HRV/RF
/// rows are produced for chunks that carry at least 35 s of signal.
EvalOutputs evaluate(const EreaModel& model, const std::vector<VideoChunk>& test_chunks,
                     const SignalChain& chain);

void write_hrv_csv(const std::string& path, const std::vector<HrvRow>& rows, bool deterministic);

} // namespace marppg
