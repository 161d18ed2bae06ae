// SPDX-License-Identifier: Apache-2.0
#include "marppg/eval.hpp"

#include <algorithm>

#include "marppg/csvio.hpp"
#include "marppg/errors.hpp"
#include "marppg/train.hpp"

namespace marppg {

RppgSignal predict_signal(const EreaModel& model, const VideoChunk& chunk) {
    auto out = model.forward(frames_to_tensor(chunk));
    RppgSignal s;
    s.fs = static_cast<double>(chunk.fs);
    s.samples = out.signal->data;
    return s;
}

RppgSignal postprocess_signal(const RppgSignal& s, const SignalChain& chain) {
    return bandpass(detrend(s, chain.detrend_lambda), chain.band_lo_hz, chain.band_hi_hz);
}

double label_hr_bpm(const VideoChunk& chunk, const SignalChain& chain) {
    RppgSignal label;
    label.fs = static_cast<double>(chunk.fs);
    label.samples.assign(chunk.ppg.begin(), chunk.ppg.end());
    return estimate_hr_fft(label, chain.band_lo_hz, chain.band_hi_hz);
}

double predicted_hr_bpm(const EreaModel& model, const VideoChunk& chunk,
                        const SignalChain& chain) {
    const auto processed = postprocess_signal(predict_signal(model, chunk), chain);
    return estimate_hr_fft(processed, chain.band_lo_hz, chain.band_hi_hz);
}

EvalOutputs evaluate(const EreaModel& model, const std::vector<VideoChunk>& test_chunks,
                     const SignalChain& chain) {
    if (test_chunks.empty()) throw ValueError("evaluate: no test chunks");
    EvalOutputs out;
    std::vector<SampleRow> rows;
    for (const auto& chunk : test_chunks) {
        const auto processed = postprocess_signal(predict_signal(model, chunk), chain);
        SampleRow row;
        row.source_id = chunk.source_id;
        row.gt_bpm = label_hr_bpm(chunk, chain);
        row.pred_bpm = estimate_hr_fft(processed, chain.band_lo_hz, chain.band_hi_hz);
        rows.push_back(row);

        if (static_cast<double>(chunk.t) / chunk.fs >= 35.0) {
            try {
                const auto peaks = detect_peaks(processed, chain.band_lo_hz, chain.band_hi_hz);
                const auto ibi = interbeat_intervals(peaks, processed.fs);
                HrvRow hr{chunk.source_id, hrv_lf_hf(ibi)};
                hr.hrv.rf_hz = respiratory_frequency(ibi);
                out.hrv_rows.push_back(hr);
            } catch (const Error&) {
                // chunk too irregular for HRV; HR row is still reported
            }
        }
    }
    std::sort(rows.begin(), rows.end(),
              [](const SampleRow& a, const SampleRow& b) { return a.source_id < b.source_id; });
    std::sort(out.hrv_rows.begin(), out.hrv_rows.end(),
              [](const HrvRow& a, const HrvRow& b) { return a.source_id < b.source_id; });
    out.metrics = compute_metrics(rows);
    if (rows.size() >= 2) out.agreement = bland_altman(rows);
    return out;
}

void write_hrv_csv(const std::string& path, const std::vector<HrvRow>& rows, bool deterministic) {
    CsvWriter csv(path, deterministic);
    csv.row("source_id,lf,hf,lf_hf,rf_hz");
    for (const auto& r : rows) {
        csv.row(r.source_id + "," + format_g17(r.hrv.lf_power) + "," +
                format_g17(r.hrv.hf_power) + "," +
                (r.hrv.lf_hf_ratio ? format_g17(*r.hrv.lf_hf_ratio) : "nan") + "," +
                format_g17(r.hrv.rf_hz));
    }
}

} // namespace marppg
