// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

namespace marppg {

struct RppgSignal {
    std::vector<double> samples;
    double fs = 30.0; // Hz

    double duration_s() const { return static_cast<double>(samples.size()) / fs; }
    void validate(const char* what) const; // fs > 0, length >= 2, finite
};

/// Default heart-rate search band, 45-150 BPM.
inline constexpr double kHrBandLoHz = 0.75;
inline constexpr double kHrBandHiHz = 2.5;

/// Smoothness-priors detrending: subtracts the trend (I + lambda^2 D2^T D2)^{-1} s,
/// solved with a banded Cholesky factorization of the pentadiagonal system.
RppgSignal detrend(const RppgSignal& s, double lambda = 100.0);

/// Zero-phase filter: DFT, zero every bin outside [lo_hz, hi_hz], inverse
/// DFT, real part. Requires 0 < lo < hi < fs/2.
RppgSignal bandpass(const RppgSignal& s, double lo_hz, double hi_hz);

/// Spectral heart-rate readout: mean removal, Hann window, zero-padding to
/// >= 8x length, periodogram peak within the band with parabolic
/// interpolation. Returns BPM. Throws ValueError("no pulse energy") when the
/// band carries no power.
double estimate_hr_fft(const RppgSignal& s, double lo_hz = kHrBandLoHz,
                       double hi_hz = kHrBandHiHz);

/// Local maxima above 0.6x the rolling-window maximum (window 1.5 estimated
/// periods) with minimum separation of half a period; the period comes from
/// estimate_hr_fft. Input should be bandpassed. Returns sample indices.
std::vector<int> detect_peaks(const RppgSignal& s, double lo_hz = kHrBandLoHz,
                              double hi_hz = kHrBandHiHz);

struct IbiSeries {
    std::vector<double> beat_times;        // all peak times, seconds
    std::vector<double> intervals;         // consecutive diffs within [0.33, 2.0] s
    std::vector<double> interval_end_times; // time of each kept interval's closing beat
};

/// Interbeat intervals from peak sample indices; intervals outside
/// [0.33, 2.0] s are discarded as artifacts. Needs >= 3 peaks.
IbiSeries interbeat_intervals(const std::vector<int>& peaks, double fs);

struct HrvReport {
    double lf_power = 0.0; // normalized, lf + hf = 1 when defined
    double hf_power = 0.0;
    std::optional<double> lf_hf_ratio; // absent when hf power is zero
    double rf_hz = 0.0;                // filled by respiratory_frequency callers
};

/// Frequency-domain HRV: cubic interpolation of the IBI series onto a
/// uniform 4 Hz grid, mean removal, periodogram; LF = power in [0.04, 0.15),
/// HF = [0.15, 0.4]. Needs >= 8 intervals spanning >= 30 s.
HrvReport hrv_lf_hf(const IbiSeries& ibi);

/// Respiratory frequency: dominant IBI periodogram peak within [0.1, 0.5] Hz.
/// Throws ValueError("no respiratory modulation") for a flat series.
double respiratory_frequency(const IbiSeries& ibi);

// CSV signal I/O: header "time_s,value", one row per sample.
void write_signal_csv(const std::string& path, const RppgSignal& s, bool deterministic);
RppgSignal read_signal_csv(const std::string& path);

} // namespace marppg
