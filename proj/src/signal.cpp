// SPDX-License-Identifier: Apache-2.0
#include "marppg/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "marppg/csvio.hpp"
#include "marppg/dft.hpp"
#include "marppg/errors.hpp"

namespace marppg {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kIbiResampleHz = 4.0;
constexpr double kIbiMinS = 0.33, kIbiMaxS = 2.0;
} // namespace

void RppgSignal::validate(const char* what) const {
    if (!(fs > 0.0) || !std::isfinite(fs)) {
        throw ValueError(std::string(what) + ": sampling rate must be positive");
    }
    if (samples.size() < 2) {
        throw ValueError(std::string(what) + ": signal must have at least 2 samples");
    }
    for (double v : samples) {
        if (!std::isfinite(v)) throw ValueError(std::string(what) + ": non-finite sample");
    }
}

// ---------------------------------------------------------------------------
// Smoothness-priors detrend
// ---------------------------------------------------------------------------

RppgSignal detrend(const RppgSignal& s, double lambda) {
    s.validate("detrend");
    const std::size_t n = s.samples.size();
    if (n < 3) throw ValueError("detrend: signal must have at least 3 samples");

    // Bands of A = I + lambda^2 * D2^T D2 (pentadiagonal, SPD); built by
    // accumulating each second-difference row explicitly.
    std::vector<double> a0(n, 1.0), a1(n, 0.0), a2(n, 0.0); // a1[i]=A[i][i+1], a2[i]=A[i][i+2]
    const double l2 = lambda * lambda;
    for (std::size_t r = 0; r + 2 < n; ++r) {
        static constexpr double v[3] = {1.0, -2.0, 1.0};
        for (int ai = 0; ai < 3; ++ai)
            for (int bi = ai; bi < 3; ++bi) {
                const double contrib = l2 * v[ai] * v[bi];
                const std::size_t i = r + static_cast<std::size_t>(ai);
                const int off = bi - ai;
                if (off == 0) a0[i] += contrib;
                else if (off == 1) a1[i] += contrib;
                else a2[i] += contrib;
            }
    }

    // Banded LDL^T factorization, bandwidth 2: e1[j] = L[j][j-1], e2[j] = L[j][j-2].
    std::vector<double> d(n, 0.0), e1(n, 0.0), e2(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (j >= 2) e2[j] = a2[j - 2] / d[j - 2];
        if (j >= 1) {
            double v = a1[j - 1];
            if (j >= 2) v -= e2[j] * e1[j - 1] * d[j - 2];
            e1[j] = v / d[j - 1];
        }
        double diag = a0[j];
        if (j >= 1) diag -= e1[j] * e1[j] * d[j - 1];
        if (j >= 2) diag -= e2[j] * e2[j] * d[j - 2];
        if (diag <= 0.0) throw ValueError("detrend: system lost positive definiteness");
        d[j] = diag;
    }

    // Solve L D L^T x = s (LDL^T form: d holds D, e1/e2 unit-lower bands).
    std::vector<double> y(s.samples);
    for (std::size_t j = 0; j < n; ++j) {
        if (j >= 1) y[j] -= e1[j] * y[j - 1];
        if (j >= 2) y[j] -= e2[j] * y[j - 2];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= d[j];
    for (std::size_t jj = n; jj-- > 0;) {
        if (jj + 1 < n) y[jj] -= e1[jj + 1] * y[jj + 1];
        if (jj + 2 < n) y[jj] -= e2[jj + 2] * y[jj + 2];
    }

    RppgSignal out;
    out.fs = s.fs;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = s.samples[i] - y[i];
    return out;
}

// ---------------------------------------------------------------------------
// Zero-phase DFT-mask bandpass
// ---------------------------------------------------------------------------

RppgSignal bandpass(const RppgSignal& s, double lo_hz, double hi_hz) {
    s.validate("bandpass");
    if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < s.fs / 2.0)) {
        throw ValueError("bandpass: need 0 < lo < hi < fs/2, got [" + std::to_string(lo_hz) +
                         ", " + std::to_string(hi_hz) + "] at fs " + std::to_string(s.fs));
    }
    const std::size_t n = s.samples.size();
    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = {s.samples[i], 0.0};
    auto spec = dft(x, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t kk = std::min(k, n - k);
        const double f = static_cast<double>(kk) * s.fs / static_cast<double>(n);
        if (f < lo_hz || f > hi_hz) spec[k] = {0.0, 0.0};
    }
    auto back = dft(spec, true);
    RppgSignal out;
    out.fs = s.fs;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = back[i].real();
    return out;
}

// ---------------------------------------------------------------------------
// Periodogram peak picking (shared by the HR and RF readouts)
// ---------------------------------------------------------------------------

namespace {

double dominant_frequency(const std::vector<double>& samples, double fs, double lo_hz,
                          double hi_hz, const char* no_energy_msg) {
    const std::size_t n = samples.size();
    if (n < 4) throw ValueError("dominant_frequency: signal too short");
    if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz <= fs / 2.0)) {
        throw ValueError("dominant_frequency: need 0 < lo < hi <= fs/2");
    }

    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);

    double sum_sq = 0.0;
    std::vector<std::complex<double>> x(next_pow2(std::max<std::size_t>(8 * n, 1024)),
                                        {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        const double w =
            0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1)));
        const double v = (samples[i] - mean) * w;
        x[i] = {v, 0.0};
        sum_sq += v * v;
    }
    if (sum_sq <= 1e-24) throw ValueError(no_energy_msg);

    fft_pow2(x, false);
    const std::size_t m = x.size();
    const std::size_t half = m / 2;
    const auto k_lo = static_cast<std::size_t>(std::ceil(lo_hz * static_cast<double>(m) / fs));
    const auto k_hi =
        std::min(half, static_cast<std::size_t>(std::floor(hi_hz * static_cast<double>(m) / fs)));
    if (k_lo > k_hi) throw ValueError("dominant_frequency: band holds no spectral bins");

    std::size_t peak = k_lo;
    double peak_mag = 0.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const double mag = std::abs(x[k]);
        if (mag > peak_mag) {
            peak_mag = mag;
            peak = k;
        }
    }
    if (peak_mag <= 0.0) throw ValueError(no_energy_msg);

    double delta = 0.0;
    if (peak > 0 && peak < half) {
        const double m1 = std::abs(x[peak - 1]);
        const double m2 = peak_mag;
        const double m3 = std::abs(x[peak + 1]);
        const double den = m1 - 2.0 * m2 + m3;
        if (den < 0.0) delta = std::clamp(0.5 * (m1 - m3) / den, -0.5, 0.5);
    }
    return (static_cast<double>(peak) + delta) * fs / static_cast<double>(m);
}

} // namespace

double estimate_hr_fft(const RppgSignal& s, double lo_hz, double hi_hz) {
    s.validate("estimate_hr_fft");
    return 60.0 * dominant_frequency(s.samples, s.fs, lo_hz, hi_hz, "no pulse energy");
}

std::vector<int> detect_peaks(const RppgSignal& s, double lo_hz, double hi_hz) {
    const double hr_bpm = estimate_hr_fft(s, lo_hz, hi_hz);
    const double period = s.fs * 60.0 / hr_bpm;
    const auto min_sep = std::max<std::ptrdiff_t>(1, std::llround(0.5 * period));
    const auto win = std::max<std::ptrdiff_t>(3, std::llround(1.5 * period));
    const auto n = static_cast<std::ptrdiff_t>(s.samples.size());

    // candidate local maxima above the adaptive threshold
    std::vector<int> candidates;
    for (std::ptrdiff_t i = 1; i + 1 < n; ++i) {
        const double v = s.samples[static_cast<std::size_t>(i)];
        if (v <= 0.0) continue;
        if (!(v > s.samples[static_cast<std::size_t>(i - 1)] &&
              v >= s.samples[static_cast<std::size_t>(i + 1)]))
            continue;
        const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, i - win / 2);
        const std::ptrdiff_t b = std::min(n - 1, i + win / 2);
        double wmax = 0.0;
        for (std::ptrdiff_t j = a; j <= b; ++j)
            wmax = std::max(wmax, s.samples[static_cast<std::size_t>(j)]);
        if (v >= 0.6 * wmax) candidates.push_back(static_cast<int>(i));
    }

    // greedy by amplitude with minimum separation; ties resolve to lower index
    std::vector<int> order = candidates;
    std::stable_sort(order.begin(), order.end(), [&s](int a, int b) {
        return s.samples[static_cast<std::size_t>(a)] > s.samples[static_cast<std::size_t>(b)];
    });
    std::vector<int> accepted;
    for (int idx : order) {
        bool ok = true;
        for (int kept : accepted) {
            if (std::abs(kept - idx) < min_sep) {
                ok = false;
                break;
            }
        }
        if (ok) accepted.push_back(idx);
    }
    std::sort(accepted.begin(), accepted.end());
    return accepted;
}

IbiSeries interbeat_intervals(const std::vector<int>& peaks, double fs) {
    if (peaks.size() < 3) {
        throw ValueError("interbeat_intervals: need at least 3 peaks, got " +
                         std::to_string(peaks.size()));
    }
    if (!(fs > 0.0)) throw ValueError("interbeat_intervals: fs must be positive");
    IbiSeries out;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        if (i > 0 && peaks[i] <= peaks[i - 1]) {
            throw ValueError("interbeat_intervals: peak indices must be strictly increasing");
        }
        out.beat_times.push_back(static_cast<double>(peaks[i]) / fs);
    }
    for (std::size_t i = 1; i < out.beat_times.size(); ++i) {
        const double ibi = out.beat_times[i] - out.beat_times[i - 1];
        if (ibi >= kIbiMinS && ibi <= kIbiMaxS) {
            out.intervals.push_back(ibi);
            out.interval_end_times.push_back(out.beat_times[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HRV spectra
// ---------------------------------------------------------------------------

namespace {

/// Natural cubic spline through strictly increasing (x, y).
class CubicSpline {
public:
    CubicSpline(const std::vector<double>& x, const std::vector<double>& y) : x_(x), y_(y) {
        const std::size_t n = x.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> h(n - 1), alpha(n, 0.0), l(n, 1.0), mu(n, 0.0), z(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            alpha[i] = 3.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            l[i] = 2.0 * (x[i + 1] - x[i - 1]) - h[i - 1] * mu[i - 1];
            mu[i] = h[i] / l[i];
            z[i] = (alpha[i] - h[i - 1] * z[i - 1]) / l[i];
        }
        for (std::size_t i = n - 1; i-- > 1;) m_[i] = z[i] - mu[i] * m_[i + 1];
    }

    double operator()(double t) const {
        const std::size_t n = x_.size();
        if (t <= x_.front()) return y_.front();
        if (t >= x_.back()) return y_.back();
        const auto it = std::upper_bound(x_.begin(), x_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_; // m_: second derivatives
};

struct ResampledIbi {
    std::vector<double> series;
    double fs = kIbiResampleHz;
};

ResampledIbi resample_ibi(const IbiSeries& ibi) {
    if (ibi.intervals.size() < 8) {
        throw ValueError("hrv: need at least 8 intervals, got " +
                         std::to_string(ibi.intervals.size()));
    }
    const double t0 = ibi.interval_end_times.front();
    const double t1 = ibi.interval_end_times.back();
    if (t1 - t0 < 30.0) {
        throw ValueError("hrv: intervals must span at least 30 s, got " +
                         std::to_string(t1 - t0));
    }
    CubicSpline spline(ibi.interval_end_times, ibi.intervals);
    ResampledIbi out;
    const auto count = static_cast<std::size_t>(std::floor((t1 - t0) * kIbiResampleHz)) + 1;
    out.series.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.series[i] = spline(t0 + static_cast<double>(i) / kIbiResampleHz);
    }
    return out;
}

} // namespace

HrvReport hrv_lf_hf(const IbiSeries& ibi) {
    const auto rs = resample_ibi(ibi);
    const std::size_t n = rs.series.size();
    double mean = 0.0;
    for (double v : rs.series) mean += v;
    mean /= static_cast<double>(n);

    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = {rs.series[i] - mean, 0.0};
    auto spec = dft(x, false);

    double lf_raw = 0.0, hf_raw = 0.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) * rs.fs / static_cast<double>(n);
        const double p = std::norm(spec[k]);
        if (f >= 0.04 && f < 0.15) lf_raw += p;
        else if (f >= 0.15 && f <= 0.4) hf_raw += p;
    }

    HrvReport report;
    const double total = lf_raw + hf_raw;
    if (total < 1e-20) return report; // no variability: powers 0, ratio undefined
    report.lf_power = lf_raw / total;
    report.hf_power = hf_raw / total;
    if (hf_raw > 0.0) report.lf_hf_ratio = lf_raw / hf_raw;
    return report;
}

double respiratory_frequency(const IbiSeries& ibi) {
    const auto rs = resample_ibi(ibi);
    return dominant_frequency(rs.series, rs.fs, 0.1, 0.5, "no respiratory modulation");
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

void write_signal_csv(const std::string& path, const RppgSignal& s, bool deterministic) {
    CsvWriter csv(path, deterministic);
    csv.row("time_s,value");
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        csv.row(format_g17(static_cast<double>(i) / s.fs) + "," + format_g17(s.samples[i]));
    }
}

RppgSignal read_signal_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    RppgSignal s;
    std::string line;
    double first_t = 0.0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("time_s", 0) == 0) continue;
        std::istringstream ls(line);
        double t, v;
        char comma;
        if (!(ls >> t >> comma >> v) || comma != ',') {
            throw ParseError("signal csv: malformed row '" + line + "'", 0);
        }
        if (rows == 0) first_t = t;
        if (rows == 1) {
            if (t <= first_t) throw ParseError("signal csv: non-increasing time", 0);
            s.fs = 1.0 / (t - first_t);
        }
        s.samples.push_back(v);
        ++rows;
    }
    if (rows < 2) throw ParseError("signal csv: need at least 2 rows", 0);
    return s;
}

} // namespace marppg
