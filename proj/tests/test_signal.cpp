// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "marppg/errors.hpp"
#include "marppg/signal.hpp"

using namespace marppg;

namespace {

constexpr double kPi = 3.14159265358979323846;

RppgSignal sine(double freq_hz, double secs, double fs, double amp = 1.0, double phase = 0.0) {
    RppgSignal s;
    s.fs = fs;
    const auto n = static_cast<std::size_t>(secs * fs);
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.samples[i] = amp * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) / fs + phase);
    return s;
}

double rms(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

// test-only oracle: dense solve of (I + lambda^2 D2^T D2) trend = s by
// Gaussian elimination
std::vector<double> dense_detrend(const std::vector<double>& s, double lambda) {
    const std::size_t n = s.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    const double l2 = lambda * lambda;
    for (std::size_t r = 0; r + 2 < n; ++r) {
        const double v[3] = {1.0, -2.0, 1.0};
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) a[r + p][r + q] += l2 * v[p] * v[q];
    }
    std::vector<double> x = s;
    // forward elimination with partial pivoting
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[best][col])) best = r;
        std::swap(a[col], a[best]);
        std::swap(x[col], x[best]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            x[r] -= f * x[col];
        }
    }
    std::vector<double> trend(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = x[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * trend[c];
        trend[i] = acc / a[i][i];
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = s[i] - trend[i];
    return out;
}

// test-only oracle: naive DFT band power of a uniformly sampled series
void naive_band_powers(const std::vector<double>& series, double fs, double& lf, double& hf) {
    const std::size_t n = series.size();
    double mean = 0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    lf = hf = 0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        std::complex<double> acc(0, 0);
        for (std::size_t m = 0; m < n; ++m) {
            const double ang = -2.0 * kPi * static_cast<double>(k * m) / static_cast<double>(n);
            acc += (series[m] - mean) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        const double f = static_cast<double>(k) * fs / static_cast<double>(n);
        const double p = std::norm(acc);
        if (f >= 0.04 && f < 0.15) lf += p;
        else if (f >= 0.15 && f <= 0.4) hf += p;
    }
}

// IBI series with the interval modulated at f_mod
IbiSeries modulated_ibi(double f_mod, double base_s, double amp_s, double total_s) {
    IbiSeries ibi;
    double t = 0.0;
    ibi.beat_times.push_back(t);
    while (t < total_s) {
        const double interval = base_s + amp_s * std::sin(2.0 * kPi * f_mod * t);
        t += interval;
        ibi.beat_times.push_back(t);
        ibi.intervals.push_back(interval);
        ibi.interval_end_times.push_back(t);
    }
    return ibi;
}

} // namespace

TEST_CASE("detrend: constant signal becomes zero") {
    RppgSignal s;
    s.fs = 30;
    s.samples.assign(200, 3.7);
    auto out = detrend(s);
    for (double v : out.samples) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("detrend: linear ramp leaves near-zero residual (dense oracle agrees)") {
    RppgSignal s;
    s.fs = 30;
    const int n = 60;
    for (int i = 0; i < n; ++i) s.samples.push_back(0.1 * i);
    auto out = detrend(s, 100.0);
    const double range = 0.1 * (n - 1);
    double worst = 0;
    for (double v : out.samples) worst = std::max(worst, std::fabs(v));
    CHECK(worst < 0.01 * range);

    const auto oracle = dense_detrend(s.samples, 100.0);
    for (int i = 0; i < n; ++i) {
        CHECK(out.samples[static_cast<std::size_t>(i)] ==
              doctest::Approx(oracle[static_cast<std::size_t>(i)]).epsilon(1e-8));
    }
}

TEST_CASE("detrend: high-frequency sine at fs/4 keeps its amplitude within 5%") {
    auto s = sine(7.5, 2.0, 30.0); // fs/4
    auto out = detrend(s, 100.0);
    CHECK(rms(out.samples) == doctest::Approx(rms(s.samples)).epsilon(0.05));

    // the banded solver must match the dense oracle on this signal too
    const auto oracle = dense_detrend(s.samples, 100.0);
    for (std::size_t i = 0; i < oracle.size(); ++i)
        CHECK(out.samples[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
}

TEST_CASE("detrend rejects too-short signals") {
    RppgSignal s;
    s.fs = 30;
    s.samples = {1.0, 2.0};
    CHECK_THROWS_AS(detrend(s), ValueError);
}

TEST_CASE("bandpass: in-band passthrough, DC removal, out-of-band rejection") {
    SUBCASE("periodic in-band sine is unchanged") {
        auto s = sine(1.2, 60.0, 30.0); // 72 cycles: exact bin
        auto out = bandpass(s, 0.75, 2.5);
        std::vector<double> diff(s.samples.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = out.samples[i] - s.samples[i];
        CHECK(rms(diff) < 1e-6);
    }
    SUBCASE("DC offset is removed exactly") {
        auto s = sine(1.2, 60.0, 30.0);
        for (auto& v : s.samples) v += 5.0;
        auto out = bandpass(s, 0.75, 2.5);
        double mean = 0;
        for (double v : out.samples) mean += v;
        mean /= static_cast<double>(out.samples.size());
        CHECK(std::fabs(mean) < 1e-9);
    }
    SUBCASE("out-of-band sine is rejected") {
        auto s = sine(5.0, 60.0, 30.0); // 300 cycles: exact bin
        auto out = bandpass(s, 0.75, 2.5);
        CHECK(rms(out.samples) < 1e-6);
    }
    SUBCASE("idempotent within 1e-9 RMS") {
        auto s = sine(1.3, 20.0, 30.0);
        for (std::size_t i = 0; i < s.samples.size(); ++i)
            s.samples[i] += 0.4 * std::sin(2.0 * kPi * 3.1 * static_cast<double>(i) / 30.0);
        auto once = bandpass(s, 0.75, 2.5);
        auto twice = bandpass(once, 0.75, 2.5);
        std::vector<double> diff(s.samples.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = twice.samples[i] - once.samples[i];
        CHECK(rms(diff) < 1e-9);
    }
    SUBCASE("invalid bands are rejected") {
        auto s = sine(1.2, 10.0, 30.0);
        CHECK_THROWS_AS(bandpass(s, 0.0, 2.5), ValueError);
        CHECK_THROWS_AS(bandpass(s, 2.5, 0.75), ValueError);
        CHECK_THROWS_AS(bandpass(s, 0.75, 15.0), ValueError);
    }
}

TEST_CASE("estimate_hr_fft: generator frequencies are recovered") {
    SUBCASE("pure 1.2 Hz sine, 60 s at 30 Hz: 72 +- 0.2 BPM") {
        CHECK(estimate_hr_fft(sine(1.2, 60.0, 30.0)) == doctest::Approx(72.0).epsilon(0.2 / 72.0));
    }
    SUBCASE("two-tone with 0.3 Hz component outside the band: still 72 BPM") {
        auto s = sine(1.2, 60.0, 30.0);
        auto low = sine(0.3, 60.0, 30.0, 0.5);
        for (std::size_t i = 0; i < s.samples.size(); ++i) s.samples[i] += low.samples[i];
        CHECK(estimate_hr_fft(s) == doctest::Approx(72.0).epsilon(0.5 / 72.0));
    }
    SUBCASE("1.3 Hz sine, 30 s: 78 +- 0.5 BPM") {
        CHECK(estimate_hr_fft(sine(1.3, 30.0, 30.0)) == doctest::Approx(78.0).epsilon(0.5 / 78.0));
    }
    SUBCASE("amplitude invariance is exact for a power-of-two scale") {
        auto s = sine(1.7, 45.0, 30.0);
        for (std::size_t i = 0; i < s.samples.size(); ++i)
            s.samples[i] += 0.2 * std::sin(2.0 * kPi * 2.2 * static_cast<double>(i) / 30.0 + 0.3);
        auto scaled = s;
        for (auto& v : scaled.samples) v *= 2.0;
        CHECK(estimate_hr_fft(s) == estimate_hr_fft(scaled));
    }
    SUBCASE("all-zero signal raises 'no pulse energy'") {
        RppgSignal z;
        z.fs = 30;
        z.samples.assign(300, 0.0);
        CHECK_THROWS_WITH_AS(estimate_hr_fft(z), doctest::Contains("no pulse energy"),
                             ValueError);
    }
}

TEST_CASE("detect_peaks: sinusoid maxima at the expected spacing") {
    // period 25 samples at fs 30 -> 1.2 Hz
    auto s = sine(30.0 / 25.0, 60.0, 30.0);
    auto peaks = detect_peaks(s);

    SUBCASE("consecutive spacing 25 +- 1") {
        REQUIRE(peaks.size() >= 2);
        for (std::size_t i = 1; i < peaks.size(); ++i) {
            const int d = peaks[i] - peaks[i - 1];
            CHECK(d >= 24);
            CHECK(d <= 26);
        }
    }
    SUBCASE("beat count over 60 s of 1.2 Hz is 72 +- 1") {
        CHECK(peaks.size() >= 71);
        CHECK(peaks.size() <= 73);
    }
    SUBCASE("scaling the signal leaves the peak indices unchanged") {
        auto scaled = s;
        for (auto& v : scaled.samples) v *= 2.0;
        CHECK(detect_peaks(scaled) == peaks);
    }
}

TEST_CASE("interbeat_intervals: diffs, artifact gate, errors") {
    SUBCASE("peaks at [0, 30, 60] at fs 30 give intervals [1, 1]") {
        auto ibi = interbeat_intervals({0, 30, 60}, 30.0);
        REQUIRE(ibi.intervals.size() == 2);
        CHECK(ibi.intervals[0] == doctest::Approx(1.0));
        CHECK(ibi.intervals[1] == doctest::Approx(1.0));
    }
    SUBCASE("a 3-second interval is dropped") {
        auto ibi = interbeat_intervals({0, 30, 120, 150}, 30.0);
        REQUIRE(ibi.intervals.size() == 2);
        CHECK(ibi.intervals[0] == doctest::Approx(1.0));
        CHECK(ibi.intervals[1] == doctest::Approx(1.0));
    }
    SUBCASE("uniform 25-sample spacing at fs 30 gives 0.8333 s") {
        std::vector<int> peaks;
        for (int i = 0; i < 10; ++i) peaks.push_back(25 * i);
        auto ibi = interbeat_intervals(peaks, 30.0);
        for (double v : ibi.intervals) CHECK(v == doctest::Approx(25.0 / 30.0).epsilon(1e-12));
    }
    SUBCASE("interval sum plus first beat time reaches the last beat time") {
        auto ibi = interbeat_intervals({3, 33, 60, 88, 114}, 30.0);
        double total = ibi.beat_times.front();
        for (double v : ibi.intervals) total += v;
        CHECK(total == ibi.beat_times.back());
    }
    CHECK_THROWS_AS(interbeat_intervals({0, 30}, 30.0), ValueError);
    CHECK_THROWS_AS(interbeat_intervals({0, 30, 20}, 30.0), ValueError);
}

TEST_CASE("hrv_lf_hf: band assignment verified against a direct-DFT oracle") {
    SUBCASE("IBI modulated at 0.25 Hz: hf fraction > 0.9") {
        auto ibi = modulated_ibi(0.25, 0.8, 0.05, 70.0);
        auto rep = hrv_lf_hf(ibi);
        CHECK(rep.hf_power > 0.9);
        CHECK(rep.lf_power + rep.hf_power == doctest::Approx(1.0).epsilon(1e-12));
        REQUIRE(rep.lf_hf_ratio.has_value());
        CHECK(*rep.lf_hf_ratio < 0.12);

        // independent route: sample the analytic modulation on a uniform 4 Hz
        // grid and integrate band powers with a naive DFT
        std::vector<double> grid;
        const double t0 = ibi.interval_end_times.front();
        const double t1 = ibi.interval_end_times.back();
        for (double t = t0; t <= t1; t += 0.25)
            grid.push_back(0.8 + 0.05 * std::sin(2.0 * kPi * 0.25 * t));
        double lf = 0, hf = 0;
        naive_band_powers(grid, 4.0, lf, hf);
        CHECK(hf / (lf + hf) > 0.9);
    }
    SUBCASE("IBI modulated at 0.1 Hz: lf fraction > 0.9") {
        auto ibi = modulated_ibi(0.1, 0.8, 0.05, 70.0);
        auto rep = hrv_lf_hf(ibi);
        CHECK(rep.lf_power > 0.9);
        CHECK(rep.lf_power + rep.hf_power == doctest::Approx(1.0).epsilon(1e-12));

        std::vector<double> grid;
        const double t0 = ibi.interval_end_times.front();
        const double t1 = ibi.interval_end_times.back();
        for (double t = t0; t <= t1; t += 0.25)
            grid.push_back(0.8 + 0.05 * std::sin(2.0 * kPi * 0.1 * t));
        double lf = 0, hf = 0;
        naive_band_powers(grid, 4.0, lf, hf);
        CHECK(lf / (lf + hf) > 0.9);
    }
    SUBCASE("constant IBI: zero powers, undefined ratio") {
        auto ibi = modulated_ibi(0.25, 0.8, 0.0, 70.0);
        auto rep = hrv_lf_hf(ibi);
        CHECK(rep.lf_power == 0.0);
        CHECK(rep.hf_power == 0.0);
        CHECK_FALSE(rep.lf_hf_ratio.has_value());
    }
    SUBCASE("too little data is rejected") {
        auto ibi = modulated_ibi(0.25, 0.8, 0.05, 5.0);
        CHECK_THROWS_AS(hrv_lf_hf(ibi), ValueError);
    }
}

TEST_CASE("respiratory_frequency: modulation recovery within 0.01 Hz") {
    CHECK(respiratory_frequency(modulated_ibi(0.25, 0.8, 0.05, 90.0)) ==
          doctest::Approx(0.25).epsilon(0.01 / 0.25));
    CHECK(respiratory_frequency(modulated_ibi(0.15, 0.8, 0.05, 90.0)) ==
          doctest::Approx(0.15).epsilon(0.01 / 0.15));
    CHECK_THROWS_WITH_AS(respiratory_frequency(modulated_ibi(0.25, 0.8, 0.0, 90.0)),
                         doctest::Contains("no respiratory modulation"), ValueError);
}

TEST_CASE("signal CSV round trip") {
    auto s = sine(1.0, 3.0, 30.0);
    const auto path = (std::filesystem::temp_directory_path() / "marppg_sig_test.csv").string();
    write_signal_csv(path, s, true);
    auto back = read_signal_csv(path);
    CHECK(back.fs == doctest::Approx(30.0));
    REQUIRE(back.samples.size() == s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i) CHECK(back.samples[i] == s.samples[i]);
    std::filesystem::remove(path);
}
