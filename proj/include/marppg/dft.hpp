// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

namespace marppg {

/// In-place radix-2 FFT; size must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse);

/// DFT of arbitrary length (radix-2 when the size is a power of two, direct
/// evaluation otherwise — signals here are short). Inverse includes the 1/N.
std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x, bool inverse);

std::size_t next_pow2(std::size_t n);

} // namespace marppg
