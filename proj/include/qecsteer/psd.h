#pragma once

#include <vector>

namespace qecsteer {

struct PsdResult {
    std::vector<double> freq;         // shared log-spaced grid, per-epoch units
    std::vector<double> psd_fixed;    // geometric mean across traces
    std::vector<double> psd_steered;
    std::vector<double> filter_db;    // 10 log10(steered / fixed), optionally smoothed
};

// Per-trace mean normalization, periodogram via discrete Fourier transform,
// log-log interpolation onto a shared grid, geometric averaging with the DC
// component excluded. filter = steered / fixed. smooth_sigma is a Gaussian
// kernel width in grid points (0 disables smoothing). Every trace must have
// at least 8 samples.
PsdResult analyze_psd(const std::vector<std::vector<double>>& fixed_traces,
                      const std::vector<std::vector<double>>& steered_traces, int grid_points = 64,
                      double smooth_sigma = 0.0);

// Periodogram of one mean-normalized trace: frequencies k/n for
// k = 1..n/2 and |X_k|^2 / n.
void periodogram(const std::vector<double>& trace, std::vector<double>& freq, std::vector<double>& power);

}  // namespace qecsteer
