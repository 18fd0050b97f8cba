#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qecsteer {

// Splits [0, n) into contiguous chunks and runs them on up to `threads`
// workers. Falls back to inline execution for threads <= 1. The partition
// never affects results: all randomness is keyed by absolute indices.
void parallel_for(uint64_t n, int threads, const std::function<void(uint64_t, uint64_t)>& chunk_fn);

// y ~ a + b*x least squares. Returns {a, b, stderr_b, r_squared}.
struct LinearFit {
    double intercept = 0;
    double slope = 0;
    double slope_stderr = 0;
    double r_squared = 0;
    size_t n = 0;
};
LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

// Slope-through-origin fit y ~ b*x with standard error.
struct OriginFit {
    double slope = 0;
    double slope_stderr = 0;
    size_t n = 0;
};
OriginFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y);

double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);  // population

// Linear-interpolation quantile, q in [0, 1].
double quantile_of(std::vector<double> v, double q);

// Floating-point output convention: 9 significant digits everywhere.
std::string fmt_g9(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace qecsteer
