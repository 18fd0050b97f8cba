#include "qecsteer/psd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qecsteer {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPowerFloor = 1e-300;

std::vector<double> interp_loglog(const std::vector<double>& f, const std::vector<double>& p,
                                  const std::vector<double>& grid) {
    std::vector<double> out(grid.size());
    for (size_t i = 0; i < grid.size(); i++) {
        double g = grid[i];
        if (g <= f.front()) {
            out[i] = p.front();
            continue;
        }
        if (g >= f.back()) {
            out[i] = p.back();
            continue;
        }
        size_t hi = static_cast<size_t>(std::lower_bound(f.begin(), f.end(), g) - f.begin());
        size_t lo = hi - 1;
        double t = (std::log(g) - std::log(f[lo])) / (std::log(f[hi]) - std::log(f[lo]));
        out[i] = std::exp((1 - t) * std::log(std::max(p[lo], kPowerFloor)) +
                          t * std::log(std::max(p[hi], kPowerFloor)));
    }
    return out;
}

std::vector<double> geometric_mean_psd(const std::vector<std::vector<double>>& traces,
                                       const std::vector<double>& grid) {
    std::vector<double> acc(grid.size(), 0.0);
    for (const auto& tr : traces) {
        std::vector<double> f, p;
        periodogram(tr, f, p);
        auto interp = interp_loglog(f, p, grid);
        for (size_t i = 0; i < grid.size(); i++) acc[i] += std::log(std::max(interp[i], kPowerFloor));
    }
    std::vector<double> out(grid.size());
    for (size_t i = 0; i < grid.size(); i++) out[i] = std::exp(acc[i] / traces.size());
    return out;
}

}  // namespace

void periodogram(const std::vector<double>& trace, std::vector<double>& freq, std::vector<double>& power) {
    const size_t n = trace.size();
    double mean = 0;
    for (double v : trace) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> x(n);
    for (size_t t = 0; t < n; t++) x[t] = mean != 0 ? trace[t] / mean : trace[t];

    freq.clear();
    power.clear();
    // DC excluded by construction: k starts at 1
    for (size_t k = 1; k <= n / 2; k++) {
        double re = 0, im = 0;
        for (size_t t = 0; t < n; t++) {
            double a = kTwoPi * static_cast<double>(k) * static_cast<double>(t) / static_cast<double>(n);
            re += x[t] * std::cos(a);
            im -= x[t] * std::sin(a);
        }
        freq.push_back(static_cast<double>(k) / static_cast<double>(n));
        power.push_back((re * re + im * im) / static_cast<double>(n));
    }
}

PsdResult analyze_psd(const std::vector<std::vector<double>>& fixed_traces,
                      const std::vector<std::vector<double>>& steered_traces, int grid_points,
                      double smooth_sigma) {
    if (fixed_traces.empty() || steered_traces.empty()) throw std::invalid_argument("need >= 1 trace per group");
    size_t min_len = SIZE_MAX;
    for (const auto* group : {&fixed_traces, &steered_traces})
        for (const auto& tr : *group) {
            if (tr.size() < 8) throw std::invalid_argument("trace too short (need >= 8 samples)");
            min_len = std::min(min_len, tr.size());
        }

    PsdResult res;
    double f_lo = 1.0 / static_cast<double>(min_len);
    double f_hi = 0.5;
    res.freq.resize(grid_points);
    for (int i = 0; i < grid_points; i++) {
        double t = grid_points == 1 ? 0.0 : static_cast<double>(i) / (grid_points - 1);
        res.freq[i] = std::exp((1 - t) * std::log(f_lo) + t * std::log(f_hi));
    }

    res.psd_fixed = geometric_mean_psd(fixed_traces, res.freq);
    res.psd_steered = geometric_mean_psd(steered_traces, res.freq);

    res.filter_db.resize(grid_points);
    for (int i = 0; i < grid_points; i++)
        res.filter_db[i] = 10.0 * std::log10(std::max(res.psd_steered[i], kPowerFloor) /
                                             std::max(res.psd_fixed[i], kPowerFloor));

    if (smooth_sigma > 0) {
        std::vector<double> smoothed(grid_points);
        for (int i = 0; i < grid_points; i++) {
            double num = 0, den = 0;
            for (int j = 0; j < grid_points; j++) {
                double w = std::exp(-0.5 * (i - j) * (i - j) / (smooth_sigma * smooth_sigma));
                num += w * res.filter_db[j];
                den += w;
            }
            smoothed[i] = num / den;
        }
        res.filter_db = std::move(smoothed);
    }
    return res;
}

}  // namespace qecsteer
