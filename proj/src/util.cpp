#include "qecsteer/util.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qecsteer {

void parallel_for(uint64_t n, int threads, const std::function<void(uint64_t, uint64_t)>& chunk_fn) {
    if (n == 0) return;
    uint64_t workers = threads <= 1 ? 1 : std::min<uint64_t>(threads, n);
    if (workers == 1) {
        chunk_fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    uint64_t base = n / workers, rem = n % workers;
    uint64_t start = 0;
    for (uint64_t w = 0; w < workers; w++) {
        uint64_t len = base + (w < rem ? 1 : 0);
        pool.emplace_back(chunk_fn, start, start + len);
        start += len;
    }
    for (auto& t : pool) t.join();
}

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_linear: need >= 2 points");
    size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; i++) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0) throw std::invalid_argument("fit_linear: degenerate x");
    LinearFit f;
    f.n = n;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0, ybar = sy / n;
    for (size_t i = 0; i < n; i++) {
        double e = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += e * e;
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    if (n > 2) f.slope_stderr = std::sqrt(ss_res / (n - 2) / (sxx - sx * sx / n));
    return f;
}

OriginFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("fit_through_origin: empty");
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); i++) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    if (sxx == 0) throw std::invalid_argument("fit_through_origin: all-zero x");
    OriginFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    double ss_res = 0;
    for (size_t i = 0; i < x.size(); i++) {
        double e = y[i] - f.slope * x[i];
        ss_res += e * e;
    }
    if (f.n > 1) f.slope_stderr = std::sqrt(ss_res / (f.n - 1) / sxx);
    return f;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
}

double stddev_of(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double m = mean_of(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
}

double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile_of: empty");
    std::sort(v.begin(), v.end());
    double pos = q * (v.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    double frac = pos - lo;
    return v[lo] * (1 - frac) + v[lo + 1] * frac;
}

std::string fmt_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

}  // namespace qecsteer
