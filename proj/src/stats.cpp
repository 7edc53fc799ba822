#include "mplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mplab/errors.hpp"

namespace mplab {

double mean(std::span<const double> v) {
    require(!v.empty(), "mean of an empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double mu = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double ks_statistic(std::span<const double> a_in, std::span<const double> b_in) {
    require(!a_in.empty() && !b_in.empty(), "KS statistic needs two nonempty samples");
    std::vector<double> a(a_in.begin(), a_in.end()), b(b_in.begin(), b_in.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

}  // namespace mplab
