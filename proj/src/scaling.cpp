#include "mplab/scaling.hpp"

#include <cmath>

#include "mplab/errors.hpp"

namespace mplab {

LogLogFit fit_loglog_slope(std::span<const std::pair<double, double>> points) {
    require(points.size() >= 2, "a log-log fit needs at least two points");
    double sx = 0.0, sy = 0.0;
    std::vector<std::pair<double, double>> logs;
    logs.reserve(points.size());
    for (auto [a, e] : points) {
        require(a > 0.0 && e > 0.0 && std::isfinite(a) && std::isfinite(e), "log-log fit needs positive finite values");
        logs.emplace_back(std::log(a), std::log(e));
        sx += logs.back().first;
        sy += logs.back().second;
    }
    const double n = static_cast<double>(logs.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (auto [lx, ly] : logs) {
        sxx += (lx - mx) * (lx - mx);
        sxy += (lx - mx) * (ly - my);
    }
    require(sxx > 0.0, "a log-log fit needs at least two distinct alpha values");
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (auto [lx, ly] : logs) {
        double r = ly - (fit.intercept + fit.slope * lx);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace mplab
