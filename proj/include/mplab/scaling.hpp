#pragma once

#include <span>
#include <utility>
#include <vector>

namespace mplab {

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;  // natural-log intercept
    double residual = 0.0;   // RMS residual in log space
};

// Least-squares line through (log alpha, log error).
LogLogFit fit_loglog_slope(std::span<const std::pair<double, double>> points);

}  // namespace mplab
