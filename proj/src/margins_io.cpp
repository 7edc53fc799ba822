#include <algorithm>
#include <sstream>

#include "mplab/errors.hpp"
#include "mplab/io.hpp"
#include "mplab/margins.hpp"
#include "mplab/rational.hpp"

namespace mplab {

std::string to_string(MarginMethod m) {
    switch (m) {
        case MarginMethod::analytic: return "analytic";
        case MarginMethod::deepfool: return "deepfool";
        case MarginMethod::fast: return "fast";
        case MarginMethod::online: return "online";
    }
    return "?";
}

MarginMethod parse_margin_method(const std::string& s) {
    if (s == "analytic") return MarginMethod::analytic;
    if (s == "deepfool") return MarginMethod::deepfool;
    if (s == "fast") return MarginMethod::fast;
    if (s == "online") return MarginMethod::online;
    throw ConfigError("unknown margin method '" + s + "'");
}

void validate(const DeepFoolConfig& cfg) {
    require(cfg.max_iter >= 1, "deepfool max_iter must be positive");
    require(cfg.overshoot >= 0.0, "deepfool overshoot must be >= 0");
}

void validate(const FastMarginConfig& cfg) {
    require(cfg.step > 0.0, "fast margin step must be > 0");
    require(cfg.i_max >= 1 && cfg.j_max >= 1, "fast margin i_max and j_max must be positive");
}

double analytic_margin(const LinearModel& model, ConstSpan x, int y) {
    require(y == 1 || y == -1, "binary label must be -1 or +1");
    double l1 = 0.0;
    for (double w : model.weights) l1 += std::abs(w);
    if (l1 == 0.0) {
        throw DegenerateModelError("analytic margin undefined for theta = 0");
    }
    return static_cast<double>(y) * model.score(x) / l1;
}

std::string format_margin_manifest(std::vector<MarginRecord> records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const MarginRecord& a, const MarginRecord& b) { return a.sample_id < b.sample_id; });
    std::string out = "sample_id,margin,method,iterations\n";
    for (const auto& r : records) {
        out += std::to_string(r.sample_id) + "," + fmt9(r.margin) + "," + to_string(r.method) + "," +
               std::to_string(r.iterations) + "\n";
    }
    return out;
}

std::vector<MarginRecord> parse_margin_manifest(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "sample_id,margin,method,iterations") {
        throw IoError("margin manifest: unexpected header");
    }
    std::vector<MarginRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != 4) {
            throw IoError("margin manifest line " + std::to_string(lineno) + ": expected 4 columns");
        }
        try {
            MarginRecord r;
            r.sample_id = std::stoll(cols[0]);
            r.margin = parse_real(cols[1]);
            r.method = parse_margin_method(cols[2]);
            r.iterations = std::stoi(cols[3]);
            out.push_back(r);
        } catch (const std::exception& e) {
            throw IoError("margin manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_margin_manifest(const std::filesystem::path& path, const std::vector<MarginRecord>& records) {
    write_file_atomic(path, format_margin_manifest(records));
}

std::vector<MarginRecord> read_margin_manifest(const std::filesystem::path& path) {
    return parse_margin_manifest(read_file(path));
}

}  // namespace mplab
