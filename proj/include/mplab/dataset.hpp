#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mplab/models.hpp"

namespace mplab {

struct Dataset {
    std::vector<Vec> features;                // n rows of K values
    std::vector<int> labels;                  // -1/+1, or class ids for multiclass data
    std::optional<std::vector<double>> true_margins;
    std::vector<std::int64_t> sample_ids;

    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

    // Throws ContractViolation when row counts or widths disagree.
    void validate() const;
    // Rows whose ids appear in `ids` (sorted), in id order.
    Dataset subset(const std::vector<std::int64_t>& ids) const;
};

// x ~ N(0,1)^K, teacher (1,0,...,0): y = sign(x_1), true margin |x_1|.
Dataset generate_teacher_dataset(std::size_t K, std::size_t n, std::uint64_t seed);
LinearModel canonical_teacher(std::size_t K);

// C Gaussian blobs in 2D, means radius*(cos 2pi c/C, sin 2pi c/C), label c = i mod C.
Dataset make_toy_multiclass(std::size_t C, std::size_t n, std::uint64_t seed, double radius = 1.0,
                            double sigma = 1.0);

// CSV: sample_id,label[,true_margin],x0,...,x{K-1}; 17 significant digits.
std::string format_dataset(const Dataset& d);
Dataset parse_dataset(const std::string& text);
void write_dataset(const std::filesystem::path& path, const Dataset& d);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace mplab
