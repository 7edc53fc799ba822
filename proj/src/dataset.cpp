#include "mplab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mplab/errors.hpp"
#include "mplab/io.hpp"

namespace mplab {

void Dataset::validate() const {
    require(labels.size() == features.size(), "dataset: labels and features differ in length");
    require(sample_ids.size() == features.size(), "dataset: ids and features differ in length");
    if (true_margins) {
        require(true_margins->size() == features.size(), "dataset: margins and features differ in length");
    }
    for (const auto& row : features) {
        require(row.size() == dim(), "dataset: ragged feature rows");
    }
}

Dataset Dataset::subset(const std::vector<std::int64_t>& ids) const {
    Dataset out;
    if (true_margins) out.true_margins.emplace();
    std::vector<std::size_t> order(size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sample_ids[a] < sample_ids[b]; });
    for (std::size_t i : order) {
        if (!std::binary_search(ids.begin(), ids.end(), sample_ids[i])) continue;
        out.features.push_back(features[i]);
        out.labels.push_back(labels[i]);
        out.sample_ids.push_back(sample_ids[i]);
        if (true_margins) out.true_margins->push_back((*true_margins)[i]);
    }
    return out;
}

Dataset generate_teacher_dataset(std::size_t K, std::size_t n, std::uint64_t seed) {
    require(K >= 1 && n >= 1, "teacher dataset needs K >= 1 and n >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset d;
    d.features.resize(n, Vec(K));
    d.labels.resize(n);
    d.sample_ids.resize(n);
    d.true_margins.emplace(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : d.features[i]) v = gauss(rng);
        double x1 = d.features[i][0];
        d.labels[i] = x1 >= 0.0 ? 1 : -1;
        (*d.true_margins)[i] = std::abs(x1);
        d.sample_ids[i] = static_cast<std::int64_t>(i);
    }
    return d;
}

LinearModel canonical_teacher(std::size_t K) {
    Vec w(K, 0.0);
    w.at(0) = 1.0;
    return LinearModel(std::move(w));
}

Dataset make_toy_multiclass(std::size_t C, std::size_t n, std::uint64_t seed, double radius, double sigma) {
    require(C >= 2, "toy data needs C >= 2");
    require(sigma > 0.0, "toy data needs sigma > 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = i % C;
        double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(C);
        double mx = radius * std::cos(angle);
        double my = radius * std::sin(angle);
        if (2 * c == C) my = 0.0;  // keep the C = 2 means exactly on the x axis
        d.features.push_back({mx + gauss(rng), my + gauss(rng)});
        d.labels.push_back(static_cast<int>(c));
        d.sample_ids.push_back(static_cast<std::int64_t>(i));
    }
    return d;
}

std::string format_dataset(const Dataset& d) {
    d.validate();
    std::string out = "sample_id,label";
    if (d.true_margins) out += ",true_margin";
    for (std::size_t j = 0; j < d.dim(); ++j) out += ",x" + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        out += std::to_string(d.sample_ids[i]) + "," + std::to_string(d.labels[i]);
        if (d.true_margins) out += "," + fmt17((*d.true_margins)[i]);
        for (double v : d.features[i]) out += "," + fmt17(v);
        out += "\n";
    }
    return out;
}

Dataset parse_dataset(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset: empty file");
    auto header = split(trim(line), ',');
    if (header.size() < 2 || header[0] != "sample_id" || header[1] != "label") {
        throw IoError("dataset: unexpected header");
    }
    bool has_margin = header.size() > 2 && header[2] == "true_margin";
    std::size_t first = has_margin ? 3 : 2;
    Dataset d;
    if (has_margin) d.true_margins.emplace();
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != header.size()) throw IoError("dataset: row width does not match header");
        try {
            d.sample_ids.push_back(std::stoll(cols[0]));
            d.labels.push_back(std::stoi(cols[1]));
            if (has_margin) d.true_margins->push_back(std::stod(cols[2]));
            Vec row;
            for (std::size_t j = first; j < cols.size(); ++j) row.push_back(std::stod(cols[j]));
            d.features.push_back(std::move(row));
        } catch (const std::exception& e) {
            throw IoError(std::string("dataset: ") + e.what());
        }
    }
    d.validate();
    return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) { write_file_atomic(path, format_dataset(d)); }

Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

}  // namespace mplab
