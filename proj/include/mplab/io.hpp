#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mplab {

// Writes through a sibling temp file and renames it into place, so readers
// never observe a partially written target. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// %.9g / %.17g with "nan", "inf" spelled out and negative zero printed as 0.
std::string fmt9(double v);
std::string fmt17(double v);

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& s);

}  // namespace mplab
