#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lrvar {

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

// Full-string parse; nullopt on any trailing garbage or empty input.
// Accepts "nan"/"inf" spellings.
std::optional<double> parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

std::string_view trim(std::string_view s);

// Opens for writing, creating parent directories; throws with the path.
std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

}  // namespace lrvar
