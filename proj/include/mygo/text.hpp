#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mygo/errors.hpp"

namespace mygo {

/// Line-oriented reader for the TSV inputs: skips blank lines and lines
/// starting with '#', strips a trailing '\r', and tags errors with file:line.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path);

    bool next(std::string& line);
    DataError error(const std::string& message) const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

std::vector<std::string> split(std::string_view text, char sep);
/// Whitespace-separated unsigned integers; throws std::invalid_argument on junk.
std::vector<std::uint32_t> parse_ids(std::string_view text);
std::uint32_t parse_u32(std::string_view text);

}  // namespace mygo
