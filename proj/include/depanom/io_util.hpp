#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

namespace depanom {

// Shortest decimal form that round-trips the exact double. Keeps data files
// lossless and byte-stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_double_fixed(double v, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line);

// Strict double parse of a whole field; throws ConfigError on garbage.
double parse_double_field(const std::string& field, const std::string& context);
std::int64_t parse_int_field(const std::string& field, const std::string& context);

}  // namespace depanom
