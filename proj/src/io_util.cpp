#include "depanom/io_util.hpp"

#include <cstdlib>

#include "depanom/errors.hpp"

namespace depanom {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double_field(const std::string& field, const std::string& context) {
    if (field.empty()) throw ConfigError(context + ": empty numeric field");
    const char* begin = field.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + field.size())
        throw ConfigError(context + ": cannot parse number '" + field + "'");
    return v;
}

std::int64_t parse_int_field(const std::string& field, const std::string& context) {
    std::int64_t v = 0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ConfigError(context + ": cannot parse integer '" + field + "'");
    return v;
}

}  // namespace depanom
