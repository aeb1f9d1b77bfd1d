#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prectr {

// FNV-1a, 64 bit. Stable across runs and platforms.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

// Shortest form that still round-trips a double exactly (17 significant digits).
std::string format_exact(double v);

// Fixed decimal, used by logs and reports.
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string> split_whitespace(std::string_view s);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace prectr
