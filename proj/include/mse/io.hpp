#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mse/curve.hpp"

namespace mse::io {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t v);

std::uint64_t curve_hash(const curve::SampledCurve& c);
std::uint64_t graph_hash(const curve::PeriodicGraph& g);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// 17 significant digits; NaN written as "nan".
std::string format_number(double v);

}  // namespace mse::io
