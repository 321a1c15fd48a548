#include "mse/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mse/errors.hpp"

namespace mse::io {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text) { return fnv1a(text.data(), text.size()); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t curve_hash(const curve::SampledCurve& c) {
  std::uint64_t h = fnv1a(&c.period, sizeof c.period);
  auto mix = [&h](const auto& v) {
    if (!v.empty()) h = fnv1a(v.data(), v.size() * sizeof(v[0]), h);
  };
  mix(c.s);
  mix(c.z);
  mix(c.b);
  mix(c.kappa);
  mix(c.w);
  return h;
}

std::uint64_t graph_hash(const curve::PeriodicGraph& g) {
  const double L = g.period();
  std::uint64_t h = fnv1a(&L, sizeof L);
  return fnv1a(g.heights().data(), g.heights().size() * sizeof(double), h);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace mse::io
