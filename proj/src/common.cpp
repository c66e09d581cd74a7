#include "triples/common.hpp"

#include <charconv>
#include <cstdio>

namespace triples {

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf, end);
}

}  // namespace triples
