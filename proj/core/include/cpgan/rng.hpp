#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace cpgan {

/// splitmix64 finalizer; used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a role tag.
/// Equal (seed, tag) always give the same result, so parameter init and
/// samplers get reproducible streams regardless of construction order.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return mix64(master ^ h);
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view tag) {
  return std::mt19937_64(derive_seed(master, tag));
}

/// mt19937_64 state round-trip via the standard stream representation.
inline std::string rng_state_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 rng_state_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  if (is.fail()) throw std::invalid_argument("rng_state_from_string: malformed state");
  return rng;
}

}  // namespace cpgan
