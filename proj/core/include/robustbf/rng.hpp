#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace robustbf {

using Engine = std::mt19937_64;

// Named sample streams. Each (seed, stream, batch, index) tuple keys an
// independent engine, so any sample can be regenerated on its own and in any
// order.
enum class Stream : std::uint64_t {
  kTrain = 0x7261696eULL,
  kValidation = 0x76616c69ULL,
  kTest = 0x74657374ULL,
  kInit = 0x696e6974ULL,
  kMask = 0x6d61736bULL,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t batch,
                                   std::uint64_t index) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ stream);
  k = splitmix64(k ^ batch);
  return splitmix64(k ^ index);
}

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t batch = 0,
                          std::uint64_t index = 0) {
  return Engine(stream_key(seed, static_cast<std::uint64_t>(stream), batch, index));
}

// Circularly-symmetric complex Gaussian with total variance `variance`.
template <typename Gen>
std::complex<double> complex_normal(Gen& gen, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  const double re = normal(gen);
  const double im = normal(gen);
  return {re, im};
}

}  // namespace robustbf
