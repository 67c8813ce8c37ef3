#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace fvtree {

// Seed for one pipeline stage / parallel unit: a pure function of
// (master, tag, index). Changing this function changes every output file.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

// Random stream used everywhere in the library.
//
// Only the 64-bit mt19937_64 output sequence is consumed (which the standard
// pins down exactly); the transforms to uniform, normal and exponential
// variates are implemented here so outputs do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  // Standard normal via Box-Muller (two uniforms per variate, no caching).
  double normal();
  double exponential(double rate);
  // Uniform integer in [0, n). Requires n > 0.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace fvtree
