#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace porogen {

// Counter-based random stream. The output at position k is a pure function of
// (key, k), so a stream is fully described by its key and counter and can be
// checkpointed and resumed exactly. Keys are derived from the run seed and a
// named block ("w-block", "sim", ...) plus an index.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  // Uniform on the open interval (0,1).
  double uniform();
  double normal();
  // Fills out with independent standard normals; uses both Box-Muller outputs.
  void fill_normal(std::span<double> out);
  // Gamma(shape, rate) by Marsaglia-Tsang.
  double gamma(double shape, double rate);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace porogen
