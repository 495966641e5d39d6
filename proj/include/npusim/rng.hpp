#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace npusim {

/// splitmix64 finalizer; also used to derive sub-seeds.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over a byte string. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes);

/// Sub-seed for generator `stream` (and optional index) under a master seed:
///   split_seed(master, stream, k) = mix64(master ^ mix64(fnv1a64(stream) + k))
std::uint64_t split_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

/// Deterministic RNG. Avoids std::uniform_*_distribution so traces do not
/// depend on the standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform double in [0, 1).
    double unit();

  private:
    std::mt19937_64 engine_;
};

/// Zipf(s) over ranks 1..n, rejection-inversion sampling (Hoermann & Derflinger).
/// O(1) memory, so n can be the row count of a very large table.
class ZipfSampler {
  public:
    ZipfSampler(std::uint64_t n, double exponent);
    std::uint64_t operator()(Rng &rng) const;

    std::uint64_t size() const { return n_; }
    double exponent() const { return s_; }

  private:
    double h(double x) const;
    double h_integral(double x) const;
    double h_integral_inverse(double x) const;

    std::uint64_t n_;
    double s_;
    double h_integral_x1_;
    double h_integral_n_;
    double threshold_;
};

} // namespace npusim
