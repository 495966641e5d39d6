#include "npusim/rng.hpp"

#include <cmath>

#include "npusim/common.hpp"

namespace npusim {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t split_seed(std::uint64_t master, std::string_view stream, std::uint64_t index)
{
    return mix64(master ^ mix64(fnv1a64(stream) + index));
}

std::uint64_t Rng::below(std::uint64_t bound)
{
    if (bound == 0)
        throw SimError("Rng::below called with bound 0");
    // Rejection on the top of the range keeps the result unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

namespace {

// log1p(x)/x, stable near 0
double helper1(double x)
{
    if (std::abs(x) > 1e-8)
        return std::log1p(x) / x;
    return 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
}

// expm1(x)/x, stable near 0
double helper2(double x)
{
    if (std::abs(x) > 1e-8)
        return std::expm1(x) / x;
    return 1.0 + x * 0.5 * (1.0 + x * (1.0 / 3.0) * (1.0 + 0.25 * x));
}

} // namespace

ZipfSampler::ZipfSampler(std::uint64_t n, double exponent) : n_(n), s_(exponent)
{
    if (n == 0)
        throw SimError("Zipf support must be non-empty");
    if (!(exponent > 0.0))
        throw SimError("Zipf exponent must be positive");
    h_integral_x1_ = h_integral(1.5) - 1.0;
    h_integral_n_ = h_integral(static_cast<double>(n) + 0.5);
    threshold_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double ZipfSampler::h(double x) const { return std::exp(-s_ * std::log(x)); }

double ZipfSampler::h_integral(double x) const
{
    const double log_x = std::log(x);
    return helper2((1.0 - s_) * log_x) * log_x;
}

double ZipfSampler::h_integral_inverse(double x) const
{
    double t = x * (1.0 - s_);
    if (t < -1.0)
        t = -1.0;
    return std::exp(helper1(t) * x);
}

std::uint64_t ZipfSampler::operator()(Rng &rng) const
{
    for (;;) {
        const double u = h_integral_n_ + rng.unit() * (h_integral_x1_ - h_integral_n_);
        const double x = h_integral_inverse(u);
        double kd = std::floor(x + 0.5);
        if (kd < 1.0)
            kd = 1.0;
        else if (kd > static_cast<double>(n_))
            kd = static_cast<double>(n_);
        if (kd - x <= threshold_ || u >= h_integral(kd + 0.5) - h(kd))
            return static_cast<std::uint64_t>(kd);
    }
}

} // namespace npusim
