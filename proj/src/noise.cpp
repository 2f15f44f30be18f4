#include "nn3d/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nn3d {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double gaussian_at(std::uint64_t seed, std::uint64_t index) noexcept {
    const std::uint64_t key = splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ull);
    const std::uint64_t a = splitmix64(key);
    const std::uint64_t b = splitmix64(a ^ 0x2545f4914f6cdd1dull);
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Plane add_awgn(const Plane& y, const NoiseSpec& spec) {
    if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
        throw std::invalid_argument("noise sigma must be positive and finite");
    }
    Plane z = y;
    auto data = z.data();
    const auto n = static_cast<std::int64_t>(data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        data[i] += spec.sigma * gaussian_at(spec.seed, static_cast<std::uint64_t>(i));
    }
    return z;
}

double mse(const Plane& reference, const Plane& estimate) {
    if (!reference.same_shape(estimate)) {
        throw std::invalid_argument("mse: dimension mismatch");
    }
    const auto a = reference.data();
    const auto b = estimate.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Plane& reference, const Plane& estimate) {
    const double e = mse(reference, estimate);
    if (e == 0.0) {
        return kInfinitePsnr;
    }
    return 10.0 * std::log10(255.0 * 255.0 / e);
}

}  // namespace nn3d
