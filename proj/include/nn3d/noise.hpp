#pragma once

#include <cstdint>
#include <limits>

#include "nn3d/plane.hpp"

namespace nn3d {

struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// z = y + eta, eta ~ N(0, sigma^2) i.i.d., unclamped.
///
/// The sample at flat index i is a pure function of (seed, i): two SplitMix64
/// outputs keyed by the pair feed one Box-Muller draw. Rows can therefore be
/// generated in any order or in parallel with identical results.
Plane add_awgn(const Plane& y, const NoiseSpec& spec);

/// Standard normal sample for (seed, index) under the scheme above.
double gaussian_at(std::uint64_t seed, std::uint64_t index) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

double mse(const Plane& reference, const Plane& estimate);

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE); kInfinitePsnr when the planes are identical.
double psnr(const Plane& reference, const Plane& estimate);

}  // namespace nn3d
