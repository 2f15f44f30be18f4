#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nn3d::haar {

/// True for n = 1, 2, 4, ...
constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// Largest power of two not exceeding n (n >= 1).
constexpr std::size_t floor_power_of_two(std::size_t n) noexcept {
    std::size_t p = 1;
    while (p * 2 <= n) p *= 2;
    return p;
}

// Full-depth orthonormal Haar analysis. Coefficient layout after the
// transform: [scaling, detail(coarsest), detail(next level) x2, ...,
// detail(finest) x n/2]. Filters are (1, 1)/sqrt2 and (1, -1)/sqrt2.

/// In place, with caller-provided scratch of at least v.size() elements.
void forward_inplace(std::span<double> v, std::span<double> scratch) noexcept;
void inverse_inplace(std::span<double> v, std::span<double> scratch) noexcept;

/// Throws std::invalid_argument when the length is not a power of two.
std::vector<double> forward(std::span<const double> v);
std::vector<double> inverse(std::span<const double> coeffs);

}  // namespace nn3d::haar
