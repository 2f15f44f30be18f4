#include "nn3d/haar.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nn3d::haar {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

void require_power_of_two(std::size_t n) {
    if (!is_power_of_two(n)) {
        throw std::invalid_argument("Haar transform length " + std::to_string(n) + " is not a power of two");
    }
}

}  // namespace

void forward_inplace(std::span<double> v, std::span<double> scratch) noexcept {
    for (std::size_t len = v.size(); len > 1; len /= 2) {
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < half; ++i) {
            const double a = v[2 * i];
            const double b = v[2 * i + 1];
            scratch[i] = (a + b) * kInvSqrt2;
            scratch[half + i] = (a - b) * kInvSqrt2;
        }
        std::copy_n(scratch.begin(), len, v.begin());
    }
}

void inverse_inplace(std::span<double> v, std::span<double> scratch) noexcept {
    for (std::size_t len = 2; len <= v.size(); len *= 2) {
        const std::size_t half = len / 2;
        for (std::size_t i = 0; i < half; ++i) {
            const double s = v[i];
            const double d = v[half + i];
            scratch[2 * i] = (s + d) * kInvSqrt2;
            scratch[2 * i + 1] = (s - d) * kInvSqrt2;
        }
        std::copy_n(scratch.begin(), len, v.begin());
    }
}

std::vector<double> forward(std::span<const double> v) {
    require_power_of_two(v.size());
    std::vector<double> out(v.begin(), v.end());
    std::vector<double> scratch(v.size());
    forward_inplace(out, scratch);
    return out;
}

std::vector<double> inverse(std::span<const double> coeffs) {
    require_power_of_two(coeffs.size());
    std::vector<double> out(coeffs.begin(), coeffs.end());
    std::vector<double> scratch(coeffs.size());
    inverse_inplace(out, scratch);
    return out;
}

}  // namespace nn3d::haar
