#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace nn3d {

/// Single-channel image with double samples in nominal range [0, 255], row-major.
class Plane {
public:
    Plane() = default;
    Plane(std::size_t width, std::size_t height, double fill = 0.0);
    Plane(std::size_t width, std::size_t height, std::vector<double> data);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * width_ + col]; }
    double operator()(std::size_t row, std::size_t col) const noexcept { return data_[row * width_ + col]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * width_, width_}; }

    bool same_shape(const Plane& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    bool all_finite() const noexcept;

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

/// Top-left corner of an n1 x n1 block.
struct BlockCoord {
    std::uint32_t row = 0;
    std::uint32_t col = 0;

    friend bool operator==(const BlockCoord&, const BlockCoord&) = default;
    friend auto operator<=>(const BlockCoord&, const BlockCoord&) = default;
};

enum class PlaneFormat { pgm8, plane };

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads 8-bit grayscale PGM (P5/P2), 8-bit grayscale PNG, or the NN3DPF01 plane format.
Plane load_plane(const std::filesystem::path& path);

void save_plane(const Plane& p, const std::filesystem::path& path, PlaneFormat format);

/// Clamp to [0, 255] and round half away from zero.
std::uint8_t quantize_u8(double v) noexcept;

bool block_in_bounds(const Plane& p, BlockCoord c, std::size_t n1) noexcept;

/// Returns the n1 x n1 window at c, row-major. Throws std::out_of_range if it does not fit.
std::vector<double> extract_block(const Plane& p, BlockCoord c, std::size_t n1);

/// Same as extract_block, writing into out (size n1*n1) without bounds checks.
void copy_block(const Plane& p, BlockCoord c, std::size_t n1, std::span<double> out) noexcept;

double min_value(const Plane& p) noexcept;
double max_value(const Plane& p) noexcept;

}  // namespace nn3d
