#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nn3d/plane.hpp"

namespace nn3d {

struct MatchConfig {
    std::size_t n1 = 10;             ///< block side
    std::size_t n2 = 32;             ///< maximum group size, power of two
    std::size_t search_radius = 19;  ///< 39x39 window of candidate top-left corners
    std::size_t ref_stride = 5;      ///< spacing of reference blocks, must not exceed n1

    /// Throws std::invalid_argument for inconsistent parameters or an image smaller than n1.
    void validate(std::size_t width, std::size_t height) const;
};

/// Coordinates of one group; the first entry is the reference block.
using GroupCoords = std::vector<BlockCoord>;

struct GroupTable {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::vector<GroupCoords> groups;

    friend bool operator==(const GroupTable&, const GroupTable&) = default;
};

/// Sum of squared differences; throws std::invalid_argument on size mismatch.
double match_distance(std::span<const double> a, std::span<const double> b);

/// Reference positions along one axis: 0, stride, 2*stride, ... plus extent - n1.
std::vector<std::uint32_t> reference_positions(std::size_t extent, std::size_t n1, std::size_t stride);

/// Exhaustive windowed block matching. The reference block is placed first,
/// remaining candidates follow by (distance, row, col). Groups are truncated
/// to the largest power of two not exceeding min(n2, candidate pool).
/// `threads` <= 0 uses the OpenMP default.
GroupTable build_group_table(const Plane& pilot, const MatchConfig& cfg, int threads = 0);

/// Marks every pixel covered by some block of the table.
std::vector<std::uint8_t> coverage_mask(const GroupTable& table);

// Sidecar: "NN3DGT01", u32 n1, u32 n2, u32 group count, then per group
// u32 size followed by (u32 row, u32 col) pairs; little-endian.
void save_group_table(const GroupTable& table, const std::filesystem::path& path);
GroupTable load_group_table(const std::filesystem::path& path);

}  // namespace nn3d
