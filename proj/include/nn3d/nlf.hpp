#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nn3d/block_matching.hpp"
#include "nn3d/plane.hpp"

namespace nn3d {

/// Lower clamp on the shrinkage-factor energy before it is inverted into a weight.
inline constexpr double kWeightEnergyFloor = 1e-12;

/// q * q^2 / (q^2 + tau^2); zero when q == 0.
inline double shrink(double q, double tau) noexcept {
    const double q2 = q * q;
    if (q2 == 0.0) return 0.0;
    return q * (q2 / (q2 + tau * tau));
}

/// q^2 / (q^2 + tau^2); 1 when tau == 0 (no attenuation) and 0 when q == 0 < tau.
inline double shrink_factor(double q, double tau) noexcept {
    if (tau == 0.0) return 1.0;
    const double q2 = q * q;
    return q2 / (q2 + tau * tau);
}

/// n1 x n1 blocks stacked along the similarity dimension. Block b occupies
/// samples [b*n1*n1, (b+1)*n1*n1), row-major.
struct Group {
    std::size_t n1 = 0;
    GroupCoords coords;
    std::vector<double> blocks;

    std::size_t depth() const noexcept { return coords.size(); }
    std::size_t block_area() const noexcept { return n1 * n1; }
    std::span<const double> block(std::size_t b) const noexcept {
        return std::span<const double>(blocks).subspan(b * block_area(), block_area());
    }
};

Group extract_group(const Plane& image, const GroupCoords& coords, std::size_t n1);

struct FilteredGroup {
    Group group;
    double weight = 0.0;
};

/// Haar-shrinks every fiber along the similarity dimension and returns the
/// group with weight 1 / max(sum of squared shrinkage factors, floor).
FilteredGroup filter_group(Group g, double tau);

/// In-place variant. Returns the clamped shrinkage-factor energy.
/// `scratch` must hold at least 2 * depth samples.
double filter_group_inplace(Group& g, double tau, std::span<double> scratch);

/// Weighted overlap-add of block estimates.
class AccumulationBuffers {
public:
    AccumulationBuffers(std::size_t width, std::size_t height);

    void add(const Group& g, double weight);

    /// numerator / denominator; throws std::logic_error if a pixel received no weight.
    Plane finish() const;

private:
    std::size_t width_;
    std::size_t height_;
    std::vector<double> numerator_;
    std::vector<double> denominator_;
};

/// Groups are filtered in parallel and aggregated strictly in table order,
/// so the result is bit-identical for every thread count.
Plane apply_nlf(const Plane& image, const GroupTable& table, double tau, int threads = 0);

}  // namespace nn3d
