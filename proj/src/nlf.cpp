#include "nn3d/nlf.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "nn3d/haar.hpp"
#include "nn3d/parallel.hpp"

namespace nn3d {

namespace {

constexpr std::size_t kBatchGroups = 256;

void check_table(const Plane& image, const GroupTable& table) {
    if (table.width != 0 && (table.width != image.width() || table.height != image.height())) {
        throw std::invalid_argument("group table built for " + std::to_string(table.width) + "x" +
                                    std::to_string(table.height) + ", image is " + std::to_string(image.width()) +
                                    "x" + std::to_string(image.height()));
    }
    for (const auto& group : table.groups) {
        if (group.empty() || !haar::is_power_of_two(group.size())) {
            throw std::invalid_argument("group size must be a nonzero power of two");
        }
        for (const auto& c : group) {
            if (!block_in_bounds(image, c, table.n1)) {
                throw std::invalid_argument("group table coordinate out of bounds for image");
            }
        }
    }
}

}  // namespace

Group extract_group(const Plane& image, const GroupCoords& coords, std::size_t n1) {
    Group g{n1, coords, std::vector<double>(coords.size() * n1 * n1)};
    for (std::size_t b = 0; b < coords.size(); ++b) {
        if (!block_in_bounds(image, coords[b], n1)) {
            throw std::out_of_range("group coordinate out of bounds");
        }
        copy_block(image, coords[b], n1, std::span<double>(g.blocks).subspan(b * n1 * n1, n1 * n1));
    }
    return g;
}

double filter_group_inplace(Group& g, double tau, std::span<double> scratch) {
    const std::size_t depth = g.depth();
    const std::size_t area = g.block_area();
    if (tau == 0.0) {
        // Every shrinkage factor is 1: the filter is the identity.
        return static_cast<double>(depth * area);
    }
    auto fiber = scratch.first(depth);
    auto work = scratch.subspan(depth, depth);
    double energy = 0.0;
    for (std::size_t p = 0; p < area; ++p) {
        for (std::size_t b = 0; b < depth; ++b) fiber[b] = g.blocks[b * area + p];
        haar::forward_inplace(fiber, work);
        for (auto& q : fiber) {
            const double f = shrink_factor(q, tau);
            energy += f * f;
            q *= f;
        }
        haar::inverse_inplace(fiber, work);
        for (std::size_t b = 0; b < depth; ++b) g.blocks[b * area + p] = fiber[b];
    }
    return std::max(energy, kWeightEnergyFloor);
}

FilteredGroup filter_group(Group g, double tau) {
    if (!haar::is_power_of_two(g.depth()) || g.blocks.size() != g.depth() * g.block_area()) {
        throw std::invalid_argument("malformed group");
    }
    if (tau < 0.0) {
        throw std::invalid_argument("tau must be nonnegative");
    }
    std::vector<double> scratch(2 * g.depth());
    const double energy = filter_group_inplace(g, tau, scratch);
    return {std::move(g), 1.0 / energy};
}

AccumulationBuffers::AccumulationBuffers(std::size_t width, std::size_t height)
    : width_(width), height_(height), numerator_(width * height, 0.0), denominator_(width * height, 0.0) {}

void AccumulationBuffers::add(const Group& g, double weight) {
    const std::size_t n1 = g.n1;
    for (std::size_t b = 0; b < g.depth(); ++b) {
        const auto block = g.block(b);
        const auto c = g.coords[b];
        for (std::size_t i = 0; i < n1; ++i) {
            const std::size_t base = (c.row + i) * width_ + c.col;
            for (std::size_t j = 0; j < n1; ++j) {
                numerator_[base + j] += weight * block[i * n1 + j];
                denominator_[base + j] += weight;
            }
        }
    }
}

Plane AccumulationBuffers::finish() const {
    std::vector<double> out(numerator_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(denominator_[i] > 0.0)) {
            throw std::logic_error("pixel " + std::to_string(i) + " not covered by any group");
        }
        out[i] = numerator_[i] / denominator_[i];
    }
    return Plane(width_, height_, std::move(out));
}

Plane apply_nlf(const Plane& image, const GroupTable& table, double tau, int threads) {
    if (tau < 0.0) {
        throw std::invalid_argument("tau must be nonnegative");
    }
    check_table(image, table);

    // Weights are scaled by the constant n1^2 * n2 so the tau = 0 weight of a
    // full group is exactly 1; a common factor cancels in the normalization.
    const double weight_scale = static_cast<double>(table.n1 * table.n1 * std::max<std::size_t>(table.n2, 1));
    const int nthreads = resolve_threads(threads);

    AccumulationBuffers acc(image.width(), image.height());
    std::vector<Group> batch;
    std::vector<double> energies;
    for (std::size_t start = 0; start < table.groups.size(); start += kBatchGroups) {
        const std::size_t stop = std::min(table.groups.size(), start + kBatchGroups);
        const auto count = static_cast<std::int64_t>(stop - start);
        batch.resize(stop - start);
        energies.resize(stop - start);

#pragma omp parallel num_threads(nthreads) if (count > 1)
        {
            std::vector<double> scratch(2 * std::max<std::size_t>(table.n2, 1));
#pragma omp for schedule(static)
            for (std::int64_t k = 0; k < count; ++k) {
                const auto idx = static_cast<std::size_t>(k);
                const auto& coords = table.groups[start + idx];
                if (scratch.size() < 2 * coords.size()) scratch.resize(2 * coords.size());
                batch[idx] = extract_group(image, coords, table.n1);
                energies[idx] = filter_group_inplace(batch[idx], tau, scratch);
            }
        }

        for (std::size_t k = 0; k < batch.size(); ++k) {
            acc.add(batch[k], weight_scale / energies[k]);
        }
    }
    return acc.finish();
}

}  // namespace nn3d
