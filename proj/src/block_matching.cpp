#include "nn3d/block_matching.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "nn3d/haar.hpp"
#include "nn3d/parallel.hpp"

namespace nn3d {

namespace {

constexpr std::array<char, 8> kTableMagic = {'N', 'N', '3', 'D', 'G', 'T', '0', '1'};

struct Candidate {
    double distance;
    std::uint32_t row;
    std::uint32_t col;
};

bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
}

// SSD between the blocks at (r0, c0) and (r1, c1), summed in row-major order.
double block_ssd(const Plane& p, std::size_t n1, std::size_t r0, std::size_t c0, std::size_t r1,
                 std::size_t c1) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
        const double* a = p.row(r0 + i).data() + c0;
        const double* b = p.row(r1 + i).data() + c1;
        for (std::size_t j = 0; j < n1; ++j) {
            const double d = a[j] - b[j];
            acc += d * d;
        }
    }
    return acc;
}

GroupCoords match_reference(const Plane& pilot, const MatchConfig& cfg, std::uint32_t ref_row,
                            std::uint32_t ref_col, std::vector<Candidate>& pool) {
    const std::size_t max_row = pilot.height() - cfg.n1;
    const std::size_t max_col = pilot.width() - cfg.n1;
    const std::size_t r = cfg.search_radius;
    const std::size_t row_lo = ref_row > r ? ref_row - r : 0;
    const std::size_t row_hi = std::min<std::size_t>(ref_row + r, max_row);
    const std::size_t col_lo = ref_col > r ? ref_col - r : 0;
    const std::size_t col_hi = std::min<std::size_t>(ref_col + r, max_col);

    pool.clear();
    for (std::size_t i = row_lo; i <= row_hi; ++i) {
        for (std::size_t j = col_lo; j <= col_hi; ++j) {
            if (i == ref_row && j == ref_col) continue;
            pool.push_back({block_ssd(pilot, cfg.n1, ref_row, ref_col, i, j), static_cast<std::uint32_t>(i),
                            static_cast<std::uint32_t>(j)});
        }
    }

    const std::size_t size = haar::floor_power_of_two(std::min(cfg.n2, pool.size() + 1));
    const std::size_t keep = size - 1;
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), ranks_before);

    GroupCoords group;
    group.reserve(size);
    group.push_back({ref_row, ref_col});
    for (std::size_t k = 0; k < keep; ++k) {
        group.push_back({pool[k].row, pool[k].col});
    }
    return group;
}

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> bytes, const std::filesystem::path& path)
        : bytes_(std::move(bytes)), path_(path) {}

    std::uint32_t u32() {
        if (bytes_.size() - pos_ < 4) {
            throw IoError("truncated group table '" + path_.string() + "'");
        }
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += 4;
        return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
               (std::uint32_t(p[3]) << 24);
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    void skip(std::size_t n) { pos_ += n; }

private:
    std::vector<unsigned char> bytes_;
    std::filesystem::path path_;
    std::size_t pos_ = 0;
};

}  // namespace

void MatchConfig::validate(std::size_t width, std::size_t height) const {
    if (n1 < 1) throw std::invalid_argument("n1 must be at least 1");
    if (!haar::is_power_of_two(n2)) throw std::invalid_argument("n2 must be a power of two");
    if (ref_stride < 1 || ref_stride > n1) throw std::invalid_argument("ref_stride must lie in [1, n1]");
    if (width < n1 || height < n1) {
        throw std::invalid_argument("image " + std::to_string(width) + "x" + std::to_string(height) +
                                    " is smaller than the block size " + std::to_string(n1));
    }
}

double match_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("match_distance: block sizes differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

std::vector<std::uint32_t> reference_positions(std::size_t extent, std::size_t n1, std::size_t stride) {
    std::vector<std::uint32_t> out;
    const std::size_t last = extent - n1;
    for (std::size_t p = 0; p < last; p += stride) {
        out.push_back(static_cast<std::uint32_t>(p));
    }
    out.push_back(static_cast<std::uint32_t>(last));
    return out;
}

GroupTable build_group_table(const Plane& pilot, const MatchConfig& cfg, int threads) {
    cfg.validate(pilot.width(), pilot.height());
    const auto rows = reference_positions(pilot.height(), cfg.n1, cfg.ref_stride);
    const auto cols = reference_positions(pilot.width(), cfg.n1, cfg.ref_stride);

    GroupTable table{pilot.width(), pilot.height(), cfg.n1, cfg.n2, {}};
    table.groups.resize(rows.size() * cols.size());
    const auto count = static_cast<std::int64_t>(table.groups.size());
    const int nthreads = resolve_threads(threads);

#pragma omp parallel num_threads(nthreads) if (count > 1)
    {
        std::vector<Candidate> pool;
#pragma omp for schedule(dynamic, 16)
        for (std::int64_t g = 0; g < count; ++g) {
            const auto idx = static_cast<std::size_t>(g);
            table.groups[idx] = match_reference(pilot, cfg, rows[idx / cols.size()], cols[idx % cols.size()], pool);
        }
    }
    return table;
}

std::vector<std::uint8_t> coverage_mask(const GroupTable& table) {
    std::vector<std::uint8_t> mask(table.width * table.height, 0);
    for (const auto& group : table.groups) {
        for (const auto& c : group) {
            for (std::size_t i = 0; i < table.n1; ++i) {
                std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>((c.row + i) * table.width + c.col), table.n1,
                            std::uint8_t{1});
            }
        }
    }
    return mask;
}

void save_group_table(const GroupTable& table, const std::filesystem::path& path) {
    std::vector<unsigned char> bytes(kTableMagic.begin(), kTableMagic.end());
    append_u32(bytes, static_cast<std::uint32_t>(table.n1));
    append_u32(bytes, static_cast<std::uint32_t>(table.n2));
    append_u32(bytes, static_cast<std::uint32_t>(table.groups.size()));
    for (const auto& group : table.groups) {
        append_u32(bytes, static_cast<std::uint32_t>(group.size()));
        for (const auto& c : group) {
            append_u32(bytes, c.row);
            append_u32(bytes, c.col);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("cannot write group table '" + path.string() + "'");
    }
}

GroupTable load_group_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open group table '" + path.string() + "'");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kTableMagic.size() || !std::equal(kTableMagic.begin(), kTableMagic.end(), bytes.begin())) {
        throw IoError("'" + path.string() + "' is not a group table");
    }
    ByteReader reader(std::move(bytes), path);
    reader.skip(kTableMagic.size());
    GroupTable table;
    table.n1 = reader.u32();
    table.n2 = reader.u32();
    const std::uint32_t count = reader.u32();
    table.groups.reserve(count);
    for (std::uint32_t g = 0; g < count; ++g) {
        GroupCoords group(reader.u32());
        for (auto& c : group) {
            c.row = reader.u32();
            c.col = reader.u32();
        }
        table.groups.push_back(std::move(group));
    }
    if (!reader.at_end()) {
        throw IoError("trailing bytes in group table '" + path.string() + "'");
    }
    return table;
}

}  // namespace nn3d
