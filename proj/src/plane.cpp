#include "nn3d/plane.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>

namespace nn3d {

namespace {

constexpr std::array<char, 8> kPlaneMagic = {'N', 'N', '3', 'D', 'P', 'F', '0', '1'};
constexpr std::array<unsigned char, 8> kPngMagic = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::string describe(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + describe(path));
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read error on " + describe(path));
    }
    return bytes;
}

std::uint32_t read_u32_le(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

void append_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
    }
}

Plane decode_plane_format(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    constexpr std::size_t header = kPlaneMagic.size() + 8;
    if (bytes.size() < header) {
        throw IoError("truncated plane header in " + describe(path));
    }
    const std::uint32_t width = read_u32_le(bytes.data() + 8);
    const std::uint32_t height = read_u32_le(bytes.data() + 12);
    if (width == 0 || height == 0) {
        throw IoError("zero dimension in " + describe(path));
    }
    const std::size_t count = std::size_t(width) * height;
    if (bytes.size() - header != count * 4) {
        throw IoError("plane payload of " + describe(path) + " has " + std::to_string(bytes.size() - header) +
                      " bytes, header declares " + std::to_string(count * 4));
    }
    std::vector<double> data(count);
    const unsigned char* p = bytes.data() + header;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        data[i] = static_cast<double>(std::bit_cast<float>(read_u32_le(p)));
    }
    Plane out(width, height, std::move(data));
    if (!out.all_finite()) {
        throw IoError("non-finite sample in " + describe(path));
    }
    return out;
}

// Minimal PGM tokenizer: whitespace and '#' comments between header fields.
class PgmHeader {
public:
    PgmHeader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
        : bytes_(bytes), path_(path) {}

    std::size_t next_uint() {
        skip_space();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
            throw IoError("malformed PGM header in " + describe(path_));
        }
        std::size_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > (1u << 30)) {
                throw IoError("PGM dimension too large in " + describe(path_));
            }
        }
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    void skip_space() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 2;
};

Plane decode_pgm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    const bool binary = bytes[1] == '5';
    PgmHeader header(bytes, path);
    const std::size_t width = header.next_uint();
    const std::size_t height = header.next_uint();
    const std::size_t maxval = header.next_uint();
    if (width == 0 || height == 0) {
        throw IoError("zero dimension in " + describe(path));
    }
    if (maxval == 0 || maxval > 255) {
        throw IoError("only 8-bit PGM is supported (maxval " + std::to_string(maxval) + ") in " + describe(path));
    }
    const std::size_t count = width * height;
    std::vector<double> data(count);
    if (binary) {
        header.advance(1);  // single whitespace byte after maxval
        if (bytes.size() < header.pos() || bytes.size() - header.pos() < count) {
            throw IoError("truncated PGM payload in " + describe(path));
        }
        for (std::size_t i = 0; i < count; ++i) {
            data[i] = bytes[header.pos() + i];
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t v = header.next_uint();
            if (v > maxval) {
                throw IoError("PGM sample exceeds maxval in " + describe(path));
            }
            data[i] = static_cast<double>(v);
        }
    }
    return Plane(width, height, std::move(data));
}

struct PngReadState {
    const std::vector<unsigned char>* bytes;
    std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->pos + length > state->bytes->size()) {
        png_error(png, "truncated PNG stream");
    }
    std::memcpy(out, state->bytes->data() + state->pos, length);
    state->pos += length;
}

Plane decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw IoError("libpng initialization failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialization failed");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> pixels;
    PngReadState state{&bytes, 0};

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG " + describe(path));
    }
    png_set_read_fn(png, &state, png_read_from_memory);
    png_read_info(png, info);

    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY || depth > 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("only 8-bit grayscale PNG is supported: " + describe(path));
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    png_read_update_info(png, info);

    pixels.resize(std::size_t(width) * height);
    rows.resize(height);
    for (std::size_t r = 0; r < height; ++r) {
        rows[r] = pixels.data() + r * width;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    std::vector<double> data(pixels.begin(), pixels.end());
    return Plane(width, height, std::move(data));
}

void write_all(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + describe(path));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write error on " + describe(path));
    }
}

}  // namespace

Plane::Plane(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), data_(width * height, fill) {
    if (width == 0 || height == 0) {
        throw std::invalid_argument("plane dimensions must be positive");
    }
}

Plane::Plane(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width == 0 || height == 0) {
        throw std::invalid_argument("plane dimensions must be positive");
    }
    if (data_.size() != width * height) {
        throw std::invalid_argument("plane data length " + std::to_string(data_.size()) + " != " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
}

bool Plane::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Plane load_plane(const std::filesystem::path& path) {
    const auto bytes = read_all(path);
    if (bytes.size() >= kPlaneMagic.size() && std::equal(kPlaneMagic.begin(), kPlaneMagic.end(), bytes.begin())) {
        return decode_plane_format(bytes, path);
    }
    if (bytes.size() >= kPngMagic.size() && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
        return decode_png(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
        return decode_pgm(bytes, path);
    }
    throw IoError("unsupported image format: " + describe(path));
}

std::uint8_t quantize_u8(double v) noexcept {
    if (!(v > 0.0)) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::round(v));
}

void save_plane(const Plane& p, const std::filesystem::path& path, PlaneFormat format) {
    std::vector<unsigned char> bytes;
    if (format == PlaneFormat::plane) {
        bytes.reserve(16 + p.size() * 4);
        bytes.insert(bytes.end(), kPlaneMagic.begin(), kPlaneMagic.end());
        append_u32_le(bytes, static_cast<std::uint32_t>(p.width()));
        append_u32_le(bytes, static_cast<std::uint32_t>(p.height()));
        for (double v : p.data()) {
            append_u32_le(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    } else {
        const std::string header = "P5\n" + std::to_string(p.width()) + " " + std::to_string(p.height()) + "\n255\n";
        bytes.reserve(header.size() + p.size());
        bytes.insert(bytes.end(), header.begin(), header.end());
        for (double v : p.data()) {
            bytes.push_back(quantize_u8(v));
        }
    }
    write_all(path, bytes);
}

bool block_in_bounds(const Plane& p, BlockCoord c, std::size_t n1) noexcept {
    return n1 >= 1 && n1 <= p.height() && n1 <= p.width() && c.row <= p.height() - n1 && c.col <= p.width() - n1;
}

std::vector<double> extract_block(const Plane& p, BlockCoord c, std::size_t n1) {
    if (!block_in_bounds(p, c, n1)) {
        std::ostringstream msg;
        msg << "block (" << c.row << ", " << c.col << ") of size " << n1 << " exceeds " << p.width() << "x"
            << p.height() << " plane";
        throw std::out_of_range(msg.str());
    }
    std::vector<double> out(n1 * n1);
    copy_block(p, c, n1, out);
    return out;
}

void copy_block(const Plane& p, BlockCoord c, std::size_t n1, std::span<double> out) noexcept {
    for (std::size_t i = 0; i < n1; ++i) {
        const auto src = p.row(c.row + i).subspan(c.col, n1);
        std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n1));
    }
}

double min_value(const Plane& p) noexcept {
    return p.empty() ? 0.0 : *std::min_element(p.data().begin(), p.data().end());
}

double max_value(const Plane& p) noexcept {
    return p.empty() ? 0.0 : *std::max_element(p.data().begin(), p.data().end());
}

}  // namespace nn3d
