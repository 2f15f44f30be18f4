#include "nn3d/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "nn3d/block_matching.hpp"
#include "nn3d/nlf.hpp"
#include "nn3d/noise.hpp"

namespace nn3d {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_number(double v, const char* fmt) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string dataset_name(const std::filesystem::path& directory) {
    auto name = directory.lexically_normal().filename().string();
    if (name.empty()) name = directory.lexically_normal().parent_path().filename().string();
    return name.empty() ? "dataset" : name;
}

BenchRow run_method(const std::string& method, const Plane& clean, const Plane& noisy, double sigma,
                    const BenchOptions& options, const Denoiser& denoiser) {
    BenchRow row;
    row.sigma = sigma;
    row.method = method;
    const auto start = Clock::now();

    if (method == "noisy") {
        row.psnr = psnr(clean, noisy);
    } else if (method == "cnnf-only") {
        const auto match = level_match(denoiser.spec().grid, sigma);
        Plane input = noisy;
        if (match.alpha != 1.0) {
            for (auto& v : input.data()) v *= match.alpha;
        }
        Plane out = denoiser.denoise({input, match.sigma_eff});
        if (match.alpha != 1.0) {
            for (auto& v : out.data()) v /= match.alpha;
        }
        row.cnnf_seconds = seconds_since(start);
        row.psnr = psnr(clean, out);
    } else if (method == "nlf-only") {
        auto t = Clock::now();
        const auto table = build_group_table(noisy, options.run.match, options.run.threads);
        row.bm_seconds = seconds_since(t);
        t = Clock::now();
        const Plane out = apply_nlf(noisy, table, sigma / 4.0, options.run.threads);
        row.nlf_seconds = seconds_since(t);
        row.psnr = psnr(clean, out);
    } else if (method == "nn3d") {
        RunConfig cfg = options.run;
        cfg.sigma = sigma;
        const auto result = run(noisy, cfg, denoiser);
        for (const auto& rec : result.trace.iterations) {
            row.cnnf_seconds += rec.cnnf_seconds;
            row.bm_seconds += rec.bm_seconds;
            row.nlf_seconds += rec.nlf_seconds;
        }
        row.psnr = psnr(clean, result.estimate);
    } else {
        throw std::invalid_argument("unknown bench method '" + method + "'");
    }
    row.total_seconds = seconds_since(start);
    return row;
}

// 8-bit fixture from a generator; values are quantized so files round-trip exactly.
template <typename F>
Plane generate(std::size_t n, F&& f) {
    Plane p(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            p(r, c) = quantize_u8(f(static_cast<double>(r), static_cast<double>(c)));
        }
    }
    return p;
}

Plane random_texture(std::size_t n, std::uint64_t seed) {
    Plane field(n, n);
    for (std::size_t i = 0; i < field.size(); ++i) field.data()[i] = gaussian_at(seed, i);
    // 3x3 box blur with wrap-around, then stretch to a mid-gray range
    Plane out(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (std::size_t dr = 0; dr < 3; ++dr) {
                for (std::size_t dc = 0; dc < 3; ++dc) acc += field((r + n + dr - 1) % n, (c + n + dc - 1) % n);
            }
            out(r, c) = quantize_u8(128.0 + 45.0 * acc / 3.0);
        }
    }
    return out;
}

}  // namespace

std::uint64_t image_seed(std::uint64_t master_seed, const std::string& image_name) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : image_name) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return splitmix64(master_seed ^ splitmix64(h));
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& directory) {
    if (!std::filesystem::is_directory(directory)) {
        throw IoError("not a directory: '" + directory.string() + "'");
    }
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".png" || ext == ".npf") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return out;
}

BenchReport run_bench(const BenchOptions& options) {
    if (options.sigmas.empty()) throw std::invalid_argument("bench: no sigma values");
    if (options.methods.empty()) throw std::invalid_argument("bench: no methods");
    for (const auto& m : options.methods) {
        if (std::find(kBenchMethods.begin(), kBenchMethods.end(), m) == kBenchMethods.end()) {
            throw std::invalid_argument("unknown bench method '" + m + "'");
        }
    }
    const auto images = list_images(options.directory);
    if (images.empty()) throw std::invalid_argument("no images in '" + options.directory.string() + "'");

    const auto denoiser = make_denoiser(options.denoiser);
    const auto dataset = dataset_name(options.directory);

    BenchReport report;
    for (const auto& path : images) {
        const Plane clean = load_plane(path);
        const auto name = path.filename().string();
        const auto seed = image_seed(options.seed, name);
        for (double sigma : options.sigmas) {
            const Plane noisy = add_awgn(clean, {sigma, seed});
            for (const auto& method : options.methods) {
                BenchRow row = run_method(method, clean, noisy, sigma, options, *denoiser);
                row.dataset = dataset;
                row.image = name;
                report.rows.push_back(std::move(row));
            }
        }
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.image, a.sigma, a.method) < std::tie(b.image, b.sigma, b.method);
    });
    return report;
}

std::vector<BenchSummary> summarize(const BenchReport& report) {
    std::map<std::tuple<std::string, double, std::string>, std::pair<std::size_t, double>> acc;
    for (const auto& row : report.rows) {
        auto& slot = acc[{row.dataset, row.sigma, row.method}];
        ++slot.first;
        slot.second += row.psnr;
    }
    std::vector<BenchSummary> out;
    for (const auto& [key, value] : acc) {
        out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value.first,
                       value.second / static_cast<double>(value.first)});
    }
    return out;
}

void write_report_csv(const BenchReport& report, std::ostream& out) {
    out << "# nn3d-bench v1\n";
    out << "dataset,image,sigma,method,psnr_db\n";
    for (const auto& row : report.rows) {
        out << row.dataset << ',' << row.image << ',' << format_number(row.sigma, "%g") << ',' << row.method << ','
            << format_number(row.psnr, "%.6f") << '\n';
    }
}

void write_timing_csv(const BenchReport& report, std::ostream& out) {
    out << "# nn3d-bench-timing v1\n";
    out << "dataset,image,sigma,method,psnr_db,cnnf_s,bm_s,nlf_s,total_s\n";
    for (const auto& row : report.rows) {
        out << row.dataset << ',' << row.image << ',' << format_number(row.sigma, "%g") << ',' << row.method << ','
            << format_number(row.psnr, "%.6f") << ',' << format_number(row.cnnf_seconds, "%.6f") << ','
            << format_number(row.bm_seconds, "%.6f") << ',' << format_number(row.nlf_seconds, "%.6f") << ','
            << format_number(row.total_seconds, "%.6f") << '\n';
    }
}

void write_summary_csv(const std::vector<BenchSummary>& summary, std::ostream& out) {
    out << "# nn3d-bench-summary v1\n";
    out << "dataset,sigma,method,images,mean_psnr_db\n";
    for (const auto& s : summary) {
        out << s.dataset << ',' << format_number(s.sigma, "%g") << ',' << s.method << ',' << s.images << ','
            << format_number(s.mean_psnr, "%.6f") << '\n';
    }
}

std::vector<std::filesystem::path> make_fixtures(const std::filesystem::path& directory, std::size_t n) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create '" + directory.string() + "': " + ec.message());

    const double last = static_cast<double>(n - 1);
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<std::pair<std::string, Plane>> fixtures;
    fixtures.emplace_back("constant_064", generate(n, [](double, double) { return 64.0; }));
    fixtures.emplace_back("constant_192", generate(n, [](double, double) { return 192.0; }));
    fixtures.emplace_back("ramp_horizontal", generate(n, [&](double, double c) { return 255.0 * c / last; }));
    fixtures.emplace_back("ramp_diagonal", generate(n, [&](double r, double c) { return 255.0 * (r + c) / (2 * last); }));
    fixtures.emplace_back("stripes_square_p7",
                          generate(n, [](double, double c) { return std::fmod(c, 7.0) < 3.0 ? 60.0 : 190.0; }));
    fixtures.emplace_back("stripes_sine_p12",
                          generate(n, [&](double, double c) { return 128.0 + 80.0 * std::sin(two_pi * c / 12.0); }));
    fixtures.emplace_back("stripes_triangle_p10", generate(n, [](double, double c) {
                              const double t = std::fmod(c, 10.0) / 10.0;
                              return 40.0 + 180.0 * (t < 0.5 ? 2.0 * t : 2.0 - 2.0 * t);
                          }));
    fixtures.emplace_back("checker_p8", generate(n, [](double r, double c) {
                              return (static_cast<int>(r) / 4 + static_cast<int>(c) / 4) % 2 ? 200.0 : 50.0;
                          }));
    fixtures.emplace_back("checker_p16", generate(n, [](double r, double c) {
                              return (static_cast<int>(r) / 8 + static_cast<int>(c) / 8) % 2 ? 170.0 : 80.0;
                          }));
    fixtures.emplace_back("texture_random_1", random_texture(n, 1));
    fixtures.emplace_back("texture_random_2", random_texture(n, 2));

    std::vector<std::filesystem::path> written;
    for (const auto& [name, plane] : fixtures) {
        const auto path = directory / (name + ".pgm");
        save_plane(plane, path, PlaneFormat::pgm8);
        written.push_back(path);
    }
    return written;
}

}  // namespace nn3d
