#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nn3d/denoisers.hpp"
#include "nn3d/framework.hpp"
#include "nn3d/plane.hpp"

namespace nn3d {

/// Methods compared by the benchmark.
///   noisy      the noisy input itself
///   cnnf-only  one level-matched denoiser call, no nonlocal stage
///   nlf-only   nonlocal filter on z with tau = sigma / 4 and a table matched on z
///   nn3d       the full cascade
inline const std::vector<std::string> kBenchMethods = {"noisy", "cnnf-only", "nlf-only", "nn3d"};

struct BenchOptions {
    std::filesystem::path directory;
    std::vector<double> sigmas;
    std::uint64_t seed = 0;
    std::vector<std::string> methods = {"cnnf-only", "nn3d"};
    RunConfig run;  ///< sigma is overridden per sweep entry
    DenoiserOptions denoiser;
};

struct BenchRow {
    std::string dataset;
    std::string image;
    double sigma = 0.0;
    std::string method;
    double psnr = 0.0;
    double cnnf_seconds = 0.0;
    double bm_seconds = 0.0;
    double nlf_seconds = 0.0;
    double total_seconds = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;  ///< sorted by (image, sigma, method)
};

struct BenchSummary {
    std::string dataset;
    double sigma = 0.0;
    std::string method;
    std::size_t images = 0;
    double mean_psnr = 0.0;
};

/// Noise seed of one image: independent of directory listing order.
std::uint64_t image_seed(std::uint64_t master_seed, const std::string& image_name);

/// Sorted list of loadable images (.pgm, .png, .npf) in a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& directory);

BenchReport run_bench(const BenchOptions& options);

std::vector<BenchSummary> summarize(const BenchReport& report);

/// PSNR table without timings; byte-identical across reruns.
void write_report_csv(const BenchReport& report, std::ostream& out);
/// Same rows with the per-stage wall-clock columns.
void write_timing_csv(const BenchReport& report, std::ostream& out);
void write_summary_csv(const std::vector<BenchSummary>& summary, std::ostream& out);

/// Deterministic 128x128 test corpus written as PGM. Returns the written paths.
std::vector<std::filesystem::path> make_fixtures(const std::filesystem::path& directory, std::size_t size = 128);

}  // namespace nn3d
