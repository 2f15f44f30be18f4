#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nn3d/block_matching.hpp"
#include "nn3d/denoisers.hpp"
#include "nn3d/plane.hpp"

namespace nn3d {

enum class PilotSource { first_cnnf_output, noisy_input, external_file };

/// Paper mode requires strictly positive, strictly decreasing thresholds;
/// lab mode accepts any nonnegative threshold schedule.
enum class ScheduleMode { paper, lab };

struct RunConfig {
    double sigma = 0.0;
    std::size_t iterations = 2;
    std::vector<double> lambda_schedule;  ///< empty: lambda_k = 1/k
    std::vector<double> tau_schedule;     ///< empty: tau_k = sigma * lambda_k / 4
    MatchConfig match;
    PilotSource bm_pilot = PilotSource::first_cnnf_output;
    std::filesystem::path pilot_file;  ///< used by PilotSource::external_file
    ScheduleMode mode = ScheduleMode::paper;
    bool keep_snapshots = false;
    int threads = 0;

    double lambda(std::size_t k) const;  ///< 1-based
    double tau(std::size_t k) const;     ///< 1-based

    /// Rejects invalid schedules before any computation.
    void validate() const;
};

/// Effective denoiser noise level and the input scaling that matches it.
struct LevelMatch {
    double sigma_eff = 0.0;
    double alpha = 1.0;
};

LevelMatch level_match(const SigmaGrid& grid, double target);

struct IterationRecord {
    std::size_t k = 0;
    double lambda = 0.0;
    double target_sigma = 0.0;  ///< lambda_k * sigma
    double sigma_eff = 0.0;
    double alpha = 1.0;
    double tau = 0.0;
    double scaled_min = 0.0;  ///< range of alpha_k * zbar_k fed to the denoiser
    double scaled_max = 0.0;
    double cnnf_seconds = 0.0;
    double bm_seconds = 0.0;  ///< nonzero only in the iteration that builds the table
    double nlf_seconds = 0.0;
    std::optional<Plane> combined;  ///< zbar_k, when snapshots are kept
    std::optional<Plane> denoised;  ///< ytilde_k
    std::optional<Plane> estimate;  ///< yhat_k
};

struct IterationTrace {
    std::vector<IterationRecord> iterations;
    std::size_t tables_built = 0;
};

/// One JSON object per iteration, newline-terminated.
void write_trace_jsonl(const IterationTrace& trace, std::ostream& out);

struct RunResult {
    Plane estimate;
    IterationTrace trace;
    GroupTable table;
};

/// Plane used for block matching.
Plane bm_pilot_plane(const Plane& z, const Plane& first_denoised, const RunConfig& cfg);

/// The iterative cascade: convex combination, level-matched denoiser, nonlocal filter.
RunResult run(const Plane& z, const RunConfig& cfg, const Denoiser& denoiser);

/// Flat `key = value` configuration (blank lines and '#' comments ignored).
/// Keys: sigma, iterations, lambda, tau, n1, n2, search_radius, ref_stride,
/// bm_pilot, pilot_file, mode, threads, denoiser, grid, command, timeout,
/// workdir, dct8_threshold, dct8_stride.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap read_config_file(const std::filesystem::path& path);

/// Applies recognized keys onto cfg/options; throws std::invalid_argument on unknown keys or bad values.
void apply_config(const ConfigMap& values, RunConfig& cfg, DenoiserOptions& options);

std::vector<double> parse_number_list(const std::string& text);
PilotSource parse_pilot(const std::string& text);
std::string to_string(PilotSource pilot);

}  // namespace nn3d
