#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nn3d/plane.hpp"

namespace nn3d {

/// Denoiser accepts any sigma in [lo, hi].
struct ContinuousGrid {
    double lo = 0.0;
    double hi = 0.0;
};

/// Denoiser only has models for these sigmas (strictly increasing).
struct DiscreteGrid {
    std::vector<double> values;
};

using SigmaGrid = std::variant<ContinuousGrid, DiscreteGrid>;

struct DenoiserSpec {
    std::string name;
    SigmaGrid grid;

    /// Throws std::invalid_argument for an empty/unsorted discrete grid or lo >= hi.
    void validate() const;
    bool supports(double sigma) const noexcept;
};

/// Grids of the published CNN denoisers: "dncnn" (5:5:75), "wdncnn" {15,30,50}, "ffdnet" [0,75].
SigmaGrid grid_preset(const std::string& name);

struct DenoiseRequest {
    const Plane& input;
    double sigma = 0.0;
};

class DenoiserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The pluggable local filter of the cascade.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    const DenoiserSpec& spec() const noexcept { return spec_; }

    /// Checks the request against the grid and the result for shape and finiteness.
    Plane denoise(const DenoiseRequest& req) const;

protected:
    explicit Denoiser(DenoiserSpec spec);

    virtual Plane run(const Plane& input, double sigma) const = 0;

private:
    DenoiserSpec spec_;
};

struct Dct8Params {
    double threshold_multiplier = 2.7;
    std::size_t stride = 4;
};

/// Sliding 8x8 DCT hard thresholding (DC kept) with uniform overlap averaging
/// over a symmetrically extended image.
Plane builtin_dct8(const Plane& input, double sigma, const Dct8Params& params = {}, int threads = 0);

/// Separable Gaussian blur with spatial std sigma / 20 px, symmetric boundary.
Plane builtin_gauss(const Plane& input, double sigma);

struct ExternalCommand {
    std::vector<std::string> argv;
    std::chrono::milliseconds timeout{std::chrono::seconds(300)};

    /// Whitespace-separated program and leading arguments.
    static ExternalCommand parse(const std::string& command_line);
};

/// Runs `<argv...> in.npf out.npf <sigma>` inside workdir and reads back out.npf.
Plane external_denoise(const ExternalCommand& command, const DenoiseRequest& req,
                       const std::filesystem::path& workdir);

/// Default workdir: $NN3D_WORKDIR, else <tmp>/nn3d-<pid>.
std::filesystem::path default_workdir();

/// Formats sigma for the external protocol (6 significant digits).
std::string format_sigma(double sigma);

struct DenoiserOptions {
    std::string name = "dct8";   ///< identity | gauss | dct8 | external
    std::string grid;            ///< preset name or empty (built-in default)
    std::string command;         ///< external only
    std::chrono::milliseconds timeout{std::chrono::seconds(300)};
    std::filesystem::path workdir;  ///< external only; empty = default_workdir()
    Dct8Params dct8;
    int threads = 0;
};

std::unique_ptr<Denoiser> make_denoiser(const DenoiserOptions& options);

}  // namespace nn3d
