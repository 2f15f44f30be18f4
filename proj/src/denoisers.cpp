#include "nn3d/denoisers.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/file.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "nn3d/parallel.hpp"

namespace nn3d {

namespace {

constexpr std::size_t kDctSize = 8;

using DctMatrix = std::array<std::array<double, kDctSize>, kDctSize>;

DctMatrix make_dct_matrix() {
    DctMatrix c{};
    for (std::size_t u = 0; u < kDctSize; ++u) {
        const double scale = u == 0 ? std::sqrt(1.0 / kDctSize) : std::sqrt(2.0 / kDctSize);
        for (std::size_t x = 0; x < kDctSize; ++x) {
            c[u][x] = scale * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / (2.0 * kDctSize));
        }
    }
    return c;
}

const DctMatrix& dct_matrix() {
    static const DctMatrix c = make_dct_matrix();
    return c;
}

// Half-sample symmetric extension: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
std::size_t reflect(std::ptrdiff_t i, std::size_t n) noexcept {
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

using Block8 = std::array<double, kDctSize * kDctSize>;

// out = C * in * C^T
void dct2_forward(const Block8& in, Block8& out) noexcept {
    const auto& c = dct_matrix();
    Block8 tmp{};
    for (std::size_t u = 0; u < kDctSize; ++u) {
        for (std::size_t x = 0; x < kDctSize; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kDctSize; ++k) acc += c[u][k] * in[k * kDctSize + x];
            tmp[u * kDctSize + x] = acc;
        }
    }
    for (std::size_t u = 0; u < kDctSize; ++u) {
        for (std::size_t v = 0; v < kDctSize; ++v) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kDctSize; ++k) acc += tmp[u * kDctSize + k] * c[v][k];
            out[u * kDctSize + v] = acc;
        }
    }
}

// out = C^T * in * C
void dct2_inverse(const Block8& in, Block8& out) noexcept {
    const auto& c = dct_matrix();
    Block8 tmp{};
    for (std::size_t x = 0; x < kDctSize; ++x) {
        for (std::size_t v = 0; v < kDctSize; ++v) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kDctSize; ++k) acc += c[k][x] * in[k * kDctSize + v];
            tmp[x * kDctSize + v] = acc;
        }
    }
    for (std::size_t x = 0; x < kDctSize; ++x) {
        for (std::size_t y = 0; y < kDctSize; ++y) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kDctSize; ++k) acc += tmp[x * kDctSize + k] * c[k][y];
            out[x * kDctSize + y] = acc;
        }
    }
}

std::vector<std::ptrdiff_t> patch_starts(std::size_t extent, std::size_t stride) {
    std::vector<std::ptrdiff_t> out;
    const auto offset = static_cast<std::ptrdiff_t>(kDctSize - stride);
    for (std::ptrdiff_t s = -offset; s < static_cast<std::ptrdiff_t>(extent); s += static_cast<std::ptrdiff_t>(stride)) {
        out.push_back(s);
    }
    return out;
}

class IdentityDenoiser final : public Denoiser {
public:
    IdentityDenoiser()
        : Denoiser({"identity", ContinuousGrid{0.0, std::numeric_limits<double>::infinity()}}) {}

protected:
    Plane run(const Plane& input, double) const override { return input; }
};

class GaussDenoiser final : public Denoiser {
public:
    GaussDenoiser() : Denoiser({"gauss", ContinuousGrid{0.0, std::numeric_limits<double>::infinity()}}) {}

protected:
    Plane run(const Plane& input, double sigma) const override { return builtin_gauss(input, sigma); }
};

class Dct8Denoiser final : public Denoiser {
public:
    Dct8Denoiser(SigmaGrid grid, Dct8Params params, int threads)
        : Denoiser({"dct8", std::move(grid)}), params_(params), threads_(threads) {}

protected:
    Plane run(const Plane& input, double sigma) const override {
        return builtin_dct8(input, sigma, params_, threads_);
    }

private:
    Dct8Params params_;
    int threads_;
};

class ExternalDenoiser final : public Denoiser {
public:
    ExternalDenoiser(SigmaGrid grid, ExternalCommand command, std::filesystem::path workdir)
        : Denoiser({"external", std::move(grid)}), command_(std::move(command)), workdir_(std::move(workdir)) {}

protected:
    Plane run(const Plane& input, double sigma) const override {
        return external_denoise(command_, {input, sigma}, workdir_);
    }

private:
    ExternalCommand command_;
    std::filesystem::path workdir_;
};

// Advisory lock on <workdir>/.nn3d.lock; serializes subprocesses sharing a workdir.
class WorkdirLock {
public:
    explicit WorkdirLock(const std::filesystem::path& workdir) {
        const auto path = workdir / ".nn3d.lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) {
            if (fd_ >= 0) ::close(fd_);
            throw DenoiserError("cannot lock workdir '" + workdir.string() + "': " + std::strerror(errno));
        }
    }
    ~WorkdirLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    int fd_ = -1;
};

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void DenoiserSpec::validate() const {
    if (const auto* d = std::get_if<DiscreteGrid>(&grid)) {
        if (d->values.empty()) throw std::invalid_argument("denoiser '" + name + "': empty sigma grid");
        for (std::size_t i = 1; i < d->values.size(); ++i) {
            if (!(d->values[i] > d->values[i - 1])) {
                throw std::invalid_argument("denoiser '" + name + "': sigma grid must be strictly increasing");
            }
        }
        if (!(d->values.front() >= 0.0)) {
            throw std::invalid_argument("denoiser '" + name + "': negative sigma in grid");
        }
    } else {
        const auto& c = std::get<ContinuousGrid>(grid);
        if (!(c.lo < c.hi)) throw std::invalid_argument("denoiser '" + name + "': continuous grid needs lo < hi");
    }
}

bool DenoiserSpec::supports(double sigma) const noexcept {
    if (const auto* d = std::get_if<DiscreteGrid>(&grid)) {
        return std::find(d->values.begin(), d->values.end(), sigma) != d->values.end();
    }
    const auto& c = std::get<ContinuousGrid>(grid);
    return sigma >= c.lo && sigma <= c.hi;
}

SigmaGrid grid_preset(const std::string& name) {
    if (name == "dncnn") {
        DiscreteGrid g;
        for (int s = 5; s <= 75; s += 5) g.values.push_back(s);
        return g;
    }
    if (name == "wdncnn") return DiscreteGrid{{15.0, 30.0, 50.0}};
    if (name == "ffdnet") return ContinuousGrid{0.0, 75.0};
    throw std::invalid_argument("unknown grid preset '" + name + "' (expected dncnn, wdncnn or ffdnet)");
}

Denoiser::Denoiser(DenoiserSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Plane Denoiser::denoise(const DenoiseRequest& req) const {
    if (!(req.sigma >= 0.0)) {
        throw std::invalid_argument("denoise: sigma must be nonnegative");
    }
    if (!spec_.supports(req.sigma)) {
        throw std::invalid_argument("denoiser '" + spec_.name + "' has no model for sigma " + format_sigma(req.sigma));
    }
    Plane out = run(req.input, req.sigma);
    if (!out.same_shape(req.input)) {
        throw DenoiserError("denoiser '" + spec_.name + "' changed the image dimensions");
    }
    if (!out.all_finite()) {
        throw DenoiserError("denoiser '" + spec_.name + "' produced non-finite samples");
    }
    return out;
}

Plane builtin_dct8(const Plane& input, double sigma, const Dct8Params& params, int threads) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("dct8: sigma must be nonnegative");
    if (params.stride < 1 || params.stride > kDctSize) throw std::invalid_argument("dct8: stride must lie in [1, 8]");

    const std::size_t width = input.width();
    const std::size_t height = input.height();
    const auto row_starts = patch_starts(height, params.stride);
    const auto col_starts = patch_starts(width, params.stride);
    const std::size_t prows = row_starts.size();
    const std::size_t pcols = col_starts.size();
    const double threshold = params.threshold_multiplier * sigma;
    const int nthreads = resolve_threads(threads);

    std::vector<Block8> patches(prows * pcols);
    const auto npr = static_cast<std::int64_t>(prows);
#pragma omp parallel for num_threads(nthreads) schedule(static)
    for (std::int64_t pr = 0; pr < npr; ++pr) {
        Block8 block{};
        Block8 coeffs{};
        for (std::size_t pc = 0; pc < pcols; ++pc) {
            for (std::size_t i = 0; i < kDctSize; ++i) {
                const std::size_t r = reflect(row_starts[pr] + static_cast<std::ptrdiff_t>(i), height);
                for (std::size_t j = 0; j < kDctSize; ++j) {
                    block[i * kDctSize + j] = input(r, reflect(col_starts[pc] + static_cast<std::ptrdiff_t>(j), width));
                }
            }
            dct2_forward(block, coeffs);
            for (std::size_t k = 1; k < coeffs.size(); ++k) {
                if (std::abs(coeffs[k]) <= threshold) coeffs[k] = 0.0;
            }
            dct2_inverse(coeffs, patches[static_cast<std::size_t>(pr) * pcols + pc]);
        }
    }

    // Gather in patch raster order so the sum per pixel does not depend on threading.
    const auto stride = static_cast<std::ptrdiff_t>(params.stride);
    const auto offset = -row_starts.front();
    const auto span = static_cast<std::ptrdiff_t>(kDctSize);
    auto covering = [&](std::ptrdiff_t x, std::size_t count) {
        // patches p with start(p) = p*stride - offset in (x - 8, x]
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, (x - span + 1 + offset + stride - 1) / stride);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(count) - 1, (x + offset) / stride);
        return std::pair{lo, hi};
    };
    Plane out(width, height);
    const auto nrows = static_cast<std::int64_t>(height);
#pragma omp parallel for num_threads(nthreads) schedule(static)
    for (std::int64_t r = 0; r < nrows; ++r) {
        const auto [pr_lo, pr_hi] = covering(r, prows);
        for (std::size_t c = 0; c < width; ++c) {
            const auto [pc_lo, pc_hi] = covering(static_cast<std::ptrdiff_t>(c), pcols);
            double sum = 0.0;
            double count = 0.0;
            for (std::ptrdiff_t pr = pr_lo; pr <= pr_hi; ++pr) {
                const auto di = static_cast<std::size_t>(r - row_starts[static_cast<std::size_t>(pr)]);
                for (std::ptrdiff_t pc = pc_lo; pc <= pc_hi; ++pc) {
                    const auto dj = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) - col_starts[static_cast<std::size_t>(pc)]);
                    sum += patches[static_cast<std::size_t>(pr) * pcols + static_cast<std::size_t>(pc)][di * kDctSize + dj];
                    count += 1.0;
                }
            }
            out(static_cast<std::size_t>(r), c) = sum / count;
        }
    }
    return out;
}

Plane builtin_gauss(const Plane& input, double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("gauss: sigma must be nonnegative");
    const double spatial = sigma / 20.0;
    if (spatial < 1e-3) return input;

    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * spatial));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * static_cast<double>(k * k) / (spatial * spatial));
        kernel[static_cast<std::size_t>(k + radius)] = v;
        total += v;
    }
    for (auto& v : kernel) v /= total;

    const std::size_t w = input.width();
    const std::size_t h = input.height();
    Plane tmp(w, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] * input(r, reflect(static_cast<std::ptrdiff_t>(c) + k, w));
            }
            tmp(r, c) = acc;
        }
    }
    Plane out(w, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] * tmp(reflect(static_cast<std::ptrdiff_t>(r) + k, h), c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

ExternalCommand ExternalCommand::parse(const std::string& command_line) {
    ExternalCommand cmd;
    std::istringstream in(command_line);
    std::string token;
    while (in >> token) cmd.argv.push_back(token);
    if (cmd.argv.empty()) throw std::invalid_argument("empty external denoiser command");
    return cmd;
}

std::string format_sigma(double sigma) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.6g", sigma);
    return buf.data();
}

std::filesystem::path default_workdir() {
    if (const char* env = std::getenv("NN3D_WORKDIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return std::filesystem::temp_directory_path() / ("nn3d-" + std::to_string(::getpid()));
}

Plane external_denoise(const ExternalCommand& command, const DenoiseRequest& req,
                       const std::filesystem::path& workdir) {
    if (command.argv.empty()) throw std::invalid_argument("empty external denoiser command");
    std::filesystem::create_directories(workdir);
    WorkdirLock lock(workdir);

    const auto in_path = workdir / "in.npf";
    const auto out_path = workdir / "out.npf";
    const auto log_path = workdir / "stderr.log";
    std::filesystem::remove(out_path);
    save_plane(req.input, in_path, PlaneFormat::plane);

    std::vector<std::string> args = command.argv;
    args.push_back(in_path.string());
    args.push_back(out_path.string());
    args.push_back(format_sigma(req.sigma));
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    const int log_fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (log_fd < 0) throw DenoiserError("cannot create '" + log_path.string() + "'");

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(log_fd);
        throw DenoiserError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(log_fd, STDERR_FILENO);
        const int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) ::dup2(devnull, STDOUT_FILENO);
        ::execvp(argv[0], argv.data());
        const std::string msg = std::string("exec failed: ") + std::strerror(errno) + "\n";
        [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg.data(), msg.size());
        ::_exit(127);
    }
    ::close(log_fd);

    const auto deadline = std::chrono::steady_clock::now() + command.timeout;
    int status = 0;
    for (;;) {
        const pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0 && errno != EINTR) throw DenoiserError(std::string("waitpid failed: ") + std::strerror(errno));
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            throw DenoiserError("external denoiser '" + command.argv.front() + "' timed out after " +
                                std::to_string(command.timeout.count()) + " ms");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }

    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw DenoiserError("external denoiser '" + command.argv.front() + "' failed (exit " + std::to_string(code) +
                            "): " + read_text(log_path));
    }

    Plane out;
    try {
        out = load_plane(out_path);
    } catch (const IoError& e) {
        throw DenoiserError(std::string("external denoiser output unreadable: ") + e.what());
    }
    if (!out.same_shape(req.input)) {
        throw DenoiserError("external denoiser returned " + std::to_string(out.width()) + "x" +
                            std::to_string(out.height()) + ", expected " + std::to_string(req.input.width()) + "x" +
                            std::to_string(req.input.height()));
    }
    return out;
}

std::unique_ptr<Denoiser> make_denoiser(const DenoiserOptions& options) {
    if (options.name == "identity") return std::make_unique<IdentityDenoiser>();
    if (options.name == "gauss") return std::make_unique<GaussDenoiser>();
    if (options.name == "dct8") {
        SigmaGrid grid = options.grid.empty() ? SigmaGrid{ContinuousGrid{0.0, std::numeric_limits<double>::infinity()}}
                                              : grid_preset(options.grid);
        return std::make_unique<Dct8Denoiser>(std::move(grid), options.dct8, options.threads);
    }
    if (options.name == "external") {
        auto command = ExternalCommand::parse(options.command);
        command.timeout = options.timeout;
        SigmaGrid grid = options.grid.empty() ? SigmaGrid{ContinuousGrid{0.0, std::numeric_limits<double>::infinity()}}
                                              : grid_preset(options.grid);
        return std::make_unique<ExternalDenoiser>(std::move(grid), std::move(command),
                                                  options.workdir.empty() ? default_workdir() : options.workdir);
    }
    throw std::invalid_argument("unknown denoiser '" + options.name + "' (expected identity, gauss, dct8, external)");
}

}  // namespace nn3d
