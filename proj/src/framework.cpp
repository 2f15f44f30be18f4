#include "nn3d/framework.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nn3d/nlf.hpp"

namespace nn3d {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw std::invalid_argument("bad numeric value for '" + key + "': '" + text + "'");
    }
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_double(key, text);
    if (v < 0 || v != std::floor(v)) {
        throw std::invalid_argument("'" + key + "' must be a nonnegative integer, got '" + text + "'");
    }
    return static_cast<std::size_t>(v);
}

Plane scaled(const Plane& p, double factor) {
    if (factor == 1.0) return p;
    Plane out = p;
    for (auto& v : out.data()) v *= factor;
    return out;
}

}  // namespace

double RunConfig::lambda(std::size_t k) const {
    if (!lambda_schedule.empty()) return lambda_schedule.at(k - 1);
    return 1.0 / static_cast<double>(k);
}

double RunConfig::tau(std::size_t k) const {
    if (!tau_schedule.empty()) return tau_schedule.at(k - 1);
    return sigma * lambda(k) / 4.0;
}

void RunConfig::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (!lambda_schedule.empty() && lambda_schedule.size() != iterations) {
        throw std::invalid_argument("lambda schedule has " + std::to_string(lambda_schedule.size()) +
                                    " entries for " + std::to_string(iterations) + " iterations");
    }
    if (!tau_schedule.empty() && tau_schedule.size() != iterations) {
        throw std::invalid_argument("tau schedule has " + std::to_string(tau_schedule.size()) + " entries for " +
                                    std::to_string(iterations) + " iterations");
    }
    if (lambda(1) != 1.0) throw std::invalid_argument("lambda_1 must equal 1");
    for (std::size_t k = 1; k <= iterations; ++k) {
        if (!(lambda(k) > 0.0)) throw std::invalid_argument("lambda schedule must be positive");
        if (k > 1 && !(lambda(k) < lambda(k - 1))) {
            throw std::invalid_argument("lambda schedule must be strictly decreasing");
        }
        const double t = tau(k);
        if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("tau schedule must be nonnegative");
        if (mode == ScheduleMode::paper) {
            if (!(t > 0.0)) throw std::invalid_argument("tau schedule must be positive (use lab mode to override)");
            if (k > 1 && !(t < tau(k - 1))) {
                throw std::invalid_argument("tau schedule must be strictly decreasing (use lab mode to override)");
            }
        }
    }
    if (bm_pilot == PilotSource::external_file && pilot_file.empty()) {
        throw std::invalid_argument("bm_pilot = external_file requires pilot_file");
    }
}

LevelMatch level_match(const SigmaGrid& grid, double target) {
    if (!(target > 0.0)) throw std::invalid_argument("level_match: target must be positive");
    double eff = 0.0;
    if (const auto* d = std::get_if<DiscreteGrid>(&grid)) {
        if (d->values.empty()) throw std::invalid_argument("level_match: empty grid");
        eff = d->values.front();
        for (double s : d->values) {
            if (s <= target) eff = s;
        }
    } else {
        const auto& c = std::get<ContinuousGrid>(grid);
        eff = std::clamp(target, c.lo, c.hi);
    }
    return {eff, eff / target};
}

Plane bm_pilot_plane(const Plane& z, const Plane& first_denoised, const RunConfig& cfg) {
    switch (cfg.bm_pilot) {
        case PilotSource::first_cnnf_output:
            return first_denoised;
        case PilotSource::noisy_input:
            return z;
        case PilotSource::external_file: {
            Plane pilot = load_plane(cfg.pilot_file);
            if (!pilot.same_shape(z)) {
                throw std::invalid_argument("pilot '" + cfg.pilot_file.string() + "' is " +
                                            std::to_string(pilot.width()) + "x" + std::to_string(pilot.height()) +
                                            ", image is " + std::to_string(z.width()) + "x" +
                                            std::to_string(z.height()));
            }
            return pilot;
        }
    }
    throw std::logic_error("unhandled pilot source");
}

RunResult run(const Plane& z, const RunConfig& cfg, const Denoiser& denoiser) {
    cfg.validate();
    cfg.match.validate(z.width(), z.height());
    if (!z.all_finite()) throw std::invalid_argument("input contains non-finite samples");

    RunResult result;
    std::optional<Plane> previous;  // yhat_{k-1}; absent for k = 1

    for (std::size_t k = 1; k <= cfg.iterations; ++k) {
        IterationRecord rec;
        rec.k = k;
        rec.lambda = cfg.lambda(k);
        rec.tau = cfg.tau(k);
        rec.target_sigma = rec.lambda * cfg.sigma;

        Plane combined = z;
        if (previous) {
            auto out = combined.data();
            const auto prev = previous->data();
            const auto in = z.data();
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i] = rec.lambda * in[i] + (1.0 - rec.lambda) * prev[i];
            }
        }

        const auto match = level_match(denoiser.spec().grid, rec.target_sigma);
        rec.sigma_eff = match.sigma_eff;
        rec.alpha = match.alpha;

        auto start = Clock::now();
        const Plane cnn_input = scaled(combined, match.alpha);
        rec.scaled_min = min_value(cnn_input);
        rec.scaled_max = max_value(cnn_input);
        Plane denoised = denoiser.denoise({cnn_input, match.sigma_eff});
        if (match.alpha != 1.0) {
            for (auto& v : denoised.data()) v /= match.alpha;
        }
        rec.cnnf_seconds = seconds_since(start);

        if (k == 1) {
            start = Clock::now();
            result.table = build_group_table(bm_pilot_plane(z, denoised, cfg), cfg.match, cfg.threads);
            rec.bm_seconds = seconds_since(start);
            ++result.trace.tables_built;
        }

        start = Clock::now();
        Plane estimate = apply_nlf(denoised, result.table, rec.tau, cfg.threads);
        rec.nlf_seconds = seconds_since(start);

        if (cfg.keep_snapshots) {
            rec.combined = std::move(combined);
            rec.denoised = std::move(denoised);
            rec.estimate = estimate;
        }
        previous = std::move(estimate);
        result.trace.iterations.push_back(std::move(rec));
    }
    result.estimate = std::move(*previous);
    return result;
}

void write_trace_jsonl(const IterationTrace& trace, std::ostream& out) {
    for (const auto& rec : trace.iterations) {
        nlohmann::json j = {
            {"k", rec.k},
            {"lambda", rec.lambda},
            {"target_sigma", rec.target_sigma},
            {"sigma_eff", rec.sigma_eff},
            {"alpha", rec.alpha},
            {"tau", rec.tau},
            {"scaled_min", rec.scaled_min},
            {"scaled_max", rec.scaled_max},
            {"cnnf_seconds", rec.cnnf_seconds},
            {"bm_seconds", rec.bm_seconds},
            {"nlf_seconds", rec.nlf_seconds},
        };
        out << j.dump() << '\n';
    }
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::invalid_argument("empty entry in list '" + text + "'");
        out.push_back(parse_double("list", item));
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

PilotSource parse_pilot(const std::string& text) {
    if (text == "first_cnnf_output") return PilotSource::first_cnnf_output;
    if (text == "noisy_input") return PilotSource::noisy_input;
    if (text == "external_file") return PilotSource::external_file;
    throw std::invalid_argument("unknown bm_pilot '" + text +
                                "' (expected first_cnnf_output, noisy_input, external_file)");
}

std::string to_string(PilotSource pilot) {
    switch (pilot) {
        case PilotSource::first_cnnf_output:
            return "first_cnnf_output";
        case PilotSource::noisy_input:
            return "noisy_input";
        case PilotSource::external_file:
            return "external_file";
    }
    return "?";
}

ConfigMap read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    ConfigMap values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return values;
}

void apply_config(const ConfigMap& values, RunConfig& cfg, DenoiserOptions& options) {
    for (const auto& [key, value] : values) {
        if (key == "sigma") cfg.sigma = parse_double(key, value);
        else if (key == "iterations") cfg.iterations = parse_count(key, value);
        else if (key == "lambda") cfg.lambda_schedule = parse_number_list(value);
        else if (key == "tau") cfg.tau_schedule = parse_number_list(value);
        else if (key == "n1") cfg.match.n1 = parse_count(key, value);
        else if (key == "n2") cfg.match.n2 = parse_count(key, value);
        else if (key == "search_radius") cfg.match.search_radius = parse_count(key, value);
        else if (key == "ref_stride") cfg.match.ref_stride = parse_count(key, value);
        else if (key == "bm_pilot") cfg.bm_pilot = parse_pilot(value);
        else if (key == "pilot_file") cfg.pilot_file = value;
        else if (key == "mode") {
            if (value == "paper") cfg.mode = ScheduleMode::paper;
            else if (value == "lab") cfg.mode = ScheduleMode::lab;
            else throw std::invalid_argument("mode must be 'paper' or 'lab'");
        }
        else if (key == "threads") cfg.threads = options.threads = static_cast<int>(parse_count(key, value));
        else if (key == "denoiser") options.name = value;
        else if (key == "grid") options.grid = value;
        else if (key == "command") options.command = value;
        else if (key == "timeout") {
            options.timeout = std::chrono::milliseconds(static_cast<long long>(parse_double(key, value) * 1000.0));
        }
        else if (key == "workdir") options.workdir = value;
        else if (key == "dct8_threshold") options.dct8.threshold_multiplier = parse_double(key, value);
        else if (key == "dct8_stride") options.dct8.stride = parse_count(key, value);
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

}  // namespace nn3d
