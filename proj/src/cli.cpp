#include "nn3d/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nn3d/block_matching.hpp"
#include "nn3d/framework.hpp"
#include "nn3d/harness.hpp"

namespace nn3d {

namespace {

// Flags shared by `denoise` and `bench`; collected as strings and applied
// through the same path as config-file keys so both spellings behave alike.
struct RunFlags {
    std::string config;
    ConfigMap values;

    void attach(CLI::App& cmd) {
        cmd.add_option("--config", config, "Flat key = value run configuration");
        const std::vector<std::pair<std::string, std::string>> keys = {
            {"iterations", "Number of iterations K"},
            {"lambda", "Comma-separated lambda schedule"},
            {"tau", "Comma-separated NLF threshold schedule (implies --mode lab)"},
            {"n1", "Block side"},
            {"n2", "Maximum group size (power of two)"},
            {"search-radius", "Block-matching search radius"},
            {"ref-stride", "Reference block stride"},
            {"bm-pilot", "first_cnnf_output | noisy_input | external_file"},
            {"pilot-file", "Pilot image for bm-pilot external_file"},
            {"mode", "paper | lab schedule validation"},
            {"threads", "Worker threads (0 = default)"},
            {"denoiser", "identity | gauss | dct8 | external"},
            {"grid", "Sigma grid preset: dncnn | wdncnn | ffdnet"},
            {"command", "External denoiser command line"},
            {"timeout", "External denoiser timeout in seconds"},
            {"workdir", "External denoiser working directory"},
            {"dct8-threshold", "dct8 hard-threshold multiplier"},
            {"dct8-stride", "dct8 patch stride"},
        };
        for (const auto& [flag, help] : keys) {
            auto key = flag;
            std::replace(key.begin(), key.end(), '-', '_');
            cmd.add_option_function<std::string>(
                "--" + flag, [this, key](const std::string& v) { values[key] = v; }, help);
        }
    }

    void apply(RunConfig& cfg, DenoiserOptions& options) const {
        ConfigMap merged;
        if (!config.empty()) merged = read_config_file(config);
        for (const auto& [k, v] : values) merged[k] = v;
        if (merged.count("tau") && !merged.count("mode")) merged["mode"] = "lab";
        apply_config(merged, cfg, options);
    }
};

PlaneFormat format_for(const std::string& flag, const std::filesystem::path& path) {
    if (flag == "plane") return PlaneFormat::plane;
    if (flag == "pgm8") return PlaneFormat::pgm8;
    if (!flag.empty()) throw std::invalid_argument("--format must be pgm8 or plane");
    return path.extension() == ".npf" ? PlaneFormat::plane : PlaneFormat::pgm8;
}

template <typename F>
void write_file(const std::filesystem::path& path, F&& writer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    writer(out);
    if (!out) throw IoError("write error on '" + path.string() + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"NN3D: nonlocality-reinforced denoising cascade", "nn3d"};
    app.require_subcommand(1);

    // denoise
    auto* denoise = app.add_subcommand("denoise", "Denoise one image");
    std::string in_path, out_path, format, trace_file;
    double sigma = 0.0;
    bool trace = false;
    RunFlags denoise_flags;
    denoise->add_option("input", in_path, "Noisy image (PGM, PNG or plane file)")->required();
    denoise->add_option("output", out_path, "Output path")->required();
    denoise->add_option("--sigma", sigma, "Noise standard deviation on the [0,255] scale");
    denoise->add_option("--format", format, "pgm8 | plane (default from extension)");
    denoise->add_flag("--trace", trace, "Print the iteration trace (JSON lines) to stderr");
    denoise->add_option("--trace-file", trace_file, "Write the iteration trace to a file");
    denoise_flags.attach(*denoise);

    // bench
    auto* bench = app.add_subcommand("bench", "Seeded-noise PSNR benchmark over an image directory");
    std::string bench_dir, csv_path, timing_path, summary_path, sigma_list = "25", method_list = "cnnf-only,nn3d";
    std::uint64_t seed = 0;
    RunFlags bench_flags;
    bench->add_option("directory", bench_dir, "Directory of clean images")->required();
    bench->add_option("--sigmas", sigma_list, "Comma-separated noise levels");
    bench->add_option("--seed", seed, "Master noise seed");
    bench->add_option("--methods", method_list, "Comma-separated: noisy, cnnf-only, nlf-only, nn3d");
    bench->add_option("--csv", csv_path, "PSNR report (stdout when omitted)");
    bench->add_option("--timing-csv", timing_path, "Report with per-stage wall-clock columns");
    bench->add_option("--summary-csv", summary_path, "Per-dataset mean PSNR (stdout when omitted)");
    bench_flags.attach(*bench);

    // make-fixtures
    auto* fixtures = app.add_subcommand("make-fixtures", "Write the deterministic synthetic test corpus");
    std::string fixture_dir;
    std::size_t fixture_size = 128;
    fixtures->add_option("directory", fixture_dir, "Output directory")->required();
    fixtures->add_option("--size", fixture_size, "Side length in pixels");

    // bm-dump
    auto* dump = app.add_subcommand("bm-dump", "Run block matching and write the group-table sidecar");
    std::string pilot_path, table_path;
    RunFlags dump_flags;
    dump->add_option("pilot", pilot_path, "Pilot image")->required();
    dump->add_option("output", table_path, "Group table sidecar path")->required();
    dump_flags.attach(*dump);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*denoise) {
            RunConfig cfg;
            DenoiserOptions options;
            denoise_flags.apply(cfg, options);
            if (denoise->count("--sigma")) cfg.sigma = sigma;
            const Plane z = load_plane(in_path);
            const auto denoiser = make_denoiser(options);
            const auto result = run(z, cfg, *denoiser);
            save_plane(result.estimate, out_path, format_for(format, out_path));
            if (trace) write_trace_jsonl(result.trace, err);
            if (!trace_file.empty()) {
                write_file(trace_file, [&](std::ostream& o) { write_trace_jsonl(result.trace, o); });
            }
        } else if (*bench) {
            BenchOptions options;
            options.directory = bench_dir;
            options.sigmas = parse_number_list(sigma_list);
            options.seed = seed;
            options.methods.clear();
            std::stringstream ss(method_list);
            for (std::string m; std::getline(ss, m, ',');) options.methods.push_back(m);
            options.run.sigma = 1.0;  // replaced per sweep entry
            bench_flags.apply(options.run, options.denoiser);

            const auto report = run_bench(options);
            if (csv_path.empty()) write_report_csv(report, out);
            else write_file(csv_path, [&](std::ostream& o) { write_report_csv(report, o); });
            if (!timing_path.empty()) {
                write_file(timing_path, [&](std::ostream& o) { write_timing_csv(report, o); });
            }
            const auto summary = summarize(report);
            if (summary_path.empty()) write_summary_csv(summary, out);
            else write_file(summary_path, [&](std::ostream& o) { write_summary_csv(summary, o); });
        } else if (*fixtures) {
            for (const auto& p : make_fixtures(fixture_dir, fixture_size)) out << p.string() << '\n';
        } else if (*dump) {
            RunConfig cfg;
            DenoiserOptions options;
            cfg.sigma = 1.0;
            dump_flags.apply(cfg, options);
            const Plane pilot = load_plane(pilot_path);
            const auto table = build_group_table(pilot, cfg.match, cfg.threads);
            save_group_table(table, table_path);
            out << table.groups.size() << " groups\n";
        }
    } catch (const std::exception& e) {
        err << "nn3d: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace nn3d
