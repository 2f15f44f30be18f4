// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <unistd.h>

#include "nn3d/block_matching.hpp"
#include "nn3d/framework.hpp"
#include "nn3d/haar.hpp"
#include "nn3d/harness.hpp"
#include "nn3d/nlf.hpp"
#include "nn3d/noise.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace nn3d;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (budget_s > 0 && elapsed > budget_s) {
        o.pass = false;
        o.detail += " [over time budget " + std::to_string(budget_s) + " s]";
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-32s %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), elapsed,
                o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

RunConfig identity_run(double sigma) {
    RunConfig cfg;
    cfg.sigma = sigma;
    cfg.iterations = 2;
    cfg.tau_schedule = {0.0, 0.0};
    cfg.mode = ScheduleMode::lab;
    return cfg;
}

Plane noisy_256() {
    const Plane clean = test::quantize(test::uniform_plane(256, 256, 2024));
    return add_awgn(clean, {25.0, 99});
}

std::map<std::string, double> mean_by_method(const BenchReport& report, const std::string& prefix_a,
                                             const std::string& prefix_b = "\x01") {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& row : report.rows) {
        if (row.image.rfind(prefix_a, 0) != 0 && row.image.rfind(prefix_b, 0) != 0) continue;
        auto& slot = acc[row.method];
        slot.first += row.psnr;
        ++slot.second;
    }
    std::map<std::string, double> out;
    for (const auto& [m, v] : acc) out[m] = v.first / v.second;
    return out;
}

}  // namespace

int main() {
    const test::TempDir scratch("acceptance");
    const auto fixtures = scratch / "fixtures";
    make_fixtures(fixtures, 128);

    criterion(1, "identity fixed point", 1.0, [] {
        const Plane z = noisy_256();
        const auto id = make_denoiser({.name = "identity"});
        const auto result = run(z, identity_run(25.0), *id);
        const double err = test::max_abs_diff(result.estimate, z);
        return Outcome{err <= 1e-10, "max |yhat - z| = " + fmt("%.3g", err)};
    });

    criterion(2, "shrinkage algebra", 1.0, [] {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> qd(-1000.0, 1000.0);
        std::uniform_real_distribution<double> td(0.0, 100.0);
        std::size_t bad_closed = 0, bad_bound = 0, bad_odd = 0, bad_mono = 0;
        for (int i = 0; i < 100000; ++i) {
            const double q = qd(rng);
            const double tau = i % 1000 == 0 ? 0.0 : td(rng);
            const double y = shrink(q, tau);
            const long double ql = q, tl = tau;
            const long double closed = ql * ql * ql / (ql * ql + tl * tl);
            if (std::abs(static_cast<long double>(y) - closed) >
                4.0L * std::numeric_limits<double>::epsilon() * std::abs(closed)) {
                ++bad_closed;
            }
            if (std::abs(y) > std::abs(q)) ++bad_bound;
            if (shrink(-q, tau) != -y) ++bad_odd;
            const double q2 = q + std::abs(qd(rng)) * 1e-3 + 1e-9;
            if (shrink(q2, tau) < y) ++bad_mono;
        }
        const bool ok = bad_closed + bad_bound + bad_odd + bad_mono == 0 && shrink(0.0, 3.0) == 0.0;
        return Outcome{ok, "violations closed/bound/odd/mono = " + std::to_string(bad_closed) + "/" +
                               std::to_string(bad_bound) + "/" + std::to_string(bad_odd) + "/" +
                               std::to_string(bad_mono)};
    });

    criterion(3, "haar transform", 5.0, [] {
        std::mt19937_64 rng(3);
        double worst_rt = 0.0, worst_parseval = 0.0, worst_matrix = 0.0;
        for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 32u}) {
            const auto h = oracle::haar_matrix(n);
            for (int i = 0; i < 10000; ++i) {
                const auto v = test::uniform_vector(n, rng);
                const auto c = haar::forward(v);
                const auto back = haar::inverse(c);
                double e_in = 0.0, e_out = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    worst_rt = std::max(worst_rt, std::abs(back[j] - v[j]));
                    e_in += v[j] * v[j];
                    e_out += c[j] * c[j];
                }
                worst_parseval = std::max(worst_parseval, std::abs(e_out - e_in) / e_in);
                if (n == 32) {
                    const auto m = oracle::multiply(h, v);
                    for (std::size_t j = 0; j < n; ++j) worst_matrix = std::max(worst_matrix, std::abs(m[j] - c[j]));
                }
            }
        }
        const bool ok = worst_rt <= 1e-10 && worst_parseval <= 1e-9 && worst_matrix <= 1e-9;
        return Outcome{ok, "round-trip " + fmt("%.2g", worst_rt) + ", parseval " + fmt("%.2g", worst_parseval) +
                               ", matrix " + fmt("%.2g", worst_matrix)};
    });

    criterion(4, "block matching oracle", 30.0, [] {
        const MatchConfig cfg;
        int mismatches = 0, uncovered = 0;
        for (int i = 0; i < 20; ++i) {
            const std::size_t w = 32 + (i * 7) % 33;
            const std::size_t h = 32 + (i * 13) % 33;
            Plane pilot = test::uniform_plane(w, h, 100 + i);
            if (i % 4 == 1) pilot = test::quantize(test::uniform_plane(w, h, 100 + i, 0.0, 2.0));  // many ties
            if (i % 4 == 3) pilot = Plane(w, h, 17.0);                                               // all ties
            const auto table = build_group_table(pilot, cfg, 1);
            if (!(table == oracle::block_matching(pilot, cfg))) ++mismatches;
            for (auto m : coverage_mask(table)) uncovered += m == 0;
        }
        return Outcome{mismatches == 0 && uncovered == 0,
                       std::to_string(mismatches) + " mismatching tables, " + std::to_string(uncovered) +
                           " uncovered pixels over 20 images"};
    });

    criterion(5, "nonlocal filter oracle", 10.0, [] {
        double worst = 0.0;
        bool deterministic = true;
        for (int s = 0; s < 3; ++s) {
            const Plane clean = test::quantize(test::uniform_plane(64, 64, 500 + s));
            const Plane image = add_awgn(clean, {30.0, static_cast<std::uint64_t>(s)});
            const auto table = build_group_table(clean, MatchConfig{}, 1);
            const double tau = 7.5 * (s + 1);
            const Plane expected = oracle::nlf(image, table, tau);
            const Plane first = apply_nlf(image, table, tau, 1);
            for (int threads : {1, 4, 8}) {
                const Plane got = apply_nlf(image, table, tau, threads);
                worst = std::max(worst, test::max_abs_diff(got, expected));
                deterministic = deterministic && got == first;
            }
        }
        return Outcome{worst <= 1e-9 && deterministic,
                       "max deviation " + fmt("%.2g", worst) + (deterministic ? ", identical" : ", NOT identical") +
                           " across 1/4/8 threads"};
    });

    criterion(6, "level matching", 0.0, [] {
        const auto a = level_match(grid_preset("dncnn"), 37.5);
        const auto b = level_match(grid_preset("wdncnn"), 75.0);
        const auto c = level_match(grid_preset("wdncnn"), 10.0);
        const bool ok = a.sigma_eff == 35.0 && a.alpha == 35.0 / 37.5 && b.sigma_eff == 50.0 &&
                        b.alpha == 50.0 / 75.0 && c.sigma_eff == 15.0 && c.alpha == 1.5;
        return Outcome{ok, "(" + fmt("%g", a.sigma_eff) + ", " + fmt("%.6f", a.alpha) + ") (" + fmt("%g", b.sigma_eff) +
                               ", " + fmt("%.6f", b.alpha) + ") (" + fmt("%g", c.sigma_eff) + ", " +
                               fmt("%g", c.alpha) + ")"};
    });

    criterion(7, "nonlocality gain over dct8", 120.0, [&] {
        BenchOptions opt;
        opt.directory = fixtures;
        opt.sigmas = {25.0, 50.0};
        opt.seed = 1;
        opt.methods = {"cnnf-only", "nn3d"};
        opt.run.sigma = 1.0;
        opt.denoiser.name = "dct8";
        const auto report = run_bench(opt);
        const auto structured = mean_by_method(report, "stripes", "checker");
        const auto all = mean_by_method(report, "");
        const double gain = structured.at("nn3d") - structured.at("cnnf-only");
        const double overall = all.at("nn3d") - all.at("cnnf-only");
        return Outcome{gain > 0.0 && overall >= -0.05,
                       "stripe/checker gain " + fmt("%+.3f", gain) + " dB, all fixtures " + fmt("%+.3f", overall) +
                           " dB"};
    });

    criterion(8, "pilot sensitivity at sigma 75", 0.0, [&] {
        BenchOptions opt;
        opt.directory = scratch / "stripes";
        std::filesystem::create_directories(opt.directory);
        for (const auto& p : list_images(fixtures)) {
            if (p.filename().string().rfind("stripes", 0) == 0) {
                std::filesystem::copy_file(p, opt.directory / p.filename());
            }
        }
        opt.sigmas = {75.0};
        opt.seed = 1;
        opt.methods = {"nn3d"};
        opt.run.sigma = 1.0;
        opt.denoiser.name = "dct8";
        const double first = mean_by_method(run_bench(opt), "").at("nn3d");
        opt.run.bm_pilot = PilotSource::noisy_input;
        const double noisy = mean_by_method(run_bench(opt), "").at("nn3d");
        return Outcome{first >= noisy, "first_cnnf_output " + fmt("%.3f", first) + " dB, noisy_input " +
                                           fmt("%.3f", noisy) + " dB"};
    });

    criterion(9, "single-thread performance", 0.0, [] {
        const Plane z = noisy_256();
        auto t = Clock::now();
        const auto table = build_group_table(z, MatchConfig{}, 1);
        const double bm = std::chrono::duration<double>(Clock::now() - t).count();
        t = Clock::now();
        const Plane out = apply_nlf(z, table, 6.25, 1);
        const double nlf = std::chrono::duration<double>(Clock::now() - t).count();
        return Outcome{bm <= 1.0 && nlf <= 1.0 && out.all_finite(),
                       "256x256 BM " + fmt("%.3f", bm) + " s, NLF " + fmt("%.3f", nlf) + " s"};
    });

    criterion(10, "external protocol bit-exact", 0.0, [&] {
        const Plane z = test::to_float32(noisy_256());
        const auto reference = run(z, identity_run(25.0), *make_denoiser({.name = "identity"}));
        DenoiserOptions ext;
        ext.name = "external";
        ext.command = std::string(FAKE_DENOISER_PATH) + " --mode copy";
        ext.workdir = scratch / "work";
        const auto result = run(z, identity_run(25.0), *make_denoiser(ext));
        const bool exact = result.estimate == reference.estimate;
        return Outcome{exact, exact ? "identical to in-process run"
                                    : "max deviation " + fmt("%.3g", test::max_abs_diff(result.estimate,
                                                                                        reference.estimate))};
    });

    std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
