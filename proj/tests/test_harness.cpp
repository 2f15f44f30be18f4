#include <doctest.h>

#include <fstream>
#include <sstream>

#include "nn3d/block_matching.hpp"
#include "nn3d/cli.hpp"
#include "nn3d/harness.hpp"
#include "nn3d/noise.hpp"
#include "support/test_util.hpp"

using namespace nn3d;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
    std::ostringstream o, e;
    const int code = run_cli(args, o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return code;
}

}  // namespace

TEST_CASE("fixtures are deterministic and structured") {
    test::TempDir a("fx-a"), b("fx-b");
    const auto paths = make_fixtures(a.path(), 64);
    make_fixtures(b.path(), 64);
    REQUIRE(paths.size() == 11);
    for (const auto& p : paths) CHECK(slurp(p) == slurp(b / p.filename().string()));

    const Plane stripes = load_plane(a / "stripes_square_p7.pgm");
    for (std::size_t r = 1; r < stripes.height(); ++r) {
        for (std::size_t c = 0; c < stripes.width(); ++c) REQUIRE(stripes(r, c) == stripes(0, c));
    }
    CHECK(stripes(0, 0) == stripes(0, 7));
    CHECK(stripes(0, 0) != stripes(0, 3));

    const Plane checker = load_plane(a / "checker_p16.pgm");
    CHECK(checker(0, 0) == checker(8, 8));
    CHECK(checker(0, 0) != checker(0, 8));
    CHECK(checker(0, 0) == checker(16, 0));

    const Plane flat = load_plane(a / "constant_064.pgm");
    CHECK(min_value(flat) == 64.0);
    CHECK(max_value(flat) == 64.0);
}

TEST_CASE("image seeds depend on the name, not the listing order") {
    CHECK(image_seed(7, "a.pgm") == image_seed(7, "a.pgm"));
    CHECK(image_seed(7, "a.pgm") != image_seed(7, "b.pgm"));
    CHECK(image_seed(7, "a.pgm") != image_seed(8, "a.pgm"));
}

TEST_CASE("identity cascade with zero thresholds reproduces the noisy PSNR") {
    test::TempDir dir("bench-id");
    save_plane(Plane(40, 40, 64.0), dir / "flat.pgm", PlaneFormat::pgm8);
    BenchOptions opt;
    opt.directory = dir.path();
    opt.sigmas = {20.0};
    opt.methods = {"noisy", "cnnf-only", "nn3d"};
    opt.run.tau_schedule = {0.0, 0.0};
    opt.run.mode = ScheduleMode::lab;
    opt.denoiser.name = "identity";
    const auto report = run_bench(opt);
    REQUIRE(report.rows.size() == 3);
    // rows sorted by method name
    CHECK(report.rows[0].method == "cnnf-only");
    CHECK(report.rows[1].method == "nn3d");
    CHECK(report.rows[2].method == "noisy");
    CHECK(report.rows[1].psnr == doctest::Approx(report.rows[2].psnr).epsilon(1e-12));
    CHECK(report.rows[0].psnr == doctest::Approx(report.rows[2].psnr).epsilon(1e-12));
    CHECK(report.rows[2].psnr == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 400.0)).epsilon(0.02));
}

TEST_CASE("bench report CSV is byte-identical across runs") {
    test::TempDir dir("bench-csv");
    make_fixtures(dir.path(), 32);
    BenchOptions opt;
    opt.directory = dir.path();
    opt.sigmas = {25.0, 50.0};
    opt.seed = 11;
    opt.methods = {"noisy", "cnnf-only", "nlf-only", "nn3d"};
    opt.denoiser.name = "gauss";
    opt.run.sigma = 1.0;

    std::ostringstream first, second, summary, timing;
    const auto report = run_bench(opt);
    write_report_csv(report, first);
    write_report_csv(run_bench(opt), second);
    CHECK(first.str() == second.str());
    CHECK(first.str().rfind("# nn3d-bench v1\ndataset,image,sigma,method,psnr_db\n", 0) == 0);
    CHECK(report.rows.size() == 11 * 2 * 4);

    write_timing_csv(report, timing);
    CHECK(timing.str().find("cnnf_s,bm_s,nlf_s,total_s") != std::string::npos);

    const auto s = summarize(report);
    CHECK(s.size() == 2 * 4);
    for (const auto& row : s) CHECK(row.images == 11);
    write_summary_csv(s, summary);
    CHECK(summary.str().find("mean_psnr_db") != std::string::npos);

    opt.methods = {"bm3d"};
    CHECK_THROWS_AS(run_bench(opt), std::invalid_argument);
}

TEST_CASE("cli denoise writes an image and a trace") {
    test::TempDir dir("cli");
    const Plane clean = Plane(32, 32, 120.0);
    save_plane(test::quantize(add_awgn(clean, {15.0, 4})), dir / "noisy.pgm", PlaneFormat::pgm8);
    std::string out, err;
    REQUIRE(cli({"denoise", (dir / "noisy.pgm").string(), (dir / "out.pgm").string(), "--sigma", "15",
                 "--denoiser", "gauss", "--trace-file", (dir / "trace.jsonl").string()},
                &out, &err) == 0);
    CHECK(err.empty());
    const Plane result = load_plane(dir / "out.pgm");
    CHECK(result.same_shape(clean));
    const auto trace = slurp(dir / "trace.jsonl");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 2);
}

TEST_CASE("cli identity run with zero thresholds is bit-exact") {
    test::TempDir dir("cli-id");
    const Plane noisy = test::quantize(test::uniform_plane(30, 26, 5));
    save_plane(noisy, dir / "in.pgm", PlaneFormat::pgm8);
    REQUIRE(cli({"denoise", (dir / "in.pgm").string(), (dir / "out.pgm").string(), "--sigma", "25", "--denoiser",
                 "identity", "--tau", "0,0"}) == 0);
    CHECK(slurp(dir / "in.pgm") == slurp(dir / "out.pgm"));

    // Explicit paper mode refuses zero thresholds.
    std::string err;
    CHECK(cli({"denoise", (dir / "in.pgm").string(), (dir / "x.pgm").string(), "--sigma", "25", "--tau", "0,0",
               "--mode", "paper"},
              nullptr, &err) == 1);
    CHECK(err.find("tau") != std::string::npos);
}

TEST_CASE("cli reports missing inputs and bad flags") {
    test::TempDir dir("cli-err");
    std::string err;
    const auto missing = (dir / "nope.pgm").string();
    CHECK(cli({"denoise", missing, (dir / "o.pgm").string(), "--sigma", "10"}, nullptr, &err) != 0);
    CHECK(err.find(missing) != std::string::npos);

    save_plane(Plane(20, 20, 3.0), dir / "in.pgm", PlaneFormat::pgm8);
    CHECK(cli({"denoise", (dir / "in.pgm").string(), (dir / "o.pgm").string()}, nullptr, &err) != 0);
    CHECK(err.find("sigma") != std::string::npos);
    CHECK(cli({"denoise", (dir / "in.pgm").string(), (dir / "o.pgm").string(), "--sigma", "5", "--denoiser",
               "bm3d"},
              nullptr, &err) != 0);
    CHECK(cli({"frobnicate"}, nullptr, &err) != 0);
}

TEST_CASE("cli bm-dump writes a loadable table") {
    test::TempDir dir("cli-bm");
    const Plane pilot = test::quantize(test::uniform_plane(36, 30, 8));
    save_plane(pilot, dir / "pilot.pgm", PlaneFormat::pgm8);
    std::string out;
    REQUIRE(cli({"bm-dump", (dir / "pilot.pgm").string(), (dir / "t.gt").string(), "--n2", "8"}, &out) == 0);
    const auto loaded = load_group_table(dir / "t.gt");
    MatchConfig cfg;
    cfg.n2 = 8;
    const auto expected = build_group_table(pilot, cfg);
    CHECK(loaded.groups == expected.groups);
    CHECK(out.find(std::to_string(expected.groups.size()) + " groups") != std::string::npos);
}

TEST_CASE("cli make-fixtures and bench") {
    test::TempDir dir("cli-bench");
    std::string out;
    REQUIRE(cli({"make-fixtures", (dir / "fx").string(), "--size", "32"}, &out) == 0);
    CHECK(std::count(out.begin(), out.end(), '\n') == 11);
    REQUIRE(cli({"bench", (dir / "fx").string(), "--sigmas", "30", "--methods", "noisy,nn3d", "--denoiser", "gauss",
                 "--csv", (dir / "a.csv").string(), "--timing-csv", (dir / "t.csv").string(), "--summary-csv",
                 (dir / "s.csv").string()}) == 0);
    REQUIRE(cli({"bench", (dir / "fx").string(), "--sigmas", "30", "--methods", "noisy,nn3d", "--denoiser", "gauss",
                 "--csv", (dir / "b.csv").string()},
                &out) == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(out.find("mean_psnr_db") != std::string::npos);
    CHECK(slurp(dir / "t.csv").find("total_s") != std::string::npos);
}
