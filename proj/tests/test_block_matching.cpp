#include <doctest.h>

#include <fstream>
#include <random>

#include "nn3d/block_matching.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace nn3d;

TEST_CASE("match_distance is the unnormalized SSD") {
    CHECK(match_distance(std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 2, 3, 4}) == 30.0);
    const std::vector<double> a{3.5, -1.0, 7.0, 0.25};
    CHECK(match_distance(a, a) == 0.0);
    CHECK_THROWS_AS(match_distance(a, std::vector<double>{1.0}), std::invalid_argument);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto x = test::uniform_vector(100, rng);
        const auto y = test::uniform_vector(100, rng);
        CHECK(match_distance(x, y) == match_distance(y, x));
    }
}

TEST_CASE("reference positions include the last valid row") {
    CHECK(reference_positions(40, 10, 5) == std::vector<std::uint32_t>{0, 5, 10, 15, 20, 25, 30});
    CHECK(reference_positions(42, 10, 5) == std::vector<std::uint32_t>{0, 5, 10, 15, 20, 25, 30, 32});
    CHECK(reference_positions(10, 10, 5) == std::vector<std::uint32_t>{0});
}

TEST_CASE("configuration errors") {
    const Plane p(20, 20);
    MatchConfig cfg;
    cfg.n1 = 21;
    CHECK_THROWS_AS(build_group_table(p, cfg), std::invalid_argument);
    cfg = {};
    cfg.n2 = 24;
    CHECK_THROWS_AS(build_group_table(p, cfg), std::invalid_argument);
    cfg = {};
    cfg.ref_stride = 11;
    CHECK_THROWS_AS(build_group_table(p, cfg), std::invalid_argument);
    cfg = {};
    cfg.ref_stride = 0;
    CHECK_THROWS_AS(build_group_table(p, cfg), std::invalid_argument);
}

TEST_CASE("constant plane: ties resolve in raster order after the reference") {
    const Plane p(40, 40, 77.0);
    const MatchConfig cfg;
    const auto table = build_group_table(p, cfg);
    const auto refs = reference_positions(40, cfg.n1, cfg.ref_stride);
    REQUIRE(table.groups.size() == refs.size() * refs.size());
    std::size_t g = 0;
    for (auto rr : refs) {
        for (auto rc : refs) {
            GroupCoords expected{{rr, rc}};
            const std::uint32_t lo_r = rr > 19 ? rr - 19 : 0, hi_r = std::min<std::uint32_t>(rr + 19, 30);
            const std::uint32_t lo_c = rc > 19 ? rc - 19 : 0, hi_c = std::min<std::uint32_t>(rc + 19, 30);
            for (std::uint32_t r = lo_r; r <= hi_r && expected.size() < 32; ++r) {
                for (std::uint32_t c = lo_c; c <= hi_c && expected.size() < 32; ++c) {
                    if (r != rr || c != rc) expected.push_back({r, c});
                }
            }
            CHECK(table.groups[g] == expected);
            ++g;
        }
    }
}

TEST_CASE("random 40x40 plane matches the brute-force oracle") {
    const Plane p = test::uniform_plane(40, 40, 1234);
    const MatchConfig cfg;
    CHECK(build_group_table(p, cfg) == oracle::block_matching(p, cfg));
}

TEST_CASE("an exact copy ranks directly after the reference") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(0.0, 255.0);
    Plane p(20, 10);
    for (std::size_t r = 0; r < 10; ++r) {
        for (std::size_t c = 0; c < 10; ++c) p(r, c) = p(r, c + 10) = dist(rng);
    }
    const auto table = build_group_table(p, MatchConfig{});
    const auto& first = table.groups.front();
    REQUIRE(first.size() == 8);  // 11 candidates -> largest power of two is 8
    CHECK(first[0] == BlockCoord{0, 0});
    CHECK(first[1] == BlockCoord{0, 10});
    const auto& last = table.groups.back();
    CHECK(last[0] == BlockCoord{0, 10});
    CHECK(last[1] == BlockCoord{0, 0});
}

TEST_CASE("small candidate pools truncate to a power of two without duplicates") {
    const Plane p = test::uniform_plane(12, 11, 3);
    MatchConfig cfg;  // 3 x 2 = 6 candidate positions
    const auto table = build_group_table(p, cfg);
    for (const auto& g : table.groups) {
        CHECK(g.size() == 4);
        std::set<BlockCoord> unique(g.begin(), g.end());
        CHECK(unique.size() == g.size());
    }
    CHECK(table == oracle::block_matching(p, cfg));
}

TEST_CASE("coverage, reference-first and in-bounds on assorted shapes") {
    std::uint64_t seed = 50;
    for (auto [w, h] : {std::pair{33, 47}, {64, 64}, {10, 10}, {57, 31}}) {
        for (std::size_t stride : {1u, 5u, 10u}) {
            const Plane p = test::uniform_plane(w, h, seed++);
            MatchConfig cfg;
            cfg.ref_stride = stride;
            cfg.search_radius = 7;
            cfg.n2 = 16;
            const auto table = build_group_table(p, cfg);
            const auto mask = coverage_mask(table);
            CHECK(std::all_of(mask.begin(), mask.end(), [](auto m) { return m == 1; }));
            const auto rows = reference_positions(h, cfg.n1, stride);
            const auto cols = reference_positions(w, cfg.n1, stride);
            for (std::size_t g = 0; g < table.groups.size(); ++g) {
                CHECK(table.groups[g][0] == BlockCoord{rows[g / cols.size()], cols[g % cols.size()]});
                for (const auto& c : table.groups[g]) CHECK(block_in_bounds(p, c, cfg.n1));
            }
        }
    }
}

TEST_CASE("table does not depend on the thread count") {
    const Plane p = test::uniform_plane(64, 64, 17);
    const auto single = build_group_table(p, MatchConfig{}, 1);
    CHECK(build_group_table(p, MatchConfig{}, 3) == single);
    CHECK(build_group_table(p, MatchConfig{}, 8) == single);
}

TEST_CASE("group table sidecar layout and round trip") {
    test::TempDir dir("gt");
    GroupTable t{0, 0, 10, 32, {{{1, 2}, {3, 4}}, {{5, 6}}}};
    save_group_table(t, dir / "t.gt");
    std::ifstream in(dir / "t.gt", std::ios::binary);
    std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(b.size() == 8 + 12 + 4 + 16 + 4 + 8);
    CHECK(std::string(b.begin(), b.begin() + 8) == "NN3DGT01");
    CHECK(b[8] == 10);
    CHECK(b[12] == 32);
    CHECK(b[16] == 2);
    CHECK(b[20] == 2);
    CHECK(b[24] == 1);
    CHECK(b[28] == 2);
    CHECK(load_group_table(dir / "t.gt") == t);

    std::filesystem::resize_file(dir / "t.gt", b.size() - 3);
    CHECK_THROWS_AS(load_group_table(dir / "t.gt"), IoError);
}
