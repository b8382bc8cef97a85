#include <doctest.h>

#include <algorithm>
#include <set>

#include "core/oan.hpp"
#include "core/rng.hpp"
#include "core/tiler.hpp"

#include "oracles.hpp"

using namespace oandet;

namespace {

std::vector<GroundTruthBox> random_boxes(Rng& rng, int patch, int max_count) {
    std::vector<GroundTruthBox> boxes;
    const int n = rng.next_int(0, max_count);
    for (int i = 0; i < n; ++i) {
        GroundTruthBox b;
        b.x_min = rng.next_int(0, patch - 2);
        b.y_min = rng.next_int(0, patch - 2);
        b.x_max = b.x_min + rng.next_int(1, patch - 1 - b.x_min);
        b.y_max = b.y_min + rng.next_int(1, patch - 1 - b.y_min);
        b.class_id = rng.next_int(0, 2);
        boxes.push_back(b);
    }
    return boxes;
}

} // namespace

TEST_CASE("center assignment picks the floor-division cell") {
    // Cell edge 64 px: center (100, 200) lands in column 1, row 3.
    GroundTruthBox b{99, 199, 101, 201, 0};
    GridLabels labels = assign_center({b}, 1024, 16);
    CHECK(labels.positives() == 1);
    CHECK(labels.target[3 * 16 + 1] == 1);

    // Cell edge 32 px: center (100.5, 900) lands in column 3, row 28.
    GroundTruthBox c{100, 896, 101, 904, 0};
    GridLabels l2 = assign_center({c}, 1024, 32);
    CHECK(l2.positives() == 1);
    CHECK(l2.target[28 * 32 + 3] == 1);
}

TEST_CASE("center assignment of nothing is all zeros") {
    GridLabels labels = assign_center({}, 128, 8);
    CHECK(labels.positives() == 0);
    for (auto v : labels.ignore) CHECK(v == 0);
}

TEST_CASE("center assignment rejects out-of-patch centers") {
    GroundTruthBox outside{120, 120, 140, 140, 0}; // center (130, 130)
    CHECK_THROWS_AS(assign_center({outside}, 128, 8), ValidationError);
}

TEST_CASE("center assignment equals the containment reference") {
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        const int patch = 16 << rng.next_int(0, 3);
        const int grid = 1 << rng.next_int(0, 3);
        auto boxes = random_boxes(rng, patch, 8);
        GridLabels got = assign_center(boxes, patch, grid);
        auto want = oracle::center_labels_reference(boxes, patch, grid);
        CHECK(got.target == want);

        // Each center lands in exactly one cell, so positives never exceed
        // the box count and match the distinct-cell count.
        std::set<std::pair<int, int>> cells;
        for (const auto& b : boxes) {
            cells.insert({static_cast<int>(b.center_y() * grid / patch),
                          static_cast<int>(b.center_x() * grid / patch)});
        }
        CHECK(got.positives() == static_cast<int>(cells.size()));
        CHECK(got.positives() <= static_cast<int>(boxes.size()));
    }
}

TEST_CASE("iof assignment thresholds on cell coverage") {
    // Box covering a whole 16px cell exactly: positive.
    GroundTruthBox full{16, 16, 32, 32, 0};
    GridLabels labels = assign_iof({full}, 128, 8, 0.5, 0.1);
    CHECK(labels.target[1 * 8 + 1] == 1);
    CHECK(labels.ignore[1 * 8 + 1] == 0);

    // Box of ~0.33 cell area inside one cell: ignored there (12x7 = 84 px
    // against the 256 px cell).
    GroundTruthBox small{16, 16, 28, 23, 0};
    GridLabels l2 = assign_iof({small}, 128, 8, 0.5, 0.1);
    CHECK(l2.target[1 * 8 + 1] == 0);
    CHECK(l2.ignore[1 * 8 + 1] == 1);

    // Cells untouched by any box are plain negatives.
    CHECK(l2.target[0] == 0);
    CHECK(l2.ignore[0] == 0);

    CHECK_THROWS_AS(assign_iof({full}, 128, 8, 0.1, 0.5), ValidationError);

    // target and ignore are mutually exclusive everywhere.
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto boxes = random_boxes(rng, 64, 6);
        GridLabels l = assign_iof(boxes, 64, 8, 0.5, 0.1);
        for (std::size_t i = 0; i < l.target.size(); ++i) {
            CHECK((l.target[i] & l.ignore[i]) == 0);
        }
    }
}

TEST_CASE("iof assignment equals the rasterization reference") {
    Rng rng(505);
    for (int trial = 0; trial < 300; ++trial) {
        const int grid = 1 << rng.next_int(1, 3);
        const int patch = grid * rng.next_int(2, 12);
        auto boxes = random_boxes(rng, patch, 6);
        GridLabels got = assign_iof(boxes, patch, grid, 0.5, 0.1);
        auto want = oracle::iof_labels_reference(boxes, patch, grid, 0.5, 0.1);
        CHECK(got.target == want.target);
        CHECK(got.ignore == want.ignore);
    }
}

TEST_CASE("tile planning basics") {
    CHECK(plan_tiles(1024, 1024, 824) == std::vector<int>{0});
    CHECK(plan_tiles(500, 1024, 824) == std::vector<int>{0});
    CHECK(plan_tiles(4000, 1024, 824) == std::vector<int>{0, 824, 1648, 2472, 2976});
    CHECK_THROWS_AS(plan_tiles(100, 0, 10), ValidationError);
    CHECK_THROWS_AS(plan_tiles(100, 64, 0), ValidationError);
    CHECK_THROWS_AS(plan_tiles(100, 64, 65), ValidationError);
}

TEST_CASE("tile planning reproduces the large-scene patch count") {
    const auto xs = plan_tiles(29200, 1024, 824);
    const auto ys = plan_tiles(27620, 1024, 824);
    CHECK(xs.size() == 36);
    CHECK(ys.size() == 34);
    CHECK(xs.size() * ys.size() == 1224);
    CHECK(xs.front() == 0);
    CHECK(xs.back() == 29200 - 1024);
    CHECK(ys.back() == 27620 - 1024);
}

TEST_CASE("tile planning matches the scan reference on random inputs") {
    Rng rng(606);
    for (int trial = 0; trial < 1000; ++trial) {
        const int patch = rng.next_int(1, 200);
        const int stride = rng.next_int(1, patch);
        const int extent = rng.next_int(1, 2000);
        const auto got = plan_tiles(extent, patch, stride);
        const auto want = oracle::tile_origins_reference(extent, patch, stride);
        CHECK(got == want);
        if (extent > patch) {
            const std::size_t formula =
                static_cast<std::size_t>((extent - patch + stride - 1) / stride) + 1;
            CHECK(got.size() == formula);
        }
        // Coverage: every pixel belongs to some window.
        std::vector<char> covered(static_cast<std::size_t>(std::max(extent, patch)), 0);
        for (int o : got) {
            for (int p = o; p < o + patch; ++p) covered[static_cast<std::size_t>(p)] = 1;
        }
        for (int p = 0; p < extent; ++p) CHECK(covered[static_cast<std::size_t>(p)] == 1);
        // Origins sorted, gaps never exceed the stride.
        for (std::size_t i = 1; i < got.size(); ++i) {
            CHECK(got[i] > got[i - 1]);
            CHECK(got[i] - got[i - 1] <= stride);
        }
    }
}

TEST_CASE("patch cropping translates pixels and boxes") {
    AnnotatedScene scene;
    scene.width = 10;
    scene.height = 6;
    scene.raster.resize(60);
    for (int i = 0; i < 60; ++i) scene.raster[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    scene.boxes.push_back({1, 1, 3, 3, 0}); // center (2,2)
    scene.boxes.push_back({6, 2, 9, 5, 1}); // center (7.5, 3.5)

    TilePlan plan = TilePlan::make(10, 6, 4, 3);
    CHECK(plan.origins_x == std::vector<int>{0, 3, 6});
    CHECK(plan.origins_y == std::vector<int>{0, 2});

    auto patches = crop_patches(scene, plan);
    REQUIRE(patches.size() == plan.count());
    // Patch at origin (0,0) holds raster rows 0..3, cols 0..3.
    CHECK(patches[0].raster[0] == 0);
    CHECK(patches[0].raster[5] == 11);
    REQUIRE(patches[0].boxes.size() == 1);
    CHECK(patches[0].boxes[0].x_min == 1);
    CHECK(patches[0].boxes[0].class_id == 0);
}

TEST_CASE("box membership follows half-open window intervals") {
    // Center at 900 on both axes with windows at 0 and 824 belongs to all
    // four overlapping windows.
    AnnotatedScene scene;
    scene.width = 1848;
    scene.height = 1848;
    scene.raster.assign(static_cast<std::size_t>(1848) * 1848, 0);
    scene.boxes.push_back({890, 890, 910, 910, 0});
    TilePlan plan = TilePlan::make(1848, 1848, 1024, 824);
    CHECK(plan.count() == 4);
    auto patches = crop_patches(scene, plan);
    int hits = 0;
    for (const auto& p : patches) hits += static_cast<int>(p.boxes.size());
    CHECK(hits == 4);

    auto cover = object_cover(scene.boxes, plan);
    REQUIRE(cover.size() == 1);
    CHECK(cover[0].size() == 4);

    // A center exactly on an origin boundary belongs to both covering
    // windows (half-open test, no exclusions).
    CHECK(center_in_window(GroundTruthBox{823, 0, 825, 2, 0}, 0, 0, 1024));
    CHECK(center_in_window(GroundTruthBox{823, 0, 825, 2, 0}, 824, 0, 1024));
    CHECK_FALSE(center_in_window(GroundTruthBox{1023, 0, 1025, 2, 0}, 0, 0, 1024));
}

TEST_CASE("small scenes are zero padded to the patch size") {
    AnnotatedScene scene;
    scene.width = 3;
    scene.height = 2;
    scene.raster = {10, 20, 30, 40, 50, 60};
    scene.boxes.push_back({0, 0, 2, 2, 1});
    TilePlan plan = TilePlan::make(3, 2, 4, 4);
    CHECK(plan.count() == 1);
    auto patches = crop_patches(scene, plan);
    REQUIRE(patches.size() == 1);
    const auto& r = patches[0].raster;
    REQUIRE(r.size() == 16);
    CHECK(r[0] == 10);
    CHECK(r[2] == 30);
    CHECK(r[3] == 0);
    CHECK(r[4] == 40);
    CHECK(r[11] == 0);
    CHECK(r[15] == 0);
    REQUIRE(patches[0].boxes.size() == 1);
}

TEST_CASE("every box center is covered by at least one patch") {
    Rng rng(707);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = rng.next_int(40, 300);
        const int h = rng.next_int(40, 300);
        const int patch = rng.next_int(16, 40);
        const int stride = rng.next_int(1, patch);
        AnnotatedScene scene;
        scene.width = w;
        scene.height = h;
        scene.raster.assign(static_cast<std::size_t>(w) * h, 0);
        for (int i = 0; i < 12; ++i) {
            GroundTruthBox b;
            b.x_min = rng.next_int(0, w - 2);
            b.y_min = rng.next_int(0, h - 2);
            b.x_max = b.x_min + rng.next_int(1, std::min(20, w - b.x_min));
            b.y_max = b.y_min + rng.next_int(1, std::min(20, h - b.y_min));
            scene.boxes.push_back(b);
        }
        TilePlan plan = TilePlan::make(w, h, patch, stride);
        auto cover = object_cover(scene.boxes, plan);
        for (const auto& c : cover) CHECK(!c.empty());

        // Cross-check cover lists against the cropper's membership.
        auto patches = crop_patches(scene, plan);
        std::size_t assigned = 0;
        for (const auto& p : patches) assigned += p.boxes.size();
        std::size_t expected = 0;
        for (const auto& c : cover) expected += c.size();
        CHECK(assigned == expected);
    }
}

TEST_CASE("to_global is a pure translation and inverts patch coordinates") {
    Detection d;
    d.box = {10, 10, 20, 20};
    d.class_id = 2;
    d.score = 0.7;
    Detection g = to_global(d, 824, 0);
    CHECK(g.box.x_min == 834);
    CHECK(g.box.x_max == 844);
    CHECK(g.box.y_min == 10);
    CHECK(g.box.y_max == 20);
    CHECK(g.class_id == 2);
    CHECK(g.score == 0.7);
    Detection back = to_global(g, -824, 0);
    CHECK(back.box.x_min == d.box.x_min);

    Detection same = to_global(d, 0, 0);
    CHECK(same.box.x_min == d.box.x_min);
    CHECK(same.box.y_max == d.box.y_max);
}
