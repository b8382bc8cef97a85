#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/pgm.hpp"
#include "core/scene.hpp"
#include "core/tiler.hpp"

#include "helpers.hpp"

using namespace oandet;

TEST_CASE("scene generation is a pure function of the spec") {
    SceneSpec spec = testutil::tiny_scene_spec();
    spec.seed = 33;
    AnnotatedScene a = generate_scene(spec);
    AnnotatedScene b = generate_scene(spec);
    CHECK(a.raster == b.raster);
    REQUIRE(a.boxes.size() == b.boxes.size());
    for (std::size_t i = 0; i < a.boxes.size(); ++i) {
        CHECK(a.boxes[i].x_min == b.boxes[i].x_min);
        CHECK(a.boxes[i].y_max == b.boxes[i].y_max);
        CHECK(a.boxes[i].class_id == b.boxes[i].class_id);
    }
    spec.seed = 34;
    AnnotatedScene c = generate_scene(spec);
    CHECK(a.raster != c.raster);
}

TEST_CASE("scene with zero clusters is pure noise") {
    SceneSpec spec = testutil::tiny_scene_spec();
    spec.num_clusters = 0;
    spec.seed = 1;
    AnnotatedScene s = generate_scene(spec);
    CHECK(s.boxes.empty());
    CHECK(s.raster.size() == static_cast<std::size_t>(spec.width) * spec.height);
    // Noise, not a constant field.
    std::set<std::uint8_t> levels(s.raster.begin(), s.raster.end());
    CHECK(levels.size() > 1);
}

TEST_CASE("generated boxes respect bounds ordering and clustering") {
    Rng rng(55);
    for (int trial = 0; trial < 60; ++trial) {
        SceneSpec spec = testutil::tiny_scene_spec();
        spec.width = rng.next_int(64, 200);
        spec.height = rng.next_int(64, 200);
        spec.num_clusters = rng.next_int(0, 4);
        spec.seed = rng.next_u64();
        AnnotatedScene s = generate_scene(spec);
        for (const auto& b : s.boxes) {
            CHECK(b.x_min < b.x_max);
            CHECK(b.y_min < b.y_max);
            CHECK(b.x_min >= 0);
            CHECK(b.y_min >= 0);
            CHECK(b.x_max <= spec.width);
            CHECK(b.y_max <= spec.height);
            CHECK(b.class_id >= 0);
            CHECK(b.class_id < spec.num_classes);
        }
    }

    // Objects gather around their cluster center: with a single cluster the
    // mean pairwise center distance stays within the cluster diameter plus
    // the largest object extent.
    int tight = 0, total = 0;
    for (int seed = 0; seed < 100; ++seed) {
        SceneSpec spec = testutil::tiny_scene_spec();
        spec.width = 256;
        spec.height = 256;
        spec.num_clusters = 1;
        spec.objects_per_cluster = {4, 4};
        spec.seed = static_cast<std::uint64_t>(seed) + 1000;
        AnnotatedScene s = generate_scene(spec);
        if (s.boxes.size() < 2) continue;
        double sum = 0.0;
        int pairs = 0;
        for (std::size_t i = 0; i < s.boxes.size(); ++i) {
            for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
                const double dx = s.boxes[i].center_x() - s.boxes[j].center_x();
                const double dy = s.boxes[i].center_y() - s.boxes[j].center_y();
                sum += std::sqrt(dx * dx + dy * dy);
                ++pairs;
            }
        }
        ++total;
        if (sum / pairs <= 2.0 * spec.cluster_radius) ++tight;
    }
    CHECK(total > 50);
    CHECK(tight >= total * 9 / 10);
}

TEST_CASE("objects are brighter than the background they sit on") {
    SceneSpec spec = testutil::tiny_scene_spec();
    spec.width = 256;
    spec.height = 256;
    spec.num_clusters = 3;
    spec.seed = 77;
    AnnotatedScene s = generate_scene(spec);
    REQUIRE(!s.boxes.empty());
    double inside = 0.0, count = 0.0;
    for (const auto& b : s.boxes) {
        for (int y = b.y_min; y < b.y_max; ++y) {
            for (int x = b.x_min; x < b.x_max; ++x) {
                inside += s.raster[static_cast<std::size_t>(y) * spec.width + x];
                count += 1.0;
            }
        }
    }
    double overall = 0.0;
    for (std::uint8_t v : s.raster) overall += v;
    overall /= static_cast<double>(s.raster.size());
    CHECK(inside / count > overall + 30.0);
}

TEST_CASE("denser cluster counts reduce empty tiles") {
    const auto empty_fraction = [](int clusters) {
        double empties = 0.0, tiles = 0.0;
        for (int seed = 0; seed < 50; ++seed) {
            SceneSpec spec;
            spec.width = 512;
            spec.height = 512;
            spec.num_clusters = clusters;
            spec.seed = static_cast<std::uint64_t>(seed) * 31 + 7;
            AnnotatedScene s = generate_scene(spec);
            TilePlan plan = TilePlan::make(512, 512, 128, 128);
            auto cover = object_cover(s.boxes, plan);
            std::set<int> occupied;
            for (const auto& c : cover) occupied.insert(c.begin(), c.end());
            tiles += static_cast<double>(plan.count());
            empties += static_cast<double>(plan.count() - occupied.size());
        }
        return empties / tiles;
    };
    const double sparse = empty_fraction(1);
    const double mid = empty_fraction(4);
    const double dense = empty_fraction(12);
    CHECK(sparse > mid);
    CHECK(mid > dense);
}

TEST_CASE("scene spec validation names the offending field") {
    SceneSpec spec = testutil::tiny_scene_spec();
    spec.width = 0;
    CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("width"), ValidationError);

    spec = testutil::tiny_scene_spec();
    spec.object_size[0] = {2.0, 8.0}; // min below 4 px
    CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("object_size"), ValidationError);

    spec = testutil::tiny_scene_spec();
    spec.objects_per_cluster = {5, 2};
    CHECK_THROWS_AS(spec.validate(), ValidationError);

    spec = testutil::tiny_scene_spec();
    spec.num_classes = 0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);

    spec = testutil::tiny_scene_spec();
    spec.object_size.resize(1); // fewer entries than classes
    CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("pgm writes the documented header and round trips") {
    const auto dir = testutil::fresh_dir("pgm");
    const std::string path = (dir / "img.pgm").string();

    std::vector<std::uint8_t> pixels(64 * 64);
    Rng rng(9);
    for (auto& p : pixels) p = static_cast<std::uint8_t>(rng.next_int(0, 255));
    write_pgm(path, 64, 64, pixels);

    std::ifstream f(path, std::ios::binary);
    std::string header(13, '\0');
    f.read(header.data(), 13);
    CHECK(header == "P5\n64 64\n255\n");
    f.seekg(0, std::ios::end);
    CHECK(f.tellg() == 13 + 64 * 64);

    const PgmImage back = read_pgm(path);
    CHECK(back.width == 64);
    CHECK(back.height == 64);
    CHECK(back.pixels == pixels);
}

TEST_CASE("pgm reader tolerates comments and rejects junk") {
    const auto dir = testutil::fresh_dir("pgm2");

    const std::string commented = (dir / "c.pgm").string();
    {
        std::ofstream f(commented, std::ios::binary);
        f << "P5\n# a comment line\n2 2\n# again\n255\n";
        f.write("\x01\x02\x03\x04", 4);
    }
    const PgmImage px = read_pgm(commented);
    CHECK(px.width == 2);
    CHECK(px.height == 2);
    CHECK(px.pixels == std::vector<std::uint8_t>{1, 2, 3, 4});

    const std::string bad_magic = (dir / "bad.pgm").string();
    {
        std::ofstream f(bad_magic, std::ios::binary);
        f << "P6\n2 2\n255\n....";
    }
    CHECK_THROWS_AS(read_pgm(bad_magic), IoError);

    const std::string truncated = (dir / "short.pgm").string();
    {
        std::ofstream f(truncated, std::ios::binary);
        f << "P5\n4 4\n255\n";
        f.write("\x01\x02", 2);
    }
    CHECK_THROWS_AS(read_pgm(truncated), IoError);

    CHECK_THROWS_AS(read_pgm((dir / "nope.pgm").string()), IoError);
}

TEST_CASE("datasets round trip through the manifest") {
    const auto dir = testutil::fresh_dir("dataset");
    std::vector<AnnotatedScene> scenes;
    Rng rng(14);
    for (int i = 0; i < 20; ++i) {
        SceneSpec spec = testutil::tiny_scene_spec();
        spec.seed = rng.next_u64();
        scenes.push_back(generate_scene(spec));
    }
    const std::string manifest = write_dataset(scenes, dir.string());
    auto back = read_dataset(manifest);
    REQUIRE(back.size() == scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        CHECK(back[i].width == scenes[i].width);
        CHECK(back[i].raster == scenes[i].raster);
        REQUIRE(back[i].boxes.size() == scenes[i].boxes.size());
        for (std::size_t j = 0; j < scenes[i].boxes.size(); ++j) {
            CHECK(back[i].boxes[j].x_min == scenes[i].boxes[j].x_min);
            CHECK(back[i].boxes[j].y_min == scenes[i].boxes[j].y_min);
            CHECK(back[i].boxes[j].x_max == scenes[i].boxes[j].x_max);
            CHECK(back[i].boxes[j].y_max == scenes[i].boxes[j].y_max);
            CHECK(back[i].boxes[j].class_id == scenes[i].boxes[j].class_id);
        }
    }

    // Empty dataset still produces a readable manifest.
    const auto dir2 = testutil::fresh_dir("dataset0");
    const std::string empty_manifest = write_dataset({}, dir2.string());
    CHECK(read_dataset(empty_manifest).empty());

    CHECK_THROWS_AS(read_dataset((dir2 / "missing.json").string()), IoError);
}

TEST_CASE("config defaults parse and hash stably") {
    RunConfig cfg = parse_config(nlohmann::json::object());
    CHECK(cfg.seed == 1);
    CHECK(cfg.num_scenes == 200);
    CHECK(cfg.model.patch_size == 128);
    CHECK(cfg.model.stride == 104);
    CHECK(cfg.model.grid_size == 8);
    CHECK(cfg.model.lambda == doctest::Approx(4.0));
    CHECK(cfg.model.gate_k == doctest::Approx(4.0));
    CHECK(cfg.model.keep_threshold == doctest::Approx(0.05));
    CHECK(cfg.model.nms_iou == doctest::Approx(0.1));
    CHECK(cfg.train.sgd.learning_rate == doctest::Approx(0.01));
    CHECK(cfg.train.sgd.decay_epochs == std::vector<int>{8, 11});
    CHECK(cfg.train.sgd.epochs == 12);

    const std::uint64_t h1 = config_hash(cfg);
    const std::uint64_t h2 = config_hash(parse_config(nlohmann::json::object()));
    CHECK(h1 == h2);

    RunConfig other = parse_config({{"seed", 2}});
    CHECK(config_hash(other) != h1);

    // Explicitly restating a default hashes the same as omitting it.
    RunConfig restated = parse_config({{"train", {{"epochs", 12}}}});
    CHECK(config_hash(restated) == h1);
}

TEST_CASE("config seeds derive distinct scene specs") {
    RunConfig cfg = parse_config(nlohmann::json::object());
    SceneSpec s0 = cfg.scene_spec_for(0);
    SceneSpec s1 = cfg.scene_spec_for(1);
    CHECK(s0.seed != s1.seed);
    CHECK(s0.width == cfg.scene.width);
}

TEST_CASE("config rejects unknown keys and aggregates violations") {
    nlohmann::json doc = {
        {"sede", 4},                                 // typo at top level
        {"train", {{"learning_rate", -1.0}}},        // semantic violation
        {"model", {{"stage_channels", {8, 16}}, {"mystery", 1}}},
    };
    try {
        parse_config(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("sede") != std::string::npos);
        CHECK(msg.find("learning_rate") != std::string::npos);
        CHECK(msg.find("mystery") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_config({{"tiling", {{"patch_size", "wide"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config_text("not json at all"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[1,2,3]"), ConfigError);
    CHECK_NOTHROW(parse_config_text("{}"));
}

TEST_CASE("config round trips through its effective document") {
    nlohmann::json doc = {
        {"seed", 9},
        {"dataset", {{"num_scenes", 12}}},
        {"scene", {{"width", 256}, {"height", 256}, {"num_clusters", 3}}},
        {"tiling", {{"patch_size", 64}, {"stride", 48}}},
        {"model", {{"stage_channels", {4, 8, 16}}, {"grid_size", 8}}},
        {"loss", {{"lambda", 2.0}}},
        {"train", {{"epochs", 3}, {"include_empty_patches", true}}},
        {"gate", {{"k", 5.0}}},
        {"infer", {{"score_keep_threshold", 0.1}}},
    };
    RunConfig cfg = parse_config(doc);
    CHECK(cfg.num_scenes == 12);
    CHECK(cfg.scene.width == 256);
    CHECK(cfg.model.patch_size == 64);
    CHECK(cfg.model.stride == 48);
    CHECK(cfg.model.stage_channels == std::vector<int>{4, 8, 16});
    CHECK(cfg.model.lambda == doctest::Approx(2.0));
    CHECK(cfg.model.gate_k == doctest::Approx(5.0));
    CHECK(cfg.model.keep_threshold == doctest::Approx(0.1));
    CHECK(cfg.train.sgd.epochs == 3);
    CHECK(cfg.train.include_empty_patches);
    // model class count follows the scene spec
    CHECK(cfg.model.num_classes == cfg.scene.num_classes);

    RunConfig again = parse_config(effective_config_json(cfg));
    CHECK(config_hash(again) == config_hash(cfg));
}

TEST_CASE("assignment strategy parses from config text") {
    RunConfig center = parse_config({{"train", {{"assignment", "center"}}}});
    CHECK(center.train.assignment == Assignment::kCenter);
    RunConfig iof = parse_config({{"train", {{"assignment", "iof"}}}});
    CHECK(iof.train.assignment == Assignment::kIof);
    CHECK_THROWS_AS(parse_config({{"train", {{"assignment", "nearest"}}}}), ConfigError);
}
