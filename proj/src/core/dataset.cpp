#include "core/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "core/errors.hpp"
#include "core/pgm.hpp"

namespace oandet {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open json file", path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed json", path);
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open json file for writing", path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing json file", path);
}

std::string scene_stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%04zu", index);
    return buf;
}

} // namespace

void write_annotation(const std::string& path, int width, int height,
                      const std::vector<GroundTruthBox>& boxes) {
    json j;
    j["width"] = width;
    j["height"] = height;
    json arr = json::array();
    for (const auto& b : boxes) {
        arr.push_back({{"x_min", b.x_min},
                       {"y_min", b.y_min},
                       {"x_max", b.x_max},
                       {"y_max", b.y_max},
                       {"class_id", b.class_id}});
    }
    j["boxes"] = std::move(arr);
    write_json_file(path, j);
}

std::vector<GroundTruthBox> read_annotation(const std::string& path, int* width,
                                            int* height) {
    const json j = load_json_file(path);
    try {
        if (width) *width = j.at("width").get<int>();
        if (height) *height = j.at("height").get<int>();
        std::vector<GroundTruthBox> boxes;
        for (const auto& jb : j.at("boxes")) {
            GroundTruthBox b;
            b.x_min = jb.at("x_min").get<int>();
            b.y_min = jb.at("y_min").get<int>();
            b.x_max = jb.at("x_max").get<int>();
            b.y_max = jb.at("y_max").get<int>();
            b.class_id = jb.at("class_id").get<int>();
            boxes.push_back(b);
        }
        return boxes;
    } catch (const json::exception& e) {
        throw IoError(std::string("bad annotation (") + e.what() + ")", path);
    }
}

std::string write_dataset(const std::vector<AnnotatedScene>& scenes,
                          const std::string& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("cannot create dataset directory", directory);

    json manifest = json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const AnnotatedScene& scene = scenes[i];
        const std::string stem = scene_stem(i);
        const std::string image_name = stem + ".pgm";
        const std::string ann_name = stem + ".json";
        write_pgm((fs::path(directory) / image_name).string(), scene.width,
                  scene.height, scene.raster);
        write_annotation((fs::path(directory) / ann_name).string(), scene.width,
                         scene.height, scene.boxes);
        manifest.push_back({{"image", image_name}, {"annotation", ann_name}});
    }
    const std::string manifest_path = (fs::path(directory) / "manifest.json").string();
    write_json_file(manifest_path, manifest);
    return manifest_path;
}

std::vector<AnnotatedScene> read_dataset(const std::string& manifest_path) {
    const json manifest = load_json_file(manifest_path);
    if (!manifest.is_array()) {
        throw IoError("manifest must be a json array", manifest_path);
    }
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<AnnotatedScene> scenes;
    scenes.reserve(manifest.size());
    for (const auto& entry : manifest) {
        std::string image, annotation;
        try {
            image = entry.at("image").get<std::string>();
            annotation = entry.at("annotation").get<std::string>();
        } catch (const json::exception& e) {
            throw IoError(std::string("bad manifest entry (") + e.what() + ")",
                          manifest_path);
        }
        const PgmImage img = read_pgm((base / image).string());
        AnnotatedScene scene;
        scene.width = img.width;
        scene.height = img.height;
        scene.raster = img.pixels;

        int ann_w = 0, ann_h = 0;
        scene.boxes = read_annotation((base / annotation).string(), &ann_w, &ann_h);
        if (ann_w != img.width || ann_h != img.height) {
            throw IoError("annotation dimensions do not match image", (base / annotation).string());
        }
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

} // namespace oandet
