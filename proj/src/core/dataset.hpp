#pragma once

#include <string>
#include <vector>

#include "core/scene.hpp"

namespace oandet {

struct ManifestEntry {
    std::string image;      // path relative to the manifest
    std::string annotation;
};

// Writes scene_NNNN.pgm plus scene_NNNN.json per scene and a manifest.json
// listing them; returns the manifest path.
std::string write_dataset(const std::vector<AnnotatedScene>& scenes,
                          const std::string& directory);

std::vector<AnnotatedScene> read_dataset(const std::string& manifest_path);

// Annotation JSON: {"width", "height", "boxes": [{x_min, y_min, x_max, y_max,
// class_id}, ...]}.
void write_annotation(const std::string& path, int width, int height,
                      const std::vector<GroundTruthBox>& boxes);

std::vector<GroundTruthBox> read_annotation(const std::string& path, int* width = nullptr,
                                            int* height = nullptr);

} // namespace oandet
