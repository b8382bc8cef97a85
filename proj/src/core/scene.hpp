#pragma once

#include <cstdint>
#include <vector>

#include "core/geometry.hpp"

namespace oandet {

struct CountRange {
    int min_count = 0;
    int max_count = 0;
};

struct SizeRange {
    double min_px = 0.0;
    double max_px = 0.0;
};

// Recipe for one synthetic scene: bright blob-like objects grouped in
// clusters on a dark noisy background, mimicking sparse overhead imagery.
struct SceneSpec {
    int width = 512;
    int height = 512;
    int num_clusters = 7;
    CountRange objects_per_cluster{2, 6};
    double cluster_radius = 48.0;
    // Per class, sampled independently for each axis.
    std::vector<SizeRange> object_size = {{8.0, 16.0}, {10.0, 20.0}, {12.0, 24.0}};
    int num_classes = 3;
    double background_noise_sigma = 8.0;
    std::uint64_t seed = 0;

    // Throws ValidationError naming the offending field.
    void validate() const;
};

struct AnnotatedScene {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> raster; // row-major grayscale
    std::vector<GroundTruthBox> boxes;
};

AnnotatedScene generate_scene(const SceneSpec& spec);

} // namespace oandet
