#include <algorithm>
#include <cmath>
#include <string>

#include "core/errors.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"

namespace oandet {

namespace {

constexpr double kBackgroundLevel = 26.0;

std::uint8_t clamp_u8(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

struct DrawResult {
    bool any = false;
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    void cover(int x, int y) {
        if (!any) {
            x_min = x; y_min = y; x_max = x + 1; y_max = y + 1;
            any = true;
            return;
        }
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x + 1);
        y_max = std::max(y_max, y + 1);
    }
};

// Filled axis-aligned rectangle, clipped to the image. Bounds come straight
// from the painted pixels so the annotation is tight by construction.
DrawResult draw_rect(AnnotatedScene& scene, double cx, double cy, double w, double h,
                     std::uint8_t level) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - 0.5 * w)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - 0.5 * h)));
    const int x1 = std::min(scene.width, static_cast<int>(std::floor(cx + 0.5 * w)));
    const int y1 = std::min(scene.height, static_cast<int>(std::floor(cy + 0.5 * h)));
    DrawResult r;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            scene.raster[static_cast<std::size_t>(y) * scene.width + x] = level;
            r.cover(x, y);
        }
    }
    return r;
}

DrawResult draw_ellipse(AnnotatedScene& scene, double cx, double cy, double w, double h,
                        std::uint8_t level) {
    const double a = 0.5 * w;
    const double b = 0.5 * h;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - a)) - 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - b)) - 1);
    const int x1 = std::min(scene.width, static_cast<int>(std::ceil(cx + a)) + 1);
    const int y1 = std::min(scene.height, static_cast<int>(std::ceil(cy + b)) + 1);
    DrawResult r;
    for (int y = y0; y < y1; ++y) {
        const double dy = (y + 0.5 - cy) / b;
        for (int x = x0; x < x1; ++x) {
            const double dx = (x + 0.5 - cx) / a;
            if (dx * dx + dy * dy <= 1.0) {
                scene.raster[static_cast<std::size_t>(y) * scene.width + x] = level;
                r.cover(x, y);
            }
        }
    }
    return r;
}

} // namespace

void SceneSpec::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ValidationError("scene spec field '" + field + "' " + why);
    };
    if (width < 1) fail("width", "must be >= 1");
    if (height < 1) fail("height", "must be >= 1");
    if (num_clusters < 0) fail("num_clusters", "must be >= 0");
    if (objects_per_cluster.min_count < 0) fail("objects_per_cluster", "must be >= 0");
    if (objects_per_cluster.max_count < objects_per_cluster.min_count) {
        fail("objects_per_cluster", "has empty range");
    }
    if (cluster_radius <= 0.0) fail("cluster_radius", "must be > 0");
    if (num_classes < 1) fail("num_classes", "must be >= 1");
    if (object_size.size() != static_cast<std::size_t>(num_classes)) {
        fail("object_size", "must have one range per class");
    }
    for (const SizeRange& s : object_size) {
        if (s.min_px < 4.0) fail("object_size", "minimum must be >= 4 px");
        if (s.max_px < s.min_px) fail("object_size", "has empty range");
    }
    if (background_noise_sigma < 0.0) fail("background_noise_sigma", "must be >= 0");
}

AnnotatedScene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    AnnotatedScene scene;
    scene.width = spec.width;
    scene.height = spec.height;
    scene.raster.resize(static_cast<std::size_t>(spec.width) * spec.height);

    for (std::uint8_t& px : scene.raster) {
        px = clamp_u8(kBackgroundLevel + spec.background_noise_sigma * rng.next_normal());
    }

    for (int cluster = 0; cluster < spec.num_clusters; ++cluster) {
        const double ccx = rng.next_range(0.0, spec.width);
        const double ccy = rng.next_range(0.0, spec.height);
        const int count = rng.next_int(spec.objects_per_cluster.min_count,
                                       spec.objects_per_cluster.max_count);
        for (int obj = 0; obj < count; ++obj) {
            // Uniform over the cluster disc; pairwise distances stay well
            // under the 2r diameter bound.
            const double angle = rng.next_range(0.0, 6.283185307179586);
            const double radius = spec.cluster_radius * std::sqrt(rng.next_double());
            const double cx = ccx + radius * std::cos(angle);
            const double cy = ccy + radius * std::sin(angle);

            const int class_id = rng.next_int(0, spec.num_classes - 1);
            const SizeRange& size = spec.object_size[static_cast<std::size_t>(class_id)];
            const double w = rng.next_range(size.min_px, size.max_px);
            const double h = rng.next_range(size.min_px, size.max_px);
            // Class intensities sit in distinct bright bands so classes stay
            // separable for a small detector.
            const double band_lo = 120.0 + 40.0 * (class_id % 3);
            const std::uint8_t level = clamp_u8(band_lo + rng.next_range(0.0, 30.0));
            const bool ellipse = rng.next_double() < 0.5;

            const DrawResult drawn =
                ellipse ? draw_ellipse(scene, cx, cy, w, h, level)
                        : draw_rect(scene, cx, cy, w, h, level);
            // Objects whose center landed outside the frame may paint nothing;
            // those simply do not exist in the annotation.
            if (!drawn.any) continue;
            scene.boxes.push_back(GroundTruthBox{drawn.x_min, drawn.y_min, drawn.x_max,
                                                 drawn.y_max, class_id});
        }
    }
    return scene;
}

} // namespace oandet
