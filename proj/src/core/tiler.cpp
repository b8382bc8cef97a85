#include "core/tiler.hpp"

#include <algorithm>
#include <cstring>

#include "core/errors.hpp"

namespace oandet {

std::vector<int> plan_tiles(int extent, int patch, int stride) {
    if (extent <= 0) throw ValidationError("tile extent must be positive");
    if (patch <= 0) throw ValidationError("patch size must be positive");
    if (stride <= 0 || stride > patch) {
        throw ValidationError("tile stride must be in (0, patch]");
    }
    if (extent <= patch) return {0};

    std::vector<int> origins;
    for (int o = 0; o + patch <= extent; o += stride) origins.push_back(o);
    if (origins.back() != extent - patch) origins.push_back(extent - patch);
    return origins;
}

TilePlan TilePlan::make(int width, int height, int patch, int stride) {
    TilePlan plan;
    plan.patch = patch;
    plan.stride = stride;
    plan.origins_x = plan_tiles(width, patch, stride);
    plan.origins_y = plan_tiles(height, patch, stride);
    return plan;
}

bool center_in_window(const GroundTruthBox& box, int x0, int y0, int patch) {
    const double cx = box.center_x();
    const double cy = box.center_y();
    return cx >= x0 && cx < x0 + patch && cy >= y0 && cy < y0 + patch;
}

std::vector<PatchSample> crop_patches(const AnnotatedScene& scene, const TilePlan& plan) {
    std::vector<PatchSample> patches;
    patches.reserve(plan.count());
    const int P = plan.patch;

    for (int oy : plan.origins_y) {
        for (int ox : plan.origins_x) {
            PatchSample sample;
            sample.x0 = ox;
            sample.y0 = oy;
            sample.patch = P;
            sample.raster.assign(static_cast<std::size_t>(P) * P, 0);

            // Copy the overlapping region; anything past the scene edge stays
            // zero (small scenes get padded out to a full window).
            const int copy_w = std::min(P, scene.width - ox);
            const int copy_h = std::min(P, scene.height - oy);
            for (int y = 0; y < copy_h; ++y) {
                std::memcpy(sample.raster.data() + static_cast<std::size_t>(y) * P,
                            scene.raster.data() +
                                static_cast<std::size_t>(oy + y) * scene.width + ox,
                            static_cast<std::size_t>(copy_w));
            }

            for (const GroundTruthBox& box : scene.boxes) {
                if (!center_in_window(box, ox, oy, P)) continue;
                GroundTruthBox local = box;
                local.x_min = std::max(box.x_min - ox, 0);
                local.y_min = std::max(box.y_min - oy, 0);
                local.x_max = std::min(box.x_max - ox, P);
                local.y_max = std::min(box.y_max - oy, P);
                if (!local.valid()) continue;
                sample.boxes.push_back(local);
            }
            patches.push_back(std::move(sample));
        }
    }
    return patches;
}

std::vector<std::vector<int>> object_cover(const std::vector<GroundTruthBox>& boxes,
                                           const TilePlan& plan) {
    std::vector<std::vector<int>> cover(boxes.size());
    const int nx = static_cast<int>(plan.origins_x.size());
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        for (std::size_t iy = 0; iy < plan.origins_y.size(); ++iy) {
            for (std::size_t ix = 0; ix < plan.origins_x.size(); ++ix) {
                if (center_in_window(boxes[b], plan.origins_x[ix], plan.origins_y[iy],
                                     plan.patch)) {
                    cover[b].push_back(static_cast<int>(iy) * nx + static_cast<int>(ix));
                }
            }
        }
    }
    return cover;
}

Detection to_global(const Detection& det, int x0, int y0) {
    Detection out = det;
    out.box.x_min += x0;
    out.box.x_max += x0;
    out.box.y_min += y0;
    out.box.y_max += y0;
    return out;
}

} // namespace oandet
