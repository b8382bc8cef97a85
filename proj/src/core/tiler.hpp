#pragma once

#include <cstdint>
#include <vector>

#include "core/geometry.hpp"
#include "core/scene.hpp"

namespace oandet {

// Sliding-window origins along one axis: 0, s, 2s, ... while the window fits,
// plus a final origin flush with the far edge when the regular grid does not
// already land there. extent <= patch collapses to a single origin at 0.
std::vector<int> plan_tiles(int extent, int patch, int stride);

struct TilePlan {
    int patch = 0;
    int stride = 0;
    std::vector<int> origins_x;
    std::vector<int> origins_y;

    static TilePlan make(int width, int height, int patch, int stride);

    std::size_t count() const { return origins_x.size() * origins_y.size(); }
    // Row-major patch index: iy * origins_x.size() + ix.
    int origin_x(std::size_t index) const { return origins_x[index % origins_x.size()]; }
    int origin_y(std::size_t index) const { return origins_y[index / origins_x.size()]; }
};

// One cropped window. Boxes are translated into patch coordinates and clipped
// to the window; a box belongs to the patch iff its center lies inside it
// (half-open, so each center belongs to every window covering it).
struct PatchSample {
    int x0 = 0;
    int y0 = 0;
    int patch = 0;
    std::vector<std::uint8_t> raster; // patch*patch, zero padded past the scene
    std::vector<GroundTruthBox> boxes;
};

bool center_in_window(const GroundTruthBox& box, int x0, int y0, int patch);

std::vector<PatchSample> crop_patches(const AnnotatedScene& scene, const TilePlan& plan);

// For each scene box, the indices of every patch whose window contains its
// center. Needed to tell which objects survive gating: an object is lost only
// when all of its covering patches are filtered.
std::vector<std::vector<int>> object_cover(const std::vector<GroundTruthBox>& boxes,
                                           const TilePlan& plan);

Detection to_global(const Detection& det, int x0, int y0);

} // namespace oandet
