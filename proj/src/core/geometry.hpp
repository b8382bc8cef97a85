#pragma once

#include <algorithm>
#include <cstdint>

namespace oandet {

// Axis-aligned box in pixel coordinates, half-open on both axes:
// the box covers pixels [x_min, x_max) x [y_min, y_max).
struct GroundTruthBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;
    int class_id = 0;

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    std::int64_t area() const {
        return static_cast<std::int64_t>(width()) * height();
    }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }
    bool valid() const { return x_max > x_min && y_max > y_min; }
};

// Continuous box, used for predicted detections.
struct BoxF {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
};

struct Detection {
    BoxF box;
    int class_id = 0;
    double score = 0.0;
};

inline BoxF to_boxf(const GroundTruthBox& b) {
    return BoxF{static_cast<double>(b.x_min), static_cast<double>(b.y_min),
                static_cast<double>(b.x_max), static_cast<double>(b.y_max)};
}

inline double intersection_area(const BoxF& a, const BoxF& b) {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline double iou(const BoxF& a, const BoxF& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

} // namespace oandet
