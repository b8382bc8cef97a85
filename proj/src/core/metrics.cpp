#include "core/metrics.hpp"

#include <algorithm>
#include <tuple>

#include "core/errors.hpp"

namespace oandet {

bool detection_order(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.box.x_min, a.box.y_min, a.class_id, a.box.x_max, a.box.y_max) <
           std::tie(b.box.x_min, b.box.y_min, b.class_id, b.box.x_max, b.box.y_max);
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
    if (iou_threshold < 0.0 || iou_threshold > 1.0) {
        throw ValidationError("nms iou threshold must be in [0, 1]");
    }
    std::sort(detections.begin(), detections.end(), detection_order);
    std::vector<Detection> kept;
    kept.reserve(detections.size());
    for (const Detection& cand : detections) {
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.class_id != cand.class_id) continue;
            if (iou(k.box, cand.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

std::vector<Detection> merge_scene(const std::vector<PatchDetections>& patches,
                                   double iou_threshold) {
    std::vector<Detection> all;
    for (const PatchDetections& p : patches) {
        for (const Detection& det : p.detections) {
            Detection g = det;
            g.box.x_min += p.x0;
            g.box.x_max += p.x0;
            g.box.y_min += p.y0;
            g.box.y_max += p.y0;
            all.push_back(g);
        }
    }
    return nms(std::move(all), iou_threshold);
}

GateCounts& GateCounts::operator+=(const GateCounts& other) {
    total_patches += other.total_patches;
    filtered += other.filtered;
    correctly_filtered += other.correctly_filtered;
    objects_total += other.objects_total;
    objects_lost += other.objects_lost;
    return *this;
}

GateCounts gate_counts(const std::vector<PatchGateTruth>& patches,
                       const std::vector<std::vector<int>>& object_cover) {
    GateCounts c;
    c.total_patches = static_cast<std::int64_t>(patches.size());
    for (const PatchGateTruth& p : patches) {
        if (!p.passed) {
            ++c.filtered;
            if (!p.has_objects) ++c.correctly_filtered;
        }
    }
    c.objects_total = static_cast<std::int64_t>(object_cover.size());
    for (const std::vector<int>& cover : object_cover) {
        bool survives = false;
        for (int patch_idx : cover) {
            if (patch_idx < 0 || patch_idx >= static_cast<int>(patches.size())) {
                throw ValidationError("object cover references unknown patch");
            }
            if (patches[static_cast<std::size_t>(patch_idx)].passed) {
                survives = true;
                break;
            }
        }
        if (!survives) ++c.objects_lost;
    }
    return c;
}

GateReport finalize_gate_report(const GateCounts& counts) {
    GateReport r;
    r.counts = counts;
    r.precision = counts.filtered > 0
                      ? static_cast<double>(counts.correctly_filtered) /
                            static_cast<double>(counts.filtered)
                      : 1.0;
    r.recall = counts.objects_total > 0
                   ? 1.0 - static_cast<double>(counts.objects_lost) /
                               static_cast<double>(counts.objects_total)
                   : 1.0;
    r.skip_ratio = counts.total_patches > 0
                       ? static_cast<double>(counts.filtered) /
                             static_cast<double>(counts.total_patches)
                       : 0.0;
    return r;
}

GateReport gate_report(const std::vector<PatchGateTruth>& patches,
                       const std::vector<std::vector<int>>& object_cover) {
    return finalize_gate_report(gate_counts(patches, object_cover));
}

namespace {

struct RankedDet {
    const Detection* det;
    int scene;
};

double class_ap(const std::vector<SceneEval>& scenes, int class_id, double iou_match,
                std::int64_t gt_count) {
    if (gt_count == 0) return 0.0;

    std::vector<RankedDet> ranked;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        for (const Detection& d : *scenes[s].detections) {
            if (d.class_id == class_id) ranked.push_back({&d, static_cast<int>(s)});
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedDet& a, const RankedDet& b) {
        if (a.det->score != b.det->score) return a.det->score > b.det->score;
        if (a.scene != b.scene) return a.scene < b.scene;
        return detection_order(*a.det, *b.det);
    });

    // Greedy matching in rank order; each ground-truth box matches once.
    std::vector<std::vector<bool>> used(scenes.size());
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        used[s].assign(scenes[s].ground_truth->size(), false);
    }

    std::vector<bool> is_tp(ranked.size(), false);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const auto& gts = *scenes[static_cast<std::size_t>(ranked[r].scene)].ground_truth;
        double best_iou = 0.0;
        int best = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].class_id != class_id) continue;
            if (used[static_cast<std::size_t>(ranked[r].scene)][g]) continue;
            const double v = iou(ranked[r].det->box, to_boxf(gts[g]));
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0 && best_iou >= iou_match) {
            is_tp[r] = true;
            used[static_cast<std::size_t>(ranked[r].scene)][static_cast<std::size_t>(best)] = true;
        }
    }

    // All-point interpolation: integrate the running-max precision envelope
    // over recall.
    std::vector<double> precision(ranked.size());
    std::vector<double> recall(ranked.size());
    std::int64_t tp = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (is_tp[r]) ++tp;
        precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
        recall[r] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    double ap = 0.0;
    double max_prec = 0.0;
    for (std::size_t r = ranked.size(); r-- > 0;) {
        max_prec = std::max(max_prec, precision[r]);
        const double r_prev = r > 0 ? recall[r - 1] : 0.0;
        if (recall[r] > r_prev) ap += (recall[r] - r_prev) * max_prec;
    }
    return ap;
}

} // namespace

ApResult average_precision_pooled(const std::vector<SceneEval>& scenes, double iou_match) {
    if (iou_match <= 0.0 || iou_match > 1.0) {
        throw ValidationError("ap iou threshold must be in (0, 1]");
    }
    int num_classes = 0;
    for (const SceneEval& s : scenes) {
        if (!s.detections || !s.ground_truth) {
            throw ValidationError("ap input scene missing detections or ground truth");
        }
        for (const Detection& d : *s.detections) {
            num_classes = std::max(num_classes, d.class_id + 1);
        }
        for (const GroundTruthBox& g : *s.ground_truth) {
            num_classes = std::max(num_classes, g.class_id + 1);
        }
    }

    ApResult out;
    out.per_class_ap.assign(static_cast<std::size_t>(num_classes), 0.0);
    out.per_class_gt.assign(static_cast<std::size_t>(num_classes), 0);
    for (const SceneEval& s : scenes) {
        for (const GroundTruthBox& g : *s.ground_truth) {
            ++out.per_class_gt[static_cast<std::size_t>(g.class_id)];
        }
    }

    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
        const std::int64_t gt_count = out.per_class_gt[static_cast<std::size_t>(c)];
        out.per_class_ap[static_cast<std::size_t>(c)] =
            class_ap(scenes, c, iou_match, gt_count);
        if (gt_count > 0) {
            sum += out.per_class_ap[static_cast<std::size_t>(c)];
            ++counted;
        }
    }
    out.map = counted > 0 ? sum / counted : 0.0;
    return out;
}

ApResult average_precision(const std::vector<Detection>& detections,
                           const std::vector<GroundTruthBox>& ground_truth,
                           double iou_match) {
    const SceneEval eval{&detections, &ground_truth};
    return average_precision_pooled({eval}, iou_match);
}

} // namespace oandet
