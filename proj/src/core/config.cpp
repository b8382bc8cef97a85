#include "core/config.hpp"

#include <cstdio>

#include "core/checkpoint.hpp"
#include "core/errors.hpp"

namespace oandet {

using nlohmann::json;

namespace {

// Collects violations while walking the document so the user sees all of
// them at once instead of fixing one per run.
struct Checker {
    std::vector<std::string> problems;

    void complain(const std::string& path, const std::string& why) {
        problems.push_back(path + ": " + why);
    }

    const json* object(const json& parent, const std::string& path, const char* key,
                       std::initializer_list<const char*> known) {
        if (!parent.contains(key)) return nullptr;
        const json& node = parent.at(key);
        if (!node.is_object()) {
            complain(path + key, "must be an object");
            return nullptr;
        }
        for (const auto& item : node.items()) {
            bool ok = false;
            for (const char* k : known) {
                if (item.key() == k) {
                    ok = true;
                    break;
                }
            }
            if (!ok) complain(path + key + "." + item.key(), "unknown key");
        }
        return &node;
    }

    template <typename T>
    void number(const json& node, const std::string& path, const char* key, T& out) {
        if (!node.contains(key)) return;
        const json& v = node.at(key);
        if (!v.is_number()) {
            complain(path + key, "must be a number");
            return;
        }
        out = v.get<T>();
    }

    void integer(const json& node, const std::string& path, const char* key, int& out) {
        if (!node.contains(key)) return;
        const json& v = node.at(key);
        if (!v.is_number_integer()) {
            complain(path + key, "must be an integer");
            return;
        }
        out = v.get<int>();
    }

    void boolean(const json& node, const std::string& path, const char* key, bool& out) {
        if (!node.contains(key)) return;
        const json& v = node.at(key);
        if (!v.is_boolean()) {
            complain(path + key, "must be a boolean");
            return;
        }
        out = v.get<bool>();
    }

    void int_list(const json& node, const std::string& path, const char* key,
                  std::vector<int>& out) {
        if (!node.contains(key)) return;
        const json& v = node.at(key);
        if (!v.is_array()) {
            complain(path + key, "must be an array of integers");
            return;
        }
        std::vector<int> vals;
        for (const json& item : v) {
            if (!item.is_number_integer()) {
                complain(path + key, "must be an array of integers");
                return;
            }
            vals.push_back(item.get<int>());
        }
        out = std::move(vals);
    }
};

} // namespace

json default_config_json() {
    const RunConfig defaults;
    return effective_config_json(defaults);
}

RunConfig parse_config(const json& doc) {
    Checker ck;
    RunConfig cfg;

    if (!doc.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    static const std::initializer_list<const char*> top_keys = {
        "seed", "dataset", "scene", "tiling", "model", "loss", "train", "gate", "infer"};
    for (const auto& item : doc.items()) {
        bool ok = false;
        for (const char* k : top_keys) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) ck.complain(item.key(), "unknown key");
    }

    if (doc.contains("seed")) {
        const json& v = doc.at("seed");
        if (!v.is_number_unsigned() && !v.is_number_integer()) {
            ck.complain("seed", "must be a non-negative integer");
        } else if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
            ck.complain("seed", "must be a non-negative integer");
        } else {
            cfg.seed = v.get<std::uint64_t>();
        }
    }

    if (const json* node = ck.object(doc, "", "dataset", {"num_scenes"})) {
        ck.integer(*node, "dataset.", "num_scenes", cfg.num_scenes);
        if (cfg.num_scenes < 1) ck.complain("dataset.num_scenes", "must be >= 1");
    }

    if (const json* node = ck.object(doc, "", "scene",
                                     {"width", "height", "num_clusters",
                                      "objects_per_cluster", "cluster_radius",
                                      "num_classes", "object_size",
                                      "background_noise_sigma"})) {
        ck.integer(*node, "scene.", "width", cfg.scene.width);
        ck.integer(*node, "scene.", "height", cfg.scene.height);
        ck.integer(*node, "scene.", "num_clusters", cfg.scene.num_clusters);
        ck.number(*node, "scene.", "cluster_radius", cfg.scene.cluster_radius);
        ck.integer(*node, "scene.", "num_classes", cfg.scene.num_classes);
        ck.number(*node, "scene.", "background_noise_sigma",
                  cfg.scene.background_noise_sigma);
        if (node->contains("objects_per_cluster")) {
            const json& v = node->at("objects_per_cluster");
            if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
                !v[1].is_number_integer()) {
                ck.complain("scene.objects_per_cluster", "must be [min, max] integers");
            } else {
                cfg.scene.objects_per_cluster = {v[0].get<int>(), v[1].get<int>()};
            }
        }
        if (node->contains("object_size")) {
            const json& v = node->at("object_size");
            bool ok = v.is_array();
            std::vector<SizeRange> sizes;
            if (ok) {
                for (const json& pair : v) {
                    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
                        !pair[1].is_number()) {
                        ok = false;
                        break;
                    }
                    sizes.push_back({pair[0].get<double>(), pair[1].get<double>()});
                }
            }
            if (!ok) {
                ck.complain("scene.object_size", "must be a list of [min, max] pairs");
            } else {
                cfg.scene.object_size = std::move(sizes);
            }
        }
    }

    if (const json* node = ck.object(doc, "", "tiling", {"patch_size", "stride"})) {
        ck.integer(*node, "tiling.", "patch_size", cfg.model.patch_size);
        ck.integer(*node, "tiling.", "stride", cfg.model.stride);
    }

    if (const json* node = ck.object(doc, "", "model",
                                     {"stage_channels", "grid_size", "det_grid_size",
                                      "oan_tap", "det_tap", "oan_mid_channels",
                                      "oan_hidden_channels", "det_stem_channels",
                                      "head_bias_init"})) {
        ck.int_list(*node, "model.", "stage_channels", cfg.model.stage_channels);
        ck.integer(*node, "model.", "grid_size", cfg.model.grid_size);
        ck.integer(*node, "model.", "det_grid_size", cfg.model.det_grid_size);
        ck.integer(*node, "model.", "oan_tap", cfg.model.oan_tap);
        ck.integer(*node, "model.", "det_tap", cfg.model.det_tap);
        ck.integer(*node, "model.", "oan_mid_channels", cfg.model.oan_mid_channels);
        ck.integer(*node, "model.", "oan_hidden_channels", cfg.model.oan_hidden_channels);
        ck.integer(*node, "model.", "det_stem_channels", cfg.model.det_stem_channels);
        ck.number(*node, "model.", "head_bias_init", cfg.model.head_bias_init);
    }

    if (const json* node = ck.object(doc, "", "loss", {"alpha", "gamma", "lambda"})) {
        ck.number(*node, "loss.", "alpha", cfg.model.alpha);
        ck.number(*node, "loss.", "gamma", cfg.model.gamma);
        ck.number(*node, "loss.", "lambda", cfg.model.lambda);
    }

    if (const json* node = ck.object(doc, "", "train",
                                     {"learning_rate", "momentum", "decay_epochs",
                                      "decay_factor", "epochs", "stats_window",
                                      "include_empty_patches", "assignment", "iof_hi",
                                      "iof_lo"})) {
        ck.number(*node, "train.", "learning_rate", cfg.train.sgd.learning_rate);
        ck.number(*node, "train.", "momentum", cfg.train.sgd.momentum);
        ck.int_list(*node, "train.", "decay_epochs", cfg.train.sgd.decay_epochs);
        ck.number(*node, "train.", "decay_factor", cfg.train.sgd.decay_factor);
        ck.integer(*node, "train.", "epochs", cfg.train.sgd.epochs);
        ck.integer(*node, "train.", "stats_window", cfg.model.stats_window);
        ck.boolean(*node, "train.", "include_empty_patches",
                   cfg.train.include_empty_patches);
        ck.number(*node, "train.", "iof_hi", cfg.train.iof_hi);
        ck.number(*node, "train.", "iof_lo", cfg.train.iof_lo);
        if (node->contains("assignment")) {
            const json& v = node->at("assignment");
            if (v.is_string() && v.get<std::string>() == "center") {
                cfg.train.assignment = Assignment::kCenter;
            } else if (v.is_string() && v.get<std::string>() == "iof") {
                cfg.train.assignment = Assignment::kIof;
            } else {
                ck.complain("train.assignment", "must be \"center\" or \"iof\"");
            }
        }
    }

    if (const json* node = ck.object(doc, "", "gate", {"k"})) {
        ck.number(*node, "gate.", "k", cfg.model.gate_k);
    }

    if (const json* node = ck.object(doc, "", "infer",
                                     {"score_keep_threshold", "nms_iou"})) {
        ck.number(*node, "infer.", "score_keep_threshold", cfg.model.keep_threshold);
        ck.number(*node, "infer.", "nms_iou", cfg.model.nms_iou);
    }

    // Semantic checks on the assembled structs, reported through the same
    // channel as the shape checks above.
    cfg.model.num_classes = cfg.scene.num_classes; // classes come from the scene spec
    try {
        cfg.scene.validate();
    } catch (const ValidationError& e) {
        ck.complain("scene", e.what());
    }
    try {
        cfg.model.validate();
    } catch (const ValidationError& e) {
        ck.complain("model", e.what());
    }
    if (cfg.scene.width < cfg.model.patch_size ||
        cfg.scene.height < cfg.model.patch_size) {
        ck.complain("scene", "scene dimensions must be >= tiling.patch_size");
    }
    if (!(cfg.train.sgd.learning_rate > 0.0)) {
        ck.complain("train.learning_rate", "must be positive");
    }
    if (!(cfg.train.sgd.momentum >= 0.0 && cfg.train.sgd.momentum < 1.0)) {
        ck.complain("train.momentum", "must be in [0, 1)");
    }
    if (!(cfg.train.sgd.decay_factor > 0.0 && cfg.train.sgd.decay_factor <= 1.0)) {
        ck.complain("train.decay_factor", "must be in (0, 1]");
    }
    if (cfg.train.sgd.epochs < 1) ck.complain("train.epochs", "must be >= 1");
    for (int d : cfg.train.sgd.decay_epochs) {
        if (d < 0) ck.complain("train.decay_epochs", "entries must be >= 0");
    }
    if (!(cfg.train.iof_lo >= 0.0 && cfg.train.iof_hi > cfg.train.iof_lo &&
          cfg.train.iof_hi <= 1.0)) {
        ck.complain("train.iof_hi/iof_lo", "must satisfy 0 <= lo < hi <= 1");
    }

    if (!ck.problems.empty()) {
        std::string msg = "config validation failed:";
        for (const std::string& p : ck.problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

RunConfig parse_config_text(const std::string& text) {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
    return parse_config(doc);
}

json effective_config_json(const RunConfig& cfg) {
    json scene_sizes = json::array();
    for (const SizeRange& s : cfg.scene.object_size) {
        scene_sizes.push_back({s.min_px, s.max_px});
    }
    return json{
        {"seed", cfg.seed},
        {"dataset", {{"num_scenes", cfg.num_scenes}}},
        {"scene",
         {{"width", cfg.scene.width},
          {"height", cfg.scene.height},
          {"num_clusters", cfg.scene.num_clusters},
          {"objects_per_cluster",
           {cfg.scene.objects_per_cluster.min_count,
            cfg.scene.objects_per_cluster.max_count}},
          {"cluster_radius", cfg.scene.cluster_radius},
          {"num_classes", cfg.scene.num_classes},
          {"object_size", scene_sizes},
          {"background_noise_sigma", cfg.scene.background_noise_sigma}}},
        {"tiling", {{"patch_size", cfg.model.patch_size}, {"stride", cfg.model.stride}}},
        {"model",
         {{"stage_channels", cfg.model.stage_channels},
          {"grid_size", cfg.model.grid_size},
          {"det_grid_size", cfg.model.det_grid_size},
          {"oan_tap", cfg.model.oan_tap},
          {"det_tap", cfg.model.det_tap},
          {"oan_mid_channels", cfg.model.oan_mid_channels},
          {"oan_hidden_channels", cfg.model.oan_hidden_channels},
          {"det_stem_channels", cfg.model.det_stem_channels},
          {"head_bias_init", cfg.model.head_bias_init}}},
        {"loss",
         {{"alpha", cfg.model.alpha},
          {"gamma", cfg.model.gamma},
          {"lambda", cfg.model.lambda}}},
        {"train",
         {{"learning_rate", cfg.train.sgd.learning_rate},
          {"momentum", cfg.train.sgd.momentum},
          {"decay_epochs", cfg.train.sgd.decay_epochs},
          {"decay_factor", cfg.train.sgd.decay_factor},
          {"epochs", cfg.train.sgd.epochs},
          {"stats_window", cfg.model.stats_window},
          {"include_empty_patches", cfg.train.include_empty_patches},
          {"assignment",
           cfg.train.assignment == Assignment::kCenter ? "center" : "iof"},
          {"iof_hi", cfg.train.iof_hi},
          {"iof_lo", cfg.train.iof_lo}}},
        {"gate", {{"k", cfg.model.gate_k}}},
        {"infer",
         {{"score_keep_threshold", cfg.model.keep_threshold},
          {"nms_iou", cfg.model.nms_iou}}}};
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string canonical = effective_config_json(cfg).dump();
    return fnv1a64(canonical.data(), canonical.size());
}

std::string hex_u64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace oandet
