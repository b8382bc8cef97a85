#include "core/model.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace oandet {

template <typename T>
Backbone<T>::Backbone(int in_channels, const std::vector<int>& stage_channels, Rng& rng) {
    if (in_channels <= 0) throw ValidationError("backbone in_channels must be positive");
    if (stage_channels.empty()) throw ValidationError("backbone needs at least one stage");
    int prev = in_channels;
    for (int ch : stage_channels) {
        if (ch <= 0) throw ValidationError("backbone stage channels must be positive");
        Stage s;
        s.reduce = ConvLayer<T>(prev, ch, 3, 2, 1);
        s.refine = ConvLayer<T>(ch, ch, 3, 1, 1);
        s.reduce.init_he(rng);
        s.refine.init_he(rng);
        stages_.push_back(std::move(s));
        prev = ch;
    }
}

template <typename T>
void Backbone<T>::forward(const Tensor<T>& input, BackboneCache<T>& cache) const {
    cache.stages.resize(stages_.size());
    const Tensor<T>* x = &input;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        BackboneStageCache<T>& c = cache.stages[i];
        c.in = *x;
        c.reduce_out = conv2d_forward(c.in, stages_[i].reduce, &cache.ws);
        c.reduce_act = relu_forward(c.reduce_out);
        c.refine_out = conv2d_forward(c.reduce_act, stages_[i].refine, &cache.ws);
        c.refine_act = relu_forward(c.refine_out);
        x = &c.refine_act;
    }
}

template <typename T>
Tensor<T> Backbone<T>::backward(const std::vector<Tensor<T>>& stage_grads,
                                BackboneCache<T>& cache) {
    if (stage_grads.size() != stages_.size() || cache.stages.size() != stages_.size()) {
        throw ShapeError("backbone backward needs one gradient slot per stage");
    }
    Tensor<T> d;
    for (std::size_t i = stages_.size(); i-- > 0;) {
        BackboneStageCache<T>& c = cache.stages[i];
        if (d.numel() == 0) {
            d = Tensor<T>(c.refine_act.shape);
        }
        if (stage_grads[i].numel() != 0) {
            if (!stage_grads[i].same_shape(c.refine_act)) {
                throw ShapeError("backbone stage gradient shape mismatch");
            }
            for (std::size_t j = 0; j < d.numel(); ++j) {
                d.values[j] += stage_grads[i].values[j];
            }
        }
        Tensor<T> d_refine_out = relu_backward(c.refine_out, d);
        Tensor<T> d_reduce_act =
            conv2d_backward(c.reduce_act, stages_[i].refine, d_refine_out, &cache.ws);
        Tensor<T> d_reduce_out = relu_backward(c.reduce_out, d_reduce_act);
        d = conv2d_backward(c.in, stages_[i].reduce, d_reduce_out, &cache.ws);
    }
    return d;
}

template <typename T>
void Backbone<T>::collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const std::string base = prefix + "/stage" + std::to_string(i);
        out.push_back({base + "/reduce/weight", &stages_[i].reduce.weight,
                       &stages_[i].reduce.weight_grad});
        out.push_back({base + "/reduce/bias", &stages_[i].reduce.bias,
                       &stages_[i].reduce.bias_grad});
        out.push_back({base + "/refine/weight", &stages_[i].refine.weight,
                       &stages_[i].refine.weight_grad});
        out.push_back({base + "/refine/bias", &stages_[i].refine.bias,
                       &stages_[i].refine.bias_grad});
    }
}

template <typename T>
void Backbone<T>::zero_grads() {
    for (Stage& s : stages_) {
        s.reduce.zero_grads();
        s.refine.zero_grads();
    }
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ValidationError("model field '" + field + "' " + why);
    };
    if (in_channels != 1) fail("in_channels", "must be 1 (grayscale input)");
    if (stage_channels.empty()) fail("stage_channels", "must not be empty");
    for (int ch : stage_channels) {
        if (ch <= 0) fail("stage_channels", "entries must be positive");
    }
    const int stages = static_cast<int>(stage_channels.size());
    if (stages > 8) fail("stage_channels", "supports at most 8 stages");
    if (patch_size <= 0 || patch_size % (1 << stages) != 0) {
        fail("patch_size", "must be a positive multiple of 2^num_stages");
    }
    if (stride <= 0 || stride > patch_size) fail("stride", "must be in (0, patch_size]");
    if (grid_size <= 0) fail("grid_size", "must be positive");
    const int oan_stage = resolve_tap(oan_tap);
    const int det_stage = resolve_tap(det_tap);
    if (oan_stage < 0 || oan_stage >= stages) fail("oan_tap", "stage index out of range");
    if (det_stage < 0 || det_stage >= stages) fail("det_tap", "stage index out of range");
    const int oan_extent = stage_extent(oan_stage);
    if (oan_extent != grid_size && oan_extent != 2 * grid_size &&
        oan_extent != 4 * grid_size) {
        fail("grid_size", "tap extent " + std::to_string(oan_extent) +
                              " must be 1x, 2x or 4x the grid");
    }
    if (det_grid_size > 0 && det_grid_size != stage_extent(det_stage)) {
        fail("det_grid_size", "must equal the detector tap extent " +
                                  std::to_string(stage_extent(det_stage)));
    }
    if (stage_extent(det_stage) < 1) fail("det_tap", "tap extent vanished");
    if (num_classes <= 0) fail("num_classes", "must be positive");
    if (oan_mid_channels <= 0) fail("oan_mid_channels", "must be positive");
    if (oan_hidden_channels <= 0) fail("oan_hidden_channels", "must be positive");
    if (det_stem_channels <= 0) fail("det_stem_channels", "must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "must be in (0, 1)");
    if (!(gamma >= 0.0)) fail("gamma", "must be >= 0");
    if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
    if (!(gate_k > 0.0)) fail("gate_k", "must be positive");
    if (stats_window <= 0) fail("stats_window", "must be positive");
    if (!(keep_threshold >= 0.0 && keep_threshold < 1.0)) {
        fail("score_keep_threshold", "must be in [0, 1)");
    }
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) fail("nms_iou", "must be in [0, 1]");
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    oan_tap_ = cfg_.resolve_tap(cfg_.oan_tap);
    det_tap_ = cfg_.resolve_tap(cfg_.det_tap);

    Rng rng(seed);
    backbone = Backbone<T>(cfg_.in_channels, cfg_.stage_channels, rng);

    OanHeadConfig<T> oan_cfg;
    oan_cfg.tap_channels = cfg_.stage_channels[static_cast<std::size_t>(oan_tap_)];
    oan_cfg.tap_extent = cfg_.stage_extent(oan_tap_);
    oan_cfg.grid = cfg_.grid_size;
    oan_cfg.mid_channels = cfg_.oan_mid_channels;
    oan_cfg.hidden_channels = cfg_.oan_hidden_channels;
    oan_cfg.output_bias_init = static_cast<T>(cfg_.head_bias_init);
    oan_head = OanHead<T>(oan_cfg, rng);

    DetHeadConfig<T> det_cfg;
    det_cfg.tap_channels = cfg_.stage_channels[static_cast<std::size_t>(det_tap_)];
    det_cfg.tap_extent = cfg_.stage_extent(det_tap_);
    det_cfg.num_classes = cfg_.num_classes;
    det_cfg.stem_channels = cfg_.det_stem_channels;
    det_cfg.class_bias_init = static_cast<T>(cfg_.head_bias_init);
    det_head = DetHead<T>(det_cfg, rng);
}

template <typename T>
ActivationMap<T> Model<T>::forward_oan(const Tensor<T>& input, ModelCache<T>& cache) const {
    require_shape(input, {1, cfg_.in_channels, cfg_.patch_size, cfg_.patch_size},
                  "model input");
    backbone.forward(input, cache.backbone);
    const Tensor<T>& tap =
        cache.backbone.stages[static_cast<std::size_t>(oan_tap_)].refine_act;
    return oan_head.forward(tap, static_cast<double>(cfg_.patch_size), &cache.oan);
}

template <typename T>
DetOutputs<T> Model<T>::forward_det(ModelCache<T>& cache) const {
    if (cache.backbone.stages.empty()) {
        throw ShapeError("detector forward requires a populated backbone cache");
    }
    const Tensor<T>& tap =
        cache.backbone.stages[static_cast<std::size_t>(det_tap_)].refine_act;
    return det_head.forward(tap, &cache.det);
}

template <typename T>
void Model<T>::backward(const Tensor<T>* d_oan_logits, const Tensor<T>* d_cls,
                        const Tensor<T>* d_box, ModelCache<T>& cache) {
    std::vector<Tensor<T>> stage_grads(static_cast<std::size_t>(backbone.num_stages()));
    auto inject = [&stage_grads](int stage, Tensor<T>&& grad) {
        Tensor<T>& slot = stage_grads[static_cast<std::size_t>(stage)];
        if (slot.numel() == 0) {
            slot = std::move(grad);
            return;
        }
        for (std::size_t i = 0; i < slot.numel(); ++i) slot.values[i] += grad.values[i];
    };

    if (d_oan_logits) {
        inject(oan_tap_, oan_head.backward(*d_oan_logits, cache.oan));
    }
    if (d_cls || d_box) {
        if (!d_cls || !d_box) {
            throw ShapeError("detector backward needs both class and box gradients");
        }
        inject(det_tap_, det_head.backward(*d_cls, *d_box, cache.det));
    }
    backbone.backward(stage_grads, cache.backbone);
}

template <typename T>
std::vector<ParamRef<T>> Model<T>::params() {
    std::vector<ParamRef<T>> out;
    backbone.collect_params(out, "param/backbone");
    oan_head.collect_params(out, "param/oan");
    det_head.collect_params(out, "param/det");
    return out;
}

template <typename T>
void Model<T>::zero_grads() {
    backbone.zero_grads();
    oan_head.zero_grads();
    det_head.zero_grads();
}

template <typename T>
std::size_t Model<T>::param_count() {
    std::size_t n = 0;
    for (const ParamRef<T>& p : params()) n += p.value->numel();
    return n;
}

namespace {

CheckpointEntry scalar_entry(const std::string& name, double v) {
    CheckpointEntry e;
    e.name = name;
    e.values = {static_cast<float>(v)};
    return e;
}

double read_scalar(const std::vector<CheckpointEntry>& entries, const std::string& name,
                   const std::string& origin) {
    const CheckpointEntry* e = find_entry(entries, name);
    if (!e || e->values.size() != 1) {
        throw IoError("checkpoint missing scalar " + name, origin);
    }
    return static_cast<double>(e->values[0]);
}

} // namespace

std::vector<CheckpointEntry> model_to_entries(Model<float>& model,
                                              const ThresholdStats& stats) {
    const ModelConfig& cfg = model.config();
    std::vector<CheckpointEntry> entries;
    entries.push_back(scalar_entry("meta/version", 1));
    entries.push_back(scalar_entry("meta/in_channels", cfg.in_channels));
    entries.push_back(scalar_entry("meta/patch_size", cfg.patch_size));
    entries.push_back(scalar_entry("meta/stride", cfg.stride));
    entries.push_back(scalar_entry("meta/grid_size", cfg.grid_size));
    entries.push_back(scalar_entry("meta/det_grid_size", cfg.resolved_det_grid()));
    entries.push_back(scalar_entry("meta/oan_tap", cfg.resolve_tap(cfg.oan_tap)));
    entries.push_back(scalar_entry("meta/det_tap", cfg.resolve_tap(cfg.det_tap)));
    entries.push_back(scalar_entry("meta/oan_mid_channels", cfg.oan_mid_channels));
    entries.push_back(scalar_entry("meta/oan_hidden_channels", cfg.oan_hidden_channels));
    entries.push_back(scalar_entry("meta/det_stem_channels", cfg.det_stem_channels));
    entries.push_back(scalar_entry("meta/num_classes", cfg.num_classes));
    entries.push_back(scalar_entry("meta/head_bias_init", cfg.head_bias_init));
    entries.push_back(scalar_entry("meta/alpha", cfg.alpha));
    entries.push_back(scalar_entry("meta/gamma", cfg.gamma));
    entries.push_back(scalar_entry("meta/lambda", cfg.lambda));
    entries.push_back(scalar_entry("meta/gate_k", cfg.gate_k));
    entries.push_back(scalar_entry("meta/stats_window", cfg.stats_window));
    entries.push_back(scalar_entry("meta/keep_threshold", cfg.keep_threshold));
    entries.push_back(scalar_entry("meta/nms_iou", cfg.nms_iou));

    CheckpointEntry channels;
    channels.name = "meta/stage_channels";
    channels.dims = {static_cast<int>(cfg.stage_channels.size())};
    for (int ch : cfg.stage_channels) channels.values.push_back(static_cast<float>(ch));
    entries.push_back(std::move(channels));

    for (const ParamRef<float>& p : model.params()) {
        CheckpointEntry e;
        e.name = p.name;
        e.dims = p.value->shape;
        e.values = p.value->values;
        entries.push_back(std::move(e));
    }

    CheckpointEntry max_e, std_e;
    max_e.name = "stats/max_values";
    std_e.name = "stats/std_values";
    const std::vector<double> maxes = stats.max_values();
    const std::vector<double> stds = stats.std_values();
    max_e.dims = {static_cast<int>(maxes.size())};
    std_e.dims = {static_cast<int>(stds.size())};
    for (double v : maxes) max_e.values.push_back(static_cast<float>(v));
    for (double v : stds) std_e.values.push_back(static_cast<float>(v));
    entries.push_back(std::move(max_e));
    entries.push_back(std::move(std_e));
    return entries;
}

LoadedModel model_from_entries(const std::vector<CheckpointEntry>& entries,
                               const std::string& origin) {
    if (read_scalar(entries, "meta/version", origin) != 1.0) {
        throw IoError("unsupported checkpoint version", origin);
    }
    ModelConfig cfg;
    cfg.in_channels = static_cast<int>(read_scalar(entries, "meta/in_channels", origin));
    cfg.patch_size = static_cast<int>(read_scalar(entries, "meta/patch_size", origin));
    cfg.stride = static_cast<int>(read_scalar(entries, "meta/stride", origin));
    cfg.grid_size = static_cast<int>(read_scalar(entries, "meta/grid_size", origin));
    cfg.det_grid_size = static_cast<int>(read_scalar(entries, "meta/det_grid_size", origin));
    cfg.oan_tap = static_cast<int>(read_scalar(entries, "meta/oan_tap", origin));
    cfg.det_tap = static_cast<int>(read_scalar(entries, "meta/det_tap", origin));
    cfg.oan_mid_channels =
        static_cast<int>(read_scalar(entries, "meta/oan_mid_channels", origin));
    cfg.oan_hidden_channels =
        static_cast<int>(read_scalar(entries, "meta/oan_hidden_channels", origin));
    cfg.det_stem_channels =
        static_cast<int>(read_scalar(entries, "meta/det_stem_channels", origin));
    cfg.num_classes = static_cast<int>(read_scalar(entries, "meta/num_classes", origin));
    cfg.head_bias_init = read_scalar(entries, "meta/head_bias_init", origin);
    cfg.alpha = read_scalar(entries, "meta/alpha", origin);
    cfg.gamma = read_scalar(entries, "meta/gamma", origin);
    cfg.lambda = read_scalar(entries, "meta/lambda", origin);
    cfg.gate_k = read_scalar(entries, "meta/gate_k", origin);
    cfg.stats_window = static_cast<int>(read_scalar(entries, "meta/stats_window", origin));
    cfg.keep_threshold = read_scalar(entries, "meta/keep_threshold", origin);
    cfg.nms_iou = read_scalar(entries, "meta/nms_iou", origin);

    const CheckpointEntry* channels = find_entry(entries, "meta/stage_channels");
    if (!channels || channels->values.empty()) {
        throw IoError("checkpoint missing stage channels", origin);
    }
    cfg.stage_channels.clear();
    for (float v : channels->values) cfg.stage_channels.push_back(static_cast<int>(v));

    LoadedModel loaded;
    loaded.path = origin;
    try {
        loaded.model = Model<float>(cfg, 0);
    } catch (const ValidationError& e) {
        throw IoError(std::string("checkpoint config invalid (") + e.what() + ")", origin);
    }

    for (const ParamRef<float>& p : loaded.model.params()) {
        const CheckpointEntry* e = find_entry(entries, p.name);
        if (!e) throw IoError("checkpoint missing tensor " + p.name, origin);
        if (e->dims != p.value->shape || e->values.size() != p.value->numel()) {
            throw IoError("checkpoint tensor " + p.name + " has wrong shape", origin);
        }
        p.value->values = e->values;
    }

    const CheckpointEntry* max_e = find_entry(entries, "stats/max_values");
    const CheckpointEntry* std_e = find_entry(entries, "stats/std_values");
    if (!max_e || !std_e || max_e->values.size() != std_e->values.size()) {
        throw IoError("checkpoint calibration statistics missing or inconsistent", origin);
    }
    loaded.stats = ThresholdStats(static_cast<std::size_t>(cfg.stats_window));
    for (std::size_t i = 0; i < max_e->values.size(); ++i) {
        loaded.stats.record(static_cast<double>(max_e->values[i]),
                            static_cast<double>(std_e->values[i]));
    }
    return loaded;
}

void save_model(const std::string& path, Model<float>& model,
                const ThresholdStats& stats) {
    write_checkpoint(path, model_to_entries(model, stats));
}

LoadedModel load_model(const std::string& path) {
    LoadedModel loaded = model_from_entries(read_checkpoint(path), path);
    loaded.checksum = checkpoint_checksum(path);
    loaded.path = path;
    return loaded;
}

template class Backbone<float>;
template class Backbone<double>;
template class Model<float>;
template class Model<double>;

} // namespace oandet
