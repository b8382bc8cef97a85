#include "oandet.h"

#include <cstdio>
#include <exception>
#include <string>

#include "core/commands.hpp"
#include "core/errors.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
oandet_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return OANDET_OK;
    } catch (const oandet::IoError& e) {
        g_last_error = e.what();
        return OANDET_ERR_IO;
    } catch (const oandet::ConfigError& e) {
        g_last_error = e.what();
        return OANDET_ERR_CONFIG;
    } catch (const oandet::ValidationError& e) {
        g_last_error = e.what();
        return OANDET_ERR_CONFIG;
    } catch (const oandet::CalibrationError& e) {
        g_last_error = e.what();
        return OANDET_ERR_CONFIG;
    } catch (const oandet::NumericError& e) {
        g_last_error = e.what();
        return OANDET_ERR_NUMERIC;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return OANDET_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return OANDET_ERR_INTERNAL;
    }
}

oandet_status require(bool ok, const char* what) {
    if (ok) return OANDET_OK;
    g_last_error = std::string("null argument: ") + what;
    return OANDET_ERR_CONFIG;
}

} // namespace

struct oandet_model {
    oandet::LoadedModel loaded;
};

extern "C" {

const char* oandet_version(void) { return "1.0.0"; }

const char* oandet_last_error(void) { return g_last_error.c_str(); }

oandet_status oandet_synth(const char* config_json, const char* out_dir) {
    if (auto s = require(config_json && out_dir, "config_json/out_dir")) return s;
    return guarded([&] { oandet::run_synth(config_json, out_dir); });
}

oandet_status oandet_train(const char* config_json, const char* manifest_path,
                           const char* out_checkpoint, int verbose) {
    if (auto s = require(config_json && manifest_path && out_checkpoint,
                         "config_json/manifest_path/out_checkpoint")) {
        return s;
    }
    return guarded([&] {
        std::function<void(const oandet::EpochLog&)> on_epoch;
        if (verbose) {
            on_epoch = [](const oandet::EpochLog& log) {
                std::fprintf(stderr,
                             "epoch %2d  lr %.5f  total %.5f  class %.5f  box %.5f  "
                             "objectness %.5f\n",
                             log.epoch, log.learning_rate, log.mean_total,
                             log.mean_class, log.mean_box, log.mean_objectness);
            };
        }
        oandet::run_train(config_json, manifest_path, out_checkpoint, on_epoch);
    });
}

oandet_status oandet_model_open(const char* checkpoint_path, oandet_model** out_model) {
    if (auto s = require(checkpoint_path && out_model, "checkpoint_path/out_model")) {
        return s;
    }
    *out_model = nullptr;
    return guarded([&] {
        auto* handle = new oandet_model{oandet::load_model(checkpoint_path)};
        *out_model = handle;
    });
}

void oandet_model_close(oandet_model* model) { delete model; }

oandet_status oandet_model_param_count(const oandet_model* model, uint64_t* out_count) {
    if (auto s = require(model && out_count, "model/out_count")) return s;
    return guarded([&] {
        // param_count walks mutable parameter refs; the model is not changed.
        auto& m = const_cast<oandet_model*>(model)->loaded.model;
        *out_count = static_cast<uint64_t>(m.param_count());
    });
}

oandet_status oandet_model_patch_size(const oandet_model* model, int32_t* out_patch) {
    if (auto s = require(model && out_patch, "model/out_patch")) return s;
    *out_patch = model->loaded.model.config().patch_size;
    return OANDET_OK;
}

oandet_status oandet_model_checksum(const oandet_model* model, uint64_t* out_checksum) {
    if (auto s = require(model && out_checksum, "model/out_checksum")) return s;
    *out_checksum = model->loaded.checksum;
    return OANDET_OK;
}

oandet_status oandet_calibrate(const oandet_model* model, double k, const char* out_json,
                               double* out_threshold) {
    if (auto s = require(model && out_json, "model/out_json")) return s;
    return guarded([&] {
        const oandet::CalibrationResult r =
            oandet::run_calibrate(model->loaded, k, out_json);
        if (out_threshold) *out_threshold = r.threshold;
    });
}

oandet_status oandet_load_threshold(const char* path, double* out_threshold) {
    if (auto s = require(path && out_threshold, "path/out_threshold")) return s;
    return guarded([&] { *out_threshold = oandet::load_threshold_file(path); });
}

oandet_status oandet_infer(const oandet_model* model, const char* scene_pgm,
                           const char* annotation_path, double threshold,
                           const char* out_json) {
    if (auto s = require(model && scene_pgm && out_json, "model/scene_pgm/out_json")) {
        return s;
    }
    return guarded([&] {
        oandet::run_infer(model->loaded, scene_pgm,
                          annotation_path ? annotation_path : "", threshold, out_json);
    });
}

oandet_status oandet_bench(const oandet_model* model, const char* manifest_path,
                           double threshold, int workers, double stub_cost_ms,
                           const char* out_json) {
    if (auto s = require(model && manifest_path && out_json,
                         "model/manifest_path/out_json")) {
        return s;
    }
    return guarded([&] {
        oandet::run_bench(model->loaded, manifest_path, threshold, workers, stub_cost_ms,
                          out_json);
    });
}

oandet_status oandet_sweep(const oandet_model* model, const char* manifest_path,
                           const double* thresholds, size_t num_thresholds, int workers,
                           const char* out_csv) {
    if (auto s = require(model && manifest_path && thresholds && out_csv,
                         "model/manifest_path/thresholds/out_csv")) {
        return s;
    }
    return guarded([&] {
        const std::vector<double> list(thresholds, thresholds + num_thresholds);
        oandet::run_sweep(model->loaded, manifest_path, list, workers, out_csv);
    });
}

} // extern "C"
