#pragma once

#include <array>
#include <map>
#include <unordered_map>

#include "swinecat/eca.hpp"
#include "swinecat/swin.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Model assembly: patch embedding, four stages of Swin blocks each followed
// by a channel-attention gate, patch merging between stages, final norm,
// token-mean pooling, and a linear classification head. eca_enabled = false
// gives the plain backbone used as the ablation baseline.
// ---------------------------------------------------------------------------

struct ModelConfig {
    size_t image_size = 224;
    size_t patch_size = 4;
    size_t embed_dim = 96;
    std::array<size_t, 4> depths = {2, 2, 6, 2};
    std::array<size_t, 4> num_heads = {3, 6, 12, 24};
    size_t window_size = 7;
    double mlp_ratio = 4.0;
    size_t num_classes = 9;
    bool eca_enabled = true;
    EcaConfig eca;
    bool use_relative_bias = true;
    uint64_t seed = 42;

    size_t stage_dim(size_t s) const { return embed_dim << s; }

    /// Token grid side length entering stage s.
    size_t stage_grid(size_t s) const { return (image_size / patch_size) >> s; }

    /// Window size after clamping to the stage grid.
    size_t stage_window(size_t s) const { return std::min(window_size, stage_grid(s)); }

    /// Shift for odd blocks of stage s; disabled when one window covers the grid.
    size_t stage_shift(size_t s) const {
        size_t m = stage_window(s);
        return m < stage_grid(s) ? m / 2 : 0;
    }

    void validate() const {
        if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0) {
            throw ConfigError("model: patch_size " + std::to_string(patch_size) +
                              " must divide image_size " + std::to_string(image_size));
        }
        if (embed_dim == 0) throw ConfigError("model: embed_dim must be positive");
        if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
        if (window_size == 0) throw ConfigError("model: window_size must be positive");
        if (mlp_ratio <= 0) throw ConfigError("model: mlp_ratio must be positive");
        eca.validate();
        for (size_t s = 0; s < 4; ++s) {
            if (depths[s] == 0) {
                throw ConfigError("model: stage " + std::to_string(s) + " needs at least one block");
            }
            if (num_heads[s] == 0 || stage_dim(s) % num_heads[s] != 0) {
                throw ConfigError("model: stage " + std::to_string(s) + " dim " +
                                  std::to_string(stage_dim(s)) + " not divisible by " +
                                  std::to_string(num_heads[s]) + " heads");
            }
            size_t grid = stage_grid(s);
            if (grid == 0) {
                throw ConfigError("model: image too small, stage " + std::to_string(s) +
                                  " has an empty grid");
            }
            size_t m = stage_window(s);
            if (grid % m != 0) {
                throw ConfigError("model: stage " + std::to_string(s) + " grid " +
                                  std::to_string(grid) + " not divisible by window " +
                                  std::to_string(m));
            }
            if (s < 3 && grid % 2 != 0) {
                throw ConfigError("model: stage " + std::to_string(s) + " grid " +
                                  std::to_string(grid) + " must be even for merging");
            }
        }
    }

    static ModelConfig tiny() {
        ModelConfig cfg;
        cfg.image_size = 64;
        cfg.embed_dim = 24;
        cfg.depths = {1, 1, 2, 1};
        cfg.num_heads = {2, 2, 4, 4};
        cfg.window_size = 4;
        return cfg;
    }
};

/// Named, ordered collection of parameter tensors. Iteration order is the
/// creation order and is deterministic for a given config.
template <typename T>
class ModelParams {
public:
    Tensor<T>& add(const std::string& name, Shape shape) {
        if (index_.count(name)) throw ContractError("params: duplicate tensor name " + name);
        index_[name] = entries_.size();
        entries_.emplace_back(name, Tensor<T>(std::move(shape)));
        return entries_.back().second;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("params: no tensor named " + name);
        return entries_[it->second].second;
    }

    const Tensor<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("params: no tensor named " + name);
        return entries_[it->second].second;
    }

    size_t count() const { return entries_.size(); }

    std::vector<std::pair<std::string, Tensor<T>>>& entries() { return entries_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }

    size_t total_parameters() const {
        size_t n = 0;
        for (const auto& [name, t] : entries_) n += t.size();
        return n;
    }

    void set_requires_grad(bool on) {
        for (auto& [name, t] : entries_) t.set_requires_grad(on);
    }

    void zero_grads() {
        for (auto& [name, t] : entries_) t.zero_grad();
    }

    /// Deep copy of values; grad state and tape linkage are not copied.
    ModelParams deep_copy() const {
        ModelParams out;
        for (const auto& [name, t] : entries_) {
            out.index_[name] = out.entries_.size();
            out.entries_.emplace_back(name, t.clone());
        }
        return out;
    }

private:
    std::vector<std::pair<std::string, Tensor<T>>> entries_;
    std::unordered_map<std::string, size_t> index_;
};

namespace detail {

/// Every tensor gets its own stream keyed by (seed, name), so toggling
/// optional tensors never perturbs the others.
template <typename T>
void init_trunc_normal(Tensor<T>& t, uint64_t seed, const std::string& name, double std_dev) {
    Rng rng(mix_seed(seed, fnv1a64(name)));
    for (size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(rng.trunc_normal(std_dev));
}

} // namespace detail

/// Builds and deterministically initializes the parameter set for a config.
/// Projections are truncated normal (std 0.02); biases and the relative
/// bias tables start at zero; norm gains start at one.
template <typename T>
ModelParams<T> build(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams<T> params;
    auto weight = [&](const std::string& name, Shape shape) -> Tensor<T>& {
        Tensor<T>& t = params.add(name, std::move(shape));
        detail::init_trunc_normal(t, cfg.seed, name, 0.02);
        return t;
    };
    auto zeros = [&](const std::string& name, Shape shape) -> Tensor<T>& {
        return params.add(name, std::move(shape));
    };
    auto ones = [&](const std::string& name, Shape shape) -> Tensor<T>& {
        Tensor<T>& t = params.add(name, std::move(shape));
        std::fill(t.vec().begin(), t.vec().end(), T(1));
        return t;
    };

    size_t p = cfg.patch_size, d = cfg.embed_dim;
    weight("patch_embed.proj.weight", {3 * p * p, d});
    zeros("patch_embed.proj.bias", {d});
    ones("patch_embed.norm.gain", {d});
    zeros("patch_embed.norm.bias", {d});

    for (size_t s = 0; s < 4; ++s) {
        size_t c = cfg.stage_dim(s);
        size_t m = cfg.stage_window(s);
        size_t hidden = static_cast<size_t>(cfg.mlp_ratio * static_cast<double>(c));
        std::string stage = "stages." + std::to_string(s);
        for (size_t blk = 0; blk < cfg.depths[s]; ++blk) {
            std::string b = stage + ".blocks." + std::to_string(blk);
            ones(b + ".norm1.gain", {c});
            zeros(b + ".norm1.bias", {c});
            weight(b + ".attn.qkv.weight", {c, 3 * c});
            zeros(b + ".attn.qkv.bias", {3 * c});
            if (cfg.use_relative_bias) {
                zeros(b + ".attn.bias_table", {(2 * m - 1) * (2 * m - 1), cfg.num_heads[s]});
            }
            weight(b + ".attn.proj.weight", {c, c});
            zeros(b + ".attn.proj.bias", {c});
            ones(b + ".norm2.gain", {c});
            zeros(b + ".norm2.bias", {c});
            weight(b + ".mlp.fc1.weight", {c, hidden});
            zeros(b + ".mlp.fc1.bias", {hidden});
            weight(b + ".mlp.fc2.weight", {hidden, c});
            zeros(b + ".mlp.fc2.bias", {c});
        }
        if (cfg.eca_enabled) {
            size_t k = static_cast<size_t>(adaptive_kernel_size(c, cfg.eca));
            weight(stage + ".eca.kernel", {k});
        }
        if (s < 3) {
            ones(stage + ".merge.norm.gain", {4 * c});
            zeros(stage + ".merge.norm.bias", {4 * c});
            weight(stage + ".merge.reduce.weight", {4 * c, 2 * c});
        }
    }
    size_t final_dim = cfg.stage_dim(3);
    ones("final_norm.gain", {final_dim});
    zeros("final_norm.bias", {final_dim});
    weight("head.weight", {final_dim, cfg.num_classes});
    zeros("head.bias", {cfg.num_classes});
    return params;
}

enum class Mode { kTrain, kEval };

struct StageTrace {
    size_t height = 0, width = 0, channels = 0;
};

namespace detail {

template <typename T>
WindowAttentionParams<T> attn_params(ModelParams<T>& params, const ModelConfig& cfg,
                                     const std::string& prefix, size_t stage) {
    WindowAttentionParams<T> ap;
    ap.qkv_weight = params.get(prefix + ".attn.qkv.weight");
    ap.qkv_bias = params.get(prefix + ".attn.qkv.bias");
    ap.proj_weight = params.get(prefix + ".attn.proj.weight");
    ap.proj_bias = params.get(prefix + ".attn.proj.bias");
    if (cfg.use_relative_bias) ap.bias_table = params.get(prefix + ".attn.bias_table");
    ap.num_heads = cfg.num_heads[stage];
    ap.window_size = cfg.stage_window(stage);
    return ap;
}

template <typename T>
SwinBlockParams<T> block_params(ModelParams<T>& params, const ModelConfig& cfg,
                                size_t stage, size_t blk) {
    std::string b = "stages." + std::to_string(stage) + ".blocks." + std::to_string(blk);
    SwinBlockParams<T> bp;
    bp.norm1_gain = params.get(b + ".norm1.gain");
    bp.norm1_bias = params.get(b + ".norm1.bias");
    bp.attn = attn_params(params, cfg, b, stage);
    bp.norm2_gain = params.get(b + ".norm2.gain");
    bp.norm2_bias = params.get(b + ".norm2.bias");
    bp.mlp_fc1_weight = params.get(b + ".mlp.fc1.weight");
    bp.mlp_fc1_bias = params.get(b + ".mlp.fc1.bias");
    bp.mlp_fc2_weight = params.get(b + ".mlp.fc2.weight");
    bp.mlp_fc2_bias = params.get(b + ".mlp.fc2.bias");
    return bp;
}

} // namespace detail

/// Full forward pass: [B, 3, S, S] images to [B, num_classes] logits.
/// Within a stage, blocks alternate unshifted / shifted starting unshifted.
/// `trace` and `stage_outputs` optionally capture per-stage geometry and the
/// post-gate stage output tensors.
template <typename T>
Tensor<T> forward(const ModelConfig& cfg, ModelParams<T>& params, const Tensor<T>& images,
                  Mode mode, std::array<StageTrace, 4>* trace = nullptr,
                  std::vector<Tensor<T>>* stage_outputs = nullptr) {
    (void)mode; // train/eval currently coincide: dropout is fixed at 0
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg.image_size ||
        images.dim(3) != cfg.image_size) {
        throw ShapeError("forward: expected [B, 3, " + std::to_string(cfg.image_size) + ", " +
                         std::to_string(cfg.image_size) + "] images, got " +
                         shape_str(images.shape()));
    }
    PatchEmbedParams<T> pe{params.get("patch_embed.proj.weight"),
                           params.get("patch_embed.proj.bias"),
                           params.get("patch_embed.norm.gain"),
                           params.get("patch_embed.norm.bias")};
    FeatureMap<T> fm = patch_embed(images, cfg.patch_size, pe);

    for (size_t s = 0; s < 4; ++s) {
        size_t m = cfg.stage_window(s);
        size_t shift = cfg.stage_shift(s);
        Tensor<T> mask;
        if (shift > 0) mask = build_attention_mask<T>(fm.height(), fm.width(), m, shift);
        for (size_t blk = 0; blk < cfg.depths[s]; ++blk) {
            SwinBlockParams<T> bp = detail::block_params(params, cfg, s, blk);
            size_t blk_shift = (blk % 2 == 1) ? shift : 0;
            fm = swin_block(fm, bp, m, blk_shift, mask);
        }
        if (cfg.eca_enabled) {
            fm = apply_eca(fm, params.get("stages." + std::to_string(s) + ".eca.kernel"), cfg.eca);
        }
        if (trace) (*trace)[s] = {fm.height(), fm.width(), fm.channels()};
        if (stage_outputs) stage_outputs->push_back(fm.tokens);
        if (s < 3) {
            PatchMergeParams<T> mp{params.get("stages." + std::to_string(s) + ".merge.norm.gain"),
                                   params.get("stages." + std::to_string(s) + ".merge.norm.bias"),
                                   params.get("stages." + std::to_string(s) + ".merge.reduce.weight")};
            fm = patch_merge(fm, mp);
        }
    }
    Tensor<T> x = layer_norm(fm.tokens, params.get("final_norm.gain"), params.get("final_norm.bias"));
    x = mean(x, {1, 2}); // token mean -> [B, C]
    return linear(x, params.get("head.weight"), params.get("head.bias"));
}

// --- parameter audit -----------------------------------------------------------

struct AuditReport {
    size_t total = 0;
    std::vector<std::pair<std::string, size_t>> per_module; // ordered by first occurrence

    double total_millions() const { return static_cast<double>(total) / 1e6; }
};

/// Groups tensor sizes by module path ("stages.N" or the first name segment).
template <typename T>
AuditReport parameter_audit(const ModelParams<T>& params) {
    AuditReport report;
    std::unordered_map<std::string, size_t> pos;
    for (const auto& [name, t] : params.entries()) {
        size_t first = name.find('.');
        std::string module = name.substr(0, first);
        if (module == "stages" && first != std::string::npos) {
            size_t second = name.find('.', first + 1);
            module = name.substr(0, second);
        }
        auto it = pos.find(module);
        if (it == pos.end()) {
            pos[module] = report.per_module.size();
            report.per_module.emplace_back(module, t.size());
        } else {
            report.per_module[it->second].second += t.size();
        }
        report.total += t.size();
    }
    return report;
}

/// Sum of the eca kernel sizes for a config (the whole parameter increment
/// of enabling the channel-attention gates).
inline size_t eca_parameter_increment(const ModelConfig& cfg) {
    size_t total = 0;
    for (size_t s = 0; s < 4; ++s) {
        total += static_cast<size_t>(adaptive_kernel_size(cfg.stage_dim(s), cfg.eca));
    }
    return total;
}

} // namespace swinecat
