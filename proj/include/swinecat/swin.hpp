#pragma once

#include "swinecat/tensor.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Windowed / shifted-window multi-head self-attention building blocks.
// Token grids are [B, H, W, C]; window grids are [B * nW, M*M, C].
// ---------------------------------------------------------------------------

/// Additive pre-softmax penalty for cross-region pairs. Large enough to zero
/// the weight in f32 without overflowing through exp.
inline constexpr double kMaskNeg = -100.0;

template <typename T>
struct FeatureMap {
    Tensor<T> tokens; // [B, H, W, C]

    FeatureMap() = default;
    explicit FeatureMap(Tensor<T> t) : tokens(std::move(t)) {
        if (tokens.rank() != 4) {
            throw ShapeError("FeatureMap: expected [B, H, W, C], got " +
                             shape_str(tokens.shape()));
        }
    }
    size_t batch() const { return tokens.dim(0); }
    size_t height() const { return tokens.dim(1); }
    size_t width() const { return tokens.dim(2); }
    size_t channels() const { return tokens.dim(3); }
};

template <typename T>
struct WindowGrid {
    Tensor<T> windows; // [B * nW, M*M, C]
    size_t window_size = 0;
    size_t src_height = 0;
    size_t src_width = 0;
    size_t batch = 0;

    size_t windows_per_image() const {
        return (src_height / window_size) * (src_width / window_size);
    }
};

/// Splits the token grid into non-overlapping M x M windows.
template <typename T>
WindowGrid<T> window_partition(const FeatureMap<T>& fm, size_t m) {
    size_t h = fm.height(), w = fm.width();
    if (m == 0 || h % m != 0 || w % m != 0) {
        throw ConfigError("window_partition: window size " + std::to_string(m) +
                          " does not divide grid " + std::to_string(h) + "x" + std::to_string(w));
    }
    size_t b = fm.batch(), c = fm.channels();
    Tensor<T> x = reshape(fm.tokens, {b, h / m, m, w / m, m, c});
    x = permute(x, {0, 1, 3, 2, 4, 5});
    x = reshape(x, {b * (h / m) * (w / m), m * m, c});
    WindowGrid<T> wg;
    wg.windows = std::move(x);
    wg.window_size = m;
    wg.src_height = h;
    wg.src_width = w;
    wg.batch = b;
    return wg;
}

/// Inverse of window_partition (bit-exact round trip).
template <typename T>
FeatureMap<T> window_reverse(const WindowGrid<T>& wg) {
    size_t m = wg.window_size, h = wg.src_height, w = wg.src_width, b = wg.batch;
    size_t c = wg.windows.dim(2);
    Tensor<T> x = reshape(wg.windows, {b, h / m, w / m, m, m, c});
    x = permute(x, {0, 1, 3, 2, 4, 5});
    x = reshape(x, {b, h, w, c});
    return FeatureMap<T>(std::move(x));
}

/// Rolls tokens by (-s, -s) with wraparound; cyclic_shift(fm, -s) restores.
template <typename T>
FeatureMap<T> cyclic_shift(const FeatureMap<T>& fm, long s) {
    if (s == 0) return fm;
    return FeatureMap<T>(roll2d(fm.tokens, -s, -s));
}

// --- attention mask ----------------------------------------------------------

/// Region label of a post-shift grid coordinate under the three-band
/// partition at (extent - m) and (extent - s).
inline int shift_band(size_t coord, size_t extent, size_t m, size_t s) {
    if (coord < extent - m) return 0;
    if (coord < extent - s) return 1;
    return 2;
}

/// Builds the per-window additive mask for shift s on an H x W grid: token
/// pairs originating from different pre-shift regions get kMaskNeg. For
/// s == 0 the mask is all zeros.
template <typename T>
Tensor<T> build_attention_mask(size_t h, size_t w, size_t m, size_t s) {
    if (m == 0 || h % m != 0 || w % m != 0) {
        throw ConfigError("build_attention_mask: window " + std::to_string(m) +
                          " does not divide grid");
    }
    if (s >= m) {
        throw ContractError("build_attention_mask: shift " + std::to_string(s) +
                            " must be smaller than window " + std::to_string(m));
    }
    size_t nw = (h / m) * (w / m);
    size_t l = m * m;
    Tensor<T> mask(Shape{nw, l, l});
    if (s == 0) return mask;

    // label every grid position, then compare pairwise inside each window
    std::vector<int> labels(h * w);
    for (size_t i = 0; i < h; ++i) {
        for (size_t j = 0; j < w; ++j) {
            labels[i * w + j] = shift_band(i, h, m, s) * 3 + shift_band(j, w, m, s);
        }
    }
    T neg = static_cast<T>(kMaskNeg);
    for (size_t wi = 0; wi < h / m; ++wi) {
        for (size_t wj = 0; wj < w / m; ++wj) {
            size_t widx = wi * (w / m) + wj;
            T* block = mask.data() + widx * l * l;
            for (size_t a = 0; a < l; ++a) {
                int la = labels[(wi * m + a / m) * w + (wj * m + a % m)];
                for (size_t bpos = 0; bpos < l; ++bpos) {
                    int lb = labels[(wi * m + bpos / m) * w + (wj * m + bpos % m)];
                    block[a * l + bpos] = la == lb ? T(0) : neg;
                }
            }
        }
    }
    return mask;
}

// --- relative position bias ----------------------------------------------------

/// Maps each in-window position pair (a, b) to a row of the (2M-1)^2 bias
/// table; the row depends only on (drow, dcol) between the two positions.
inline std::vector<size_t> relative_position_index(size_t m) {
    size_t l = m * m;
    std::vector<size_t> idx(l * l);
    for (size_t a = 0; a < l; ++a) {
        long ar = static_cast<long>(a / m), ac = static_cast<long>(a % m);
        for (size_t b = 0; b < l; ++b) {
            long br = static_cast<long>(b / m), bc = static_cast<long>(b % m);
            size_t dr = static_cast<size_t>(ar - br + static_cast<long>(m) - 1);
            size_t dc = static_cast<size_t>(ac - bc + static_cast<long>(m) - 1);
            idx[a * l + b] = dr * (2 * m - 1) + dc;
        }
    }
    return idx;
}

// --- window attention ----------------------------------------------------------

template <typename T>
struct WindowAttentionParams {
    Tensor<T> qkv_weight;  // [C, 3C]
    Tensor<T> qkv_bias;    // [3C]
    Tensor<T> proj_weight; // [C, C]
    Tensor<T> proj_bias;   // [C]
    Tensor<T> bias_table;  // [(2M-1)^2, heads], empty when disabled
    size_t num_heads = 1;
    size_t window_size = 0; // M used for the bias index map
};

/// Scaled dot-product self-attention inside each window:
/// softmax(Q K^T / sqrt(d) + bias + mask) V, followed by output projection.
/// `mask` may be empty; `probs_out`, when given, receives the post-softmax
/// attention weights [nW, heads, L, L] for diagnostics.
template <typename T>
WindowGrid<T> window_attention(const WindowGrid<T>& wg, const WindowAttentionParams<T>& params,
                               const Tensor<T>& mask, Tensor<T>* probs_out = nullptr) {
    size_t nw = wg.windows.dim(0), l = wg.windows.dim(1), c = wg.windows.dim(2);
    size_t heads = params.num_heads;
    if (heads == 0 || c % heads != 0) {
        throw ConfigError("window_attention: channels " + std::to_string(c) +
                          " not divisible by heads " + std::to_string(heads));
    }
    size_t hd = c / heads;

    Tensor<T> flat = reshape(wg.windows, {nw * l, c});
    Tensor<T> qkv = linear(flat, params.qkv_weight, params.qkv_bias); // [nW*L, 3C]
    qkv = reshape(qkv, {nw, l, 3, heads, hd});
    qkv = permute(qkv, {2, 0, 3, 1, 4}); // [3, nW, heads, L, d]
    Tensor<T> q = reshape(index_axis0(qkv, 0), {nw * heads, l, hd});
    Tensor<T> k = reshape(index_axis0(qkv, 1), {nw * heads, l, hd});
    Tensor<T> v = reshape(index_axis0(qkv, 2), {nw * heads, l, hd});

    T att_scale = T(1) / std::sqrt(static_cast<T>(hd));
    Tensor<T> attn = scale(bmm(q, k, /*trans_b=*/true), att_scale); // [nW*heads, L, L]
    attn = reshape(attn, {nw, heads, l, l});

    Tensor<T> rel_bias;
    if (params.bias_table.size() > 0) {
        size_t m = params.window_size;
        if (l != m * m) {
            throw ConfigError("window_attention: bias table built for window " +
                              std::to_string(m) + " but got " + std::to_string(l) + " tokens");
        }
        Tensor<T> rows = embedding_rows(params.bias_table, relative_position_index(m));
        rel_bias = reshape(permute(rows, {1, 0}), {heads, l, l});
    }
    attn = attn_bias_add(attn, rel_bias, mask);
    attn = softmax(attn, 3);
    if (probs_out) *probs_out = attn;

    Tensor<T> ctx = bmm(reshape(attn, {nw * heads, l, l}), v); // [nW*heads, L, d]
    ctx = permute(reshape(ctx, {nw, heads, l, hd}), {0, 2, 1, 3});
    ctx = reshape(ctx, {nw * l, c});
    Tensor<T> out = linear(ctx, params.proj_weight, params.proj_bias);

    WindowGrid<T> result = wg;
    result.windows = reshape(out, {nw, l, c});
    return result;
}

// --- Swin transformer block ------------------------------------------------------

template <typename T>
struct SwinBlockParams {
    Tensor<T> norm1_gain, norm1_bias;
    WindowAttentionParams<T> attn;
    Tensor<T> norm2_gain, norm2_bias;
    Tensor<T> mlp_fc1_weight, mlp_fc1_bias; // [C, rC], [rC]
    Tensor<T> mlp_fc2_weight, mlp_fc2_bias; // [rC, C], [C]
};

/// Pre-norm Swin block: x + Attn(LN(x)) with optional cyclic shift, then
/// x + MLP(LN(x)) where MLP is linear -> GELU -> linear. `mask` must be the
/// mask for (H, W, M, shift); pass an empty tensor when shift == 0.
template <typename T>
FeatureMap<T> swin_block(const FeatureMap<T>& fm, const SwinBlockParams<T>& params,
                         size_t window, size_t shift, const Tensor<T>& mask) {
    size_t b = fm.batch(), h = fm.height(), w = fm.width(), c = fm.channels();
    Tensor<T> shortcut = fm.tokens;

    Tensor<T> x = layer_norm(fm.tokens, params.norm1_gain, params.norm1_bias);
    FeatureMap<T> shifted(std::move(x));
    if (shift > 0) shifted = cyclic_shift(shifted, static_cast<long>(shift));
    WindowGrid<T> wg = window_partition(shifted, window);
    wg = window_attention(wg, params.attn, shift > 0 ? mask : Tensor<T>());
    FeatureMap<T> attn_out = window_reverse(wg);
    if (shift > 0) attn_out = cyclic_shift(attn_out, -static_cast<long>(shift));
    x = add(shortcut, attn_out.tokens);

    Tensor<T> y = layer_norm(x, params.norm2_gain, params.norm2_bias);
    y = reshape(y, {b * h * w, c});
    y = linear(y, params.mlp_fc1_weight, params.mlp_fc1_bias);
    y = gelu(y);
    y = linear(y, params.mlp_fc2_weight, params.mlp_fc2_bias);
    y = reshape(y, {b, h, w, c});
    return FeatureMap<T>(add(x, y));
}

// --- patch embedding / merging ------------------------------------------------------

template <typename T>
struct PatchEmbedParams {
    Tensor<T> proj_weight; // [3*P*P, D]
    Tensor<T> proj_bias;   // [D]
    Tensor<T> norm_gain, norm_bias;
};

/// Projects non-overlapping P x P patches of [B, 3, H, W] images to D
/// channels, then layer-norms, giving a (H/P) x (W/P) token grid.
template <typename T>
FeatureMap<T> patch_embed(const Tensor<T>& images, size_t patch, const PatchEmbedParams<T>& params) {
    if (images.rank() != 4 || images.dim(1) != 3) {
        throw ShapeError("patch_embed: expected [B, 3, H, W], got " + shape_str(images.shape()));
    }
    size_t b = images.dim(0), h = images.dim(2), w = images.dim(3);
    if (patch == 0 || h % patch != 0 || w % patch != 0) {
        throw ConfigError("patch_embed: patch size " + std::to_string(patch) +
                          " does not divide image " + std::to_string(h) + "x" + std::to_string(w));
    }
    size_t gh = h / patch, gw = w / patch;
    size_t d = params.proj_weight.dim(1);
    Tensor<T> x = reshape(images, {b, 3, gh, patch, gw, patch});
    x = permute(x, {0, 2, 4, 1, 3, 5}); // [B, gh, gw, 3, P, P]
    x = reshape(x, {b * gh * gw, 3 * patch * patch});
    x = linear(x, params.proj_weight, params.proj_bias);
    x = layer_norm(x, params.norm_gain, params.norm_bias);
    return FeatureMap<T>(reshape(x, {b, gh, gw, d}));
}

template <typename T>
struct PatchMergeParams {
    Tensor<T> norm_gain, norm_bias; // [4C]
    Tensor<T> reduce_weight;        // [4C, 2C], no bias
};

/// Concatenates 2x2 token neighborhoods to 4C, layer-norms, and projects to
/// 2C, halving the grid resolution.
template <typename T>
FeatureMap<T> patch_merge(const FeatureMap<T>& fm, const PatchMergeParams<T>& params) {
    size_t b = fm.batch(), h = fm.height(), w = fm.width(), c = fm.channels();
    if (h % 2 != 0 || w % 2 != 0) {
        throw ConfigError("patch_merge: grid " + std::to_string(h) + "x" + std::to_string(w) +
                          " must have even dimensions");
    }
    Tensor<T> x = reshape(fm.tokens, {b, h / 2, 2, w / 2, 2, c});
    x = permute(x, {0, 1, 3, 2, 4, 5}); // [B, h/2, w/2, 2, 2, C]
    x = reshape(x, {b * (h / 2) * (w / 2), 4 * c});
    x = layer_norm(x, params.norm_gain, params.norm_bias);
    x = linear(x, params.reduce_weight, Tensor<T>());
    return FeatureMap<T>(reshape(x, {b, h / 2, w / 2, 2 * c}));
}

} // namespace swinecat
