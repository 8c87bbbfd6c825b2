#pragma once

#include "swinecat/swin.hpp"
#include "swinecat/tensor.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Efficient Channel Attention: global average pooling, a bias-free 1-D
// convolution across the channel index with adaptive kernel size, sigmoid
// gating, and per-channel reweighting.
// ---------------------------------------------------------------------------

struct EcaConfig {
    int gamma = 2;
    int b = 1;
    int explicit_k = 0; // odd override; 0 = adaptive

    void validate() const {
        if (gamma <= 0) throw ConfigError("eca: gamma must be positive");
        if (b < 0) throw ConfigError("eca: b must be non-negative");
        if (explicit_k != 0 && (explicit_k < 1 || explicit_k % 2 == 0)) {
            throw ConfigError("eca: explicit kernel size must be a positive odd integer");
        }
    }
};

/// Kernel size from the channel count: round log2(C)/gamma + b/gamma to the
/// nearest integer (half away from zero), step down to the nearest odd when
/// that lands on an even value, floor at 1. explicit_k overrides.
inline int adaptive_kernel_size(size_t channels, const EcaConfig& cfg = {}) {
    cfg.validate();
    if (channels < 1) throw ContractError("adaptive_kernel_size: need at least one channel");
    if (cfg.explicit_k != 0) return cfg.explicit_k;
    double t = std::log2(static_cast<double>(channels)) / cfg.gamma +
               static_cast<double>(cfg.b) / cfg.gamma;
    int k = static_cast<int>(std::floor(t + 0.5));
    if (k % 2 == 0) k -= 1;
    return std::max(k, 1);
}

/// Channel descriptor: exact per-channel spatial mean of [B, H, W, C] -> [B, C].
template <typename T>
Tensor<T> global_average_pool(const FeatureMap<T>& fm) {
    if (fm.height() < 1 || fm.width() < 1) {
        throw ContractError("global_average_pool: empty spatial extent");
    }
    return mean(fm.tokens, {1, 2});
}

/// Attention weights: sigmoid of the channel convolution of z. Entries lie
/// strictly in (0, 1).
template <typename T>
Tensor<T> channel_weights(const Tensor<T>& z, const Tensor<T>& kernel) {
    return sigmoid(conv1d_channels(z, kernel));
}

/// Full module: reweights every channel of the feature map by its gate.
/// The kernel length must match the adaptive size for C (or the override).
template <typename T>
FeatureMap<T> apply_eca(const FeatureMap<T>& fm, const Tensor<T>& kernel,
                        const EcaConfig& cfg = {}) {
    size_t c = fm.channels();
    int expect = adaptive_kernel_size(c, cfg);
    if (kernel.rank() != 1 || kernel.size() != static_cast<size_t>(expect)) {
        throw ConfigError("apply_eca: kernel " + shape_str(kernel.shape()) +
                          " does not match adaptive size " + std::to_string(expect) +
                          " for " + std::to_string(c) + " channels");
    }
    Tensor<T> z = global_average_pool(fm);
    Tensor<T> w = channel_weights(z, kernel);
    return FeatureMap<T>(scale_channels(fm.tokens, w));
}

} // namespace swinecat
