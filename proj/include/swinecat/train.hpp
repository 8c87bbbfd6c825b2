#pragma once

#include <chrono>
#include <cstdio>
#include <limits>

#include "swinecat/data.hpp"
#include "swinecat/model.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Training: Adam, the early-stopped epoch loop, checkpoint persistence, and
// the per-epoch log behind loss/accuracy curves.
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-5;
    size_t batch_size = 32;
    int patience = 3;
    int max_epochs = 100;
    uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    size_t loader_workers = 0; // 0 = synchronous decoding
    size_t prefetch_batches = 2;
    double target_train_acc = 0.0; // > 0 stops the loop once reached

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("train: learning_rate must be positive");
        if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
        if (patience < 1) throw ConfigError("train: patience must be at least 1");
        if (max_epochs < 1) throw ConfigError("train: max_epochs must be at least 1");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
            throw ConfigError("train: adam betas must lie in [0, 1)");
        }
        if (eps <= 0) throw ConfigError("train: adam eps must be positive");
    }
};

// --- Adam -----------------------------------------------------------------------

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v; // first/second moments per parameter
    long t = 0;

    explicit AdamState(const ModelParams<T>& params) {
        for (const auto& [name, tensor] : params.entries()) {
            m.emplace_back(tensor.size(), T(0));
            v.emplace_back(tensor.size(), T(0));
        }
    }
};

/// Standard bias-corrected Adam update, in place. Every parameter must carry
/// a populated gradient; gradients are zeroed afterward.
template <typename T>
void adam_step(ModelParams<T>& params, AdamState<T>& state, const TrainConfig& cfg) {
    auto& entries = params.entries();
    if (state.m.size() != entries.size()) {
        throw ContractError("adam_step: state does not match parameter set");
    }
    for (auto& [name, tensor] : entries) {
        if (!tensor.has_grad()) {
            throw ContractError("adam_step: parameter " + name + " has no gradient");
        }
    }
    state.t += 1;
    T lr = static_cast<T>(cfg.learning_rate);
    T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    T eps = static_cast<T>(cfg.eps);
    T corr1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
    T corr2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));
    for (size_t pi = 0; pi < entries.size(); ++pi) {
        Tensor<T>& p = entries[pi].second;
        std::vector<T>& g = p.grad();
        std::vector<T>& m = state.m[pi];
        std::vector<T>& v = state.v[pi];
        T* data = p.data();
        for (size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            T mhat = m[i] / corr1;
            T vhat = v[i] / corr2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    params.zero_grads();
}

// --- early stopping -----------------------------------------------------------------

/// Generic early-stopped epoch driver. run_epoch(e) returns the epoch's
/// validation loss; on_improved(e) fires when the loss strictly improves
/// (snapshot hook); stop_now() allows an external goal to end the loop.
/// Stops after `patience` consecutive non-improving epochs (ties count as
/// non-improving) or max_epochs. Returns the best epoch.
template <typename RunEpoch, typename OnImproved, typename StopNow>
int run_early_stopped(int max_epochs, int patience, RunEpoch&& run_epoch,
                      OnImproved&& on_improved, StopNow&& stop_now,
                      double* best_loss_out = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int bad_streak = 0;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        double val_loss = run_epoch(epoch);
        if (val_loss < best) {
            best = val_loss;
            best_epoch = epoch;
            bad_streak = 0;
            on_improved(epoch);
        } else if (++bad_streak >= patience) {
            break;
        }
        if (stop_now()) break;
    }
    if (best_loss_out) *best_loss_out = best;
    return best_epoch;
}

template <typename RunEpoch, typename OnImproved>
int run_early_stopped(int max_epochs, int patience, RunEpoch&& run_epoch,
                      OnImproved&& on_improved, double* best_loss_out = nullptr) {
    return run_early_stopped(max_epochs, patience, std::forward<RunEpoch>(run_epoch),
                             std::forward<OnImproved>(on_improved), [] { return false; },
                             best_loss_out);
}

// --- train log -----------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0;
    double seconds = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;

    void save_csv(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write train log " + path);
        out << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
        out.precision(10);
        for (const auto& r : epochs) {
            out << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.val_loss
                << ',' << r.val_acc << ',' << r.seconds << '\n';
        }
    }
};

// --- checkpoint format -----------------------------------------------------------------
// "SECT" magic, u32 version, u32 tensor count, then per tensor:
// u32 name length, name bytes, u32 rank, u32 dims, little-endian f32 data.

inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& in, const std::string& path) {
    uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw FormatError("checkpoint " + path + ": truncated");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

inline void write_f32(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

inline float read_f32(std::istream& in, const std::string& path) {
    uint32_t bits = read_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace detail

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write("SECT", 4);
    detail::write_u32(out, kCheckpointVersion);
    detail::write_u32(out, static_cast<uint32_t>(params.count()));
    for (const auto& [name, tensor] : params.entries()) {
        detail::write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(out, static_cast<uint32_t>(tensor.rank()));
        for (size_t d : tensor.shape()) detail::write_u32(out, static_cast<uint32_t>(d));
        for (size_t i = 0; i < tensor.size(); ++i) {
            detail::write_f32(out, static_cast<float>(tensor.data()[i]));
        }
    }
    if (!out) throw IoError("short write to checkpoint " + path);
}

/// Raw checkpoint contents, independent of any config.
inline std::vector<std::pair<std::string, Tensor<float>>> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "SECT", 4) != 0) {
        throw FormatError("checkpoint " + path + ": bad magic");
    }
    uint32_t version = detail::read_u32(in, path);
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint " + path + ": unsupported version " + std::to_string(version));
    }
    uint32_t count = detail::read_u32(in, path);
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = detail::read_u32(in, path);
        if (name_len > 4096) throw FormatError("checkpoint " + path + ": implausible name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (static_cast<uint32_t>(in.gcount()) != name_len) {
            throw FormatError("checkpoint " + path + ": truncated");
        }
        uint32_t rank = detail::read_u32(in, path);
        if (rank > 16) throw FormatError("checkpoint " + path + ": implausible rank");
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = detail::read_u32(in, path);
        Tensor<float> t{shape};
        for (size_t e = 0; e < t.size(); ++e) t.data()[e] = detail::read_f32(in, path);
        tensors.emplace_back(std::move(name), std::move(t));
    }
    if (in.peek() != EOF) throw FormatError("checkpoint " + path + ": trailing bytes");
    return tensors;
}

/// Loads a checkpoint into a parameter skeleton built from the active config.
/// Name-set or shape disagreements raise CompatError naming the tensors.
template <typename T>
void load_checkpoint(ModelParams<T>& params, const std::string& path) {
    auto tensors = read_checkpoint(path);
    std::unordered_map<std::string, bool> seen;
    for (const auto& [name, tensor] : params.entries()) seen[name] = false;
    for (auto& [name, loaded] : tensors) {
        if (!params.has(name)) {
            throw CompatError("checkpoint " + path + ": unexpected tensor " + name +
                              " not present in the configured model");
        }
        Tensor<T>& dst = params.get(name);
        if (dst.shape() != loaded.shape()) {
            throw CompatError("checkpoint " + path + ": tensor " + name + " has shape " +
                              shape_str(loaded.shape()) + ", config expects " +
                              shape_str(dst.shape()));
        }
        for (size_t i = 0; i < dst.size(); ++i) dst.data()[i] = static_cast<T>(loaded.data()[i]);
        seen[name] = true;
    }
    std::string missing;
    for (const auto& [name, was_seen] : seen) {
        if (!was_seen) missing += (missing.empty() ? "" : ", ") + name;
    }
    if (!missing.empty()) {
        throw CompatError("checkpoint " + path + ": missing tensors: " + missing);
    }
}

// --- evaluation helper -----------------------------------------------------------------

template <typename T>
struct EvalResult {
    double loss = 0; // mean over samples
    double accuracy = 0;
    std::vector<int> predictions;
    std::vector<int> labels;
};

template <typename T>
EvalResult<T> evaluate(const ModelConfig& model_cfg, ModelParams<T>& params,
                       const DatasetManifest& manifest, const std::string& root, Split split,
                       size_t batch_size, size_t workers = 0, size_t prefetch = 2) {
    EvalResult<T> result;
    BatchStream<T> stream(manifest, root, split, batch_size, /*shuffle=*/false, 0, 0,
                          model_cfg.image_size, workers, prefetch);
    double loss_sum = 0;
    size_t correct = 0, total = 0;
    while (auto batch = stream.next()) {
        Tensor<T> logits = forward(model_cfg, params, batch->images, Mode::kEval);
        Tensor<T> loss = cross_entropy(logits, batch->labels);
        size_t b = batch->labels.size();
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(b);
        size_t classes = logits.dim(1);
        for (size_t i = 0; i < b; ++i) {
            const T* row = logits.data() + i * classes;
            int arg = 0;
            for (size_t k = 1; k < classes; ++k) {
                if (row[k] > row[arg]) arg = static_cast<int>(k);
            }
            result.predictions.push_back(arg);
            result.labels.push_back(batch->labels[i]);
            correct += (arg == batch->labels[i]);
        }
        total += b;
    }
    result.loss = loss_sum / static_cast<double>(total);
    result.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    return result;
}

// --- fit -----------------------------------------------------------------------------

template <typename T>
struct FitResult {
    ModelParams<T> best_params;
    TrainLog log;
    int best_epoch = 0;
    double best_val_loss = 0;
};

/// Full training protocol: per epoch, one shuffled pass over the train split
/// (forward, backward, Adam step per batch) and one unshuffled eval pass over
/// the val split; early stopping on strict val-loss improvement; returns the
/// snapshot with the minimum val loss.
template <typename T>
FitResult<T> fit(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                 const DatasetManifest& manifest, const std::string& root) {
    model_cfg.validate();
    train_cfg.validate();
    if (manifest.split_count(Split::kTrain) == 0 || manifest.split_count(Split::kVal) == 0) {
        throw ContractError("fit: manifest needs non-empty train and val splits");
    }
    ModelParams<T> params = build<T>(model_cfg);
    params.set_requires_grad(true);
    AdamState<T> adam(params);

    FitResult<T> result;
    bool goal_reached = false;

    auto run_epoch = [&](int epoch) -> double {
        auto start = std::chrono::steady_clock::now();
        BatchStream<T> train_stream(manifest, root, Split::kTrain, train_cfg.batch_size,
                                    /*shuffle=*/true, train_cfg.seed,
                                    static_cast<uint64_t>(epoch), model_cfg.image_size,
                                    train_cfg.loader_workers, train_cfg.prefetch_batches);
        double loss_sum = 0;
        size_t correct = 0, total = 0;
        while (auto batch = train_stream.next()) {
            GradTape<T> tape;
            typename GradTape<T>::Scope scope(tape);
            Tensor<T> logits = forward(model_cfg, params, batch->images, Mode::kTrain);
            Tensor<T> loss = cross_entropy(logits, batch->labels);
            tape.backward(loss);
            tape.clear();
            adam_step(params, adam, train_cfg);

            size_t b = batch->labels.size();
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(b);
            size_t classes = logits.dim(1);
            for (size_t i = 0; i < b; ++i) {
                const T* row = logits.data() + i * classes;
                int arg = 0;
                for (size_t k = 1; k < classes; ++k) {
                    if (row[k] > row[arg]) arg = static_cast<int>(k);
                }
                correct += (arg == batch->labels[i]);
            }
            total += b;
        }
        EvalResult<T> val = evaluate(model_cfg, params, manifest, root, Split::kVal,
                                     train_cfg.batch_size, train_cfg.loader_workers,
                                     train_cfg.prefetch_batches);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(total);
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(total);
        rec.val_loss = val.loss;
        rec.val_acc = val.accuracy;
        rec.seconds = secs;
        result.log.epochs.push_back(rec);
        if (train_cfg.target_train_acc > 0 && rec.train_acc >= train_cfg.target_train_acc) {
            goal_reached = true;
        }
        return val.loss;
    };

    double best_loss = 0;
    int best_epoch = run_early_stopped(
        train_cfg.max_epochs, train_cfg.patience, run_epoch,
        [&](int epoch) {
            result.best_params = params.deep_copy();
            result.best_epoch = epoch;
        },
        [&] { return goal_reached; }, &best_loss);
    result.best_epoch = best_epoch;
    result.best_val_loss = best_loss;
    return result;
}

} // namespace swinecat
