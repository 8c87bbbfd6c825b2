// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include "swinecat/config.hpp"
#include "swinecat/data.hpp"
#include "swinecat/metrics.hpp"
#include "swinecat/model.hpp"
#include "swinecat/train.hpp"

using namespace swinecat;
namespace fs = std::filesystem;

namespace {

struct Checker {
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    }
    void expect_near(double got, double want, double tol, const std::string& what) {
        if (!(std::fabs(got - want) <= tol)) {
            failures.push_back(what + ": got " + std::to_string(got) + ", want " +
                               std::to_string(want) + " +- " + std::to_string(tol));
        }
    }
    void note(const std::string& line) { notes.push_back(line); }
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string scratch_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("swinecat_accept_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

// --- criterion 1: ECA oracle equivalence --------------------------------------------

std::vector<double> eca_triple_loop(const std::vector<double>& map, size_t h, size_t w, size_t c,
                                    const std::vector<double>& kernel) {
    std::vector<double> z(c, 0.0);
    for (size_t i = 0; i < h; ++i)
        for (size_t j = 0; j < w; ++j)
            for (size_t ch = 0; ch < c; ++ch) z[ch] += map[(i * w + j) * c + ch];
    for (size_t ch = 0; ch < c; ++ch) z[ch] /= static_cast<double>(h * w);
    long pad = static_cast<long>(kernel.size() - 1) / 2;
    std::vector<double> gate(c, 0.0);
    for (size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t j = 0; j < kernel.size(); ++j) {
            long src = static_cast<long>(ch) + static_cast<long>(j) - pad;
            if (src >= 0 && src < static_cast<long>(c)) acc += z[static_cast<size_t>(src)] * kernel[j];
        }
        gate[ch] = 1.0 / (1.0 + std::exp(-acc));
    }
    std::vector<double> out(map.size());
    for (size_t i = 0; i < h * w; ++i)
        for (size_t ch = 0; ch < c; ++ch) out[i * c + ch] = gate[ch] * map[i * c + ch];
    return out;
}

void criterion1_eca_oracle(Checker& ck) {
    Rng rng(101);
    double start = now_seconds();
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        size_t h = 1 + rng.below(8), w = 1 + rng.below(8), c = 1 + rng.below(32);
        EcaConfig cfg;
        size_t k = static_cast<size_t>(adaptive_kernel_size(c, cfg));
        Tensor<double> kernel({k});
        for (size_t i = 0; i < k; ++i) kernel.data()[i] = rng.uniform(-1, 1);
        Tensor<double> map({1, h, w, c});
        for (size_t i = 0; i < map.size(); ++i) map.data()[i] = rng.uniform(-1, 1);
        FeatureMap<double> out = apply_eca(FeatureMap<double>(map), kernel, cfg);
        auto want = eca_triple_loop(map.vec(), h, w, c, kernel.vec());
        for (size_t i = 0; i < want.size(); ++i) {
            worst = std::max(worst, std::fabs(out.tokens.data()[i] - want[i]));
        }
    }
    double elapsed = now_seconds() - start;
    ck.expect(worst < 1e-6, "max deviation from triple-loop oracle " + std::to_string(worst));
    ck.expect(elapsed < 5.0, "runtime " + std::to_string(elapsed) + "s exceeds 5s");
    ck.note("200 maps, max |impl - oracle| = " + std::to_string(worst));
}

// --- criterion 2: adaptive kernel values + audit difference ---------------------------

void criterion2_kernels(Checker& ck) {
    EcaConfig e;
    ck.expect(adaptive_kernel_size(96, e) == 3, "k(96) != 3");
    ck.expect(adaptive_kernel_size(192, e) == 3, "k(192) != 3");
    ck.expect(adaptive_kernel_size(384, e) == 5, "k(384) != 5");
    ck.expect(adaptive_kernel_size(768, e) == 5, "k(768) != 5");

    ModelConfig cfg;
    cfg.eca_enabled = true;
    size_t with = build<float>(cfg).total_parameters();
    cfg.eca_enabled = false;
    size_t without = build<float>(cfg).total_parameters();
    ck.expect(with - without == 16, "audit difference " + std::to_string(with - without) + " != 16");
    ck.note("k = 3,3,5,5; gated - baseline = " + std::to_string(with - without) + " parameters");
}

// --- criterion 3: parameter audit vs published figures --------------------------------

void criterion3_parameter_audit(Checker& ck) {
    ModelConfig cfg;
    cfg.eca_enabled = false;
    AuditReport audit = parameter_audit(build<float>(cfg));
    double total_m = audit.total_millions();
    ck.expect(std::fabs(total_m - 27.53) <= 0.02 * 27.53,
              "baseline total " + std::to_string(total_m) + "M outside 27.53M +- 2%");
    ck.note("baseline audit: " + std::to_string(audit.total) + " parameters (" +
            std::to_string(total_m) + "M) vs published 27.53M");
    ck.note("published figure for the gated variant: 28.30M (+0.77M); the audited "
            "increment is 16 parameters (kernel weights only) - the published delta "
            "is not reproducible from the gating equations, so both numbers are "
            "reported side by side");
}

// --- criterion 4: full-model gradient audit -------------------------------------------

void criterion4_gradient_audit(Checker& ck) {
    double start = now_seconds();
    ModelConfig cfg = ModelConfig::tiny();
    ModelParams<double> params = build<double>(cfg);
    params.set_requires_grad(true);

    Rng rng(404);
    Tensor<double> images({1, 3, 64, 64});
    for (size_t i = 0; i < images.size(); ++i) images.data()[i] = rng.uniform(-1, 1);
    std::vector<int> labels = {4};

    auto loss_value = [&]() -> double {
        Tensor<double> logits = forward(cfg, params, images, Mode::kEval);
        return cross_entropy(logits, labels).item();
    };

    GradTape<double> tape;
    {
        GradTape<double>::Scope scope(tape);
        Tensor<double> logits = forward(cfg, params, images, Mode::kTrain);
        Tensor<double> loss = cross_entropy(logits, labels);
        tape.backward(loss);
    }
    tape.clear();

    const double h = 1e-4;
    double worst = 0.0;
    std::string worst_name;
    size_t tensors = 0;
    auto update_worst = [&](double fd, double an, const std::string& name) {
        double err = std::fabs(fd - an);
        if (err < 1e-8) return; // finite-difference noise floor
        double rel = err / std::max(std::max(std::fabs(fd), std::fabs(an)), 1e-12);
        if (rel > worst) {
            worst = rel;
            worst_name = name;
        }
    };

    for (auto& [name, t] : params.entries()) {
        ++tensors;
        // directional derivative across the whole tensor
        std::vector<double> dir(t.size());
        Rng drng(mix_seed(405, fnv1a64(name)));
        for (auto& d : dir) d = drng.uniform(-1, 1);
        std::vector<double> saved = t.vec();
        for (size_t i = 0; i < t.size(); ++i) t.data()[i] = saved[i] + h * dir[i];
        double up = loss_value();
        for (size_t i = 0; i < t.size(); ++i) t.data()[i] = saved[i] - h * dir[i];
        double down = loss_value();
        t.vec() = saved;
        double fd = (up - down) / (2 * h);
        double an = 0.0;
        for (size_t i = 0; i < t.size(); ++i) an += t.grad()[i] * dir[i];
        update_worst(fd, an, name + " (directional)");

        // spot-check individual coordinates
        for (int probe = 0; probe < 4; ++probe) {
            size_t i = drng.below(t.size());
            double keep = t.data()[i];
            t.data()[i] = keep + h;
            double u = loss_value();
            t.data()[i] = keep - h;
            double d = loss_value();
            t.data()[i] = keep;
            update_worst((u - d) / (2 * h), t.grad()[i],
                         name + "[" + std::to_string(i) + "]");
        }
    }
    double elapsed = now_seconds() - start;
    ck.expect(worst < 1e-2, "max relative error " + std::to_string(worst) + " at " + worst_name);
    ck.expect(elapsed < 300.0, "runtime " + std::to_string(elapsed) + "s exceeds 5 min");
    ck.note(std::to_string(tensors) + " parameter tensors, directional + 4 coordinates each; "
            "max rel err = " + std::to_string(worst) + ", " + std::to_string(elapsed) + "s");
}

// --- criterion 5: attention mask soundness ---------------------------------------------

void criterion5_mask_soundness(Checker& ck) {
    size_t gh = 8, gw = 8, m = 4, s = 2, c = 8, heads = 2;
    Tensor<double> mask = build_attention_mask<double>(gh, gw, m, s);
    double worst_masked = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        Rng rng(500 + draw);
        WindowAttentionParams<double> params;
        auto fill = [&](Tensor<double>& t, double sc) {
            for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-sc, sc);
        };
        params.qkv_weight = Tensor<double>({c, 3 * c});
        params.qkv_bias = Tensor<double>({3 * c});
        params.proj_weight = Tensor<double>({c, c});
        params.proj_bias = Tensor<double>({c});
        params.bias_table = Tensor<double>({(2 * m - 1) * (2 * m - 1), heads});
        fill(params.qkv_weight, 0.6);
        fill(params.qkv_bias, 0.2);
        fill(params.proj_weight, 0.6);
        fill(params.proj_bias, 0.2);
        fill(params.bias_table, 0.4);
        params.num_heads = heads;
        params.window_size = m;

        Tensor<double> tokens({1, gh, gw, c});
        for (size_t i = 0; i < tokens.size(); ++i) tokens.data()[i] = rng.uniform(-1, 1);
        FeatureMap<double> rolled = cyclic_shift(FeatureMap<double>(tokens), static_cast<long>(s));
        WindowGrid<double> wg = window_partition(rolled, m);
        Tensor<double> probs;
        window_attention(wg, params, mask, &probs);
        size_t l = m * m;
        for (size_t wi = 0; wi < probs.dim(0); ++wi) {
            for (size_t hd = 0; hd < heads; ++hd) {
                for (size_t a = 0; a < l; ++a) {
                    for (size_t b = 0; b < l; ++b) {
                        if (mask.at({wi % mask.dim(0), a, b}) != 0.0) {
                            worst_masked = std::max(worst_masked, probs.at({wi, hd, a, b}));
                        }
                    }
                }
            }
        }
    }
    ck.expect(worst_masked < 1e-6,
              "masked pair weight " + std::to_string(worst_masked) + " >= 1e-6");

    // unshifted dense reconstruction: influence strictly inside window blocks
    Rng rng(555);
    WindowAttentionParams<double> params;
    auto fill = [&](Tensor<double>& t, double sc) {
        for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-sc, sc);
    };
    params.qkv_weight = Tensor<double>({c, 3 * c});
    params.qkv_bias = Tensor<double>({3 * c});
    params.proj_weight = Tensor<double>({c, c});
    params.proj_bias = Tensor<double>({c});
    fill(params.qkv_weight, 0.6);
    fill(params.qkv_bias, 0.2);
    fill(params.proj_weight, 0.6);
    fill(params.proj_bias, 0.2);
    params.num_heads = heads;
    params.window_size = m;

    Tensor<double> base({1, gh, gw, c});
    for (size_t i = 0; i < base.size(); ++i) base.data()[i] = rng.uniform(-1, 1);
    auto apply = [&](const Tensor<double>& tokens) {
        WindowGrid<double> wg = window_partition(FeatureMap<double>(tokens), m);
        wg = window_attention(wg, params, Tensor<double>());
        return window_reverse(wg).tokens;
    };
    Tensor<double> out0 = apply(base);
    auto window_of = [&](size_t tok) { return (tok / gw / m) * (gw / m) + (tok % gw) / m; };
    bool block_diagonal = true;
    for (size_t u = 0; u < gh * gw && block_diagonal; ++u) {
        Tensor<double> bumped = base.clone();
        for (size_t ch = 0; ch < c; ++ch) bumped.data()[u * c + ch] += 0.1;
        Tensor<double> out1 = apply(bumped);
        for (size_t t = 0; t < gh * gw; ++t) {
            double delta = 0;
            for (size_t ch = 0; ch < c; ++ch) {
                delta = std::max(delta, std::fabs(out1.data()[t * c + ch] - out0.data()[t * c + ch]));
            }
            if (window_of(t) != window_of(u) && delta != 0.0) block_diagonal = false;
            if (window_of(t) == window_of(u) && t == u && delta == 0.0) block_diagonal = false;
        }
    }
    ck.expect(block_diagonal, "unshifted dense reconstruction is not exactly block-diagonal");
    ck.note("20 draws; max masked-pair weight = " + std::to_string(worst_masked));
}

// --- criterion 6: shape law ---------------------------------------------------------------

void criterion6_shape_law(Checker& ck) {
    ModelConfig cfg; // 224 config
    ModelParams<float> params = build<float>(cfg);
    Tensor<float> image({1, 3, 224, 224});
    Rng rng(606);
    for (size_t i = 0; i < image.size(); ++i) image.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    std::array<StageTrace, 4> trace;
    Tensor<float> logits = forward(cfg, params, image, Mode::kEval, &trace);
    size_t grids[4] = {56, 28, 14, 7};
    size_t dims[4] = {96, 192, 384, 768};
    for (size_t s = 0; s < 4; ++s) {
        ck.expect(trace[s].height == grids[s] && trace[s].width == grids[s],
                  "stage " + std::to_string(s + 1) + " grid " + std::to_string(trace[s].height));
        ck.expect(trace[s].channels == dims[s],
                  "stage " + std::to_string(s + 1) + " dim " + std::to_string(trace[s].channels));
    }
    ck.expect(logits.shape() == (Shape{1, 9}), "logits shape " + shape_str(logits.shape()));
    ck.note("grids 56/28/14/7, dims 96/192/384/768, logits [1, 9]");
}

// --- criterion 7: overfit run ---------------------------------------------------------------

void criterion7_overfit(Checker& ck) {
    double start = now_seconds();
    std::string dir = scratch_dir("overfit");
    DatasetManifest manifest = synth_generate(dir, 10, 64, 7);
    assign_splits(manifest, 7);
    compute_stats(manifest, dir, 64);

    ModelConfig mc = ModelConfig::tiny();
    mc.seed = 7;
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 32;
    tc.max_epochs = 200;
    tc.patience = 200; // disabled: the stop condition here is the accuracy goal
    tc.seed = 7;
    tc.target_train_acc = 0.995;

    FitResult<float> r1 = fit<float>(mc, tc, manifest, dir);
    double best_acc = 0;
    for (const auto& e : r1.log.epochs) best_acc = std::max(best_acc, e.train_acc);
    ck.expect(best_acc >= 0.99, "train accuracy peaked at " + std::to_string(best_acc));
    ck.expect(r1.log.epochs.size() <= 200, "exceeded 200 epochs");

    FitResult<float> r2 = fit<float>(mc, tc, manifest, dir);
    bool identical = r1.log.epochs.size() == r2.log.epochs.size();
    for (size_t e = 0; identical && e < r1.log.epochs.size(); ++e) {
        identical = r1.log.epochs[e].train_loss == r2.log.epochs[e].train_loss &&
                    r1.log.epochs[e].val_loss == r2.log.epochs[e].val_loss &&
                    r1.log.epochs[e].train_acc == r2.log.epochs[e].train_acc &&
                    r1.log.epochs[e].val_acc == r2.log.epochs[e].val_acc;
    }
    ck.expect(identical, "same-seed runs diverged");
    double elapsed = now_seconds() - start;
    ck.expect(elapsed < 900.0, "runtime " + std::to_string(elapsed) + "s exceeds 15 min");
    ck.note("train acc " + std::to_string(best_acc) + " after " +
            std::to_string(r1.log.epochs.size()) + " epochs, two runs identical, " +
            std::to_string(elapsed) + "s total");
    fs::remove_all(dir);
}

// --- criterion 8: early stopping semantics ---------------------------------------------------

void criterion8_early_stopping(Checker& ck) {
    std::vector<double> losses = {1.0, 0.9, 0.95, 0.94, 0.93};
    int epochs_run = 0;
    int snapshot = -1; // stands in for the saved weights
    int best = run_early_stopped(
        100, 3,
        [&](int epoch) {
            ++epochs_run;
            return losses[static_cast<size_t>(epoch - 1)];
        },
        [&](int epoch) { snapshot = epoch; });
    ck.expect(epochs_run == 5, "stopped after " + std::to_string(epochs_run) + " epochs, want 5");
    ck.expect(best == 2, "best epoch " + std::to_string(best) + ", want 2");
    ck.expect(snapshot == 2, "returned snapshot from epoch " + std::to_string(snapshot) + ", want 2");
    ck.note("sequence [1.0, 0.9, 0.95, 0.94, 0.93], patience 3: stop after epoch 5, keep epoch 2");
}

// --- criterion 9: metrics identity suite -----------------------------------------------------

void criterion9_metrics(Checker& ck) {
    Rng rng(909);
    double worst_identity = 0.0, worst_oracle = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        size_t k = 2 + rng.below(8);
        ConfusionMatrix cm(k);
        bool any = false;
        for (size_t t = 0; t < k; ++t) {
            for (size_t p = 0; p < k; ++p) {
                cm.at(t, p) = rng.below(25);
                any = any || cm.at(t, p);
            }
        }
        if (!any) cm.at(0, 0) = 1;
        MetricsReport rep = report(cm);
        worst_identity = std::max(worst_identity, std::fabs(rep.weighted_recall - rep.accuracy));

        // brute force from raw pair counts
        size_t total = cm.total(), trace = 0;
        double macro_f1 = 0;
        for (size_t c = 0; c < k; ++c) {
            trace += cm.at(c, c);
            double tp = static_cast<double>(cm.at(c, c));
            double pred = 0, truth = 0;
            for (size_t o = 0; o < k; ++o) {
                pred += static_cast<double>(cm.at(o, c));
                truth += static_cast<double>(cm.at(c, o));
            }
            double prec = pred > 0 ? tp / pred : 0.0;
            double rec = truth > 0 ? tp / truth : 0.0;
            macro_f1 += (prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0) / k;
        }
        worst_oracle = std::max(worst_oracle,
                                std::fabs(rep.accuracy - static_cast<double>(trace) / total));
        worst_oracle = std::max(worst_oracle, std::fabs(rep.macro_f1 - macro_f1));
    }
    ck.expect(worst_identity <= 1e-12,
              "weighted recall deviates from accuracy by " + std::to_string(worst_identity));
    ck.expect(worst_oracle <= 1e-9, "report deviates from brute force by " + std::to_string(worst_oracle));

    ConfusionMatrix hand(2);
    hand.at(0, 0) = 8;
    hand.at(0, 1) = 2;
    hand.at(1, 0) = 3;
    hand.at(1, 1) = 7;
    ck.expect(report(hand).accuracy == 0.75, "hand case accuracy != 0.75");
    ck.note("100 random matrices; max |weighted recall - accuracy| = " +
            std::to_string(worst_identity));
}

// --- criterion 10: preprocessing audit --------------------------------------------------------

void criterion10_preprocessing(Checker& ck) {
    Image img;
    img.width = 1690;
    img.height = 2004;
    img.rgb.resize(img.width * img.height * 3);
    Rng rng(1010);
    for (auto& b : img.rgb) b = static_cast<uint8_t>(rng.below(256));

    FloatImage resized = resize_short_side(img, 256);
    ck.expect(std::min(resized.width, resized.height) == 256, "short side != 256");
    ck.expect(resized.height == 303, "long side " + std::to_string(resized.height) + ", want 303");
    double aspect_err = std::fabs(static_cast<double>(resized.height) -
                                  2004.0 * 256.0 / 1690.0);
    ck.expect(aspect_err <= 1.0, "aspect drift " + std::to_string(aspect_err) + " pixels");

    FloatImage cropped = center_crop(resized, 224);
    ck.expect(cropped.width == 224 && cropped.height == 224, "crop is not 224x224");
    size_t y0 = (resized.height - 224) / 2, x0 = (resized.width - 224) / 2;
    ck.expect(y0 == 39 && x0 == 16,
              "crop offsets (" + std::to_string(y0) + ", " + std::to_string(x0) + "), want (39, 16)");
    bool center_match = true;
    for (size_t y = 0; y < 224 && center_match; y += 37) {
        for (size_t x = 0; x < 224; x += 41) {
            for (int ch = 0; ch < 3; ++ch) {
                if (cropped.pixel(y, x)[ch] != resized.pixel(y0 + y, x0 + x)[ch]) {
                    center_match = false;
                }
            }
        }
    }
    ck.expect(center_match, "cropped pixels do not match the computed center offsets");

    Tensor<double> logits({3, 9});
    double ce = cross_entropy(logits, {0, 4, 8}).item();
    ck.expect_near(ce, std::log(9.0), 1e-6, "uniform 9-class cross-entropy");
    ck.note("2004x1690 -> 303x256, crop at rows 39 / cols 16; ln 9 = " + std::to_string(ce));
}

// --- criterion 11: persistence ----------------------------------------------------------------

void criterion11_persistence(Checker& ck) {
    std::string dir = scratch_dir("persist");
    ModelConfig cfg = ModelConfig::tiny();
    ModelParams<float> params = build<float>(cfg);
    save_checkpoint(params, dir + "/c.bin");

    ModelConfig cfg2 = ModelConfig::tiny();
    cfg2.seed = 321;
    ModelParams<float> loaded = build<float>(cfg2);
    load_checkpoint(loaded, dir + "/c.bin");

    Tensor<float> images({2, 3, 64, 64});
    Rng rng(1111);
    for (size_t i = 0; i < images.size(); ++i) images.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    Tensor<float> a = forward(cfg, params, images, Mode::kEval);
    Tensor<float> b = forward(cfg2, loaded, images, Mode::kEval);
    ck.expect(a.vec() == b.vec(), "save -> load changed the logits");

    bool format_error = false;
    auto size = fs::file_size(dir + "/c.bin");
    fs::resize_file(dir + "/c.bin", size - 7);
    try {
        ModelParams<float> fresh = build<float>(cfg);
        load_checkpoint(fresh, dir + "/c.bin");
    } catch (const FormatError&) {
        format_error = true;
    } catch (...) {
    }
    ck.expect(format_error, "truncated checkpoint not rejected with a format error");

    bool magic_error = false;
    {
        std::ofstream out(dir + "/bad.bin", std::ios::binary);
        out << "JUNKJUNKJUNKJUNK";
    }
    try {
        ModelParams<float> fresh = build<float>(cfg);
        load_checkpoint(fresh, dir + "/bad.bin");
    } catch (const FormatError&) {
        magic_error = true;
    } catch (...) {
    }
    ck.expect(magic_error, "bad magic not rejected with a format error");
    ck.note("bit-identical logits after reload; corrupt files raise format errors");
    fs::remove_all(dir);
}

struct Criterion {
    int id;
    const char* name;
    std::function<void(Checker&)> run;
};

} // namespace

int main() {
    std::vector<Criterion> criteria = {
        {1, "ECA oracle equivalence (200 random maps, 1e-6)", criterion1_eca_oracle},
        {2, "adaptive kernel sizes 3/3/5/5 and +16 parameter audit difference", criterion2_kernels},
        {3, "baseline parameter audit 27.53M +- 2%, published variant figure reported", criterion3_parameter_audit},
        {4, "full-model finite-difference gradient audit (tiny config, double)", criterion4_gradient_audit},
        {5, "attention mask soundness and block-diagonality", criterion5_mask_soundness},
        {6, "stage shape law 56/28/14/7 with dims 96/192/384/768", criterion6_shape_law},
        {7, "overfit 90 synthetic images to >= 99% train accuracy, deterministic", criterion7_overfit},
        {8, "early stopping: [1.0 .9 .95 .94 .93] stops after epoch 5, keeps epoch 2", criterion8_early_stopping},
        {9, "metrics identities and brute-force agreement", criterion9_metrics},
        {10, "preprocessing geometry audit and ln 9 cross-entropy", criterion10_preprocessing},
        {11, "checkpoint persistence and corruption rejection", criterion11_persistence},
    };

    int failed = 0;
    for (auto& criterion : criteria) {
        Checker ck;
        double start = now_seconds();
        try {
            criterion.run(ck);
        } catch (const std::exception& e) {
            ck.failures.push_back(std::string("exception: ") + e.what());
        }
        double elapsed = now_seconds() - start;
        if (ck.failures.empty()) {
            std::printf("PASS  criterion %2d: %s  (%.1fs)\n", criterion.id, criterion.name, elapsed);
        } else {
            ++failed;
            std::printf("FAIL  criterion %2d: %s  (%.1fs)\n", criterion.id, criterion.name, elapsed);
            for (const auto& f : ck.failures) std::printf("      - %s\n", f.c_str());
        }
        for (const auto& n : ck.notes) std::printf("      %s\n", n.c_str());
        std::fflush(stdout);
    }
    if (failed == 0) {
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
    } else {
        std::printf("%d acceptance criteria FAILED\n", failed);
    }
    return failed == 0 ? 0 : 1;
}
