// swinecat command-line driver: train / eval / inspect / synth.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "swinecat/config.hpp"
#include "swinecat/metrics.hpp"
#include "swinecat/model.hpp"
#include "swinecat/train.hpp"

namespace fs = std::filesystem;
using namespace swinecat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

void print_usage(std::ostream& os) {
    os << "usage: swinecat <command> [--config FILE] [--key value ...]\n"
          "\n"
          "commands:\n"
          "  train     train a model; writes checkpoint.bin, trainlog.csv,\n"
          "            report.txt and config.resolved under <out_dir>/<run_name>\n"
          "  eval      evaluate a checkpoint on a split (--checkpoint, --split)\n"
          "  inspect   print the parameter audit for the configured model\n"
          "  synth     generate the synthetic dataset into --data_dir\n"
          "\n"
          "configuration is flat key = value; precedence: CLI > file > defaults.\n"
          "common keys: image_size patch_size embed_dim depths num_heads\n"
          "  window_size mlp_ratio num_classes eca_enabled eca_gamma eca_b eca_k\n"
          "  use_relative_bias seed learning_rate batch_size patience max_epochs\n"
          "  adam_beta1 adam_beta2 adam_eps loader_workers prefetch_batches\n"
          "  data_dir manifest out_dir run_name checkpoint split stats_scope\n"
          "  per_class synth_size target_train_acc\n"
          "\n"
          "SWINECAT_THREADS caps worker parallelism (0 = auto).\n";
}

struct ParsedArgs {
    std::string command;
    RunConfig config;
    bool help = false;
};

ParsedArgs parse_args(int argc, char** argv) {
    ParsedArgs out;
    if (argc < 2) throw ConfigError("missing command (train|eval|inspect|synth)");
    out.command = argv[1];
    if (out.command == "-h" || out.command == "--help" || out.command == "help") {
        out.help = true;
        return out;
    }
    if (out.command != "train" && out.command != "eval" && out.command != "inspect" &&
        out.command != "synth") {
        throw ConfigError("unknown command '" + out.command + "'");
    }
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_file;
    for (int i = 2; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "-h" || arg == "--help") {
            out.help = true;
            return out;
        }
        if (arg.rfind("--", 0) != 0) {
            throw ConfigError("expected --key value, got '" + arg + "'");
        }
        std::string key = arg.substr(2);
        std::string value;
        size_t eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= argc) throw ConfigError("missing value for --" + key);
            value = argv[++i];
        }
        if (key == "config") config_file = value;
        else overrides.emplace_back(key, value);
    }
    if (!config_file.empty()) {
        for (const auto& [k, v] : parse_config_file(config_file)) {
            apply_config_kv(out.config, k, v);
        }
    }
    for (const auto& [k, v] : overrides) apply_config_kv(out.config, k, v);

    size_t cap = static_cast<size_t>(thread_cap());
    out.config.train.loader_workers = std::min(out.config.train.loader_workers, cap);
    return out;
}

/// Resolves the dataset: load an explicit manifest, load <data_dir>/manifest.tsv,
/// or scan the class directories. Returns the manifest plus its root.
std::pair<DatasetManifest, std::string> resolve_dataset(const RunConfig& cfg) {
    if (!cfg.manifest_path.empty()) {
        if (!fs::exists(cfg.manifest_path)) {
            throw ConfigError("manifest not found: " + cfg.manifest_path);
        }
        std::string root = fs::path(cfg.manifest_path).parent_path().string();
        if (root.empty()) root = ".";
        return {load_manifest(cfg.manifest_path), root};
    }
    if (cfg.data_dir.empty()) {
        throw ConfigError("no dataset: set data_dir or manifest");
    }
    if (!fs::is_directory(cfg.data_dir)) {
        throw ConfigError("data directory not found: " + cfg.data_dir);
    }
    fs::path tsv = fs::path(cfg.data_dir) / "manifest.tsv";
    if (fs::exists(tsv)) return {load_manifest(tsv.string()), cfg.data_dir};
    return {scan_dataset_dir(cfg.data_dir), cfg.data_dir};
}

/// Fills in splits and normalization stats when the manifest lacks them.
void prepare_manifest(DatasetManifest& manifest, const std::string& root, const RunConfig& cfg) {
    bool needs_split = false;
    for (const auto& r : manifest.records) needs_split = needs_split || r.split == Split::kNone;
    if (needs_split) assign_splits(manifest, cfg.model.seed);
    if (!manifest.has_stats) {
        compute_stats(manifest, root, cfg.model.image_size, cfg.scope());
    }
}

int cmd_train(const RunConfig& cfg) {
    auto [manifest, root] = resolve_dataset(cfg);
    prepare_manifest(manifest, root, cfg);

    std::cout << "training on " << manifest.split_count(Split::kTrain) << " images, validating on "
              << manifest.split_count(Split::kVal) << '\n';
    FitResult<float> result = fit<float>(cfg.model, cfg.train, manifest, root);

    fs::create_directories(cfg.artifact_dir());
    std::string ckpt = cfg.artifact_dir() + "/checkpoint.bin";
    save_checkpoint(result.best_params, ckpt);
    result.log.save_csv(cfg.artifact_dir() + "/trainlog.csv");
    {
        std::ofstream out(cfg.artifact_dir() + "/config.resolved");
        out << resolved_config_text(cfg);
    }
    EvalResult<float> val = evaluate(cfg.model, result.best_params, manifest, root, Split::kVal,
                                     cfg.train.batch_size, cfg.train.loader_workers,
                                     cfg.train.prefetch_batches);
    MetricsReport rep = report(confuse(val.predictions, val.labels, cfg.model.num_classes));
    {
        std::ofstream out(cfg.artifact_dir() + "/report.txt");
        out << render_report(rep, {class_names().begin(), class_names().end()});
    }
    {
        std::ofstream out(cfg.artifact_dir() + "/report.kv");
        out << render_report_kv(rep);
    }
    std::cout << "best epoch " << result.best_epoch << ", val loss " << result.best_val_loss
              << ", val accuracy " << val.accuracy << '\n'
              << "artifacts in " << cfg.artifact_dir() << '\n';
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("eval: set checkpoint");
    Split split = parse_split(cfg.split);
    if (split == Split::kNone) throw ConfigError("eval: split must be train, val or test");
    auto [manifest, root] = resolve_dataset(cfg);
    prepare_manifest(manifest, root, cfg);

    ModelParams<float> params = build<float>(cfg.model);
    load_checkpoint(params, cfg.checkpoint);
    EvalResult<float> res = evaluate(cfg.model, params, manifest, root, split,
                                     cfg.train.batch_size, cfg.train.loader_workers,
                                     cfg.train.prefetch_batches);
    MetricsReport rep = report(confuse(res.predictions, res.labels, cfg.model.num_classes));
    std::cout << render_report(rep, {class_names().begin(), class_names().end()});
    std::cout << render_report_kv(rep);
    return kExitOk;
}

int cmd_inspect(const RunConfig& cfg) {
    auto audit_of = [&](bool eca_on) {
        ModelConfig mc = cfg.model;
        mc.eca_enabled = eca_on;
        ModelParams<float> params = build<float>(mc);
        return parameter_audit(params);
    };
    AuditReport with_eca = audit_of(true);
    AuditReport baseline = audit_of(false);

    auto print_audit = [](const char* title, const AuditReport& a) {
        std::printf("%s\n", title);
        for (const auto& [module, count] : a.per_module) {
            std::printf("  %-16s %12zu\n", module.c_str(), count);
        }
        std::printf("  %-16s %12zu  (%.2fM)\n", "total", a.total, a.total_millions());
    };
    print_audit("parameter audit, channel attention enabled", with_eca);
    print_audit("parameter audit, channel attention disabled (baseline)", baseline);

    size_t diff = with_eca.total - baseline.total;
    std::printf("eca increment: %zu parameters (per-stage kernel sizes:", diff);
    for (size_t s = 0; s < 4; ++s) {
        std::printf(" %d", adaptive_kernel_size(cfg.model.stage_dim(s), cfg.model.eca));
    }
    std::printf(")\n");
    std::printf("reference totals (published): baseline 27.53M, eca variant 28.30M\n");
    std::printf("note: the audited eca increment is %zu parameters (kernel weights only);\n"
                "the published variant figure exceeds its baseline by 0.77M, which a\n"
                "kernel-only gate cannot produce. The audited totals above are the\n"
                "ground truth for this implementation.\n", diff);
    return kExitOk;
}

int cmd_synth(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) throw ConfigError("synth: set data_dir for the output");
    DatasetManifest m = synth_generate(cfg.data_dir, cfg.per_class, cfg.effective_synth_size(),
                                       cfg.model.seed);
    std::cout << "wrote " << m.records.size() << " images under " << cfg.data_dir << '\n'
              << "manifest: " << (fs::path(cfg.data_dir) / "manifest.tsv").string() << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    ParsedArgs args;
    try {
        args = parse_args(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        print_usage(std::cerr);
        return kExitUsage;
    }
    if (args.help) {
        print_usage(std::cout);
        return kExitOk;
    }
    try {
        if (args.command == "train") return cmd_train(args.config);
        if (args.command == "eval") return cmd_eval(args.config);
        if (args.command == "inspect") return cmd_inspect(args.config);
        if (args.command == "synth") return cmd_synth(args.config);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CompatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
