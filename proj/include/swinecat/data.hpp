#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "swinecat/image.hpp"
#include "swinecat/tensor.hpp"

namespace swinecat {

// ---------------------------------------------------------------------------
// Dataset ingestion and the input pipeline: short-side resize, center crop,
// [0,1] scaling, per-channel normalization; stratified 80/10/10 splitting;
// deterministic (optionally prefetched) batching; and a synthetic dataset
// generator for desk-scale runs.
// ---------------------------------------------------------------------------

/// Fixed 9-class inventory; index order is the canonical label order.
inline const std::array<std::string, 9>& class_names() {
    static const std::array<std::string, 9> names = {
        "Healthy",
        "Retinitis Pigmentosa",
        "Retinal Detachment",
        "Myopia",
        "Macular Scar",
        "Glaucoma",
        "Optic Disc Edema",
        "Diabetic Retinopathy",
        "Central Serous Chorioretinopathy",
    };
    return names;
}

inline constexpr size_t kNumClasses = 9;

inline int class_index(const std::string& name) {
    const auto& names = class_names();
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("unknown class name: " + name);
}

enum class Split { kNone, kTrain, kVal, kTest };

inline const char* split_name(Split s) {
    switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    default: return "none";
    }
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "val") return Split::kVal;
    if (s == "test") return Split::kTest;
    if (s == "none") return Split::kNone;
    throw FormatError("manifest: unknown split '" + s + "'");
}

struct ManifestRecord {
    std::string path; // relative to the dataset root
    int label = 0;
    Split split = Split::kNone;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::array<double, 3> mean = {0, 0, 0};
    std::array<double, 3> stddev = {1, 1, 1};
    bool has_stats = false;

    size_t split_count(Split s) const {
        size_t n = 0;
        for (const auto& r : records) n += (r.split == s);
        return n;
    }
};

// --- manifest file: `path \t label \t split`, optional `#stats` header -------

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path);
    if (m.has_stats) {
        out.precision(17);
        out << "#stats " << m.mean[0] << ' ' << m.mean[1] << ' ' << m.mean[2] << ' '
            << m.stddev[0] << ' ' << m.stddev[1] << ' ' << m.stddev[2] << '\n';
    }
    for (const auto& r : m.records) {
        out << r.path << '\t' << r.label << '\t' << split_name(r.split) << '\n';
    }
    if (!out) throw IoError("short write to manifest " + path);
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    DatasetManifest m;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string tag;
            ls >> tag;
            if (tag == "stats") {
                ls >> m.mean[0] >> m.mean[1] >> m.mean[2] >> m.stddev[0] >> m.stddev[1] >>
                    m.stddev[2];
                if (!ls) throw FormatError("manifest " + path + ": bad #stats header");
                m.has_stats = true;
            }
            continue;
        }
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw FormatError("manifest " + path + ": line " + std::to_string(lineno) +
                              " is not path\\tlabel\\tsplit");
        }
        ManifestRecord rec;
        rec.path = line.substr(0, t1);
        rec.label = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        if (rec.label < 0 || rec.label >= static_cast<int>(kNumClasses)) {
            throw FormatError("manifest " + path + ": label out of range on line " +
                              std::to_string(lineno));
        }
        rec.split = parse_split(line.substr(t2 + 1));
        m.records.push_back(std::move(rec));
    }
    return m;
}

/// Scans a dataset directory laid out as one subdirectory per class name.
inline DatasetManifest scan_dataset_dir(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root);
    DatasetManifest m;
    const auto& names = class_names();
    for (size_t label = 0; label < names.size(); ++label) {
        fs::path cls = fs::path(root) / names[label];
        if (!fs::is_directory(cls)) continue;
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(cls)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
            if (ext == ".ppm" || ext == ".png") {
                files.push_back(names[label] + "/" + entry.path().filename().string());
            }
        }
        std::sort(files.begin(), files.end());
        for (auto& f : files) m.records.push_back({std::move(f), static_cast<int>(label), Split::kNone});
    }
    if (m.records.empty()) throw IoError("no images found under " + root);
    return m;
}

// --- preprocessing -------------------------------------------------------------

/// Short-side target matching the crop: 256 for a 224 crop, scaled
/// proportionally (rounded) for other crop sizes.
inline size_t short_side_for_crop(size_t crop) {
    return (crop * 256 + 112) / 224;
}

/// Resize (short side to target, aspect preserved, bilinear), center-crop,
/// scale to [0,1]. Returns interleaved HWC floats in [0,1].
inline FloatImage resize_and_crop(const Image& img, size_t crop) {
    if (img.width == 0 || img.height == 0) throw IoError("preprocess: degenerate image");
    FloatImage resized = resize_short_side(img, short_side_for_crop(crop));
    FloatImage cropped = center_crop(resized, crop);
    for (auto& v : cropped.rgb) v *= (1.0f / 255.0f);
    return cropped;
}

/// Full input pipeline to a CHW tensor: resize, crop, [0,1], then
/// (x - mean) / std per channel.
template <typename T>
Tensor<T> preprocess(const Image& img, const std::array<double, 3>& mean,
                     const std::array<double, 3>& stddev, size_t crop) {
    FloatImage c = resize_and_crop(img, crop);
    Tensor<T> out(Shape{3, crop, crop});
    T* po = out.data();
    for (size_t ch = 0; ch < 3; ++ch) {
        T mu = static_cast<T>(mean[ch]);
        T inv = static_cast<T>(1.0 / stddev[ch]);
        T* plane = po + ch * crop * crop;
        const float* src = c.rgb.data();
        for (size_t i = 0; i < crop * crop; ++i) {
            plane[i] = (static_cast<T>(src[i * 3 + ch]) - mu) * inv;
        }
    }
    return out;
}

enum class StatsScope { kAll, kTrainOnly };

/// Per-channel mean and population std over the post-[0,1] pixels of every
/// image in scope. Stds are clamped below at 1e-6.
inline void compute_stats(DatasetManifest& m, const std::string& root, size_t crop,
                          StatsScope scope = StatsScope::kAll) {
    std::array<double, 3> sum = {0, 0, 0}, sumsq = {0, 0, 0};
    size_t pixels = 0;
    for (const auto& rec : m.records) {
        if (scope == StatsScope::kTrainOnly && rec.split != Split::kTrain) continue;
        Image img = read_image_file(root + "/" + rec.path);
        FloatImage c = resize_and_crop(img, crop);
        for (size_t i = 0; i < c.width * c.height; ++i) {
            for (size_t ch = 0; ch < 3; ++ch) {
                double v = c.rgb[i * 3 + ch];
                sum[ch] += v;
                sumsq[ch] += v * v;
            }
        }
        pixels += c.width * c.height;
    }
    if (pixels == 0) throw ContractError("compute_stats: no images in scope");
    for (size_t ch = 0; ch < 3; ++ch) {
        double mu = sum[ch] / static_cast<double>(pixels);
        double var = sumsq[ch] / static_cast<double>(pixels) - mu * mu;
        m.mean[ch] = mu;
        m.stddev[ch] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
    }
    m.has_stats = true;
}

// --- splitting -------------------------------------------------------------------

/// Stratified per class: seeded shuffle, then floor(n/10) to val and test
/// with the remainder (~80%) to train. Deterministic for a given seed.
inline void assign_splits(DatasetManifest& m, uint64_t seed) {
    std::map<int, std::vector<size_t>> per_class;
    for (size_t i = 0; i < m.records.size(); ++i) per_class[m.records[i].label].push_back(i);
    for (auto& [label, idx] : per_class) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(label) + 0x5151));
        rng.shuffle(idx);
        size_t n = idx.size();
        size_t n_val = n / 10;
        size_t n_test = n / 10;
        size_t n_train = n - n_val - n_test;
        for (size_t i = 0; i < n; ++i) {
            Split s = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
            m.records[idx[i]].split = s;
        }
    }
}

// --- batching ------------------------------------------------------------------

template <typename T>
struct Batch {
    Tensor<T> images; // [B, 3, S, S]
    std::vector<int> labels;
};

/// Deterministic batch order for an epoch: train splits get a permutation
/// keyed by (seed, epoch); val/test keep manifest order.
inline std::vector<size_t> epoch_order(const DatasetManifest& m, Split split, bool shuffle,
                                       uint64_t seed, uint64_t epoch) {
    std::vector<size_t> order;
    for (size_t i = 0; i < m.records.size(); ++i) {
        if (m.records[i].split == split) order.push_back(i);
    }
    if (shuffle) {
        Rng rng(mix_seed(mix_seed(seed, 0xba7c), epoch));
        rng.shuffle(order);
    }
    return order;
}

/// Streams batches for one split/epoch. Worker threads may decode batches
/// ahead of the consumer; delivery order always equals single-worker order.
template <typename T>
class BatchStream {
public:
    BatchStream(const DatasetManifest& manifest, std::string root, Split split,
                size_t batch_size, bool shuffle, uint64_t seed, uint64_t epoch, size_t crop,
                size_t workers = 0, size_t prefetch = 2)
        : manifest_(manifest), root_(std::move(root)), crop_(crop), batch_size_(batch_size),
          prefetch_(std::max<size_t>(prefetch, 1)) {
        if (batch_size == 0) throw ConfigError("batches: batch_size must be positive");
        if (!manifest.has_stats) throw ContractError("batches: manifest has no normalization stats");
        order_ = epoch_order(manifest, split, shuffle, seed, epoch);
        if (order_.empty()) throw ContractError("batches: split has no records");
        num_batches_ = (order_.size() + batch_size - 1) / batch_size;
        worker_count_ = std::min<size_t>(workers, num_batches_);
        if (worker_count_ > 0) {
            completed_.resize(num_batches_);
            workers_.reserve(worker_count_);
            for (size_t i = 0; i < worker_count_; ++i) {
                workers_.emplace_back([this] { worker_loop(); });
            }
        }
    }

    ~BatchStream() {
        {
            std::lock_guard<std::mutex> lk(mtx_);
            cancelled_ = true;
        }
        cv_space_.notify_all();
        for (auto& w : workers_) w.join();
    }

    size_t num_batches() const { return num_batches_; }

    /// Next batch, or nullopt at end of epoch.
    std::optional<Batch<T>> next() {
        if (delivered_ >= num_batches_) return std::nullopt;
        size_t want = delivered_++;
        if (workers_.empty()) return decode_batch(want);
        std::unique_lock<std::mutex> lk(mtx_);
        cv_ready_.wait(lk, [&] { return completed_[want].has_value(); });
        Batch<T> b = std::move(*completed_[want]);
        completed_[want].reset();
        ++consumed_;
        lk.unlock();
        cv_space_.notify_all();
        return b;
    }

private:
    Batch<T> decode_batch(size_t index) const {
        size_t begin = index * batch_size_;
        size_t end = std::min(order_.size(), begin + batch_size_);
        Batch<T> batch;
        batch.images = Tensor<T>(Shape{end - begin, 3, crop_, crop_});
        size_t plane = 3 * crop_ * crop_;
        for (size_t i = begin; i < end; ++i) {
            const ManifestRecord& rec = manifest_.records[order_[i]];
            Image img = read_image_file(root_ + "/" + rec.path);
            Tensor<T> t = preprocess<T>(img, manifest_.mean, manifest_.stddev, crop_);
            std::memcpy(batch.images.data() + (i - begin) * plane, t.data(), plane * sizeof(T));
            batch.labels.push_back(rec.label);
        }
        return batch;
    }

    void worker_loop() {
        for (;;) {
            size_t index;
            {
                std::unique_lock<std::mutex> lk(mtx_);
                cv_space_.wait(lk, [&] {
                    return cancelled_ || (claimed_ < num_batches_ && claimed_ < consumed_ + prefetch_ + worker_count_);
                });
                if (cancelled_ || claimed_ >= num_batches_) return;
                index = claimed_++;
            }
            Batch<T> b = decode_batch(index);
            {
                std::lock_guard<std::mutex> lk(mtx_);
                completed_[index] = std::move(b);
            }
            cv_ready_.notify_all();
        }
    }

    const DatasetManifest& manifest_;
    std::string root_;
    size_t crop_;
    size_t batch_size_;
    size_t prefetch_;
    std::vector<size_t> order_;
    size_t num_batches_ = 0;
    size_t delivered_ = 0;

    size_t worker_count_ = 0;
    std::vector<std::thread> workers_;
    std::vector<std::optional<Batch<T>>> completed_;
    std::mutex mtx_;
    std::condition_variable cv_ready_, cv_space_;
    size_t claimed_ = 0;
    size_t consumed_ = 0;
    bool cancelled_ = false;
};

// --- synthetic dataset -----------------------------------------------------------

namespace detail {

struct SynthCanvas {
    size_t size;
    std::vector<float> rgb; // HWC

    explicit SynthCanvas(size_t s) : size(s), rgb(s * s * 3, 0.0f) {}

    void add(long y, long x, float r, float g, float b) {
        if (y < 0 || x < 0 || y >= static_cast<long>(size) || x >= static_cast<long>(size)) return;
        float* p = rgb.data() + (static_cast<size_t>(y) * size + static_cast<size_t>(x)) * 3;
        p[0] += r;
        p[1] += g;
        p[2] += b;
    }

    void fill_disc(double cy, double cx, double radius, float r, float g, float b,
                   double alpha = 1.0) {
        long y0 = static_cast<long>(std::floor(cy - radius)), y1 = static_cast<long>(std::ceil(cy + radius));
        long x0 = static_cast<long>(std::floor(cx - radius)), x1 = static_cast<long>(std::ceil(cx + radius));
        for (long y = y0; y <= y1; ++y) {
            for (long x = x0; x <= x1; ++x) {
                double dy = y - cy, dx = x - cx;
                if (dy * dy + dx * dx <= radius * radius) {
                    add(y, x, static_cast<float>(r * alpha), static_cast<float>(g * alpha),
                        static_cast<float>(b * alpha));
                }
            }
        }
    }

    void fill_ring(double cy, double cx, double radius, double width, float r, float g, float b) {
        long pad = static_cast<long>(std::ceil(radius + width));
        for (long y = static_cast<long>(cy) - pad; y <= static_cast<long>(cy) + pad; ++y) {
            for (long x = static_cast<long>(cx) - pad; x <= static_cast<long>(cx) + pad; ++x) {
                double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
                if (std::fabs(d - radius) <= width) add(y, x, r, g, b);
            }
        }
    }

    Image finish() const {
        Image img;
        img.width = size;
        img.height = size;
        img.rgb.resize(size * size * 3);
        for (size_t i = 0; i < img.rgb.size(); ++i) {
            img.rgb[i] = static_cast<uint8_t>(std::clamp(rgb[i], 0.0f, 255.0f));
        }
        return img;
    }
};

/// Class-specific geometric motif on a noisy fundus-style disc. Each class
/// also carries a hue tint so the classes stay separable at any resolution.
inline Image synth_image(int label, size_t size, Rng& rng) {
    SynthCanvas canvas(size);
    double s = static_cast<double>(size);
    double cy = s * 0.5, cx = s * 0.5;
    double disc_r = s * 0.46;

    // tint wheel, one strong direction per class
    double theta = 6.283185307179586 * label / 9.0;
    float tr = static_cast<float>(42.0 * std::cos(theta));
    float tg = static_cast<float>(42.0 * std::cos(theta + 2.0943951));
    float tb = static_cast<float>(42.0 * std::cos(theta + 4.1887902));

    for (size_t y = 0; y < size; ++y) {
        for (size_t x = 0; x < size; ++x) {
            double dy = y - cy, dx = x - cx;
            double r2 = (dy * dy + dx * dx) / (disc_r * disc_r);
            float* p = canvas.rgb.data() + (y * size + x) * 3;
            float noise = static_cast<float>(rng.uniform(-9.0, 9.0));
            if (r2 <= 1.0) {
                double fall = 1.0 - 0.45 * r2;
                p[0] = static_cast<float>(172.0 * fall) + tr + noise;
                p[1] = static_cast<float>(88.0 * fall) + tg + noise;
                p[2] = static_cast<float>(40.0 * fall) + tb + noise;
            } else {
                p[0] = p[1] = p[2] = 6.0f + noise * 0.3f;
            }
        }
    }
    // optic disc, slightly off-center
    double oy = cy, ox = cx + s * 0.2 + rng.uniform(-0.01, 0.01) * s;
    canvas.fill_disc(oy, ox, s * 0.085, 70, 110, 90);

    double jy = rng.uniform(-0.02, 0.02) * s, jx = rng.uniform(-0.02, 0.02) * s;
    switch (label) {
    case 0: // healthy: nothing beyond the base pattern
        break;
    case 1: // dark peripheral speckles
        for (int i = 0; i < 40; ++i) {
            double ang = rng.uniform(0.0, 6.2831853);
            double rad = disc_r * rng.uniform(0.45, 0.92);
            canvas.fill_disc(cy + rad * std::sin(ang), cx + rad * std::cos(ang),
                             std::max(1.0, s * 0.012), -120, -90, -50);
        }
        break;
    case 2: { // gray-blue fold wedge
        double a0 = rng.uniform(0.0, 6.2831853);
        for (size_t y = 0; y < size; ++y) {
            for (size_t x = 0; x < size; ++x) {
                double dy = y - cy, dx = x - cx;
                if (dy * dy + dx * dx > disc_r * disc_r) continue;
                double ang = std::atan2(dy, dx) - a0;
                while (ang < 0) ang += 6.2831853;
                if (ang < 1.15) canvas.add(y, x, -40, 30, 95);
            }
        }
        break;
    }
    case 3: // pale crescent at the optic disc rim
        canvas.fill_ring(oy, ox, s * 0.115 + jy * 0.2, std::max(1.0, s * 0.02), 85, 120, 130);
        break;
    case 4: // yellow macular blob
        canvas.fill_disc(cy + jy, cx + jx, s * 0.10, 70, 120, 95);
        break;
    case 5: // enlarged bright cup
        canvas.fill_disc(oy + jy * 0.3, ox + jx * 0.3, s * 0.055, 170, 140, 140);
        break;
    case 6: { // soft halo around the disc
        double sigma = s * 0.13;
        long pad = static_cast<long>(sigma * 3);
        for (long y = static_cast<long>(oy) - pad; y <= static_cast<long>(oy) + pad; ++y) {
            for (long x = static_cast<long>(ox) - pad; x <= static_cast<long>(ox) + pad; ++x) {
                double d2 = (y - oy) * (y - oy) + (x - ox) * (x - ox);
                float a = static_cast<float>(90.0 * std::exp(-d2 / (2 * sigma * sigma)));
                canvas.add(y, x, a, a, a * 0.6f);
            }
        }
        break;
    }
    case 7: // red dots and streaks
        for (int i = 0; i < 22; ++i) {
            double ang = rng.uniform(0.0, 6.2831853);
            double rad = disc_r * rng.uniform(0.1, 0.85);
            canvas.fill_disc(cy + rad * std::sin(ang), cx + rad * std::cos(ang),
                             std::max(1.0, s * 0.012), 85, -60, -25);
        }
        for (int i = 0; i < 4; ++i) {
            double ang = rng.uniform(0.0, 6.2831853);
            double rad = disc_r * rng.uniform(0.2, 0.7);
            double py = cy + rad * std::sin(ang), px = cx + rad * std::cos(ang);
            double dirr = rng.uniform(0.0, 6.2831853);
            for (double t = 0; t < s * 0.12; t += 0.5) {
                canvas.fill_disc(py + t * std::sin(dirr), px + t * std::cos(dirr), 1.0, 60, -40, -15);
            }
        }
        break;
    case 8: // serous ring near the macula
        canvas.fill_ring(cy + jy, cx + jx, s * 0.16, std::max(1.0, s * 0.018), 75, 95, 110);
        break;
    default:
        throw ContractError("synth_image: label out of range");
    }
    return canvas.finish();
}

} // namespace detail

/// Generates per_class images for each of the 9 classes under out_dir (PPM,
/// one subdirectory per class), writes out_dir/manifest.tsv, and returns the
/// manifest (without splits or stats). Byte-identical for a given seed.
inline DatasetManifest synth_generate(const std::string& out_dir, size_t per_class,
                                      size_t image_size, uint64_t seed) {
    namespace fs = std::filesystem;
    if (per_class < 1) throw ConfigError("synth: per_class must be at least 1");
    if (image_size < 16) throw ConfigError("synth: image_size must be at least 16");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("synth: cannot create " + out_dir);

    DatasetManifest m;
    const auto& names = class_names();
    for (size_t label = 0; label < names.size(); ++label) {
        fs::path cls = fs::path(out_dir) / names[label];
        fs::create_directories(cls, ec);
        if (ec) throw IoError("synth: cannot create " + cls.string());
        for (size_t i = 0; i < per_class; ++i) {
            Rng rng(mix_seed(mix_seed(seed, label * 131071ull), i));
            Image img = detail::synth_image(static_cast<int>(label), image_size, rng);
            char fname[32];
            std::snprintf(fname, sizeof(fname), "img_%04zu.ppm", i);
            write_ppm_file((cls / fname).string(), img);
            m.records.push_back({names[label] + "/" + fname, static_cast<int>(label), Split::kNone});
        }
    }
    save_manifest(m, (fs::path(out_dir) / "manifest.tsv").string());
    return m;
}

} // namespace swinecat
