#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace swinecat {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes, so throw the most
// specific class that applies.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor dimension disagreements (matmul inner dims, rank mismatches, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values or unusable settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Persisted data (checkpoint, manifest, image file) is corrupt.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Persisted data is well-formed but does not match the active config.
class CompatError : public Error {
public:
    using Error::Error;
};

/// Filesystem / ingestion failures.
class IoError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Shapes
// ---------------------------------------------------------------------------

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Seeded RNG. All randomness in the project flows through this type so runs
// are reproducible from a single seed. splitmix64 core, hand-rolled
// distributions (std:: distributions vary across standard libraries).
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0xa5a5a5a55a5a5a5aull) {
        // burn a couple of outputs so tiny seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    size_t below(size_t n) { return n ? static_cast<size_t>(next_u64() % n) : 0; }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Normal(0, std_dev) resampled until within clip standard deviations.
    double trunc_normal(double std_dev, double clip = 2.0) {
        double z = normal();
        while (std::fabs(z) > clip) z = normal();
        return z * std_dev;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Worker parallelism. SWINECAT_THREADS caps the pool (0 = auto). Work is
// split into fixed ranges so results do not depend on the thread count.
// ---------------------------------------------------------------------------

inline int detect_thread_cap() {
    if (const char* env = std::getenv("SWINECAT_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<int>(v);
        // 0 or malformed falls through to auto
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

inline int thread_cap() {
    static int cap = detect_thread_cap();
    return cap;
}

class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool(thread_cap());
        return pool;
    }

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    /// Runs body(begin, end) over disjoint chunks of [0, n). Blocks until all
    /// chunks complete. Falls back to inline execution for small n.
    void parallel_for(size_t n, size_t grain,
                      const std::function<void(size_t, size_t)>& body) {
        if (n == 0) return;
        int nthreads = size();
        if (nthreads <= 1 || n <= grain) {
            body(0, n);
            return;
        }
        size_t chunks = std::min<size_t>(static_cast<size_t>(nthreads), (n + grain - 1) / grain);
        size_t per = (n + chunks - 1) / chunks;

        std::atomic<size_t> remaining{chunks};
        std::mutex done_mtx;
        std::condition_variable done_cv;

        for (size_t c = 1; c < chunks; ++c) {
            size_t b = c * per;
            size_t e = std::min(n, b + per);
            submit([&, b, e] {
                body(b, e);
                if (remaining.fetch_sub(1) == 1) {
                    std::lock_guard<std::mutex> lk(done_mtx);
                    done_cv.notify_all();
                }
            });
        }
        body(0, std::min(n, per));
        if (remaining.fetch_sub(1) != 1) {
            std::unique_lock<std::mutex> lk(done_mtx);
            done_cv.wait(lk, [&] { return remaining.load() == 0; });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mtx_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

private:
    explicit ThreadPool(int cap) {
        for (int i = 1; i < cap; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    void submit(std::function<void()> task) {
        {
            std::lock_guard<std::mutex> lk(mtx_);
            tasks_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

    void worker_loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock<std::mutex> lk(mtx_);
                cv_.wait(lk, [this] { return stop_ || !tasks_.empty(); });
                if (stop_ && tasks_.empty()) return;
                task = std::move(tasks_.back());
                tasks_.pop_back();
            }
            task();
        }
    }

    std::vector<std::thread> workers_;
    std::vector<std::function<void()>> tasks_;
    std::mutex mtx_;
    std::condition_variable cv_;
    bool stop_ = false;
};

inline void parallel_for(size_t n, size_t grain,
                         const std::function<void(size_t, size_t)>& body) {
    ThreadPool::instance().parallel_for(n, grain, body);
}

} // namespace swinecat
