#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "cmj/rng.hpp"

// Replicate farm.  Replicate i always runs on the stream derived from
// (seed, i), and results land at index i, so the output is independent of
// the thread count and of scheduling.  Workers may carry per-thread state
// (e.g. a TreeSimulator with its buffers): make_worker() is invoked once
// per thread and the returned callable is then fed (index, rng) pairs.

namespace cmj {

inline unsigned default_thread_count() {
    if (const char* env = std::getenv("CMJ_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

template <class R, class MakeWorker>
std::vector<R> run_replicates(std::size_t reps, unsigned threads, std::uint64_t seed,
                              MakeWorker&& make_worker) {
    std::vector<R> out(reps);
    if (reps == 0) return out;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));

    constexpr std::size_t kChunk = 8;
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr error;
    std::mutex error_mu;

    auto body = [&]() {
        try {
            auto worker = make_worker();
            for (;;) {
                const std::size_t begin = cursor.fetch_add(kChunk);
                if (begin >= reps) break;
                const std::size_t end = std::min(begin + kChunk, reps);
                for (std::size_t i = begin; i < end; ++i) {
                    Rng rng = Rng::substream(seed, i);
                    out[i] = worker(i, rng);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
        }
    };

    if (threads == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace cmj
