#pragma once
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace vnl1 {

// splitmix64 of (master, trial): independent per-trial streams from one master seed.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (trial + 1);
    z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z               = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Calls f(i) for i in [0, n) on up to worker_count() threads; f must only touch slot i of shared output.
template <class F> void parallel_for(std::size_t n, F &&f) {
    unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    if(workers <= 1) {
        for(std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread>        pool;
    for(unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for(std::size_t i = w; i < n; i += workers) f(i);
            } catch(...) { errors[w] = std::current_exception(); }
        });
    for(auto &t : pool) t.join();
    for(auto &e : errors)
        if(e) std::rethrow_exception(e);
}

} // namespace vnl1
