#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace collapse {

/// Work is cut into fixed-size blocks; the cut never depends on the thread
/// count, so block results are reproducible.
inline constexpr std::uint64_t kDefaultBlockSize = 64;

/// 0 means "use every hardware thread".
inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) {
        return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates `block_fn(begin, end)` over [0, count) in blocks of `block_size`
/// on up to `threads` workers, then folds the block results strictly in block
/// order with `combine(acc, block_result)`. The fold order makes the result
/// bit-identical for every thread count.
template <class Acc, class BlockFn, class Combine>
Acc ordered_block_reduce(std::uint64_t count, unsigned threads, Acc init, BlockFn block_fn,
                         Combine combine, std::uint64_t block_size = kDefaultBlockSize) {
    const std::uint64_t blocks = (count + block_size - 1) / block_size;
    std::vector<std::optional<Acc>> partial(blocks);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= blocks) {
                return;
            }
            try {
                const std::uint64_t begin = b * block_size;
                const std::uint64_t end = std::min(count, begin + block_size);
                partial[b].emplace(block_fn(begin, end));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(blocks);
            }
        }
    };

    const unsigned workers =
        static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(blocks, 1)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned i = 0; i < workers; ++i) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    Acc acc = std::move(init);
    for (auto& p : partial) {
        combine(acc, std::move(*p));
    }
    return acc;
}

}  // namespace collapse
