#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hierts/errors.hpp"
#include "hierts/random.hpp"

namespace hierts {

enum class SequentialOrder { RoundRobin, RandomPermutation };

/// An ordered list of per-round task sets S_t. Task ids are 0-based.
class Schedule {
  public:
    Schedule(std::vector<std::vector<int>> rounds, int num_tasks, int interactions_per_task,
             int max_concurrent)
        : rounds_(std::move(rounds)) {
        std::vector<int> counts(static_cast<std::size_t>(num_tasks), 0);
        for (const auto& round : rounds_) {
            if (static_cast<int>(round.size()) > max_concurrent) {
                throw InfeasibleBatching("round size exceeds the concurrency limit");
            }
            std::set<int> seen;
            for (int task : round) {
                if (task < 0 || task >= num_tasks) {
                    throw UnknownTask("task " + std::to_string(task) + " out of range");
                }
                if (!seen.insert(task).second) {
                    throw InfeasibleBatching("task repeats within one round");
                }
                ++counts[static_cast<std::size_t>(task)];
            }
        }
        for (int c : counts) {
            if (c > interactions_per_task) {
                throw InfeasibleBatching("a task appears more often than allowed");
            }
        }
    }

    const std::vector<std::vector<int>>& rounds() const { return rounds_; }
    int num_rounds() const { return static_cast<int>(rounds_.size()); }
    int total_interactions() const {
        int total = 0;
        for (const auto& r : rounds_) total += static_cast<int>(r.size());
        return total;
    }

  private:
    std::vector<std::vector<int>> rounds_;
};

namespace detail {

/// The multiset with each task repeated `per_task` times, optionally shuffled.
inline std::vector<int> task_slots(int num_tasks, int per_task) {
    std::vector<int> slots;
    slots.reserve(static_cast<std::size_t>(num_tasks) * static_cast<std::size_t>(per_task));
    for (int s = 0; s < num_tasks; ++s) {
        slots.insert(slots.end(), static_cast<std::size_t>(per_task), s);
    }
    return slots;
}

}  // namespace detail

/// One task per round, m*n rounds, each task exactly n times. Round-robin walks
/// tasks in id order; random-permutation shuffles the full slot list.
inline Schedule build_sequential_schedule(int num_tasks, int per_task, SequentialOrder order,
                                          Rng& rng) {
    std::vector<int> slots = detail::task_slots(num_tasks, per_task);
    if (order == SequentialOrder::RoundRobin) {
        int idx = 0;
        for (int rep = 0; rep < per_task; ++rep) {
            for (int s = 0; s < num_tasks; ++s) slots[static_cast<std::size_t>(idx++)] = s;
        }
    } else {
        shuffle_in_place(slots, rng);
    }
    std::vector<std::vector<int>> rounds;
    rounds.reserve(slots.size());
    for (int s : slots) rounds.push_back({s});
    return Schedule(std::move(rounds), num_tasks, per_task, 1);
}

/// Task ceil(t/n) in round t: each task is completed before the next begins.
inline Schedule build_meta_schedule(int num_tasks, int per_task) {
    std::vector<std::vector<int>> rounds;
    rounds.reserve(static_cast<std::size_t>(num_tasks) * static_cast<std::size_t>(per_task));
    for (int s = 0; s < num_tasks; ++s) {
        for (int rep = 0; rep < per_task; ++rep) rounds.push_back({s});
    }
    return Schedule(std::move(rounds), num_tasks, per_task, 1);
}

/// Random permutation of the slot list batched into groups of L. Permutations
/// are re-drawn until every batch is duplicate-free, since a task can take only
/// one action per round. When the retries run out (near L = m a uniform
/// permutation almost never batches cleanly, yet valid batchings always exist
/// for L <= m), a balanced random construction takes over: each round takes
/// the L tasks with the most visits left, ties broken at random.
inline Schedule build_concurrent_schedule(int num_tasks, int per_task, int batch_size,
                                          Rng& rng) {
    const long total = static_cast<long>(num_tasks) * per_task;
    if (batch_size < 1 || total % batch_size != 0) {
        throw InfeasibleBatching("m * interactions_per_task must be divisible by L");
    }
    if (batch_size > num_tasks) {
        throw InfeasibleBatching("a duplicate-free batch needs L <= m");
    }
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<int> slots = detail::task_slots(num_tasks, per_task);
        shuffle_in_place(slots, rng);
        bool ok = true;
        std::vector<std::vector<int>> rounds;
        rounds.reserve(static_cast<std::size_t>(total / batch_size));
        for (std::size_t start = 0; ok && start < slots.size();
             start += static_cast<std::size_t>(batch_size)) {
            std::vector<int> batch(slots.begin() + static_cast<std::ptrdiff_t>(start),
                                   slots.begin() +
                                       static_cast<std::ptrdiff_t>(start + batch_size));
            std::set<int> unique(batch.begin(), batch.end());
            if (unique.size() != batch.size()) ok = false;
            rounds.push_back(std::move(batch));
        }
        if (ok) return Schedule(std::move(rounds), num_tasks, per_task, batch_size);
    }

    // Balanced fallback. Invariant: no remaining count can exceed the number
    // of rounds left, so the top-L tasks always have visits left.
    std::vector<int> remaining(static_cast<std::size_t>(num_tasks), per_task);
    std::vector<std::vector<int>> rounds;
    const long num_rounds = total / batch_size;
    for (long round = 0; round < num_rounds; ++round) {
        std::vector<std::pair<std::uint64_t, int>> order;  // (tie key, task)
        order.reserve(static_cast<std::size_t>(num_tasks));
        for (int s = 0; s < num_tasks; ++s) order.emplace_back(rng(), s);
        std::sort(order.begin(), order.end(),
                  [&remaining](const auto& a, const auto& b) {
                      const int ra = remaining[static_cast<std::size_t>(a.second)];
                      const int rb = remaining[static_cast<std::size_t>(b.second)];
                      return ra != rb ? ra > rb : a.first < b.first;
                  });
        std::vector<int> batch;
        batch.reserve(static_cast<std::size_t>(batch_size));
        for (int i = 0; i < batch_size; ++i) {
            const int task = order[static_cast<std::size_t>(i)].second;
            if (remaining[static_cast<std::size_t>(task)] <= 0) {
                throw InfeasibleBatching("no duplicate-free batching found");
            }
            --remaining[static_cast<std::size_t>(task)];
            batch.push_back(task);
        }
        rounds.push_back(std::move(batch));
    }
    return Schedule(std::move(rounds), num_tasks, per_task, batch_size);
}

}  // namespace hierts
