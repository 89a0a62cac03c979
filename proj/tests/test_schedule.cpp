#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "hierts/schedule.hpp"

using namespace hierts;

namespace {

std::map<int, int> task_counts(const Schedule& schedule) {
    std::map<int, int> counts;
    for (const auto& round : schedule.rounds()) {
        for (int task : round) ++counts[task];
    }
    return counts;
}

}  // namespace

TEST_CASE("round-robin sequential schedule walks tasks in order", "[schedule]") {
    Rng rng = derive_rng(5, {0});
    const Schedule schedule = build_sequential_schedule(2, 2, SequentialOrder::RoundRobin, rng);
    REQUIRE(schedule.rounds() ==
            std::vector<std::vector<int>>{{0}, {1}, {0}, {1}});
}

TEST_CASE("single-task sequential schedule repeats the task", "[schedule]") {
    Rng rng = derive_rng(5, {1});
    const Schedule schedule = build_sequential_schedule(1, 3, SequentialOrder::RoundRobin, rng);
    REQUIRE(schedule.rounds() == std::vector<std::vector<int>>{{0}, {0}, {0}});
}

TEST_CASE("random-permutation sequential schedule keeps per-task counts", "[schedule]") {
    Rng rng = derive_rng(5, {2});
    const Schedule schedule =
        build_sequential_schedule(4, 7, SequentialOrder::RandomPermutation, rng);
    REQUIRE(schedule.num_rounds() == 28);
    for (const auto& [task, count] : task_counts(schedule)) {
        REQUIRE(count == 7);
        REQUIRE(task >= 0);
        REQUIRE(task < 4);
    }
}

TEST_CASE("meta schedule finishes each task before the next", "[schedule]") {
    const Schedule schedule = build_meta_schedule(2, 3);
    REQUIRE(schedule.num_rounds() == 6);
    REQUIRE(schedule.rounds()[0] == std::vector<int>{0});  // t = 1
    REQUIRE(schedule.rounds()[3] == std::vector<int>{1});  // t = 4 -> ceil(4/3) = 2nd task
    REQUIRE(schedule.rounds()[5] == std::vector<int>{1});  // t = 6
}

TEST_CASE("concurrent schedule batches the permuted slots", "[schedule]") {
    Rng rng = derive_rng(5, {3});
    const Schedule schedule = build_concurrent_schedule(10, 200, 5, rng);
    REQUIRE(schedule.num_rounds() == 400);  // 200 * 10 / 5
    for (const auto& round : schedule.rounds()) {
        REQUIRE(round.size() == 5);
        std::set<int> unique(round.begin(), round.end());
        REQUIRE(unique.size() == round.size());
    }
    for (const auto& [task, count] : task_counts(schedule)) REQUIRE(count == 200);
}

TEST_CASE("concurrent schedule with L = 1 equals random-permutation sequential", "[schedule]") {
    Rng rng_a = derive_rng(5, {4});
    Rng rng_b = derive_rng(5, {4});
    const Schedule concurrent = build_concurrent_schedule(6, 5, 1, rng_a);
    const Schedule sequential =
        build_sequential_schedule(6, 5, SequentialOrder::RandomPermutation, rng_b);
    REQUIRE(concurrent.rounds() == sequential.rounds());
}

TEST_CASE("concurrent schedule validates divisibility and feasibility", "[schedule]") {
    Rng rng = derive_rng(5, {5});
    REQUIRE_THROWS_AS(build_concurrent_schedule(3, 5, 2, rng), InfeasibleBatching);
    // L > m can never produce duplicate-free batches
    REQUIRE_THROWS_AS(build_concurrent_schedule(2, 4, 4, rng), InfeasibleBatching);
}

TEST_CASE("schedule constructor enforces the invariants", "[schedule]") {
    REQUIRE_THROWS_AS(Schedule({{0, 0}}, 2, 5, 2), InfeasibleBatching);   // duplicate in round
    REQUIRE_THROWS_AS(Schedule({{0, 1, 2}}, 3, 5, 2), InfeasibleBatching);  // exceeds L
    REQUIRE_THROWS_AS(Schedule({{3}}, 2, 5, 1), UnknownTask);             // bad task id
    REQUIRE_THROWS_AS(Schedule({{0}, {0}, {0}}, 1, 2, 1), InfeasibleBatching);  // too many visits
    REQUIRE_NOTHROW(Schedule({{0}, {1}, {0}}, 2, 2, 1));
}

TEST_CASE("property: all constructors satisfy counts, width, and uniqueness", "[schedule]") {
    Rng rng = derive_rng(5, {6});
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 2 + static_cast<int>(uniform_index(rng, 6));
        const int per_task = 1 + static_cast<int>(uniform_index(rng, 8));
        int batch = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
        while ((m * per_task) % batch != 0) --batch;

        const Schedule schedule = build_concurrent_schedule(m, per_task, batch, rng);
        int total = 0;
        for (const auto& round : schedule.rounds()) {
            REQUIRE(static_cast<int>(round.size()) <= batch);
            std::set<int> unique(round.begin(), round.end());
            REQUIRE(unique.size() == round.size());
            total += static_cast<int>(round.size());
        }
        REQUIRE(total == m * per_task);
        for (const auto& [task, count] : task_counts(schedule)) REQUIRE(count == per_task);
    }
}
