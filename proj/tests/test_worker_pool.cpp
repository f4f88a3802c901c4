#include <doctest.h>

#include <atomic>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "smmconv/worker_pool.hpp"

using namespace smmconv;

TEST_CASE("partition covers the range disjointly") {
  for (std::size_t total : {0u, 1u, 5u, 7u, 64u, 100u})
    for (std::size_t workers : {1u, 2u, 3u, 4u, 7u, 8u}) {
      std::vector<int> hits(total, 0);
      std::size_t expected_begin = 0;
      for (std::size_t w = 0; w < workers; ++w) {
        const Partition p = partition(total, workers, w);
        CHECK(p.begin <= p.end);
        CHECK(p.end <= total);
        if (p.begin < p.end) {
          CHECK(p.begin == expected_begin);
          expected_begin = p.end;
        }
        for (std::size_t i = p.begin; i < p.end; ++i) ++hits[i];
      }
      for (int h : hits) CHECK(h == 1);
    }
}

TEST_CASE("single worker runs on the caller") {
  WorkerPool pool(1);
  CHECK(pool.size() == 1);
  std::size_t seen = 99;
  pool.run([&](std::size_t worker, PhaseBarrier& barrier) {
    seen = worker;
    barrier.arrive_and_wait();
  });
  CHECK(seen == 0);
}

TEST_CASE("barrier separates phases") {
  for (std::size_t n : {2u, 3u, 4u, 8u}) {
    WorkerPool pool(n);
    std::vector<int> slots(n, 0);
    std::atomic<int> violations{0};
    for (int round = 0; round < 20; ++round) {
      pool.run([&](std::size_t worker, PhaseBarrier& barrier) {
        slots[worker] = round;
        barrier.arrive_and_wait();
        for (int v : slots)
          if (v != round) ++violations;
        barrier.arrive_and_wait();
      });
    }
    CHECK(violations.load() == 0);
  }
}

TEST_CASE("every worker index runs once per call") {
  WorkerPool pool(5);
  std::vector<std::atomic<int>> counts(5);
  for (int i = 0; i < 10; ++i)
    pool.run([&](std::size_t worker, PhaseBarrier&) { ++counts[worker]; });
  for (auto& c : counts) CHECK(c.load() == 10);
}

TEST_CASE("exception propagates and the pool stays usable") {
  WorkerPool pool(4);
  CHECK_THROWS_WITH_AS(
      pool.run([&](std::size_t worker, PhaseBarrier& barrier) {
        if (worker == 2) throw std::runtime_error("boom");
        barrier.arrive_and_wait();
        barrier.arrive_and_wait();
      }),
      "boom", std::runtime_error);
  std::atomic<int> ran{0};
  pool.run([&](std::size_t, PhaseBarrier& barrier) {
    barrier.arrive_and_wait();
    ++ran;
  });
  CHECK(ran.load() == 4);
}

TEST_CASE("parallel_for visits each index once") {
  WorkerPool pool(3);
  std::vector<std::atomic<int>> hits(101);
  pool.parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  });
  for (auto& h : hits) CHECK(h.load() == 1);
  pool.parallel_for(0, [&](std::size_t b, std::size_t e) { CHECK(b == e); });
}

TEST_CASE("zero workers rejected, default count positive") {
  CHECK_THROWS(WorkerPool(0));
  CHECK(default_thread_count() >= 1);
}
