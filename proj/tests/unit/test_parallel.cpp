#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "driftgate/parallel.hpp"

TEST(Parallel, VisitsEveryIndexOnce) {
  const std::size_t saved = driftgate::max_threads();
  for (std::size_t threads : {1u, 2u, 5u}) {
    driftgate::set_max_threads(threads);
    for (std::size_t n : {0u, 1u, 7u, 1000u}) {
      std::vector<std::atomic<int>> hits(n);
      driftgate::parallel_for(n, [&](std::size_t i) { hits[i]++; });
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(hits[i].load(), 1) << i;
    }
  }
  driftgate::set_max_threads(saved);
}

TEST(Parallel, RethrowsBodyExceptions) {
  const std::size_t saved = driftgate::max_threads();
  driftgate::set_max_threads(3);
  EXPECT_THROW(driftgate::parallel_for(50,
                                       [](std::size_t i) {
                                         if (i == 31) throw std::runtime_error("boom");
                                       }),
               std::runtime_error);
  driftgate::set_max_threads(saved);
}

TEST(Parallel, ThreadCapIsAtLeastOne) {
  const std::size_t saved = driftgate::max_threads();
  driftgate::set_max_threads(0);
  EXPECT_GE(driftgate::max_threads(), 1u);
  driftgate::set_max_threads(4);
  EXPECT_EQ(driftgate::max_threads(), 4u);
  driftgate::set_max_threads(saved);
}
