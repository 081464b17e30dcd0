#include <doctest.h>

#include "fastuplink/metrics.hpp"
#include "fastuplink/rng.hpp"

using namespace fastuplink;

TEST_CASE("wrong and missed allocations") {
  const GrantVector grants{1, 1, 0};
  const ActivationVector truth{0, 1, 1};
  CHECK(wrong_allocations(grants, truth) == 1);
  CHECK(missed_allocations(grants, truth) == 1);

  CHECK(wrong_allocations({1, 0, 1, 0}, {1, 1, 1, 0}) == 0);
  CHECK(missed_allocations({1, 1, 1, 0}, {1, 1, 1, 0}) == 0);
}

TEST_CASE("regret cases") {
  const std::size_t L = 10;
  const std::size_t K = 20;

  SUBCASE("nobody active, every grant wasted") {
    GrantVector grants(K);
    for (std::size_t k = 0; k < L; ++k) grants.set(k);
    const auto c = count_allocations(grants, ActivationVector(K));
    CHECK(c.omega == L);
    CHECK(c.mu == 0);
    CHECK(regret_slot(c.omega, c.mu) == 0);
  }

  SUBCASE("more active devices than slots, every grant used") {
    const std::size_t M = 14;
    GrantVector grants(K);
    ActivationVector truth(K);
    for (std::size_t k = 0; k < M; ++k) truth.set(k);
    for (std::size_t k = 0; k < L; ++k) grants.set(k);
    const auto c = count_allocations(grants, truth);
    CHECK(c.omega == 0);
    CHECK(c.mu == M - L);
    CHECK(regret_slot(c.omega, c.mu) == 0);
  }

  SUBCASE("half of the active devices served") {
    const std::size_t M = 8;
    GrantVector grants(K);
    ActivationVector truth(K);
    for (std::size_t k = 0; k < M; ++k) truth.set(k);
    for (std::size_t k = 0; k < M / 2; ++k) grants.set(k);
    for (std::size_t k = M; k < M + (L - M / 2); ++k) grants.set(k);
    const auto c = count_allocations(grants, truth);
    CHECK(c.omega == L - M / 2);
    CHECK(c.mu == M / 2);
    CHECK(regret_slot(c.omega, c.mu) == std::min(L - M / 2, M / 2));
  }

  CHECK(regret_slot(3, 3) == 3);
}

TEST_CASE("system usage") {
  MetricsTrace trace(10);
  const AgeVector ages(3, 0);
  trace.record({0, 0}, ages);
  CHECK(system_usage(trace, 10, 1) == 1.0);

  MetricsTrace two(10);
  two.record({2, 0}, ages);
  two.record({4, 0}, ages);
  CHECK(system_usage(two, 10, 2) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(two.final_usage() == doctest::Approx(0.7).epsilon(1e-15));

  MetricsTrace empty(10);
  for (int t = 0; t < 5; ++t) empty.record({10, 0}, ages);
  CHECK(empty.final_usage() == 0.0);
}

TEST_CASE("age of information") {
  AgeVector ages{3, 4, 2};
  ages = update_aoi(ages, {1, 1, 0}, {1, 0, 1});
  CHECK(ages == AgeVector{0, 5, 3});

  AgeVector fresh(4, 0);
  for (int t = 0; t < 3; ++t) fresh = update_aoi(fresh, GrantVector(4), ActivationVector(4));
  CHECK(fresh == AgeVector{3, 3, 3, 3});

  const AgeVector same{5, 5, 5};
  CHECK(average_aoi(same) == 5.0);
  CHECK(peak_aoi(same) == 5);
  const AgeVector mixed{0, 0, 6};
  CHECK(average_aoi(mixed) == 2.0);
  CHECK(peak_aoi(mixed) == 6);
  const AgeVector one{7};
  CHECK(average_aoi(one) == static_cast<double>(peak_aoi(one)));
}

TEST_CASE("cost") {
  CHECK(cost(0.0, 12.0) == 0.0);
  CHECK(cost(2.0, 3.0) == 6.0);
}

TEST_CASE("trace properties under random slots") {
  RngStream rng(3);
  const std::size_t K = 12;
  const std::size_t L = 4;
  MetricsTrace trace(L);
  AgeVector ages(K, 0);
  std::size_t last_cum = 0;
  for (std::size_t t = 1; t <= 60; ++t) {
    GrantVector grants(K);
    std::size_t placed = 0;
    while (placed < L) {
      const auto k = rng.below(K);
      if (!grants[k]) {
        grants.set(k);
        ++placed;
      }
    }
    ActivationVector truth(K);
    for (std::size_t k = 0; k < K; ++k) truth.set(k, rng.bernoulli(0.4));
    const auto c = count_allocations(grants, truth);
    const auto diff = static_cast<long>(c.omega) - static_cast<long>(c.mu);
    CHECK(std::labs(diff) == std::labs(static_cast<long>(L) - static_cast<long>(truth.count())));
    ages = update_aoi(ages, grants, truth);
    trace.record(c, ages);
    const auto& r = trace.at(t);
    CHECK(r.regret == std::min(r.omega, r.mu));
    CHECK(r.regret_cum >= last_cum);
    CHECK(r.usage >= 0.0);
    CHECK(r.usage <= 1.0);
    CHECK(r.aoi_mean == average_aoi(ages));
    for (auto a : ages) CHECK(a <= t);
    last_cum = r.regret_cum;
  }
}

TEST_CASE("contention accounting") {
  // Two active devices, one success: one slot carried data, one device waits.
  const auto c = count_contention({1, 0, 0}, {1, 1, 0}, 3);
  CHECK(c.omega == 2);
  CHECK(c.mu == 1);
  const auto none = count_contention(GrantVector(4), ActivationVector(4), 2);
  CHECK(none.omega == 2);
  CHECK(none.mu == 0);
}
