#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fastuplink/error.hpp"
#include "fastuplink/estimation.hpp"
#include "oracles.hpp"

using namespace fastuplink;

namespace {

ObservationTrace single_device_trace(std::size_t slots, std::size_t active) {
  ObservationTrace trace;
  for (std::size_t t = 0; t < slots; ++t) {
    ActivationVector a(1);
    a.set(0, t < active);
    trace.push_back(Observation::full(a));
  }
  return trace;
}

Trajectory simulate(const ModelParams& p, std::size_t horizon, std::uint64_t seed) {
  RngStream root(seed);
  RngStream ev = root.substream("events");
  RngStream ac = root.substream("activations");
  return simulate_trajectory(p, horizon, ev, ac);
}

ModelParams single_event(double eps0, double eps1, std::vector<double> q) {
  ModelParams p;
  p.n_events = 1;
  p.n_devices = q.size();
  p.n_slots = 1;
  p.eps0 = {eps0};
  p.eps1 = {eps1};
  p.q = std::move(q);
  return p;
}

}  // namespace

TEST_CASE("q at the likelihood boundary") {
  const std::vector<EventStateVector> on(100, EventStateVector{1});
  const auto always = estimate_q_ml(single_device_trace(100, 100), on, 0);
  CHECK(always[0] == doctest::Approx(1.0 - kProbabilityFloor).epsilon(1e-6));
  const auto never = estimate_q_ml(single_device_trace(100, 0), on, 0);
  CHECK(never[0] == doctest::Approx(kProbabilityFloor).epsilon(1e-6));
  const auto some = estimate_q_ml(single_device_trace(100, 37), on, 0);
  CHECK(std::abs(some[0] - 0.37) <= 0.01);

  CHECK_THROWS_AS(estimate_q_ml(ObservationTrace{}, std::vector<EventStateVector>{}, 0), InsufficientData);
}

TEST_CASE("noisy-OR maximizer beats a 50-point grid") {
  RngStream rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(3);
    PatternCounts counts(n);
    for (std::size_t j = 1; j < counts.active.size(); ++j) {
      counts.active[j] = static_cast<double>(rng.below(20));
      counts.inactive[j] = static_cast<double>(rng.below(20));
    }
    const auto q = maximize_noisy_or(counts);
    for (double v : q) {
      CHECK(v >= kProbabilityFloor);
      CHECK(v <= 1.0 - kProbabilityFloor);
    }
    const double got = counts.log_likelihood(q);

    const int points = 50;
    auto axis = [&](int i) {
      return kProbabilityFloor + (1.0 - 2 * kProbabilityFloor) * i / double(points - 1);
    };
    double best = -INFINITY;
    std::vector<double> g(n);
    std::vector<int> idx(n, 0);
    while (true) {
      for (std::size_t d = 0; d < n; ++d) g[d] = axis(idx[d]);
      best = std::max(best, counts.log_likelihood(g));
      std::size_t d = 0;
      while (d < n && ++idx[d] == points) idx[d++] = 0;
      if (d == n) break;
    }
    CHECK(got >= best - 1e-9);
  }
}

TEST_CASE("Baum-Welch epsilon step") {
  SUBCASE("no transitions ever seen") {
    const auto truth = single_event(0.0, 0.0, {0.5, 0.7, 0.9});
    const auto trace = full_observation_trace(simulate(truth, 200, 1));
    auto est = EstimatedParams::from_model(truth);
    est.eps0_hat = {0.3};
    est.eps1_hat = {0.3};
    for (int i = 0; i < 30; ++i) {
      const auto e = baum_welch_epsilon(trace, est);
      est.eps0_hat = e.eps0;
      est.eps1_hat = e.eps1;
    }
    CHECK(est.eps1_hat[0] == doctest::Approx(kProbabilityFloor));
  }

  SUBCASE("recovers the transition rates with q known") {
    RngStream rng(5);
    std::vector<double> q(10);
    for (auto& v : q) v = rng.uniform(0.3, 0.9);
    const auto truth = single_event(0.2, 0.3, q);
    const auto trace = full_observation_trace(simulate(truth, 500, 2));
    auto est = EstimatedParams::from_model(truth);
    est.eps0_hat = {0.5};
    est.eps1_hat = {0.5};
    for (int i = 0; i < 100; ++i) {
      const auto e = baum_welch_epsilon(trace, est);
      est.eps0_hat = e.eps0;
      est.eps1_hat = e.eps1;
    }
    CHECK(std::abs(est.eps0_hat[0] - 0.2) <= 0.05);
    CHECK(std::abs(est.eps1_hat[0] - 0.3) <= 0.05);
  }

  SUBCASE("single slot is not enough") {
    const auto truth = single_event(0.2, 0.3, {0.5});
    const auto trace = full_observation_trace(simulate(truth, 1, 3));
    CHECK_THROWS_AS(baum_welch_epsilon(trace, EstimatedParams::from_model(truth)), InsufficientData);
  }

  SUBCASE("the epsilon step never lowers the likelihood") {
    RngStream rng(41);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 1 + rng.below(2);
      auto truth = oracle::random_params(rng, n, 4);
      const auto trace = full_observation_trace(simulate(truth, 10 + rng.below(41), 100 + trial));
      auto est = EstimatedParams::random_init(n, 4, rng);
      for (auto& v : est.q_hat) v = std::clamp(v, 0.01, 0.99);
      const double before = trace_log_likelihood(est.to_model(1), trace);
      const auto e = baum_welch_epsilon(trace, est);
      est.eps0_hat = e.eps0;
      est.eps1_hat = e.eps1;
      const double after = trace_log_likelihood(est.to_model(1), trace);
      CHECK(after >= before - 1e-9);
    }
  }
}

TEST_CASE("EM iteration") {
  SUBCASE("default cap") {
    CHECK(EmOptions{}.max_iters == 40);
  }

  SUBCASE("all-zero trace") {
    ObservationTrace trace(50, Observation::full(ActivationVector(10)));
    RngStream rng(8);
    const auto est = em_iterate(trace, EstimatedParams::random_init(2, 10, rng));
    for (double v : est.q_hat) CHECK(v == doctest::Approx(kProbabilityFloor));
    CHECK(est.converged);
    CHECK(est.iterations_run <= 2);
  }

  SUBCASE("starting at the truth stays close") {
    auto drift = [](std::size_t n_events, bool soft, std::uint64_t seed) {
      RngStream rng(seed);
      ModelParams truth;
      truth.n_events = n_events;
      truth.n_devices = 10;
      truth.n_slots = 1;
      for (std::size_t n = 0; n < n_events; ++n) {
        truth.eps0.push_back(rng.uniform(0.15, 0.35));
        truth.eps1.push_back(rng.uniform(0.15, 0.35));
      }
      for (std::size_t i = 0; i < n_events * 10; ++i) truth.q.push_back(rng.uniform(0.3, 0.9));
      const auto trace = full_observation_trace(simulate(truth, 8000, seed + 1));
      EmOptions opts;
      opts.soft_q = soft;
      const auto est = em_iterate(trace, EstimatedParams::from_model(truth), opts);
      double sup = 0.0;
      for (std::size_t n = 0; n < n_events; ++n) {
        sup = std::max({sup, std::abs(est.eps0_hat[n] - truth.eps0[n]), std::abs(est.eps1_hat[n] - truth.eps1[n])});
      }
      for (std::size_t i = 0; i < truth.q.size(); ++i) sup = std::max(sup, std::abs(est.q_hat[i] - truth.q[i]));
      return sup;
    };
    // Hard decoding is exact enough with one event; with several events and
    // few devices the decoded states are often wrong, so the soft q-step is
    // the fixed point that holds there.
    CHECK(drift(1, false, 9) < 0.05);
    CHECK(drift(2, true, 19) < 0.05);
  }

  SUBCASE("every iterate is clamped and runs are reproducible") {
    RngStream prng(12);
    const auto truth = sample_params(prng, 3, 8, 2);
    const auto trace = full_observation_trace(simulate(truth, 80, 13));
    RngStream irng(14);
    const auto init = EstimatedParams::random_init(3, 8, irng);
    EmOptions opts;
    std::size_t calls = 0;
    opts.on_iteration = [&](std::size_t, const EstimatedParams& e) {
      ++calls;
      auto in_range = [](double v) { return v >= kProbabilityFloor && v <= 1.0 - kProbabilityFloor; };
      CHECK(std::all_of(e.eps0_hat.begin(), e.eps0_hat.end(), in_range));
      CHECK(std::all_of(e.eps1_hat.begin(), e.eps1_hat.end(), in_range));
      CHECK(std::all_of(e.q_hat.begin(), e.q_hat.end(), in_range));
    };
    const auto a = em_iterate(trace, init, opts);
    const auto b = em_iterate(trace, init);
    CHECK(calls == a.iterations_run);
    CHECK(a.eps0_hat == b.eps0_hat);
    CHECK(a.eps1_hat == b.eps1_hat);
    CHECK(a.q_hat == b.q_hat);
  }

  SUBCASE("soft q-step runs and stays clamped") {
    RngStream prng(15);
    const auto truth = sample_params(prng, 2, 6, 2);
    const auto trace = full_observation_trace(simulate(truth, 60, 16));
    RngStream irng(17);
    EmOptions opts;
    opts.soft_q = true;
    const auto est = em_iterate(trace, EstimatedParams::random_init(2, 6, irng), opts);
    for (double v : est.q_hat) {
      CHECK(v >= kProbabilityFloor);
      CHECK(v <= 1.0 - kProbabilityFloor);
    }
  }
}

TEST_CASE("estimation error") {
  RngStream prng(21);
  const auto truth = sample_params(prng, 3, 20, 5);
  std::vector<Trajectory> eval;
  for (std::uint64_t s = 0; s < 3; ++s) eval.push_back(simulate(truth, 50, 300 + s));
  CHECK(estimation_error(truth, EstimatedParams::from_model(truth), eval) == 0.0);
  CHECK_THROWS_AS(estimation_error(truth, EstimatedParams::from_model(truth), std::vector<Trajectory>{}),
                  InsufficientData);
}
