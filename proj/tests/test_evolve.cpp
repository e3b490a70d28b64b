#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "ipslab/entropy.hpp"
#include "ipslab/evolve.hpp"
#include "support.hpp"

using namespace ipslab;
using namespace testing;

namespace {

RateFamily two_rate(double up, double down) {
  auto r = make_rule(origin(1), origin(1), 2, [=](std::span<const int> c, std::span<const int> t) {
    if (c[0] == 0 && t[0] == 1) return up;
    if (c[0] == 1 && t[0] == 0) return down;
    return 0.0;
  });
  return RateFamily(2, 1, {r}, "two_rate");
}

// RK4 on d nu/dt = nu Q with a fine fixed step
Eigen::VectorXd rk4(const Eigen::MatrixXd& q, Eigen::VectorXd v, double t, int steps) {
  const double h = t / steps;
  Eigen::MatrixXd qt = q.transpose();
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd k1 = qt * v, k2 = qt * (v + 0.5 * h * k1), k3 = qt * (v + 0.5 * h * k2), k4 = qt * (v + h * k3);
    v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return v;
}

// Pearson statistic against exact probabilities; bins with tiny expectation are pooled
bool chi_square_accepts(const std::vector<double>& freq, const std::vector<double>& exact, std::size_t n,
                        double alpha = 1e-3) {
  double stat = 0.0, pool_o = 0.0, pool_e = 0.0;
  int bins = 0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    double e = exact[k] * n, o = freq[k] * n;
    if (e < 5.0) {
      pool_o += o;
      pool_e += e;
      continue;
    }
    stat += (o - e) * (o - e) / e;
    ++bins;
  }
  if (pool_e > 0.0) {
    stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
    ++bins;
  }
  boost::math::chi_squared dist(bins - 1);
  return stat <= boost::math::quantile(boost::math::complement(dist, alpha));
}

}  // namespace

TEST_CASE("two-state chain closed form") {
  const double a = 0.7, b = 1.9;
  Torus t = Torus::ring(1);
  auto g = generator_matrix(two_rate(a, b), t);
  auto nu = DenseMeasure::on_torus(t, 2, {0.9, 0.1});
  for (double time : {0.0, 0.1, 1.0, 3.0, 25.0}) {
    double p1 = a / (a + b) + (0.1 - a / (a + b)) * std::exp(-(a + b) * time);
    CHECK(evolve(nu, g, time)[1] == doctest::Approx(p1).epsilon(1e-12));
  }
  CHECK(spectral_gap(g) == doctest::Approx(a + b));
}

TEST_CASE("uniformisation agrees with RK4 and the semigroup law") {
  Torus t = Torus::ring(4);
  auto rates = glauber_metropolis(ising_potential(0.8, 0.3));
  auto g = generator_matrix(rates, t);
  auto nu = random_measure(t, 2, 3);
  for (double time : {0.3, 2.0}) {
    Eigen::VectorXd ref = rk4(dense(g), vec(nu), time, 4000);
    CHECK((vec(evolve(nu, g, time)) - ref).cwiseAbs().maxCoeff() <= 1e-11);
  }
  auto a = evolve(evolve(nu, g, 0.7), g, 1.6), b = evolve(nu, g, 2.3);
  CHECK((vec(a) - vec(b)).cwiseAbs().maxCoeff() <= 1e-12);
  // a long time splits into many Poisson blocks
  auto far = evolve(nu, g, 400.0);
  auto mu = torus_gibbs(ising_potential(0.8, 0.3), t);
  CHECK(total_variation(far, mu) <= 1e-10);
  double mass = 0.0;
  for (std::uint64_t k = 0; k < far.size(); ++k) mass += far[k];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("backward evolution undoes a short forward step") {
  Torus t = Torus::ring(4);
  auto g = generator_matrix(glauber_heat_bath(ising_potential(0.5)), t);
  auto nu = random_soft(t, 2, 8);
  auto back = evolve_backward(evolve(nu, g, 1e-3), g, 1e-3);
  CHECK((vec(back) - vec(nu)).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK_THROWS(evolve_backward(point_measure(t, 2, {0, 0, 0, 0}), g, 0.1));
}

TEST_CASE("stationary measures") {
  SUBCASE("Glauber dynamics has the Gibbs measure") {
    for (double beta : {0.3, 1.0}) {
      auto pot = ising_potential(beta, 0.2);
      for (const auto& rates : {glauber_heat_bath(pot), glauber_metropolis(pot)}) {
        auto mu = stationary_measure(generator_matrix(rates, Torus::ring(6)));
        CHECK(total_variation(mu, torus_gibbs(pot, Torus::ring(6))) <= 1e-12);
      }
    }
    auto pot2 = ising_potential(0.4, 0.0, 2);
    auto mu2 = stationary_measure(generator_matrix(glauber_heat_bath(pot2), Torus({3, 3})));
    CHECK(total_variation(mu2, torus_gibbs(pot2, Torus({3, 3}))) <= 1e-12);
  }
  SUBCASE("the clock is uniform") {
    auto mu = stationary_measure(generator_matrix(cyclic_clock(3, 1.0, 0.0), Torus::ring(4)));
    for (std::uint64_t k = 0; k < mu.size(); ++k) CHECK(mu[k] == doctest::Approx(1.0 / 81).epsilon(1e-10));
  }
  SUBCASE("exclusion has one measure per particle number") {
    const int n = 5;
    auto g = generator_matrix(exclusion(1.0, 0.2), Torus::ring(n));
    auto all = stationary(g);
    REQUIRE(all.size() == static_cast<std::size_t>(n + 1));
    CHECK_THROWS_AS(stationary_measure(g), StationaryError);
    for (const auto& m : all) {
      // uniform on its sector
      double top = 0.0;
      for (std::uint64_t k = 0; k < m.size(); ++k) top = std::max(top, m[k]);
      for (std::uint64_t k = 0; k < m.size(); ++k)
        if (m[k] > 0.0) CHECK(m[k] == doctest::Approx(top).epsilon(1e-10));
      CHECK((dense(g).transpose() * vec(m)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("the contact process is absorbed") {
    auto all = stationary(generator_matrix(contact_process(2.0), Torus::ring(4)));
    REQUIRE(all.size() == 1);
    CHECK(all[0][0] == 1.0);
  }
}

TEST_CASE("spectral gaps") {
  CHECK(spectral_gap(generator_matrix(independent_flip(2, 1.0), Torus::ring(3))) == doctest::Approx(2.0));
  // circulant eigenvalues -1 + exp(2 pi i k / 3)
  CHECK(spectral_gap(generator_matrix(cyclic_clock(3, 1.0, 0.0), Torus::ring(1))) == doctest::Approx(1.5));
  CHECK(spectral_gap(generator_matrix(cyclic_clock(3, 1.0, 0.0), Torus::ring(2))) == doctest::Approx(1.5));
}

TEST_CASE("finite difference oracle") {
  Torus t = Torus::ring(5);
  std::uint64_t seed = 1;
  for (const auto& rates : {glauber_heat_bath(ising_potential(0.6)), cyclic_clock(2, 1.0, 0.1), exclusion(1.0, 0.5)}) {
    auto g = generator_matrix(rates, t);
    auto mu = rates.name() == "exclusion" ? product_measure(t, {0.5, 0.5}) : stationary_measure(g);
    for (const auto& lam : {interval(0, 1), t.all_sites()}) {
      auto nu = random_soft(t, 2, seed++);
      auto o = entropy_derivative_oracle(nu, mu, g, lam);
      double exact = matrix_entropy_derivative(nu, mu, g, lam);
      CHECK(std::abs(o.value - exact) <= std::max(1e-8, 1e-6 * std::abs(exact)));
      CHECK(std::abs(o.value - exact) <= o.error + 1e-10);
    }
  }
}

TEST_CASE("relative entropy decays along trajectories") {
  Torus t = Torus::ring(6);
  auto pot = ising_potential(0.5);
  auto rates = glauber_heat_bath(pot);
  auto mu = torus_gibbs(pot, t);
  const double gap = spectral_gap(generator_matrix(rates, t));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto tr = run_trajectory(random_soft(t, 2, seed), rates, mu, linear_grid(50.0 / gap, 50), {interval(0, 1)});
    CHECK(tr.monotone);
    REQUIRE(tr.rows.size() == 50);
    CHECK(tr.rows.front().t == 0.0);
    CHECK(tr.rows.back().h <= 1e-6);
    for (const auto& r : tr.rows) {
      CHECK(r.g <= 1e-10);
      CHECK(r.h_window.size() == 1);
      CHECK(r.h_window[0] <= r.h + 1e-12);
    }
  }
  CHECK_THROWS(run_trajectory(uniform_measure(t, 2), rates, mu, {1.0, 0.5}, {}));
  CHECK_THROWS(linear_grid(1.0, 1));
}

TEST_CASE("Gillespie matches the master equation") {
  SUBCASE("independent flips from a point mass") {
    Torus t = Torus::ring(3);
    auto rates = two_rate(0.8, 1.5);
    auto start = point_measure(t, 2, {0, 1, 0});
    auto exact = evolve(start, generator_matrix(rates, t), 0.6);
    std::uint64_t seed = 11;
    for (std::size_t n : {500, 1000, 2000, 4000, 8000}) {
      auto emp = gillespie_sample(rates, t, measure_sampler(start), 0.6, n, t.all_sites(), seed++);
      CHECK(chi_square_accepts(emp.measure.weights(), exact.weights(), n));
    }
  }
  SUBCASE("Glauber window marginal") {
    Torus t = Torus::ring(5);
    auto pot = ising_potential(0.7, 0.2);
    auto rates = glauber_heat_bath(pot);
    auto start = product_measure(t, {0.2, 0.8});
    auto exact = marginal(evolve(start, generator_matrix(rates, t), 0.8), interval(1, 2));
    auto emp = gillespie_sample(rates, t, product_sampler({0.2, 0.8}, t.site_count()), 0.8, 6000, interval(1, 2), 5);
    CHECK(chi_square_accepts(emp.measure.weights(), exact.weights(), 6000));
  }
  SUBCASE("a large ring agrees with a small one when sites do not interact") {
    Torus big = Torus::ring(64), small = Torus::ring(8);
    auto rates = cyclic_clock(3, 1.0, 0.4);
    auto exact = marginal(evolve(product_measure(small, {1.0, 0.0, 0.0}), generator_matrix(rates, small), 0.9),
                          interval(0, 1));
    auto emp = gillespie_sample(rates, big, product_sampler({1.0, 0.0, 0.0}, 64), 0.9, 4000, interval(0, 1), 21);
    CHECK(chi_square_accepts(emp.measure.weights(), exact.weights(), 4000));
  }
}

TEST_CASE("Gillespie is deterministic across thread counts") {
  Torus t = Torus::ring(6);
  auto rates = glauber_metropolis(ising_potential(0.4));
  auto init = product_sampler({0.5, 0.5}, 6);
  auto a = gillespie_sample(rates, t, init, 1.0, 999, interval(0, 2), 42, 1);
  auto b = gillespie_sample(rates, t, init, 1.0, 999, interval(0, 2), 42, 3);
  CHECK(a.measure.weights() == b.measure.weights());
  auto c = gillespie_sample(rates, t, init, 1.0, 999, interval(0, 2), 43, 1);
  CHECK(a.measure.weights() != c.measure.weights());
  CHECK_THROWS(gillespie_sample(rates, t, product_sampler({0.5, 0.5}, 5), 1.0, 10, interval(0, 0), 1, 2));
}
