#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "ipslab/entropy.hpp"
#include "ipslab/evolve.hpp"
#include "support.hpp"

using namespace ipslab;
using namespace testing;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double my_perspective(double v, double a) {
  if (a == 0.0) return -v;
  if (v == 0.0) return -kInf;
  return -a * std::log(a / v) + a - v;
}

// f_n by direct enumeration, d = 1: truncated rates are minimised over whole torus states
double brute_f_n(const DenseMeasure& nu, const RateFamily& rates, int n) {
  const Torus& torus = *nu.torus();
  TorusDynamics dyn(rates, torus);
  const auto& sp = nu.space();
  const int q = rates.q();
  const int half = (1 << n) - 1, inner = (1 << n) - n - 1;
  std::vector<std::size_t> lam;
  for (int x = -half; x <= half; ++x) lam.push_back(torus.index({x}));
  StateSpace win(lam.size(), q);
  auto window_of = [&](std::uint64_t s) {
    std::vector<int> z(lam.size());
    for (std::size_t k = 0; k < lam.size(); ++k) z[k] = sp.digit(s, lam[k]);
    return win.encode(z);
  };
  std::vector<double> marg(win.size(), 0.0);
  for (std::uint64_t s = 0; s < sp.size(); ++s) marg[window_of(s)] += nu[s];

  double total = 0.0;
  for (int ix = -inner; ix <= inner; ++ix) {
    const std::size_t i = torus.index({ix});
    std::vector<std::size_t> B;
    for (int x = ix - (n - 1); x <= ix + (n - 1); ++x) B.push_back(torus.index({x}));
    for (std::size_t k = 0; k < rates.rules().size(); ++k) {
      const auto& r = rates.rules()[k];
      const double w = 1.0 / static_cast<double>(r.shape.size());
      for (const auto& a : r.shape) {
        const std::size_t b = torus.index({ix - a[0]});
        const auto& delta = dyn.shape_sites(k, b);
        const double qd = std::pow(q, r.shape.size());
        for (std::uint64_t t = 0; t < r.targets; ++t) {
          auto tdig = StateSpace(r.shape.size(), q).decode(t);
          for (std::uint64_t z = 0; z < win.size(); ++z) {
            double A = 0.0;
            for (std::uint64_t s = 0; s < sp.size(); ++s) {
              if (window_of(s) != z) continue;
              double v = dyn.rate(s, k, b, t);
              if (v == 0.0) continue;
              A += nu[s] * qd * v / dyn.total_rate(dyn.jump(s, k, b, t), k, b);
            }
            auto moved = win.decode(z);
            for (std::size_t m = 0; m < delta.size(); ++m)
              for (std::size_t l = 0; l < lam.size(); ++l)
                if (lam[l] == delta[m]) moved[l] = tdig[m];
            double V = marg[win.encode(moved)];
            // truncated total rate: per target infimum over states matching moved on B
            double ct = 0.0;
            for (std::uint64_t t2 = 0; t2 < r.targets; ++t2) {
              double inf = kInf;
              for (std::uint64_t s = 0; s < sp.size(); ++s) {
                bool match = true;
                for (std::size_t bs : B)
                  for (std::size_t l = 0; l < lam.size(); ++l)
                    if (lam[l] == bs && sp.digit(s, bs) != moved[l]) match = false;
                if (match) inf = std::min(inf, dyn.rate(s, k, b, t2));
              }
              ct += inf;
            }
            if (ct == 0.0) continue;
            total += w * ct / qd * my_perspective(V, A);
          }
        }
      }
    }
  }
  return total;
}

std::vector<RateFamily> models() {
  return {glauber_heat_bath(ising_potential(0.5, 0.2)), glauber_metropolis(ising_potential(0.8)),
          cyclic_clock(2, 1.0, 0.3), independent_flip(2, 0.7)};
}

}  // namespace

TEST_CASE("psi") {
  CHECK(psi(1.0) == 0.0);
  CHECK(psi(0.0) == -1.0);
  for (double u = 0.0; u < 10.0; u += 0.01) CHECK(psi(u) <= 0.0);
  // concavity on a grid
  for (double u = 0.1; u < 5.0; u += 0.1) CHECK(psi(u) >= 0.5 * (psi(u - 0.05) + psi(u + 0.05)) - 1e-15);
  CHECK(psi_perspective(2.0, 3.0) == doctest::Approx(2.0 * psi(1.5)));
  CHECK(psi_perspective(0.0, 1.0) == -kInf);
  CHECK(psi_perspective(0.0, 0.0) == 0.0);
  CHECK(psi_perspective(0.5, 0.0) == -0.5);
}

TEST_CASE("local relative entropy") {
  Torus t = Torus::ring(4);
  auto nu = product_measure(t, {0.75, 0.25});
  auto mu = uniform_measure(t, 2);
  CHECK(local_relative_entropy(nu, mu, interval(0, 0)) == doctest::Approx(0.130812).epsilon(1e-6));
  CHECK(local_relative_entropy(nu, mu, interval(0, 0)) ==
        doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)).epsilon(1e-14));
  // additive over sites for products
  CHECK(local_relative_entropy(nu, mu, interval(0, 2)) ==
        doctest::Approx(3 * local_relative_entropy(nu, mu, interval(0, 0))).epsilon(1e-13));
  CHECK(local_relative_entropy(nu, nu, interval(0, 3)) == 0.0);
  CHECK(local_relative_entropy(mu, point_measure(t, 2, {0, 0, 0, 0}), interval(0, 1)) == kInf);
  for (std::uint64_t seed = 1; seed < 10; ++seed) {
    auto a = random_measure(t, 2, seed), b = random_measure(t, 2, seed + 100);
    CHECK(local_relative_entropy(a, b, interval(0, 2)) >= 0.0);
    // monotone in the window
    CHECK(local_relative_entropy(a, b, interval(0, 2)) >= local_relative_entropy(a, b, interval(0, 1)) - 1e-15);
  }
}

TEST_CASE("single-site flip closed form") {
  Torus t = Torus::ring(5);
  auto rates = independent_flip(2, 1.0);
  auto mu = uniform_measure(t, 2);
  for (double p : {0.75, 0.6, 0.1}) {
    auto nu = product_measure(t, {p, 1 - p});
    const double expect = (1 - 2 * p) * std::log(p / (1 - p));
    CHECK(entropy_loss_finite(nu, mu, rates, interval(0, 0)).per_site() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(entropy_loss_finite(nu, mu, rates, interval(0, 4)).per_site() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(specific_entropy_loss(nu, rates) == doctest::Approx(expect).epsilon(1e-12));
  }
  auto nu = product_measure(t, {0.75, 0.25});
  CHECK(entropy_loss_finite(nu, mu, rates, interval(0, 2)).per_site() == doctest::Approx(-0.549306).epsilon(1e-6));
  CHECK(entropy_loss_finite(mu, mu, rates, interval(0, 2)).value == 0.0);
}

TEST_CASE("entropy loss matches the matrix and finite differences") {
  Torus t = Torus::ring(5);
  std::uint64_t seed = 1;
  for (const auto& rates : models()) {
    auto g = generator_matrix(rates, t);
    auto mu = stationary_measure(g);
    for (const auto& lam : {interval(0, 0), interval(1, 3), t.all_sites()}) {
      auto nu = random_soft(t, 2, seed++);
      auto rep = entropy_loss_finite(nu, mu, rates, lam);
      double exact = matrix_entropy_derivative(nu, mu, g, lam);
      CHECK(rep.value == doctest::Approx(exact).epsilon(1e-10).scale(1.0));
      auto fd = entropy_derivative_oracle(nu, mu, g, lam);
      CHECK(std::abs(rep.value - fd.value) <= std::max(1e-6, 1e-4 * std::abs(rep.value)));
      // breakdown sums to the value
      double s = 0.0;
      for (const auto& term : rep.breakdown) s += term.value;
      CHECK(s == doctest::Approx(rep.value).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("entropy loss is non-positive on the whole torus") {
  Torus t = Torus::ring(5);
  std::uint64_t seed = 40;
  for (const auto& rates : models()) {
    auto mu = stationary_measure(generator_matrix(rates, t));
    for (int k = 0; k < 5; ++k) {
      auto nu = random_soft(t, 2, seed++);
      CHECK(entropy_loss_finite(nu, mu, rates, t.all_sites()).value <= 1e-9);
    }
    CHECK(std::abs(entropy_loss_finite(mu, mu, rates, t.all_sites()).value) <= 1e-12);
  }
}

TEST_CASE("absolute continuity is required") {
  Torus t = Torus::ring(3);
  auto rates = independent_flip(2, 1.0);
  CHECK_THROWS_AS(entropy_loss_finite(uniform_measure(t, 2), point_measure(t, 2, {0, 0, 0}), rates, interval(0, 0)),
                  std::domain_error);
  CHECK_THROWS_AS(specific_entropy_loss(point_measure(t, 2, {0, 0, 0}), rates), std::domain_error);
}

TEST_CASE("loss splits into energy and entropy parts") {
  Torus t = Torus::ring(5);
  const double n = static_cast<double>(t.site_count());
  auto pot = ising_potential(0.6, 0.3);
  struct Case {
    RateFamily rates;
    Potential potential;
  };
  for (const auto& c : {Case{glauber_heat_bath(pot), pot}, Case{cyclic_clock(3, 1.0, 0.25), zero_potential(3)},
                        Case{glauber_metropolis(potts_potential(3, 0.4)), potts_potential(3, 0.4)}}) {
    auto mu = torus_gibbs(c.potential, t);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      auto nu = random_ti(t, c.rates.q(), seed);
      auto parts = entropy_loss_parts(nu, mu, c.rates, t.all_sites());
      double rho = specific_energy_loss(nu, c.rates, c.potential);
      double ent = specific_entropy_loss(nu, c.rates);
      CHECK(parts.total == doctest::Approx(parts.entropy + parts.energy).epsilon(1e-10).scale(1.0));
      CHECK(parts.energy == doctest::Approx(n * rho).epsilon(1e-10).scale(1.0));
      CHECK(parts.entropy == doctest::Approx(n * ent).epsilon(1e-10).scale(1.0));
      CHECK(std::abs(parts.total - (rho * n + parts.entropy)) <= 1e-8);
    }
  }
  // zero potential gives no energy loss
  auto nu = random_ti(t, 3, 9);
  CHECK(specific_energy_loss(nu, cyclic_clock(3, 1.0, 0.0), zero_potential(3)) == 0.0);
  // at the Gibbs measure of a reversible dynamics the two parts cancel
  auto mu = torus_gibbs(pot, t);
  CHECK(specific_entropy_loss(mu, glauber_heat_bath(pot)) ==
        doctest::Approx(-specific_energy_loss(mu, glauber_heat_bath(pot), pot)).epsilon(1e-12));
}

TEST_CASE("s/r decomposition") {
  Torus t = Torus::ring(7);
  for (const auto& rates : models()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto nu = random_ti(t, 2, seed);
      for (int n : {1, 2}) {
        auto sr = s_r_decomposition(nu, rates, n);
        const double vol = static_cast<double>(box_volume(n, 1));
        CHECK(sr.s + sr.r == doctest::Approx(sr.g_tilde).epsilon(1e-10).scale(1.0));
        CHECK(sr.g_tilde / vol == doctest::Approx(g_tilde(nu, rates, n)).epsilon(1e-12).scale(1.0));
        const double inner = static_cast<double>(inner_box(n, 1).size());
        CHECK(sr.r == doctest::Approx(inner * sr.r_density).epsilon(1e-10).scale(1.0));
      }
    }
  }
  auto u = uniform_measure(t, 2);
  auto flip = independent_flip(2, 1.0);
  auto sr = s_r_decomposition(u, flip, 2);
  CHECK(sr.r_density == doctest::Approx(std::log(2.0)));
  CHECK(sr.g_tilde == doctest::Approx(0.0).scale(1.0));
  CHECK(sr.s == doctest::Approx(-sr.r));
  auto zero = s_r_decomposition(random_ti(t, 2, 4), independent_flip(2, 0.0), 1);
  CHECK(zero.s == 0.0);
  CHECK(zero.r == 0.0);
  CHECK_THROWS_AS(s_r_decomposition(u, contact_process(1.0), 1), std::domain_error);
}

TEST_CASE("window loss equals the finite loss for single-site rules against a uniform reference") {
  Torus t = Torus::ring(6);
  auto mu = uniform_measure(t, 2);
  for (const auto& rates : models()) {
    auto nu = random_soft(t, 2, 77);
    for (const auto& lam : {interval(0, 0), interval(0, 2), t.all_sites()})
      CHECK(window_entropy_loss(nu, rates, lam) ==
            doctest::Approx(entropy_loss_finite(nu, mu, rates, lam).value).epsilon(1e-11).scale(1.0));
  }
}

TEST_CASE("g tilde bounds the window loss from above up to the boundary term") {
  Torus t = Torus::ring(8);
  std::uint64_t seed = 1;
  for (const auto& rates : {glauber_heat_bath(ising_potential(0.7)), cyclic_clock(2, 1.0, 0.5), exclusion(1.0, 0.4)}) {
    for (int k = 0; k < 4; ++k) {
      auto nu = random_soft(t, 2, seed++, 0.05);
      for (int n : {1, 2}) {
        const double vol = static_cast<double>(box_volume(n, 1));
        double lhs = g_tilde(nu, rates, n);
        double rhs = window_entropy_loss(nu, rates, box(n, 1)) / vol - gtilde_boundary_bound(rates, n);
        CHECK(lhs >= rhs - 1e-9);
      }
    }
  }
  // null measures: zero target mass gives -inf
  auto pm = point_measure(t, 2, {0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(g_tilde(pm, glauber_heat_bath(ising_potential(0.3)), 1) == -kInf);
  CHECK(g_tilde(uniform_measure(t, 2), independent_flip(2, 1.0), 2) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("window loss obeys the non-null bound") {
  Torus t = Torus::ring(6);
  std::uint64_t seed = 3;
  for (const auto& rates : models()) {
    auto nu = random_soft(t, 2, seed++, 0.3);
    const double delta = non_nullness_constant(nu);
    for (const auto& lam : {interval(0, 1), interval(0, 3)}) {
      double per = window_entropy_loss(nu, rates, lam) / static_cast<double>(lam.size());
      CHECK(per >= -window_loss_bound(rates, delta) - 1e-12);
      double fin = entropy_loss_finite(nu, uniform_measure(t, 2), rates, lam).per_site();
      CHECK(std::abs(fin) <= entropy_loss_bound(rates, delta) + 1e-12);
    }
  }
}

TEST_CASE("f_n against brute force") {
  Torus t = Torus::ring(8);
  std::uint64_t seed = 1;
  for (const auto& rates : {glauber_heat_bath(ising_potential(0.6, 0.2)), glauber_metropolis(ising_potential(0.4)),
                            cyclic_clock(2, 1.0, 0.2)}) {
    auto nu = random_soft(t, 2, seed++);
    for (int n : {1, 2}) {
      auto rep = f_n(nu, rates, n);
      double brute = brute_f_n(nu, rates, n);
      CHECK(rep.value == doctest::Approx(brute).epsilon(1e-11).scale(1.0));
      CHECK(rep.value <= 0.0);
      if (n == 1 && rates.name() == "glauber_heat_bath") CHECK(rep.value < 0.0);
      CHECK(rep.volume == static_cast<double>(box_volume(n, 1)));
    }
  }
}

TEST_CASE("f_n is s_n when truncation does nothing") {
  Torus t = Torus::ring(8);
  // n = 2 balls have radius 1 and cover the Glauber dependence window
  auto rates = glauber_heat_bath(ising_potential(0.9, 0.1));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto nu = random_soft(t, 2, seed);
    CHECK(f_n(nu, rates, 2).value == doctest::Approx(s_r_decomposition(nu, rates, 2).s).epsilon(1e-10).scale(1.0));
  }
  auto flip = independent_flip(2, 1.3);
  auto nu = random_soft(t, 2, 8);
  CHECK(f_n(nu, flip, 1).value == doctest::Approx(s_r_decomposition(nu, flip, 1).s).epsilon(1e-10).scale(1.0));
}

TEST_CASE("f_n edge cases") {
  Torus t = Torus::ring(8);
  CHECK(f_n(random_soft(t, 2, 1), independent_flip(2, 0.0), 1).value == 0.0);
  // infinite-temperature heat bath: every target at rate 1/q, so every Psi argument is 1
  CHECK(f_n(uniform_measure(t, 2), glauber_heat_bath(zero_potential(2)), 2).value == doctest::Approx(0.0).scale(1.0));
  // a pure flip puts the whole rate on one target
  CHECK(f_n(uniform_measure(t, 2), independent_flip(2, 1.0), 1).value ==
        doctest::Approx(0.5 * psi(2.0) - 0.5).epsilon(1e-12));
  auto pm = point_measure(t, 2, {0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(f_n(pm, glauber_heat_bath(ising_potential(0.3)), 1).value == -kInf);
  CHECK_THROWS(f_n(uniform_measure(Torus::ring(5), 2), independent_flip(2, 1.0), 2));
}

TEST_CASE("jensen prefactor") {
  double prev = 0.0;
  for (int n = 1; n <= 12; ++n) {
    double tail = 0.0;
    double g = jensen_prefactor(n, 1, &tail);
    CHECK(g > prev);
    CHECK(g < 1.0);
    CHECK(tail < 1e-15);
    prev = g;
  }
  CHECK(jensen_prefactor(40, 1) == doctest::Approx(1.0).epsilon(1e-11));
  // truncated product, stopping once the factor passes 1 - 1e-14
  double prod = 1.0;
  for (int l = 1;; ++l) {
    double f = (std::pow(2.0, l + 2) - 2) / (std::pow(2.0, l + 2) - 1);
    if (f > 1 - 1e-14) break;
    prod *= f;
  }
  CHECK(jensen_prefactor(1, 1) == doctest::Approx(prod).epsilon(1e-13));
  CHECK(jensen_prefactor(1, 2) == doctest::Approx(prod * prod).epsilon(1e-13));
  CHECK(jensen_prefactor(1, 1) / jensen_prefactor(2, 1) == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("normalised f_n sequence does not increase") {
  Torus t = Torus::ring(8);
  std::uint64_t seed = 100;
  for (const auto& rates : {glauber_heat_bath(ising_potential(0.5)), cyclic_clock(2, 1.0, 0.0)}) {
    for (int k = 0; k < 5; ++k) {
      auto nu = random_ti(t, 2, seed++);
      auto seq = jensen_monotone_sequence(nu, rates, 2);
      REQUIRE(seq.size() == 2);
      CHECK(seq[1].holds);
      CHECK(seq[1].f <= 2.0 * seq[0].f + 1e-9);
      CHECK(seq[0].normalized == doctest::Approx(seq[0].prefactor * seq[0].f / 3.0));
    }
  }
}

TEST_CASE("reversible decomposition") {
  Torus t = Torus::ring(6);
  auto pot = ising_potential(0.7, -0.2);
  for (const auto& rates : {glauber_heat_bath(pot), glauber_metropolis(pot)}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      auto nu = random_soft(t, 2, seed);
      auto rd = reversible_decomposition(nu, rates, pot, 1);
      CHECK(rd.identity_defect <= 1e-8);
      CHECK(rd.r_rev == doctest::Approx(-rd.rho).epsilon(1e-10).scale(1.0));
    }
    auto mu = torus_gibbs(pot, t);
    CHECK(std::abs(reversible_decomposition(mu, rates, pot, 1).s_rev) <= 1e-12);
  }
  auto rd = reversible_decomposition(random_soft(t, 2, 5), independent_flip(2, 1.0), zero_potential(2), 1);
  CHECK(rd.r_rev == 0.0);
  CHECK(rd.rho == 0.0);
  CHECK_THROWS_AS(reversible_decomposition(random_soft(t, 3, 5), cyclic_clock(3, 1.0, 0.0), zero_potential(3), 1),
                  std::domain_error);
}

TEST_CASE("report json") {
  Torus t = Torus::ring(8);
  auto rates = glauber_heat_bath(ising_potential(0.3));
  auto rep = f_n(point_measure(t, 2, {0, 0, 0, 0, 0, 0, 0, 0}), rates, 1);
  auto j = to_json(rep, t, 2, rates);
  CHECK(j["value"] == "-inf");
  CHECK(j["breakdown"].size() == rep.breakdown.size());
  CHECK(j["breakdown"][0]["target"] == "1");
}
