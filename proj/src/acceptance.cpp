#include "ipslab/acceptance.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "ipslab/entropy.hpp"
#include "ipslab/evolve.hpp"
#include "ipslab/experiment.hpp"

namespace ipslab {

namespace fs = std::filesystem;

namespace {

DenseMeasure random_soft(const Torus& t, int q, std::uint64_t seed, double eps = 0.2) {
  return soften(random_measure(t, q, seed), eps);
}

DenseMeasure random_ti(const Torus& t, int q, std::uint64_t seed, double eps = 0.2) {
  return soften(translation_average(random_measure(t, q, seed)), eps);
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

// accumulates the worst case seen and the first failure
struct Tally {
  bool ok = true;
  std::string first_failure;
  int cases = 0;
  void check(bool good, const std::string& what) {
    ++cases;
    if (!good && ok) first_failure = what;
    ok = ok && good;
  }
  CriterionResult result(std::string detail) const {
    CriterionResult r;
    r.passed = ok;
    r.detail = ok ? std::move(detail) : first_failure + " (" + detail + ")";
    return r;
  }
};

struct Params {
  int decay_sites, decay_starts;
  int oracle_pairs, oracle_sites;
  int decomposition_sites, decomposition_measures;
  int jensen_sites, jensen_measures, jensen_n_max;
  int clock_jensen_sites, clock_jensen_measures;
  int gtilde_measures;
  int reversible_measures;
  int attractor_measures;
};

Params params(Scale s) {
  if (s == Scale::small) return {6, 10, 25, 5, 5, 10, 8, 20, 2, 8, 20, 20, 10, 3};
  return {8, 20, 50, 6, 6, 20, 16, 10, 3, 10, 40, 40, 20, 6};
}

CriterionResult entropy_decay(const Params& p) {
  Tally t;
  Torus torus = Torus::ring(p.decay_sites);
  auto pot = ising_potential(0.5);
  auto rates = glauber_heat_bath(pot);
  auto mu = torus_gibbs(pot, torus);
  const double gap = spectral_gap(generator_matrix(rates, torus));
  double worst_final = 0.0;
  for (int k = 0; k < p.decay_starts; ++k) {
    auto tr = run_trajectory(random_soft(torus, 2, 1000 + k), rates, mu, linear_grid(50.0 / gap, 50), {}, 1e-10);
    t.check(tr.monotone, "h increased along start " + std::to_string(k));
    worst_final = std::max(worst_final, tr.rows.back().h);
    t.check(tr.rows.back().h <= 1e-6, "final h " + sci(tr.rows.back().h) + " > 1e-6");
  }
  return t.result(std::to_string(p.decay_starts) + " starts, N=" + std::to_string(p.decay_sites) +
                  ", worst final h " + sci(worst_final));
}

CriterionResult formula_vs_oracle(const Params& p) {
  Tally t;
  Torus torus = Torus::ring(p.oracle_sites);
  struct Model {
    RateFamily rates;
    bool product_reference;
  };
  std::vector<Model> models{{glauber_heat_bath(ising_potential(0.5, 0.2)), false},
                            {glauber_metropolis(ising_potential(0.8)), false},
                            {cyclic_clock(3, 1.0, 0.0), false},
                            {exclusion(1.0, 0.5), true},
                            {glauber_heat_bath(potts_potential(3, 0.4)), false}};
  std::vector<GeneratorMatrix> gens;
  std::vector<DenseMeasure> refs;
  for (const auto& m : models) {
    gens.push_back(generator_matrix(m.rates, torus));
    refs.push_back(m.product_reference ? product_measure(torus, {0.6, 0.4}) : stationary_measure(gens.back()));
  }
  const std::vector<Window> windows{interval(0, 0), interval(1, 2), torus.all_sites()};
  double worst = 0.0;
  for (int k = 0; k < p.oracle_pairs; ++k) {
    const std::size_t m = k % models.size();
    const auto& rates = models[m].rates;
    auto nu = random_soft(torus, rates.q(), 2000 + k);
    const Window& lam = windows[(k / models.size()) % windows.size()];
    const double v = entropy_loss_finite(nu, refs[m], rates, lam).value;
    auto o = entropy_derivative_oracle(nu, refs[m], gens[m], lam);
    const double tol = std::max(1e-6, 1e-4 * std::abs(v));
    worst = std::max(worst, std::abs(v - o.value) / tol);
    t.check(std::abs(v - o.value) <= tol, rates.name() + ": formula " + sci(v) + " vs oracle " + sci(o.value));
  }
  return t.result(std::to_string(p.oracle_pairs) + " pairs, worst error/tolerance " + sci(worst));
}

CriterionResult closed_form() {
  Tally t;
  Torus torus = Torus::ring(5);
  auto rates = independent_flip(2, 1.0);
  auto mu = uniform_measure(torus, 2);
  const double p = 0.75;
  const double expect = (1 - 2 * p) * std::log(p / (1 - p));
  double got = 0.0;
  for (const auto& lam : {interval(0, 0), interval(0, 2), torus.all_sites()}) {
    got = entropy_loss_finite(product_measure(torus, {p, 1 - p}), mu, rates, lam).per_site();
    t.check(std::abs(got - expect) <= 1e-9, "per-site loss " + sci(got) + " vs " + sci(expect));
  }
  t.check(std::abs(got - -0.549306) <= 5e-7, "per-site loss differs from -0.549306");
  std::ostringstream d;
  d << std::setprecision(10) << "per-site loss " << got;
  return t.result(d.str());
}

CriterionResult decomposition(const Params& p) {
  Tally t;
  Torus torus = Torus::ring(p.decomposition_sites);
  const double n = static_cast<double>(torus.site_count());
  auto ising = ising_potential(0.6, 0.3);
  struct Case {
    RateFamily rates;
    Potential potential;
  };
  double worst = 0.0;
  std::uint64_t seed = 3000;
  for (const auto& c : {Case{glauber_heat_bath(ising), ising}, Case{cyclic_clock(3, 1.0, 0.0), zero_potential(3)}}) {
    auto mu = torus_gibbs(c.potential, torus);
    for (int k = 0; k < p.decomposition_measures; ++k) {
      auto nu = random_ti(torus, c.rates.q(), seed++);
      const double total = entropy_loss_finite(nu, mu, c.rates, torus.all_sites()).value;
      const double rho = specific_energy_loss(nu, c.rates, c.potential);
      const double ent = n * specific_entropy_loss(nu, c.rates);
      const double defect = std::abs(total - (rho * n + ent));
      worst = std::max(worst, defect);
      t.check(defect <= 1e-8, c.rates.name() + ": defect " + sci(defect));
    }
  }
  return t.result("worst defect " + sci(worst));
}

CriterionResult jensen(const Params& p) {
  Tally t;
  struct Case {
    RateFamily rates;
    int sites, n_max, measures;
  };
  std::vector<Case> cases{{glauber_heat_bath(ising_potential(0.5)), p.jensen_sites, p.jensen_n_max, p.jensen_measures},
                          {cyclic_clock(3, 1.0, 0.0), p.clock_jensen_sites, 2, p.clock_jensen_measures}};
  double margin = INFINITY;
  std::uint64_t seed = 4000;
  std::string what;
  for (const auto& c : cases) {
    Torus torus = Torus::ring(c.sites);
    for (int k = 0; k < c.measures; ++k) {
      auto seq = jensen_monotone_sequence(random_ti(torus, c.rates.q(), seed++), c.rates, c.n_max, 1e-9);
      for (std::size_t m = 1; m < seq.size(); ++m) {
        margin = std::min(margin, seq[m - 1].normalized - seq[m].normalized);
        t.check(seq[m].holds, c.rates.name() + ": normalized f_" + std::to_string(seq[m].n) + " " +
                                  sci(seq[m].normalized) + " above " + sci(seq[m - 1].normalized));
      }
    }
    what += c.rates.name() + " n<=" + std::to_string(c.n_max) + " ring " + std::to_string(c.sites) + " x" +
            std::to_string(c.measures) + ", ";
  }
  return t.result(what + "smallest decrease " + sci(margin));
}

CriterionResult gtilde(const Params& p) {
  Tally t;
  Torus torus = Torus::ring(8);
  std::vector<RateFamily> models{glauber_heat_bath(ising_potential(0.7)), cyclic_clock(2, 1.0, 0.5),
                                 exclusion(1.0, 0.4), glauber_metropolis(ising_potential(0.3, 0.4))};
  double slack = INFINITY;
  for (int k = 0; k < p.gtilde_measures; ++k) {
    const auto& rates = models[k % models.size()];
    auto nu = random_soft(torus, 2, 5000 + k, 0.05);
    t.check(non_nullness_constant(nu) > 0.0, "measure is not non-null");
    for (int n : {1, 2}) {
      const double vol = static_cast<double>(box_volume(n, 1));
      const double lhs = g_tilde(nu, rates, n);
      const double rhs = window_entropy_loss(nu, rates, box(n, 1)) / vol - gtilde_boundary_bound(rates, n);
      slack = std::min(slack, lhs - rhs);
      t.check(lhs >= rhs - 1e-9, rates.name() + ": g_tilde " + sci(lhs) + " below " + sci(rhs));
    }
  }
  return t.result(std::to_string(p.gtilde_measures) + " non-null measures, smallest slack " + sci(slack));
}

CriterionResult reversible(const Params& p) {
  Tally t;
  Torus torus = Torus::ring(6);
  auto pot = ising_potential(0.7, -0.2);
  double worst_id = 0.0, worst_db = 0.0;
  for (const auto& rates : {glauber_heat_bath(pot), glauber_metropolis(pot)}) {
    const double db = detailed_balance_defect(rates, pot, torus);
    worst_db = std::max(worst_db, db);
    t.check(db <= 1e-12, rates.name() + ": detailed balance defect " + sci(db));
    for (int k = 0; k < p.reversible_measures; ++k) {
      auto rd = reversible_decomposition(random_soft(torus, 2, 6000 + k), rates, pot, 1);
      worst_id = std::max(worst_id, rd.identity_defect);
      t.check(rd.identity_defect <= 1e-8, rates.name() + ": |r_rev + rho| = " + sci(rd.identity_defect));
    }
  }
  return t.result("worst |r_rev + rho| " + sci(worst_id) + ", worst detailed balance defect " + sci(worst_db));
}

CriterionResult irreversibility() {
  Tally t;
  auto rates = cyclic_clock(3, 1.0, 0.0);
  auto all = stationary(generator_matrix(rates, Torus::ring(4)));
  t.check(all.size() == 1, "stationary measure not unique");
  double dev = 0.0;
  for (std::uint64_t s = 0; s < all[0].size(); ++s) dev = std::max(dev, std::abs(all[0][s] - 1.0 / 81));
  t.check(dev <= 1e-10, "stationary measure off uniform by " + sci(dev));
  const double db = detailed_balance_defect(rates, zero_potential(3), Torus::ring(1));
  t.check(db >= 0.1, "detailed balance defect " + sci(db) + " < 0.1");
  return t.result("deviation from uniform " + sci(dev) + ", detailed balance defect " + sci(db));
}

CriterionResult zero_loss_gibbs() {
  Tally t;
  Torus torus = Torus::ring(6);
  auto pot = ising_potential(0.5, 0.1);
  double worst_ratio = 0.0, worst_dlr = 0.0;
  for (const auto& rates : {glauber_heat_bath(pot), glauber_metropolis(pot)}) {
    t.check(check_conditions(rates).all(), rates.name() + ": conditions fail");
    t.check(detailed_balance_defect(rates, pot, torus) <= 1e-12, rates.name() + ": not reversible");
    auto mu = stationary_measure(generator_matrix(rates, torus));
    for (int i = 0; i < 6; ++i) {
      const double r = conditional_ratio_defect(mu, pot, interval(i, i));
      const double d = dlr_defect(mu, pot, interval(i, i));
      worst_ratio = std::max(worst_ratio, r);
      worst_dlr = std::max(worst_dlr, d);
      t.check(r <= 1e-8 && d <= 1e-10, rates.name() + ": site " + std::to_string(i) + " ratio " + sci(r) + " dlr " +
                                           sci(d));
    }
  }
  return t.result("worst ratio defect " + sci(worst_ratio) + ", worst DLR defect " + sci(worst_dlr));
}

CriterionResult attractor(const Params& p) {
  Tally t;
  double worst = 0.0;
  struct Case {
    RateFamily rates;
    Potential potential;
    Torus torus;
    bool check_decrease;
  };
  auto ising = ising_potential(0.5);
  for (const auto& c : {Case{glauber_heat_bath(ising), ising, Torus::ring(6), true},
                        Case{cyclic_clock(3, 1.0, 0.0), zero_potential(3), Torus::ring(4), false}}) {
    auto g = generator_matrix(c.rates, c.torus);
    const double gap = spectral_gap(g);
    auto mu = torus_gibbs(c.potential, c.torus);
    auto schedule = growing_windows(c.torus);
    for (int k = 0; k < p.attractor_measures; ++k) {
      auto nu = random_ti(c.torus, c.rates.q(), 7000 + k);
      double prev = INFINITY;
      for (double m : {10.0, 20.0, 50.0}) {
        const double wd = weak_distance(evolve(nu, g, m / gap), mu, schedule);
        if (c.check_decrease) t.check(wd <= prev, c.rates.name() + ": weak distance went up at t=" + sci(m) + "/gap");
        prev = wd;
      }
      worst = std::max(worst, prev);
      t.check(prev <= 1e-5, c.rates.name() + ": final weak distance " + sci(prev));
    }
  }
  return t.result("worst final weak distance " + sci(worst));
}

CriterionResult conditions() {
  Tally t;
  for (const auto& rates : {glauber_heat_bath(ising_potential(0.5)), glauber_metropolis(ising_potential(0.5))}) {
    auto rep = check_conditions(rates);
    t.check(rep.all(), rates.name() + ": " + rep.irreducible.detail + rep.no_traps.detail);
  }
  // 0 -> 1 at rate one, never back
  auto toy = RateFamily(2, 1,
                        {make_rule(origin(1), origin(1), 2,
                                   [](std::span<const int> c, std::span<const int> s) {
                                     return c[0] == 0 && s[0] == 1 ? 1.0 : 0.0;
                                   })},
                        "trapped_toy");
  auto rep = check_conditions(toy);
  t.check(!rep.no_traps.holds && !rep.no_traps.detail.empty(), "trapped toy rule passes no_traps");
  const std::string witness = rep.no_traps.detail;
  auto tasep = check_conditions(exclusion(1.0, 0.0));
  t.check(!tasep.no_traps.holds, "one-way exclusion passes no_traps");
  return t.result("toy witness: " + witness);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CriterionResult determinism() {
  Tally t;
  const fs::path root = fs::temp_directory_path() / ("ipslab-determinism-" + std::to_string(::getpid()));
  auto cfg = parse_config(canonical_glauber_config(), "canonical");
  RunOptions a, b;
  a.seed = b.seed = 17;
  a.out = (root / "a").string();
  b.out = (root / "b").string();
  b.threads = 3;
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  int files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    const auto name = e.path().filename();
    t.check(fs::exists(root / "b" / name) && read_bytes(e.path()) == read_bytes(root / "b" / name),
            name.string() + " differs between runs");
  }
  t.check(files > 0, "no CSV written");
  fs::remove_all(root);
  return t.result(std::to_string(files) + " CSV files identical across runs (1 and 3 threads)");
}

}  // namespace

std::string canonical_glauber_config() {
  return R"({
  "name": "glauber_ising",
  "model": {
    "potential": {"builtin": "ising", "beta": 0.5, "field": 0.1},
    "rates": {"builtin": "glauber_heat_bath"}
  },
  "torus": [8],
  "initial": {"recipe": "soften", "eps": 0.2, "inner": {"recipe": "random"}},
  "reference": "stationary",
  "time": {"t_end": 20, "unit": "gap", "points": 30},
  "windows": [[[0]], [[0], [1]]],
  "suites": ["decay", "decomposition", "jensen", "gtilde", "reversible", "attractor", "conditions"],
  "jensen": {"n_max": 2},
  "gtilde": {"n": [1, 2]},
  "attractor": {"gaps": [10, 20, 50]},
  "expect": {"conditions": {"no_traps": true, "irreducible": true, "reversible": true}},
  "seed": 1,
  "output": "out/glauber_ising"
}
)";
}

std::vector<CriterionResult> run_acceptance(Scale scale, int threads) {
  const Params p = params(scale);
  const std::vector<std::pair<std::string, std::function<CriterionResult()>>> criteria{
      {"entropy decay along Glauber trajectories", [&] { return entropy_decay(p); }},
      {"entropy loss formula vs finite differences", [&] { return formula_vs_oracle(p); }},
      {"single-site flip closed form", [] { return closed_form(); }},
      {"energy plus entropy decomposition", [&] { return decomposition(p); }},
      {"Jensen monotonicity of normalized f_n", [&] { return jensen(p); }},
      {"g_tilde bounds the window loss", [&] { return gtilde(p); }},
      {"reversible identity r_rev + rho = 0", [&] { return reversible(p); }},
      {"irreversible clock with uniform stationary measure", [] { return irreversibility(); }},
      {"stationary Glauber measure is Gibbs", [] { return zero_loss_gibbs(); }},
      {"attractor: weak convergence to Gibbs", [&] { return attractor(p); }},
      {"condition checkers", [] { return conditions(); }},
      {"byte-identical reruns", [] { return determinism(); }},
  };
  std::vector<CriterionResult> out(criteria.size());
  auto one = [&](std::size_t k) {
    auto start = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = criteria[k].second();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.id = static_cast<int>(k) + 1;
    r.name = criteria[k].first;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out[k] = r;
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(criteria.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t k; (k = next++) < criteria.size();) one(k);
    });
  for (std::size_t k; (k = next++) < criteria.size();) one(k);
  for (auto& th : pool) th.join();
  return out;
}

void print_acceptance(const std::vector<CriterionResult>& results, std::ostream& out) {
  int passed = 0;
  for (const auto& r : results) {
    passed += r.passed;
    out << (r.passed ? "PASS" : "FAIL") << "  " << std::setw(2) << r.id << "  " << r.name << "  [" << std::fixed
        << std::setprecision(2) << r.seconds << " s]  " << r.detail << "\n";
  }
  out << passed << "/" << results.size() << " criteria passed\n";
}

int cmd_verify_all(Scale scale, int threads, std::ostream& out) {
  auto results = run_acceptance(scale, threads);
  print_acceptance(results, out);
  for (const auto& r : results)
    if (!r.passed) return kExitFail;
  return kExitPass;
}

}  // namespace ipslab
