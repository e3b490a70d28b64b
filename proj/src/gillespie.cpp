#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "ipslab/evolve.hpp"

namespace ipslab {

namespace {

double exp_draw(std::mt19937_64& rng) { return -std::log1p(-unit_uniform(rng())); }

struct Placed {
  std::size_t rule;
  std::vector<std::size_t> shape, dep;
};

class PathRunner {
 public:
  PathRunner(const RateFamily& rates, const Torus& torus) : rates_(rates), torus_(torus) {
    require_fits(rates, torus);
    const auto& rules = rates.rules();
    readers_.assign(torus.site_count(), {});
    for (std::size_t k = 0; k < rules.size(); ++k)
      for (std::size_t a = 0; a < torus.site_count(); ++a) {
        Placed p{k, torus.sites_of(rules[k].shape.translated(torus.point(a))),
                 torus.sites_of(rules[k].dependence.translated(torus.point(a)))};
        for (std::size_t s : p.dep) readers_[s].push_back(placed_.size());
        placed_.push_back(std::move(p));
      }
  }

  std::uint64_t context(const std::vector<int>& x, const Placed& p) const {
    std::uint64_t c = 0;
    for (std::size_t s : p.dep) c = c * rates_.q() + x[s];
    return c;
  }

  void run(std::vector<int>& x, double t_end, std::mt19937_64& rng) const {
    const auto& rules = rates_.rules();
    std::vector<double> rate(placed_.size());
    auto refresh = [&](std::size_t j) { rate[j] = std::max(0.0, rules[placed_[j].rule].moving(context(x, placed_[j]))); };
    double total = 0.0;
    for (std::size_t j = 0; j < placed_.size(); ++j) {
      refresh(j);
      total += rate[j];
    }
    double t = 0.0;
    std::size_t steps = 0;
    std::vector<std::size_t> touched;
    while (total > 0.0) {
      t += exp_draw(rng) / total;
      if (t > t_end) break;
      double u = unit_uniform(rng()) * total;
      std::size_t j = 0;
      for (; j + 1 < placed_.size(); ++j) {
        if (u < rate[j]) break;
        u -= rate[j];
      }
      const Placed& p = placed_[j];
      const auto& r = rules[p.rule];
      std::uint64_t c = context(x, p);
      const std::uint64_t home = r.shape_part(c);
      double v = unit_uniform(rng()) * r.moving(c);
      std::uint64_t tgt = home;
      for (std::uint64_t k = 0; k < r.targets; ++k) {
        double w = k == home ? 0.0 : r.rate(c, k);
        if (w <= 0.0) continue;
        tgt = k;  // rounding falls back to the last moving target
        if (v < w) break;
        v -= w;
      }
      for (std::size_t k = p.shape.size(); k-- > 0;) {
        x[p.shape[k]] = static_cast<int>(tgt % rates_.q());
        tgt /= rates_.q();
      }
      touched.clear();
      for (std::size_t s : p.shape) touched.insert(touched.end(), readers_[s].begin(), readers_[s].end());
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (std::size_t i : touched) {
        total -= rate[i];
        refresh(i);
        total += rate[i];
      }
      if (++steps % 4096 == 0) {
        total = 0.0;
        for (double w : rate) total += w;
      }
    }
  }

 private:
  const RateFamily& rates_;
  const Torus& torus_;
  std::vector<Placed> placed_;
  std::vector<std::vector<std::size_t>> readers_;
};

}  // namespace

Sampler product_sampler(std::vector<double> single_site, std::size_t sites) {
  double z = 0.0;
  for (double p : single_site) z += p;
  for (double& p : single_site) p /= z;
  return [single_site, sites](std::mt19937_64& rng) {
    std::vector<int> x(sites);
    for (auto& v : x) {
      double u = unit_uniform(rng());
      int k = 0;
      for (; k + 1 < static_cast<int>(single_site.size()); ++k) {
        if (u < single_site[k]) break;
        u -= single_site[k];
      }
      v = k;
    }
    return x;
  };
}

Sampler measure_sampler(const DenseMeasure& m) {
  m.require_torus();
  std::vector<double> cdf(m.size());
  double acc = 0.0;
  for (std::uint64_t s = 0; s < m.size(); ++s) cdf[s] = (acc += m[s]);
  StateSpace sp = m.space();
  return [cdf, sp](std::mt19937_64& rng) {
    double u = unit_uniform(rng()) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::uint64_t s = std::min<std::uint64_t>(it - cdf.begin(), cdf.size() - 1);
    return sp.decode(s);
  };
}

EmpiricalMeasure gillespie_sample(const RateFamily& rates, const Torus& torus, const Sampler& initial,
                                  double t_end, std::size_t n_paths, const Window& window,
                                  std::uint64_t seed, int threads) {
  if (n_paths == 0) throw std::invalid_argument("gillespie: need at least one path");
  PathRunner runner(rates, torus);
  Window w = torus.wrap(window);
  std::vector<std::size_t> sites;
  for (const auto& p : w) sites.push_back(torus.index(p));
  StateSpace sub(sites.size(), rates.q());
  threads = std::max(1, threads);
  std::vector<std::vector<double>> counts(threads, std::vector<double>(sub.size(), 0.0));
  auto work = [&](int id) {
    for (std::size_t k = id; k < n_paths; k += threads) {
      std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
      std::mt19937_64 rng(ss);
      std::vector<int> x = initial(rng);
      if (x.size() != torus.site_count()) throw std::invalid_argument("gillespie: sampler size mismatch");
      runner.run(x, t_end, rng);
      std::uint64_t idx = 0;
      for (std::size_t s : sites) idx = idx * rates.q() + x[s];
      counts[id][idx] += 1.0;
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int id = 0; id < threads; ++id)
      pool.emplace_back([&, id] {
        try {
          work(id);
        } catch (...) {
          errors[id] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<double> freq(sub.size(), 0.0);
  for (const auto& c : counts)
    for (std::size_t k = 0; k < c.size(); ++k) freq[k] += c[k];
  EmpiricalMeasure out;
  out.paths = n_paths;
  const double n = static_cast<double>(n_paths);
  for (double& f : freq) f /= n;
  for (double f : freq) out.std_error.push_back(std::sqrt(f * (1.0 - f) / n));
  out.measure = DenseMeasure::normalized(w, rates.q(), std::move(freq));
  return out;
}

}  // namespace ipslab
