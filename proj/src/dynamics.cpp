#include "ipslab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>

namespace ipslab {

void TransitionRule::finalize(int q) {
  if (shape.empty()) throw std::invalid_argument("rule: empty shape");
  if (!shape.subset_of(dependence))
    throw std::invalid_argument("rule: dependence window must contain the shape");
  dep_space = StateSpace(dependence.size(), q);
  contexts = dep_space.size();
  targets = checked_power(q, shape.size());
  shape_positions.clear();
  for (const auto& p : shape) shape_positions.push_back(*dependence.position(p));
  if (rates.size() != contexts * targets)
    throw std::invalid_argument("rule: table has " + std::to_string(rates.size()) +
                                " entries, expected " + std::to_string(contexts * targets));
  for (double r : rates)
    if (!(r >= 0.0) || !std::isfinite(r))
      throw std::invalid_argument("rule: rates must be finite and non-negative");
}

double TransitionRule::total(std::uint64_t context) const {
  double s = 0.0;
  for (std::uint64_t t = 0; t < targets; ++t) s += rates[context * targets + t];
  return s;
}

namespace {

Point negate(const Point& p) {
  Point out(p);
  for (int& c : out) c = -c;
  return out;
}

// table of `rule` re-expressed on a larger dependence window
std::vector<double> lift_table(const TransitionRule& rule, const Window& dep, int q) {
  std::vector<std::size_t> pos;
  for (const auto& p : rule.dependence) pos.push_back(*dep.position(p));
  StateSpace big(dep.size(), q);
  std::vector<double> out(big.size() * rule.targets);
  for (std::uint64_t c = 0; c < big.size(); ++c) {
    std::uint64_t small = big.project(c, pos);
    for (std::uint64_t t = 0; t < rule.targets; ++t) out[c * rule.targets + t] = rule.rate(small, t);
  }
  return out;
}

}  // namespace

RateFamily::RateFamily(int q, int dim, std::vector<TransitionRule> rules, std::string name)
    : q_(q), dim_(dim), name_(std::move(name)) {
  if (q < 2) throw std::invalid_argument("rates: q must be >= 2");
  std::map<std::vector<Point>, std::vector<TransitionRule>> groups;
  for (auto& r : rules) {
    if (r.shape.dimension() != dim || r.dependence.dimension() != dim)
      throw std::invalid_argument("rates: rule dimension mismatch");
    r.finalize(q);
    Point off = negate(r.shape[0]);
    r.shape = r.shape.translated(off);
    r.dependence = r.dependence.translated(off);
    r.finalize(q);
    groups[r.shape.points()].push_back(std::move(r));
  }
  for (auto& [pts, group] : groups) {
    Window dep = group.front().dependence;
    for (const auto& r : group) dep = dep.united(r.dependence);
    TransitionRule merged{Window(pts), dep, {}};
    for (const auto& r : group) {
      auto t = lift_table(r, dep, q);
      if (merged.rates.empty()) merged.rates.assign(t.size(), 0.0);
      for (std::size_t k = 0; k < t.size(); ++k) merged.rates[k] += t[k];
    }
    merged.finalize(q);
    rules_.push_back(std::move(merged));
  }
}

int RateFamily::range() const {
  int r = 0;
  for (const auto& rule : rules_) r = std::max(r, rule.dependence.range());
  return r;
}

Window RateFamily::dependence_union() const {
  Window u;
  for (const auto& rule : rules_) u = u.empty() ? rule.dependence : u.united(rule.dependence);
  return u;
}

double RateFamily::max_total_rate(std::size_t rule) const {
  const auto& r = rules_.at(rule);
  double m = 0.0;
  for (std::uint64_t c = 0; c < r.contexts; ++c) m = std::max(m, r.total(c));
  return m;
}

double RateFamily::min_positive_rate() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rules_)
    for (double x : r.rates)
      if (x > 0.0) m = std::min(m, x);
  return m;
}

TransitionRule make_rule(const Window& shape, const Window& dependence, int q,
                         const std::function<double(std::span<const int>, std::span<const int>)>& rate) {
  TransitionRule r{shape, dependence, {}};
  StateSpace ctx(dependence.size(), q), tgt(shape.size(), q);
  r.rates.resize(ctx.size() * tgt.size());
  std::vector<int> c(dependence.size()), t(shape.size());
  for (std::uint64_t a = 0; a < ctx.size(); ++a) {
    ctx.decode(a, c);
    for (std::uint64_t b = 0; b < tgt.size(); ++b) {
      tgt.decode(b, t);
      r.rates[a * tgt.size() + b] = rate(c, t);
    }
  }
  r.finalize(q);
  return r;
}

namespace {

// single-site conditional law at the origin for every context on the neighbourhood
std::vector<std::vector<double>> site_kernels(const Potential& potential, const Window& dep) {
  const int d = potential.dimension();
  Window ring = dep.minus(origin(d));
  std::vector<std::size_t> ring_pos;
  for (const auto& p : ring) ring_pos.push_back(*dep.position(p));
  StateSpace sp(dep.size(), potential.q());
  std::vector<std::vector<double>> out(sp.size());
  Config boundary{ring, std::vector<int>(ring.size())};
  std::map<std::uint64_t, std::vector<double>> cache;
  for (std::uint64_t c = 0; c < sp.size(); ++c) {
    std::uint64_t key = sp.project(c, ring_pos);
    auto it = cache.find(key);
    if (it == cache.end()) {
      for (std::size_t k = 0; k < ring_pos.size(); ++k) boundary.values[k] = sp.digit(c, ring_pos[k]);
      it = cache.emplace(key, gamma_kernel(potential, origin(d), boundary)).first;
    }
    out[c] = it->second;
  }
  return out;
}

}  // namespace

RateFamily glauber_heat_bath(const Potential& potential) {
  const int d = potential.dimension();
  Window dep = potential.neighborhood();
  auto kern = site_kernels(potential, dep);
  StateSpace sp(dep.size(), potential.q());
  TransitionRule r{origin(d), dep, std::vector<double>(sp.size() * potential.q())};
  for (std::uint64_t c = 0; c < sp.size(); ++c)
    for (int s = 0; s < potential.q(); ++s) r.rates[c * potential.q() + s] = kern[c][s];
  return RateFamily(potential.q(), d, {r}, "glauber_heat_bath");
}

RateFamily glauber_metropolis(const Potential& potential) {
  const int d = potential.dimension();
  Window dep = potential.neighborhood();
  auto kern = site_kernels(potential, dep);
  std::size_t zero = *dep.position(Point(d, 0));
  StateSpace sp(dep.size(), potential.q());
  TransitionRule r{origin(d), dep, std::vector<double>(sp.size() * potential.q())};
  for (std::uint64_t c = 0; c < sp.size(); ++c) {
    int cur = sp.digit(c, zero);
    for (int s = 0; s < potential.q(); ++s)
      r.rates[c * potential.q() + s] = std::min(1.0, kern[c][s] / kern[c][cur]);
  }
  return RateFamily(potential.q(), d, {r}, "glauber_metropolis");
}

RateFamily exclusion(double p_right, double p_left, int dim) {
  if (p_right < 0 || p_left < 0) throw std::invalid_argument("exclusion: negative hop rate");
  std::vector<TransitionRule> rules;
  for (int a = 0; a < dim; ++a) {
    Point e(dim, 0);
    e[a] = 1;
    Window shape({Point(dim, 0), e});
    // state 1 (label 2) is a particle
    rules.push_back(make_rule(shape, shape, 2, [&](std::span<const int> c, std::span<const int> t) {
      if (c[0] == 1 && c[1] == 0 && t[0] == 0 && t[1] == 1) return p_right;
      if (c[0] == 0 && c[1] == 1 && t[0] == 1 && t[1] == 0) return p_left;
      return 0.0;
    }));
  }
  return RateFamily(2, dim, std::move(rules), "exclusion");
}

RateFamily cyclic_clock(int q, double forward, double backward, int dim) {
  if (forward < 0 || backward < 0) throw std::invalid_argument("clock: negative rate");
  auto r = make_rule(origin(dim), origin(dim), q, [&](std::span<const int> c, std::span<const int> t) {
    double v = 0.0;
    if (t[0] == (c[0] + 1) % q) v += forward;
    if (t[0] == (c[0] + q - 1) % q) v += backward;
    return v;
  });
  return RateFamily(q, dim, {r}, "cyclic_clock");
}

RateFamily independent_flip(int q, double rate, int dim) {
  auto r = make_rule(origin(dim), origin(dim), q,
                     [&](std::span<const int> c, std::span<const int> t) { return t[0] == c[0] ? 0.0 : rate; });
  return RateFamily(q, dim, {r}, "independent_flip");
}

RateFamily contact_process(double lambda, int dim) {
  Window dep = cube(-1, 1, dim);
  std::vector<Point> nb;
  for (const auto& p : dep) {
    int l1 = 0;
    for (int c : p) l1 += std::abs(c);
    if (l1 <= 1) nb.push_back(p);
  }
  Window star(nb);
  std::size_t zero = *star.position(Point(dim, 0));
  auto r = make_rule(origin(dim), star, 2, [&](std::span<const int> c, std::span<const int> t) {
    if (c[zero] == 1) return t[0] == 0 ? 1.0 : 0.0;
    int infected = 0;
    for (std::size_t k = 0; k < c.size(); ++k) infected += (k != zero && c[k] == 1);
    return t[0] == 1 ? lambda * infected : 0.0;
  });
  return RateFamily(2, dim, {r}, "contact_process");
}

TransitionRule truncate_rule(const TransitionRule& rule, const Window& ball, int q) {
  Window kept = rule.dependence.intersected(ball);
  std::vector<std::size_t> pos;
  for (const auto& p : kept) pos.push_back(*rule.dependence.position(p));
  std::map<std::uint64_t, std::vector<double>> inf;
  for (std::uint64_t c = 0; c < rule.contexts; ++c) {
    auto& slot = inf[rule.dep_space.project(c, pos)];
    if (slot.empty()) slot.assign(rule.targets, std::numeric_limits<double>::infinity());
    for (std::uint64_t t = 0; t < rule.targets; ++t) slot[t] = std::min(slot[t], rule.rate(c, t));
  }
  TransitionRule out = rule;
  for (std::uint64_t c = 0; c < rule.contexts; ++c) {
    const auto& slot = inf[rule.dep_space.project(c, pos)];
    for (std::uint64_t t = 0; t < rule.targets; ++t) out.rates[c * rule.targets + t] = slot[t];
  }
  out.finalize(q);
  return out;
}

RateFamily truncated_rates(const RateFamily& rates, const Window& ball) {
  std::vector<TransitionRule> rules;
  for (const auto& r : rates.rules()) rules.push_back(truncate_rule(r, ball, rates.q()));
  return RateFamily(rates.q(), rates.dimension(), std::move(rules), rates.name() + "_truncated");
}

void require_fits(const RateFamily& rates, const Torus& torus) {
  if (torus.dimension() != rates.dimension())
    throw std::invalid_argument("torus and rates dimensions differ");
  for (const auto& r : rates.rules()) {
    // distinct anchors must give distinct translates of the shape
    Window diff;
    for (const auto& p : r.shape) {
      Window t = r.shape.translated(negate(p));
      diff = diff.empty() ? t : diff.united(t);
    }
    if (!torus.fits(r.dependence) || !torus.fits(diff))
      throw std::invalid_argument("torus too small for the rate dependence range");
  }
}

TorusDynamics::TorusDynamics(const RateFamily& rates, const Torus& torus)
    : rates_(rates), torus_(torus), space_(torus.site_count(), rates.q()) {
  require_fits(rates, torus);
  const auto& rules = rates_.rules();
  shape_sites_.resize(rules.size());
  dep_sites_.resize(rules.size());
  for (std::size_t k = 0; k < rules.size(); ++k) {
    const auto& r = rules[k];
    for (std::size_t a = 0; a < torus.site_count(); ++a) {
      Point pa = torus.point(a);
      shape_sites_[k].push_back(torus.sites_of(r.shape.translated(pa)));
      dep_sites_[k].push_back(torus.sites_of(r.dependence.translated(pa)));
    }
  }
}

double TorusDynamics::rate(std::uint64_t state, std::size_t rule, std::size_t anchor,
                           std::uint64_t target) const {
  return rates_.rules()[rule].rate(context(state, rule, anchor), target);
}

double TorusDynamics::total_rate(std::uint64_t state, std::size_t rule, std::size_t anchor) const {
  return rates_.rules()[rule].total(context(state, rule, anchor));
}

GeneratorMatrix generator_matrix(const RateFamily& rates, const Torus& torus) {
  TorusDynamics dyn(rates, torus);
  const auto& sp = dyn.space();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::uint64_t s = 0; s < sp.size(); ++s) {
    double out = 0.0;
    for (std::size_t k = 0; k < rates.rules().size(); ++k) {
      const auto& r = rates.rules()[k];
      for (std::size_t a = 0; a < dyn.anchors(); ++a) {
        std::uint64_t c = dyn.context(s, k, a);
        for (std::uint64_t t = 0; t < r.targets; ++t) {
          double v = r.rate(c, t);
          if (v <= 0.0) continue;
          std::uint64_t x = dyn.jump(s, k, a, t);
          if (x == s) continue;
          trip.emplace_back(static_cast<int>(s), static_cast<int>(x), v);
          out += v;
        }
      }
    }
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  GeneratorMatrix g{sp, {}, torus.all_sites(), torus};
  g.q.resize(static_cast<Eigen::Index>(sp.size()), static_cast<Eigen::Index>(sp.size()));
  g.q.setFromTriplets(trip.begin(), trip.end());
  g.q.makeCompressed();
  return g;
}

double apply_generator(const RateFamily& rates, const Torus& torus,
                       const std::function<double(std::span<const int>)>& f,
                       std::span<const int> eta) {
  TorusDynamics dyn(rates, torus);
  const auto& sp = dyn.space();
  std::uint64_t s = sp.encode(eta);
  const double f0 = f(eta);
  std::vector<int> dig(sp.sites());
  double acc = 0.0;
  for (std::size_t k = 0; k < rates.rules().size(); ++k) {
    const auto& r = rates.rules()[k];
    for (std::size_t a = 0; a < dyn.anchors(); ++a) {
      std::uint64_t c = dyn.context(s, k, a);
      for (std::uint64_t t = 0; t < r.targets; ++t) {
        double v = r.rate(c, t);
        if (v <= 0.0) continue;
        sp.decode(dyn.jump(s, k, a, t), dig);
        acc += v * (f(dig) - f0);
      }
    }
  }
  return acc;
}

namespace {

std::string describe(const TransitionRule& r, std::uint64_t context, std::uint64_t target, int q) {
  return "shape " + std::to_string(r.shape.size()) + "-site at origin, context " +
         config_string(r.dep_space.decode(context), q) + " on " + std::to_string(r.dependence.size()) +
         " sites, target " + config_string(StateSpace(r.shape.size(), q).decode(target), q);
}

}  // namespace

ConditionReport check_conditions(const RateFamily& rates) {
  ConditionReport rep;
  const int q = rates.q();
  std::size_t widest = 0;
  for (const auto& r : rates.rules()) widest = std::max(widest, r.dependence.size());
  rep.finitely_many_types.detail = std::to_string(rates.rules().size()) + " rule shape(s)";
  rep.uniform_continuity.detail = "rates read at most " + std::to_string(widest) + " sites";

  for (const auto& r : rates.rules()) {
    for (std::uint64_t c = 0; c < r.contexts && rep.no_traps.holds; ++c)
      for (std::uint64_t t = 0; t < r.targets; ++t) {
        if (r.rate(c, t) <= 0.0) continue;
        if (r.total(r.replace_shape(c, t)) <= 0.0) {
          rep.no_traps.holds = false;
          rep.no_traps.detail = "no way back: " + describe(r, c, t, q);
          break;
        }
      }
  }

  rep.min_rate_value = rates.min_positive_rate();
  rep.min_rate.holds = rep.min_rate_value > 0.0 && std::isfinite(rep.min_rate_value);
  rep.min_rate.detail = std::isfinite(rep.min_rate_value) ? "smallest positive rate " + std::to_string(rep.min_rate_value)
                                                          : "no positive rate";

  // a per-state count preserved by every jump
  for (int v = 0; v < q && !rep.conserved; ++v) {
    bool kept = true;
    for (const auto& r : rates.rules()) {
      StateSpace tgt(r.shape.size(), q);
      for (std::uint64_t c = 0; c < r.contexts && kept; ++c)
        for (std::uint64_t t = 0; t < r.targets && kept; ++t) {
          if (r.rate(c, t) <= 0.0) continue;
          std::uint64_t cur = r.shape_part(c);
          int before = 0, after = 0;
          for (std::size_t k = 0; k < r.shape.size(); ++k) {
            before += tgt.digit(cur, k) == v;
            after += tgt.digit(t, k) == v;
          }
          kept = before == after;
        }
    }
    if (kept && rates.min_positive_rate() < std::numeric_limits<double>::infinity())
      rep.conserved = "number of sites in state " + std::to_string(v + 1);
  }

  std::vector<int> sides(rates.dimension(), 2 * rates.range() + 2);
  Torus probe(sides);
  std::uint64_t n = 1;
  bool small = true;
  for (std::size_t k = 0; k < probe.site_count() && small; ++k) small = (n *= q) <= (std::uint64_t{1} << 20);
  if (!small) {
    rep.irreducible.holds = false;
    rep.irreducible.detail = "undecided: probe torus exceeds the state cap";
    return rep;
  }
  GeneratorMatrix g = generator_matrix(rates, probe);
  const auto& Q = g.q;
  const std::uint64_t N = g.space.size();
  auto reach = [&](bool forward) {
    std::vector<std::vector<std::uint64_t>> adj(N);
    for (Eigen::Index i = 0; i < Q.outerSize(); ++i)
      for (SparseQ::InnerIterator it(Q, i); it; ++it)
        if (it.col() != it.row() && it.value() > 0.0) {
          if (forward) adj[it.row()].push_back(it.col());
          else adj[it.col()].push_back(it.row());
        }
    std::vector<char> seen(N, 0);
    std::queue<std::uint64_t> qu;
    qu.push(0);
    seen[0] = 1;
    while (!qu.empty()) {
      auto x = qu.front();
      qu.pop();
      for (auto y : adj[x])
        if (!seen[y]) {
          seen[y] = 1;
          qu.push(y);
        }
    }
    return seen;
  };
  auto fw = reach(true), bw = reach(false);
  rep.irreducible.detail = "probe torus of side " + std::to_string(sides[0]);
  for (std::uint64_t s = 0; s < N; ++s) {
    if (!fw[s] || !bw[s]) {
      rep.irreducible.holds = false;
      std::string a = config_string(g.space.decode(0), q), b = config_string(g.space.decode(s), q);
      rep.irreducible.detail += fw[s] ? ": " + a + " is not reachable from " + b
                                      : ": " + b + " is not reachable from " + a;
      break;
    }
  }
  if (rep.conserved && rep.irreducible.holds) {
    rep.irreducible.holds = false;
    rep.irreducible.detail += "; conserved " + *rep.conserved;
  }
  return rep;
}

double detailed_balance_defect(const RateFamily& rates, const Potential& potential, const Torus& torus) {
  if (potential.q() != rates.q()) throw std::invalid_argument("detailed balance: alphabet mismatch");
  DenseMeasure mu = torus_gibbs(potential, torus);
  TorusDynamics dyn(rates, torus);
  double d = 0.0;
  for (std::uint64_t s = 0; s < mu.size(); ++s)
    for (std::size_t k = 0; k < rates.rules().size(); ++k) {
      const auto& r = rates.rules()[k];
      for (std::size_t a = 0; a < dyn.anchors(); ++a) {
        std::uint64_t c = dyn.context(s, k, a);
        std::uint64_t back = r.shape_part(c);
        for (std::uint64_t t = 0; t < r.targets; ++t) {
          double v = r.rate(c, t);
          if (v <= 0.0 || t == back) continue;
          std::uint64_t x = dyn.jump(s, k, a, t);
          double w = dyn.rate(x, k, a, back);
          d = std::max(d, std::abs(mu[s] * v - mu[x] * w));
        }
      }
    }
  return d;
}

WindowDynamics averaged_dynamics(const RateFamily& rates, const DenseMeasure& mu, const Window& lambda) {
  const Torus& torus = mu.require_torus();
  TorusDynamics dyn(rates, torus);
  if (mu.q() != rates.q()) throw std::invalid_argument("averaged dynamics: alphabet mismatch");
  WindowDynamics out{mu.localize(lambda), rates.q(), {}};
  auto pos = mu.positions_of(lambda);
  std::vector<int> where(torus.site_count(), -1);
  for (std::size_t k = 0; k < pos.size(); ++k) where[pos[k]] = static_cast<int>(k);
  std::vector<double> ctx_mass = marginal_weights(mu, pos);
  auto proj = projection_table(mu.space(), pos);
  for (std::size_t k = 0; k < rates.rules().size(); ++k) {
    const auto& r = rates.rules()[k];
    for (std::size_t a = 0; a < dyn.anchors(); ++a) {
      AveragedJump j{k, a, {}, r.targets, {}};
      bool meets = false;
      for (std::size_t s : dyn.shape_sites(k, a)) {
        j.window_position.push_back(where[s]);
        meets |= where[s] >= 0;
      }
      if (!meets) continue;
      j.rates.assign(ctx_mass.size() * r.targets, 0.0);
      for (std::uint64_t s = 0; s < mu.size(); ++s) {
        if (mu[s] == 0.0) continue;
        std::uint64_t c = dyn.context(s, k, a);
        for (std::uint64_t t = 0; t < r.targets; ++t) j.rates[proj[s] * r.targets + t] += mu[s] * r.rate(c, t);
      }
      for (std::size_t w = 0; w < ctx_mass.size(); ++w) {
        if (!(ctx_mass[w] > 0.0)) throw std::domain_error("averaged dynamics: null window configuration");
        for (std::uint64_t t = 0; t < r.targets; ++t) j.rates[w * r.targets + t] /= ctx_mass[w];
      }
      out.jumps.push_back(std::move(j));
    }
  }
  return out;
}

GeneratorMatrix generator_matrix(const WindowDynamics& dyn) {
  StateSpace sp(dyn.window.size(), dyn.q);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::uint64_t s = 0; s < sp.size(); ++s) {
    double out = 0.0;
    for (const auto& j : dyn.jumps) {
      StateSpace tgt(j.window_position.size(), dyn.q);
      for (std::uint64_t t = 0; t < j.targets; ++t) {
        double v = j.rates[s * j.targets + t];
        if (v <= 0.0) continue;
        std::uint64_t x = s;
        for (std::size_t k = 0; k < j.window_position.size(); ++k)
          if (j.window_position[k] >= 0) x = sp.with_digit(x, j.window_position[k], tgt.digit(t, k));
        if (x == s) continue;
        trip.emplace_back(static_cast<int>(s), static_cast<int>(x), v);
        out += v;
      }
    }
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  GeneratorMatrix g{sp, {}, dyn.window, std::nullopt};
  g.q.resize(static_cast<Eigen::Index>(sp.size()), static_cast<Eigen::Index>(sp.size()));
  g.q.setFromTriplets(trip.begin(), trip.end());
  g.q.makeCompressed();
  return g;
}

}  // namespace ipslab
