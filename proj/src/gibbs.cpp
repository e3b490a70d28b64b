#include "ipslab/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace ipslab {

namespace {

Point negate(const Point& p) {
  Point out(p);
  for (int& c : out) c = -c;
  return out;
}

std::vector<double> softmax_neg(const std::vector<double>& energy) {
  double lo = *std::min_element(energy.begin(), energy.end());
  std::vector<double> w(energy.size());
  double z = 0.0;
  for (std::size_t k = 0; k < energy.size(); ++k) z += (w[k] = std::exp(-(energy[k] - lo)));
  for (double& x : w) x /= z;
  return w;
}

}  // namespace

Potential::Potential(int q, int dim, std::vector<Interaction> terms, std::string name)
    : q_(q), dim_(dim), name_(std::move(name)) {
  if (q < 2) throw std::invalid_argument("potential: q must be >= 2");
  std::map<std::vector<Point>, std::vector<double>> merged;
  for (auto& t : terms) {
    if (t.shape.empty()) throw std::invalid_argument("potential: empty interaction shape");
    if (t.shape.dimension() != dim) throw std::invalid_argument("potential: shape dimension mismatch");
    if (t.table.size() != checked_power(q, t.shape.size()))
      throw std::invalid_argument("potential: table size does not match q^|shape|");
    for (double e : t.table)
      if (!std::isfinite(e)) throw std::invalid_argument("potential: non-finite energy");
    Window s = t.shape.translated(negate(t.shape[0]));
    auto& slot = merged[s.points()];
    if (slot.empty()) slot.assign(t.table.size(), 0.0);
    for (std::size_t k = 0; k < slot.size(); ++k) slot[k] += t.table[k];
  }
  for (auto& [pts, table] : merged) terms_.push_back({Window(pts), std::move(table)});
}

int Potential::range() const {
  int r = 0;
  for (const auto& t : terms_) r = std::max(r, t.shape.range());
  return r;
}

Window Potential::neighborhood() const {
  Window n = origin(dim_);
  for (const auto& t : terms_)
    for (const auto& p : t.shape) n = n.united(t.shape.translated(negate(p)));
  return n;
}

double Potential::local_bound() const {
  double b = 0.0;
  for (const auto& t : terms_) {
    double m = 0.0;
    for (double e : t.table) m = std::max(m, std::abs(e));
    b += static_cast<double>(t.shape.size()) * m;
  }
  return b;
}

namespace {

Point unit(int dim, int axis) {
  Point p(dim, 0);
  p[axis] = 1;
  return p;
}

}  // namespace

// state 0 is spin +1, state 1 is spin -1
Potential ising_potential(double beta, double field, int dim) {
  std::vector<Interaction> terms;
  const double spin[2] = {1.0, -1.0};
  for (int a = 0; a < dim; ++a) {
    Interaction bond{Window({Point(dim, 0), unit(dim, a)}), std::vector<double>(4)};
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) bond.table[2 * x + y] = -beta * spin[x] * spin[y];
    terms.push_back(std::move(bond));
  }
  if (field != 0.0) terms.push_back({origin(dim), {-field, field}});
  return Potential(2, dim, std::move(terms), "ising");
}

Potential potts_potential(int q, double beta, int dim) {
  std::vector<Interaction> terms;
  for (int a = 0; a < dim; ++a) {
    Interaction bond{Window({Point(dim, 0), unit(dim, a)}), std::vector<double>(q * q, 0.0)};
    for (int x = 0; x < q; ++x) bond.table[x * q + x] = -beta;
    terms.push_back(std::move(bond));
  }
  return Potential(q, dim, std::move(terms), "potts");
}

Potential zero_potential(int q, int dim) { return Potential(q, dim, {}, "zero"); }

Potential single_site_field(double h, int q, int dim) {
  std::vector<double> table(q, 0.0);
  table[0] = h;
  return Potential(q, dim, {{origin(dim), table}}, "field");
}

std::vector<double> gamma_kernel(const Potential& potential, const Window& lambda,
                                 const Config& boundary) {
  if (boundary.values.size() != boundary.window.size())
    throw std::invalid_argument("gamma: boundary config size mismatch");
  const int q = potential.q();
  std::map<Point, int> bval;
  for (std::size_t k = 0; k < boundary.window.size(); ++k) bval[boundary.window[k]] = boundary.values[k];

  // (term, anchor) of every translate meeting lambda
  std::set<std::pair<std::size_t, Point>> seen;
  struct Slot {
    std::size_t term;
    std::vector<int> inner_pos;  // -1 when read from the boundary
    std::vector<int> fixed;
  };
  std::vector<Slot> slots;
  const auto& terms = potential.terms();
  for (const auto& x : lambda)
    for (std::size_t t = 0; t < terms.size(); ++t)
      for (const auto& s : terms[t].shape) {
        Point anchor(x);
        for (std::size_t k = 0; k < anchor.size(); ++k) anchor[k] -= s[k];
        if (!seen.insert({t, anchor}).second) continue;
        Slot slot{t, {}, {}};
        for (const auto& y : terms[t].shape.translated(anchor)) {
          if (auto p = lambda.position(y)) {
            slot.inner_pos.push_back(static_cast<int>(*p));
            slot.fixed.push_back(0);
          } else {
            auto it = bval.find(y);
            if (it == bval.end())
              throw std::invalid_argument("gamma: boundary does not cover site " + to_string(y));
            slot.inner_pos.push_back(-1);
            slot.fixed.push_back(it->second);
          }
        }
        slots.push_back(std::move(slot));
      }

  StateSpace inner(lambda.size(), q);
  std::vector<double> energy(inner.size(), 0.0);
  std::vector<int> dig(lambda.size());
  for (std::uint64_t s = 0; s < inner.size(); ++s) {
    inner.decode(s, dig);
    double h = 0.0;
    for (const auto& slot : slots) {
      std::uint64_t idx = 0;
      for (std::size_t k = 0; k < slot.inner_pos.size(); ++k) {
        int v = slot.inner_pos[k] >= 0 ? dig[slot.inner_pos[k]] : slot.fixed[k];
        idx = idx * static_cast<std::uint64_t>(q) + static_cast<std::uint64_t>(v);
      }
      h += terms[slot.term].table[idx];
    }
    energy[s] = h;
  }
  return softmax_neg(energy);
}

double gamma(const Potential& potential, const Window& lambda, const Config& inner,
             const Config& boundary) {
  if (!(inner.window == lambda)) throw std::invalid_argument("gamma: inner config must live on lambda");
  auto k = gamma_kernel(potential, lambda, boundary);
  return k[StateSpace(lambda.size(), potential.q()).encode(inner.values)];
}

double nonnull_delta(const Potential& potential) {
  Window nb = potential.neighborhood();
  Window ring = nb.minus(origin(potential.dimension()));
  StateSpace sp(ring.size(), potential.q());
  double best = 1.0;
  Config boundary{ring, std::vector<int>(ring.size())};
  for (std::uint64_t s = 0; s < sp.size(); ++s) {
    sp.decode(s, boundary.values);
    for (double p : gamma_kernel(potential, origin(potential.dimension()), boundary))
      best = std::min(best, p);
  }
  return best;
}

Specification make_specification(const Potential& potential) {
  Specification spec{potential, nonnull_delta(potential)};
  const double floor = std::exp(-2.0 * potential.local_bound()) / potential.q();
  if (spec.delta < floor * (1.0 - 1e-12))
    throw std::logic_error("specification: single-site conditional below exp(-2B)/q");
  return spec;
}

TorusHamiltonian::TorusHamiltonian(const Potential& potential, const Torus& torus)
    : potential_(potential), torus_(torus), space_(torus.site_count(), potential.q()) {
  if (torus.dimension() != potential.dimension())
    throw std::invalid_argument("torus and potential dimensions differ");
  if (!torus.fits(potential.neighborhood()))
    throw std::invalid_argument("torus too small for the interaction range");
  touching_.assign(torus.site_count(), {});
  const auto& terms = potential_.terms();
  for (std::size_t t = 0; t < terms.size(); ++t)
    for (std::size_t a = 0; a < torus.site_count(); ++a) {
      Placed pl{t, torus.sites_of(terms[t].shape.translated(torus.point(a)))};
      for (std::size_t s : pl.sites) touching_[s].push_back(placed_.size());
      placed_.push_back(std::move(pl));
    }
}

double TorusHamiltonian::energy_of(std::uint64_t state, std::span<const std::size_t> ids) const {
  double h = 0.0;
  const auto& terms = potential_.terms();
  for (std::size_t id : ids) {
    const Placed& pl = placed_[id];
    h += terms[pl.term].table[space_.project(state, pl.sites)];
  }
  return h;
}

double TorusHamiltonian::energy(std::uint64_t state) const {
  double h = 0.0;
  const auto& terms = potential_.terms();
  for (const auto& pl : placed_) h += terms[pl.term].table[space_.project(state, pl.sites)];
  return h;
}

std::vector<std::size_t> TorusHamiltonian::touching(std::span<const std::size_t> sites) const {
  std::vector<std::size_t> ids;
  for (std::size_t s : sites) ids.insert(ids.end(), touching_[s].begin(), touching_[s].end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

double TorusHamiltonian::local_energy(std::uint64_t state, std::span<const std::size_t> sites) const {
  return energy_of(state, touching(sites));
}

std::vector<double> TorusHamiltonian::conditional(std::uint64_t state,
                                                  std::span<const std::size_t> sites) const {
  auto ids = touching(sites);
  StateSpace inner(sites.size(), space_.q());
  std::vector<double> e(inner.size());
  for (std::uint64_t k = 0; k < inner.size(); ++k)
    e[k] = energy_of(space_.substitute(state, sites, k), ids);
  return softmax_neg(e);
}

DenseMeasure torus_gibbs(const Potential& potential, const Torus& torus) {
  TorusHamiltonian h(potential, torus);
  std::vector<double> e(h.space().size());
  for (std::uint64_t s = 0; s < e.size(); ++s) e[s] = h.energy(s);
  return DenseMeasure::normalized_on_torus(torus, potential.q(), softmax_neg(e));
}

double dlr_defect(const DenseMeasure& m, const Potential& potential, const Window& lambda) {
  TorusHamiltonian h(potential, m.require_torus());
  if (h.space().q() != m.q()) throw std::invalid_argument("dlr_defect: alphabet mismatch");
  auto pos = m.positions_of(lambda);
  StateSpace inner(pos.size(), m.q());
  std::vector<double> mixed(inner.size(), 0.0), direct(inner.size(), 0.0);
  for (std::uint64_t s = 0; s < m.size(); ++s) {
    if (m.space().project(s, pos) != 0) continue;
    double outside = 0.0;
    for (std::uint64_t k = 0; k < inner.size(); ++k) {
      double w = m[m.space().substitute(s, pos, k)];
      outside += w;
      direct[k] += w;
    }
    if (outside == 0.0) continue;
    auto kern = h.conditional(s, pos);
    for (std::uint64_t k = 0; k < inner.size(); ++k) mixed[k] += outside * kern[k];
  }
  double d = 0.0;
  for (std::uint64_t k = 0; k < inner.size(); ++k) d = std::max(d, std::abs(mixed[k] - direct[k]));
  return d;
}

double conditional_ratio_defect(const DenseMeasure& m, const Potential& potential,
                                const Window& delta) {
  TorusHamiltonian h(potential, m.require_torus());
  auto pos = m.positions_of(delta);
  StateSpace inner(pos.size(), m.q());
  double d = 0.0;
  std::vector<double> w(inner.size());
  for (std::uint64_t s = 0; s < m.size(); ++s) {
    if (m.space().project(s, pos) != 0) continue;
    double ctx = 0.0;
    for (std::uint64_t k = 0; k < inner.size(); ++k) ctx += (w[k] = m[m.space().substitute(s, pos, k)]);
    if (!(ctx > 0.0)) continue;
    auto kern = h.conditional(s, pos);
    for (std::uint64_t a = 0; a < inner.size(); ++a)
      for (std::uint64_t b = a + 1; b < inner.size(); ++b) {
        if (w[a] == 0.0 && w[b] == 0.0) continue;
        if (w[a] == 0.0 || w[b] == 0.0) return std::numeric_limits<double>::infinity();
        double diff = std::log(kern[a] / kern[b]) - std::log(w[a] / w[b]);
        d = std::max(d, std::abs(diff));
      }
  }
  return d;
}

}  // namespace ipslab
