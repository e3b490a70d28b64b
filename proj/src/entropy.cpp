#include "ipslab/entropy.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

namespace ipslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// compensated sum over extended reals; +inf wins over -inf
struct ExtSum {
  double s = 0.0, c = 0.0;
  bool pos = false, neg = false;
  void add(double x) {
    if (x == kInf) { pos = true; return; }
    if (x == -kInf) { neg = true; return; }
    double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  double value() const { return pos ? kInf : neg ? -kInf : s + c; }
};

// x log(y / z) for the integrands below, with x > 0
double xlog_ratio(double x, double y, double z) {
  if (y == 0.0) return -kInf;
  if (z == 0.0) return kInf;
  return x * std::log(y / z);
}

Point negate(const Point& p) {
  Point out(p);
  for (int& c : out) c = -c;
  return out;
}

// marginal of a torus measure on a window with the projection of every state
struct Frame {
  std::vector<std::size_t> pos;
  std::vector<std::uint32_t> proj;
  std::vector<double> w;
};

Frame make_frame(const DenseMeasure& nu, const Window& lambda) {
  Frame f;
  f.pos = nu.positions_of(lambda);
  f.proj = projection_table(nu.space(), f.pos);
  f.w = marginal_weights(nu, f.pos);
  return f;
}

void require_box(const Torus& torus, int n) {
  if (n < 1) throw std::invalid_argument("box index n must be >= 1");
  if (!torus.fits(box(n, torus.dimension())))
    throw std::invalid_argument("torus too small for Lambda_" + std::to_string(n));
}

void require_matching(const DenseMeasure& nu, const RateFamily& rates) {
  nu.require_torus();
  if (nu.q() != rates.q()) throw std::invalid_argument("measure and rates use different alphabets");
  if (nu.require_torus().dimension() != rates.dimension())
    throw std::invalid_argument("measure and rates live in different dimensions");
}

// Calls visit(weight, rule, anchor) for every translate Delta = S + anchor of every
// rule that contains some i in `sites`, once per (i, Delta) pair, weight 1/|S|.
template <class Visit>
void for_each_translate_at(const TorusDynamics& dyn, const std::vector<std::size_t>& sites, Visit visit) {
  const auto& rules = dyn.rates().rules();
  for (std::size_t i : sites)
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const double w = 1.0 / static_cast<double>(rules[k].shape.size());
      for (const auto& a : rules[k].shape) visit(i, w, k, dyn.torus().translate(i, negate(a)));
    }
}

std::uint64_t q_pow(int q, std::size_t n) { return checked_power(q, n); }

}  // namespace

double relative_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("relative_entropy: size mismatch");
  ExtSum s;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) return kInf;
    s.add(p[k] * std::log(p[k] / q[k]));
  }
  return s.value();
}

double local_relative_entropy(const DenseMeasure& nu, const DenseMeasure& mu, const Window& lambda) {
  if (nu.q() != mu.q() || !(nu.window() == mu.window()))
    throw std::invalid_argument("relative entropy: measures on different spaces");
  auto pos = nu.positions_of(lambda);
  return relative_entropy(marginal_weights(nu, pos), marginal_weights(mu, pos));
}

namespace {

// flows of nu through the generator, projected on lambda; calls
// visit(rule, anchor, target, mass, from, to) for each jump changing the window
template <class Visit>
void window_flows(const DenseMeasure& nu, const TorusDynamics& dyn, const Frame& f, Visit visit) {
  const auto& rules = dyn.rates().rules();
  std::vector<char> in(dyn.torus().site_count(), 0);
  for (std::size_t p : f.pos) in[p] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> meets;
  for (std::size_t k = 0; k < rules.size(); ++k)
    for (std::size_t a = 0; a < dyn.anchors(); ++a)
      for (std::size_t s : dyn.shape_sites(k, a))
        if (in[s]) {
          meets.emplace_back(k, a);
          break;
        }
  for (std::uint64_t s = 0; s < nu.size(); ++s) {
    if (nu[s] == 0.0) continue;
    for (auto [k, a] : meets) {
      const auto& r = rules[k];
      std::uint64_t c = dyn.context(s, k, a);
      for (std::uint64_t t = 0; t < r.targets; ++t) {
        double v = r.rate(c, t);
        if (v <= 0.0) continue;
        std::uint64_t x = dyn.jump(s, k, a, t);
        if (f.proj[x] == f.proj[s]) continue;
        visit(k, a, t, nu[s] * v, f.proj[s], f.proj[x]);
      }
    }
  }
}

}  // namespace

EntropyReport entropy_loss_finite(const DenseMeasure& nu, const DenseMeasure& mu,
                                  const RateFamily& rates, const Window& lambda) {
  require_matching(nu, rates);
  if (!(nu.window() == mu.window()) || nu.q() != mu.q())
    throw std::invalid_argument("entropy loss: measures on different spaces");
  TorusDynamics dyn(rates, nu.require_torus());
  Frame fn = make_frame(nu, lambda);
  std::vector<double> mw = marginal_weights(mu, fn.pos);
  for (std::size_t k = 0; k < mw.size(); ++k)
    if (fn.w[k] > 0.0 && mw[k] == 0.0)
      throw std::domain_error("entropy loss: nu is not absolutely continuous w.r.t. mu on the window");
  // log(nu/mu), -inf on nu-null cylinders, +inf on cylinders null for both
  std::vector<double> lr(fn.w.size());
  for (std::size_t k = 0; k < lr.size(); ++k)
    lr[k] = fn.w[k] > 0.0 ? std::log(fn.w[k] / mw[k]) : (mw[k] > 0.0 ? -kInf : kInf);

  const auto& rules = rates.rules();
  std::uint64_t tmax = 0;
  for (const auto& r : rules) tmax = std::max(tmax, r.targets);
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, ExtSum> terms;
  window_flows(nu, dyn, fn, [&](std::size_t k, std::size_t a, std::uint64_t t, double mass,
                                std::uint32_t from, std::uint32_t to) {
    double d = lr[to] == kInf || lr[to] == -kInf ? lr[to] : mass * (lr[to] - lr[from]);
    terms[{a, k, t}].add(d);
  });
  EntropyReport rep{"entropy_loss_finite", 0.0, static_cast<double>(fn.pos.size()), {}};
  ExtSum total;
  for (const auto& [key, sum] : terms) {
    double v = sum.value();
    rep.breakdown.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
    total.add(v);
  }
  rep.value = total.value();
  return rep;
}

LossParts entropy_loss_parts(const DenseMeasure& nu, const DenseMeasure& mu,
                             const RateFamily& rates, const Window& lambda) {
  require_matching(nu, rates);
  TorusDynamics dyn(rates, nu.require_torus());
  Frame fn = make_frame(nu, lambda);
  std::vector<double> mw = marginal_weights(mu, fn.pos);
  ExtSum ent, en;
  window_flows(nu, dyn, fn, [&](std::size_t, std::size_t, std::uint64_t, double mass,
                                std::uint32_t from, std::uint32_t to) {
    ent.add(xlog_ratio(mass, fn.w[to], fn.w[from]));
    en.add(-xlog_ratio(mass, mw[to], mw[from]));
  });
  LossParts p;
  p.entropy = ent.value();
  p.energy = en.value();
  p.total = entropy_loss_finite(nu, mu, rates, lambda).value;
  return p;
}

namespace {

std::vector<std::size_t> origin_site(const Torus& t) { return {t.index(Point(t.dimension(), 0))}; }

}  // namespace

double specific_entropy_loss(const DenseMeasure& nu, const RateFamily& rates) {
  require_matching(nu, rates);
  if (!(non_nullness_constant(nu) > 0.0))
    throw std::domain_error("specific entropy loss needs a non-null measure; soften it or use g_tilde");
  TorusDynamics dyn(rates, nu.require_torus());
  ExtSum sum;
  for_each_translate_at(dyn, origin_site(dyn.torus()), [&](std::size_t, double w, std::size_t k, std::size_t b) {
    const auto& r = rates.rules()[k];
    for (std::uint64_t s = 0; s < nu.size(); ++s) {
      if (nu[s] == 0.0) continue;
      std::uint64_t c = dyn.context(s, k, b);
      for (std::uint64_t t = 0; t < r.targets; ++t) {
        double v = r.rate(c, t);
        if (v <= 0.0) continue;
        sum.add(w * xlog_ratio(nu[s] * v, nu[dyn.jump(s, k, b, t)], nu[s]));
      }
    }
  });
  return sum.value();
}

double specific_energy_loss(const DenseMeasure& nu, const RateFamily& rates, const Potential& potential) {
  require_matching(nu, rates);
  if (potential.q() != rates.q()) throw std::invalid_argument("potential and rates use different alphabets");
  TorusDynamics dyn(rates, nu.require_torus());
  TorusHamiltonian ham(potential, dyn.torus());
  ExtSum sum;
  for_each_translate_at(dyn, origin_site(dyn.torus()), [&](std::size_t, double w, std::size_t k, std::size_t b) {
    const auto& r = rates.rules()[k];
    const auto& sites = dyn.shape_sites(k, b);
    for (std::uint64_t s = 0; s < nu.size(); ++s) {
      if (nu[s] == 0.0) continue;
      std::uint64_t c = dyn.context(s, k, b);
      std::vector<double> kern;
      for (std::uint64_t t = 0; t < r.targets; ++t) {
        double v = r.rate(c, t);
        if (v <= 0.0) continue;
        if (kern.empty()) kern = ham.conditional(s, sites);
        // gamma(eta_Delta | rest) / gamma(sigma_Delta | rest)
        sum.add(w * xlog_ratio(nu[s] * v, kern[r.shape_part(c)], kern[t]));
      }
    }
  });
  return sum.value();
}

namespace {

std::vector<std::size_t> sites_of_window(const DenseMeasure& nu, const Window& w) {
  const Torus& t = nu.require_torus();
  std::vector<std::size_t> out;
  for (const auto& p : t.wrap(w)) out.push_back(t.index(p));
  return out;
}

// sum over i in I, Delta containing i, of (1/|Delta|) int nu c log[nu_W(sigma eta) / nu_W(eta)]
double conditional_site_sum(const DenseMeasure& nu, const TorusDynamics& dyn, const Frame& f,
                            const std::vector<std::size_t>& I) {
  ExtSum sum;
  const auto& rules = dyn.rates().rules();
  for_each_translate_at(dyn, I, [&](std::size_t, double w, std::size_t k, std::size_t b) {
    const auto& r = rules[k];
    for (std::uint64_t s = 0; s < nu.size(); ++s) {
      if (nu[s] == 0.0) continue;
      std::uint64_t c = dyn.context(s, k, b);
      for (std::uint64_t t = 0; t < r.targets; ++t) {
        double v = r.rate(c, t);
        if (v <= 0.0) continue;
        std::uint64_t x = dyn.jump(s, k, b, t);
        sum.add(w * xlog_ratio(nu[s] * v, f.w[f.proj[x]], f.w[f.proj[s]]));
      }
    }
  });
  return sum.value();
}

}  // namespace

double window_entropy_loss(const DenseMeasure& nu, const RateFamily& rates, const Window& lambda) {
  require_matching(nu, rates);
  TorusDynamics dyn(rates, nu.require_torus());
  Frame f = make_frame(nu, lambda);
  return conditional_site_sum(nu, dyn, f, sites_of_window(nu, lambda));
}

double g_tilde(const DenseMeasure& nu, const RateFamily& rates, int n) {
  require_matching(nu, rates);
  const Torus& torus = nu.require_torus();
  require_box(torus, n);
  const int d = torus.dimension();
  TorusDynamics dyn(rates, torus);
  Frame f = make_frame(nu, box(n, d));
  return conditional_site_sum(nu, dyn, f, sites_of_window(nu, inner_box(n, d))) /
         static_cast<double>(box_volume(n, d));
}

double gtilde_boundary_bound(const RateFamily& rates, int n) {
  const int d = rates.dimension();
  double per = 0.0;
  for (std::size_t k = 0; k < rates.rules().size(); ++k)
    per += rates.max_total_rate(k) * static_cast<double>(q_pow(rates.q(), rates.rules()[k].shape.size()));
  const double outer = static_cast<double>(box_volume(n, d));
  const double inner = static_cast<double>(inner_box(n, d).size());
  return per * (outer - inner) / outer;
}

double window_loss_bound(const RateFamily& rates, double delta) {
  double s = 0.0;
  for (std::size_t k = 0; k < rates.rules().size(); ++k)
    s += static_cast<double>(rates.rules()[k].shape.size()) * rates.max_total_rate(k);
  return std::log(1.0 / delta) * s;
}

double entropy_loss_bound(const RateFamily& rates, double delta) {
  double s = 0.0;
  for (std::size_t k = 0; k < rates.rules().size(); ++k) {
    const auto& r = rates.rules()[k];
    s += static_cast<double>(r.shape.size()) * rates.max_total_rate(k) *
         static_cast<double>(q_pow(rates.q(), r.shape.size()));
  }
  return 2.0 * std::log(1.0 / delta) * s;
}

SRDecomposition s_r_decomposition(const DenseMeasure& nu, const RateFamily& rates, int n) {
  require_matching(nu, rates);
  const Torus& torus = nu.require_torus();
  require_box(torus, n);
  const int d = torus.dimension();
  TorusDynamics dyn(rates, torus);
  Frame f = make_frame(nu, box(n, d));
  const auto& rules = rates.rules();

  auto accumulate = [&](const std::vector<std::size_t>& I, ExtSum& s_sum, ExtSum& r_sum, ExtSum& g_sum) {
    for_each_translate_at(dyn, I, [&](std::size_t, double w, std::size_t k, std::size_t b) {
      const auto& r = rules[k];
      const double qd = static_cast<double>(r.targets);
      for (std::uint64_t s = 0; s < nu.size(); ++s) {
        if (nu[s] == 0.0) continue;
        std::uint64_t c = dyn.context(s, k, b);
        for (std::uint64_t t = 0; t < r.targets; ++t) {
          double v = r.rate(c, t);
          if (v <= 0.0) continue;
          std::uint64_t x = dyn.jump(s, k, b, t);
          double back = dyn.total_rate(x, k, b);
          if (back <= 0.0) throw std::domain_error("s/r decomposition: trap (no rate out of the target)");
          const double m = nu[s] * v;
          const double to = f.w[f.proj[x]], from = f.w[f.proj[s]];
          r_sum.add(w * m * std::log(qd * v / back));
          if (to == 0.0) {
            s_sum.add(-kInf);
            g_sum.add(-kInf);
          } else {
            s_sum.add(-w * m * std::log(from * qd * v / (to * back)));
            g_sum.add(w * m * std::log(to / from));
          }
        }
      }
    });
  };
  SRDecomposition out;
  out.n = n;
  ExtSum s_sum, r_sum, g_sum, dens_s, dens_r, dens_g;
  accumulate(sites_of_window(nu, inner_box(n, d)), s_sum, r_sum, g_sum);
  accumulate(origin_site(torus), dens_s, dens_r, dens_g);
  out.s = s_sum.value();
  out.r = r_sum.value();
  out.g_tilde = g_sum.value();
  out.r_density = dens_r.value();
  return out;
}

double psi(double u) {
  if (u < 0.0) throw std::domain_error("psi: negative argument");
  if (u == 0.0) return -1.0;
  return -u * std::log(u) + u - 1.0;
}

double psi_perspective(double w, double a) {
  if (w > 0.0) return a == 0.0 ? -w : -a * std::log(a / w) + a - w;
  return a > 0.0 ? -kInf : 0.0;
}

EntropyReport f_n(const DenseMeasure& nu, const RateFamily& rates, int n) {
  require_matching(nu, rates);
  const Torus& torus = nu.require_torus();
  require_box(torus, n);
  const int d = torus.dimension();
  TorusDynamics dyn(rates, torus);
  Frame f = make_frame(nu, box(n, d));
  const auto& rules = rates.rules();
  const StateSpace win(f.pos.size(), rates.q());
  std::vector<int> where(torus.site_count(), -1);
  for (std::size_t k = 0; k < f.pos.size(); ++k) where[f.pos[k]] = static_cast<int>(k);
  // torus state carrying a window configuration, zero elsewhere
  std::vector<std::uint64_t> lift(win.size());
  for (std::uint64_t l = 0; l < win.size(); ++l) lift[l] = nu.space().substitute(0, f.pos, l);

  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, ExtSum> terms;
  std::map<std::pair<std::size_t, Point>, TransitionRule> truncated;
  std::vector<double> A(win.size());
  for_each_translate_at(dyn, sites_of_window(nu, inner_box(n, d)), [&](std::size_t i, double w, std::size_t k,
                                                                       std::size_t b) {
    const auto& r = rules[k];
    // i relative to the anchor, in the rule's frame
    Point rel(d);
    {
      Point pi = torus.point(i), pb = torus.point(b);
      for (int x = 0; x < d; ++x) {
        int side = torus.sides()[x];
        rel[x] = ((pi[x] - pb[x]) % side + side) % side;
        if (rel[x] > side / 2) rel[x] -= side;
      }
    }
    auto key = std::make_pair(k, rel);
    auto it = truncated.find(key);
    if (it == truncated.end()) it = truncated.emplace(key, truncate_rule(r, ball(rel, n - 1), rates.q())).first;
    const TransitionRule& tr = it->second;
    const double qd = static_cast<double>(r.targets);
    for (std::uint64_t t = 0; t < r.targets; ++t) {
      std::fill(A.begin(), A.end(), 0.0);
      for (std::uint64_t s = 0; s < nu.size(); ++s) {
        if (nu[s] == 0.0) continue;
        double v = dyn.rate(s, k, b, t);
        if (v <= 0.0) continue;
        double back = dyn.total_rate(dyn.jump(s, k, b, t), k, b);
        if (back <= 0.0) throw std::domain_error("f_n: trap (no rate out of the target)");
        A[f.proj[s]] += nu[s] * qd * v / back;
      }
      ExtSum acc;
      for (std::uint64_t l = 0; l < win.size(); ++l) {
        std::uint64_t moved = dyn.jump(lift[l], k, b, t);
        double ct = tr.total(dyn.context(moved, k, b));
        if (ct <= 0.0) continue;
        double V = f.w[f.proj[moved]];
        acc.add(w * ct / qd * psi_perspective(V, A[l]));
      }
      terms[{i, k, t}].add(acc.value());
    }
  });
  EntropyReport rep{"f_n", 0.0, static_cast<double>(box_volume(n, d)), {}};
  ExtSum total;
  for (const auto& [key, sum] : terms) {
    double v = sum.value();
    rep.breakdown.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
    total.add(v);
  }
  rep.value = total.value();
  return rep;
}

double jensen_prefactor(int n, int d, double* tail) {
  double lg = 0.0;
  int l = n;
  for (;; ++l) {
    double x = 1.0 / (std::ldexp(1.0, l + 2) - 1.0);
    if (x < 1e-18) break;
    lg += d * std::log1p(-x);
  }
  // remaining factors: sum_{m >= l} d / (2^{m+2} - 1) <= d 2^{-(l+1)}
  if (tail) *tail = d * std::ldexp(1.0, -(l + 1));
  return std::exp(lg);
}

std::vector<JensenStep> jensen_monotone_sequence(const DenseMeasure& nu, const RateFamily& rates,
                                                 int n_max, double tol) {
  const int d = nu.require_torus().dimension();
  std::vector<JensenStep> out;
  for (int n = 1; n <= n_max; ++n) {
    JensenStep st;
    st.n = n;
    st.f = f_n(nu, rates, n).value;
    st.prefactor = jensen_prefactor(n, d);
    st.normalized = st.prefactor * st.f / static_cast<double>(box_volume(n, d));
    if (!out.empty()) st.holds = st.normalized <= out.back().normalized + tol;
    out.push_back(st);
  }
  return out;
}

ReversibleDecomposition reversible_decomposition(const DenseMeasure& nu, const RateFamily& rates,
                                                 const Potential& potential, int n) {
  require_matching(nu, rates);
  const Torus& torus = nu.require_torus();
  require_box(torus, n);
  const double db = detailed_balance_defect(rates, potential, torus);
  if (db > 1e-10) throw std::domain_error("reversible decomposition: rates are not reversible for the potential");
  const int d = torus.dimension();
  TorusDynamics dyn(rates, torus);
  Frame f = make_frame(nu, box(n, d));
  const auto& rules = rates.rules();
  ReversibleDecomposition out;
  ExtSum s_sum, r_sum;
  auto visit = [&](bool density) {
    return [&, density](std::size_t, double w, std::size_t k, std::size_t b) {
      const auto& r = rules[k];
      for (std::uint64_t s = 0; s < nu.size(); ++s) {
        if (nu[s] == 0.0) continue;
        std::uint64_t c = dyn.context(s, k, b);
        std::uint64_t home = r.shape_part(c);
        for (std::uint64_t t = 0; t < r.targets; ++t) {
          double v = r.rate(c, t);
          if (v <= 0.0) continue;
          std::uint64_t x = dyn.jump(s, k, b, t);
          double back = dyn.rate(x, k, b, home);
          const double m = nu[s] * v;
          if (density) {
            r_sum.add(w * xlog_ratio(m, v, back));
          } else {
            double to = f.w[f.proj[x]], from = f.w[f.proj[s]];
            s_sum.add(-w * xlog_ratio(m, from * v, to * back));
          }
        }
      }
    };
  };
  for_each_translate_at(dyn, sites_of_window(nu, inner_box(n, d)), visit(false));
  for_each_translate_at(dyn, origin_site(torus), visit(true));
  out.s_rev = s_sum.value();
  out.r_rev = r_sum.value();
  out.rho = specific_energy_loss(nu, rates, potential);
  out.identity_defect = std::abs(out.r_rev + out.rho);
  return out;
}

namespace {

nlohmann::json ext(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

}  // namespace

nlohmann::json to_json(const EntropyReport& r, const Torus& torus, int q, const RateFamily& rates) {
  nlohmann::json j;
  j["quantity"] = r.quantity;
  j["value"] = ext(r.value);
  j["volume"] = r.volume;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : r.breakdown) {
    const auto& rule = rates.rules().at(t.rule);
    rows.push_back({{"site", torus.point(t.site)},
                    {"rule", t.rule},
                    {"target", config_string(StateSpace(rule.shape.size(), q).decode(t.target), q)},
                    {"value", ext(t.value)}});
  }
  j["breakdown"] = rows;
  return j;
}

}  // namespace ipslab
