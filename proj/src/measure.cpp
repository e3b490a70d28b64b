#include "ipslab/measure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ipslab {

namespace {

void check_weights(const std::vector<double>& w, std::uint64_t expected) {
  if (w.size() != expected)
    throw std::invalid_argument("measure: expected " + std::to_string(expected) + " weights, got " +
                                std::to_string(w.size()));
  for (double x : w)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::invalid_argument("measure: weights must be finite and non-negative");
}

double total(const std::vector<double>& w) {
  // pairwise keeps the rounding independent of size
  std::vector<double> buf(w);
  std::size_t n = buf.size();
  if (n == 0) return 0.0;
  while (n > 1) {
    std::size_t half = (n + 1) / 2;
    for (std::size_t k = 0; k < n / 2; ++k) buf[k] = buf[2 * k] + buf[2 * k + 1];
    if (n % 2) buf[n / 2] = buf[n - 1];
    n = half;
  }
  return buf[0];
}

}  // namespace

DenseMeasure::DenseMeasure(Window window, int q, std::vector<double> weights)
    : window_(std::move(window)), space_(window_.size(), q), weights_(std::move(weights)) {
  check_weights(weights_, space_.size());
  double s = total(weights_);
  if (std::abs(s - 1.0) > 1e-12)
    throw std::invalid_argument("measure: weights sum to " + std::to_string(s) + ", not 1");
}

DenseMeasure DenseMeasure::on_torus(const Torus& torus, int q, std::vector<double> weights) {
  DenseMeasure m(torus.all_sites(), q, std::move(weights));
  m.torus_ = torus;
  return m;
}

DenseMeasure DenseMeasure::normalized(Window window, int q, std::vector<double> weights) {
  check_weights(weights, checked_power(q, window.size()));
  double s = total(weights);
  if (!(s > 0.0)) throw std::invalid_argument("measure: zero total mass");
  for (double& x : weights) x /= s;
  return DenseMeasure(std::move(window), q, std::move(weights));
}

DenseMeasure DenseMeasure::normalized_on_torus(const Torus& torus, int q,
                                               std::vector<double> weights) {
  DenseMeasure m = normalized(torus.all_sites(), q, std::move(weights));
  m.torus_ = torus;
  return m;
}

const Torus& DenseMeasure::require_torus() const {
  if (!torus_) throw std::invalid_argument("measure is not defined on a whole torus");
  return *torus_;
}

Window DenseMeasure::localize(const Window& sub) const {
  return torus_ ? torus_->wrap(sub) : sub;
}

std::vector<std::size_t> DenseMeasure::positions_of(const Window& sub) const {
  Window w = localize(sub);
  std::vector<std::size_t> pos;
  pos.reserve(w.size());
  for (const auto& p : w) {
    auto k = window_.position(p);
    if (!k) throw std::invalid_argument("site " + to_string(p) + " outside the measure's window");
    pos.push_back(*k);
  }
  return pos;
}

double DenseMeasure::probability(const Config& c) const {
  DenseMeasure mm = marginal(*this, c.window);
  Window w = localize(c.window);
  // values follow c.window order; re-order to the canonical order of w
  std::vector<int> vals(w.size());
  for (std::size_t k = 0; k < c.window.size(); ++k) {
    Point p = torus_ ? torus_->wrap(c.window[k]) : c.window[k];
    vals[*w.position(p)] = c.values.at(k);
  }
  return mm[mm.space().encode(vals)];
}

std::vector<double> marginal_weights(const DenseMeasure& m, std::span<const std::size_t> positions) {
  StateSpace sub(positions.size(), m.q());
  std::vector<double> out(sub.size(), 0.0);
  for (std::uint64_t s = 0; s < m.size(); ++s) out[m.space().project(s, positions)] += m[s];
  return out;
}

DenseMeasure marginal(const DenseMeasure& m, const Window& sub) {
  Window w = m.localize(sub);
  auto pos = m.positions_of(sub);
  std::vector<double> out = marginal_weights(m, pos);
  if (m.torus() && w.size() == m.window().size()) return DenseMeasure::normalized_on_torus(*m.torus(), m.q(), std::move(out));
  return DenseMeasure::normalized(std::move(w), m.q(), std::move(out));
}

DenseMeasure conditional(const DenseMeasure& m, const Config& given) {
  if (given.values.size() != given.window.size())
    throw std::invalid_argument("conditional: config size mismatch");
  Window gw = m.localize(given.window);
  std::vector<std::size_t> gpos;
  std::vector<int> gval;
  for (std::size_t k = 0; k < given.window.size(); ++k) {
    Point p = m.torus() ? m.torus()->wrap(given.window[k]) : given.window[k];
    auto pos = m.window().position(p);
    if (!pos) throw std::invalid_argument("conditional: site outside window");
    gpos.push_back(*pos);
    gval.push_back(given.values[k]);
  }
  Window rest = m.window().minus(gw);
  std::vector<std::size_t> rpos;
  for (const auto& p : rest) rpos.push_back(*m.window().position(p));
  StateSpace rs(rpos.size(), m.q());
  std::vector<double> out(rs.size(), 0.0);
  for (std::uint64_t s = 0; s < m.size(); ++s) {
    bool match = true;
    for (std::size_t k = 0; k < gpos.size() && match; ++k)
      match = m.space().digit(s, gpos[k]) == gval[k];
    if (match) out[m.space().project(s, rpos)] += m[s];
  }
  double z = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(z > 0.0)) throw std::domain_error("conditional: conditioning event has zero mass");
  return DenseMeasure::normalized(std::move(rest), m.q(), std::move(out));
}

namespace {

// state index after shifting every site by offset
std::vector<std::uint64_t> shift_map(const Torus& t, const StateSpace& sp, const Point& offset) {
  std::vector<std::size_t> target(t.site_count());
  for (std::size_t x = 0; x < t.site_count(); ++x) target[x] = t.translate(x, offset);
  std::vector<std::uint64_t> out(sp.size());
  std::vector<int> dig(sp.sites()), moved(sp.sites());
  for (std::uint64_t s = 0; s < sp.size(); ++s) {
    sp.decode(s, dig);
    for (std::size_t x = 0; x < dig.size(); ++x) moved[target[x]] = dig[x];
    out[s] = sp.encode(moved);
  }
  return out;
}

}  // namespace

DenseMeasure translation_average(const DenseMeasure& m) {
  const Torus& t = m.require_torus();
  std::vector<double> out(m.size(), 0.0);
  const double w = 1.0 / static_cast<double>(t.site_count());
  for (std::size_t v = 0; v < t.site_count(); ++v) {
    auto map = shift_map(t, m.space(), t.point(v));
    for (std::uint64_t s = 0; s < m.size(); ++s) out[map[s]] += w * m[s];
  }
  return DenseMeasure::normalized_on_torus(t, m.q(), std::move(out));
}

bool is_translation_invariant(const DenseMeasure& m, double tol) {
  const Torus& t = m.require_torus();
  for (int axis = 0; axis < t.dimension(); ++axis) {
    Point e(t.dimension(), 0);
    e[axis] = 1;
    auto map = shift_map(t, m.space(), e);
    for (std::uint64_t s = 0; s < m.size(); ++s)
      if (std::abs(m[map[s]] - m[s]) > tol) return false;
  }
  return true;
}

double non_nullness_constant(const DenseMeasure& m) {
  const StateSpace& sp = m.space();
  double best = 1.0;
  for (std::size_t p = 0; p < sp.sites(); ++p) {
    for (std::uint64_t s = 0; s < sp.size(); ++s) {
      if (sp.digit(s, p) != 0) continue;
      double z = 0.0;
      for (int v = 0; v < sp.q(); ++v) z += m[sp.with_digit(s, p, v)];
      if (!(z > 0.0)) continue;
      for (int v = 0; v < sp.q(); ++v) best = std::min(best, m[sp.with_digit(s, p, v)] / z);
    }
  }
  return best;
}

DenseMeasure soften(const DenseMeasure& m, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("soften: epsilon must lie in [0,1]");
  std::vector<double> out(m.weights());
  const double u = eps / static_cast<double>(m.size());
  for (double& x : out) x = (1.0 - eps) * x + u;
  if (m.torus()) return DenseMeasure::normalized_on_torus(*m.torus(), m.q(), std::move(out));
  return DenseMeasure::normalized(m.window(), m.q(), std::move(out));
}

double total_variation(const DenseMeasure& a, const DenseMeasure& b) {
  if (!(a.window() == b.window()) || a.q() != b.q())
    throw std::invalid_argument("total_variation: measures live on different spaces");
  double s = 0.0;
  for (std::uint64_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

double weak_distance(const DenseMeasure& a, const DenseMeasure& b,
                     const std::vector<Window>& schedule) {
  double d = 0.0, w = 0.5;
  for (const auto& win : schedule) {
    d += w * total_variation(marginal(a, win), marginal(b, win));
    w *= 0.5;
  }
  return d;
}

std::vector<Window> growing_windows(const Torus& torus) {
  std::vector<Window> out;
  const int d = torus.dimension();
  int side = *std::min_element(torus.sides().begin(), torus.sides().end());
  for (int k = 1; k <= side; ++k) out.push_back(cube(0, k - 1, d));
  Window all = torus.all_sites();
  if (!(out.back() == all)) out.push_back(all);
  return out;
}

DenseMeasure uniform_measure(const Torus& torus, int q) {
  std::uint64_t n = checked_power(q, torus.site_count());
  return DenseMeasure::normalized_on_torus(torus, q, std::vector<double>(n, 1.0));
}

DenseMeasure product_measure(const Torus& torus, const std::vector<double>& single_site) {
  const int q = static_cast<int>(single_site.size());
  StateSpace sp(torus.site_count(), q);
  std::vector<double> w(sp.size(), 1.0);
  std::vector<int> dig(sp.sites());
  for (std::uint64_t s = 0; s < sp.size(); ++s) {
    sp.decode(s, dig);
    for (int v : dig) w[s] *= single_site[v];
  }
  return DenseMeasure::normalized_on_torus(torus, q, std::move(w));
}

DenseMeasure point_measure(const Torus& torus, int q, const std::vector<int>& values) {
  StateSpace sp(torus.site_count(), q);
  std::vector<double> w(sp.size(), 0.0);
  w[sp.encode(values)] = 1.0;
  return DenseMeasure::on_torus(torus, q, std::move(w));
}

double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

DenseMeasure random_measure(const Torus& torus, int q, std::uint64_t seed) {
  StateSpace sp(torus.site_count(), q);
  std::mt19937_64 rng(seed);
  std::vector<double> w(sp.size());
  // flat Dirichlet draw
  for (double& x : w) x = -std::log1p(-unit_uniform(rng()));
  return DenseMeasure::normalized_on_torus(torus, q, std::move(w));
}

nlohmann::json to_json(const DenseMeasure& m) {
  nlohmann::json j;
  nlohmann::json win = nlohmann::json::array();
  for (const auto& p : m.window()) win.push_back(p);
  j["window"] = win;
  j["q"] = m.q();
  j["weights"] = m.weights();
  if (m.torus()) j["torus"] = m.torus()->sides();
  return j;
}

DenseMeasure measure_from_json(const nlohmann::json& j) {
  std::vector<Point> pts = j.at("window").get<std::vector<Point>>();
  int q = j.at("q").get<int>();
  std::vector<double> w = j.at("weights").get<std::vector<double>>();
  if (j.contains("torus")) {
    Torus t(j.at("torus").get<std::vector<int>>());
    Window win(pts);
    if (!(win == t.all_sites())) throw std::invalid_argument("measure json: window does not match torus");
    return DenseMeasure::on_torus(t, q, std::move(w));
  }
  return DenseMeasure(Window(std::move(pts)), q, std::move(w));
}

void write_raw(const DenseMeasure& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (double x : m.weights()) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(x);
    char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((u >> (8 * k)) & 0xff);
    out.write(b, 8);
  }
  nlohmann::json h = to_json(m);
  h.erase("weights");
  h["count"] = m.size();
  h["dtype"] = "f64le";
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write " + path + ".json");
  side << h.dump(2) << '\n';
}

DenseMeasure read_raw(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot read " + path + ".json");
  nlohmann::json h = nlohmann::json::parse(side);
  if (h.at("dtype").get<std::string>() != "f64le") throw std::invalid_argument("raw measure: unknown dtype");
  std::uint64_t n = h.at("count").get<std::uint64_t>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<double> w(n);
  for (auto& x : w) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("raw measure: truncated file");
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    x = std::bit_cast<double>(u);
  }
  h["weights"] = w;
  return measure_from_json(h);
}

}  // namespace ipslab
