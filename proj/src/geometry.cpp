#include "ipslab/geometry.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace ipslab {

std::string to_string(const Point& p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < p.size(); ++k) os << (k ? "," : "") << p[k];
  os << ')';
  return os.str();
}

Window::Window(std::vector<Point> points) : points_(std::move(points)) {
  if (!points_.empty()) {
    dim_ = static_cast<int>(points_.front().size());
    for (const auto& p : points_)
      if (static_cast<int>(p.size()) != dim_)
        throw std::invalid_argument("window: mixed dimensions");
  }
  std::sort(points_.begin(), points_.end());
  if (std::adjacent_find(points_.begin(), points_.end()) != points_.end())
    throw std::invalid_argument("window: duplicate site");
}

bool Window::contains(const Point& p) const {
  return std::binary_search(points_.begin(), points_.end(), p);
}

std::optional<std::size_t> Window::position(const Point& p) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), p);
  if (it == points_.end() || *it != p) return std::nullopt;
  return static_cast<std::size_t>(it - points_.begin());
}

bool Window::subset_of(const Window& other) const {
  return std::includes(other.points_.begin(), other.points_.end(), points_.begin(), points_.end());
}

Window Window::translated(const Point& offset) const {
  std::vector<Point> out = points_;
  for (auto& p : out) {
    if (p.size() != offset.size()) throw std::invalid_argument("translate: dimension mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) p[k] += offset[k];
  }
  return Window(std::move(out));
}

Window Window::united(const Window& other) const {
  std::vector<Point> out;
  std::set_union(points_.begin(), points_.end(), other.points_.begin(), other.points_.end(),
                 std::back_inserter(out));
  return Window(std::move(out));
}

Window Window::intersected(const Window& other) const {
  std::vector<Point> out;
  std::set_intersection(points_.begin(), points_.end(), other.points_.begin(), other.points_.end(),
                        std::back_inserter(out));
  Window w(std::move(out));
  if (w.empty()) w.dim_ = dim_;
  return w;
}

Window Window::minus(const Window& other) const {
  std::vector<Point> out;
  std::set_difference(points_.begin(), points_.end(), other.points_.begin(), other.points_.end(),
                      std::back_inserter(out));
  Window w(std::move(out));
  if (w.empty()) w.dim_ = dim_;
  return w;
}

int Window::range() const {
  int r = 0;
  for (const auto& p : points_)
    for (int c : p) r = std::max(r, std::abs(c));
  return r;
}

int Window::extent(int axis) const {
  if (points_.empty()) return 0;
  int lo = points_.front()[axis], hi = lo;
  for (const auto& p : points_) {
    lo = std::min(lo, p[axis]);
    hi = std::max(hi, p[axis]);
  }
  return hi - lo + 1;
}

Window singleton(const Point& p) { return Window({p}); }

Window origin(int d) { return Window({Point(d, 0)}); }

Window cube(int lo, int hi, int d) {
  if (d < 1) throw std::invalid_argument("cube: dimension must be >= 1");
  std::vector<Point> pts;
  if (hi < lo) return Window();
  Point p(d, lo);
  while (true) {
    pts.push_back(p);
    int k = d - 1;
    while (k >= 0 && p[k] == hi) p[k--] = lo;
    if (k < 0) break;
    ++p[k];
  }
  return Window(std::move(pts));
}

Window interval(int lo, int hi) { return cube(lo, hi, 1); }

Window ball(const Point& center, int radius) {
  if (radius < 0) throw std::invalid_argument("ball: negative radius");
  const int d = static_cast<int>(center.size());
  std::vector<Point> pts;
  for (const auto& off : cube(-radius, radius, d)) {
    long r2 = 0;
    for (int c : off) r2 += static_cast<long>(c) * c;
    if (r2 > static_cast<long>(radius) * radius) continue;
    Point p = center;
    for (int k = 0; k < d; ++k) p[k] += off[k];
    pts.push_back(std::move(p));
  }
  return Window(std::move(pts));
}

Torus::Torus(std::vector<int> sides) : sides_(std::move(sides)) {
  if (sides_.empty()) throw std::invalid_argument("torus: need at least one axis");
  strides_.assign(sides_.size(), 1);
  for (int k = static_cast<int>(sides_.size()) - 1; k >= 0; --k) {
    if (sides_[k] < 1) throw std::invalid_argument("torus: side must be positive");
    strides_[k] = count_;
    count_ *= static_cast<std::size_t>(sides_[k]);
  }
}

Point Torus::wrap(const Point& p) const {
  if (p.size() != sides_.size()) throw std::invalid_argument("torus: dimension mismatch");
  Point out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    int m = p[k] % sides_[k];
    out[k] = m < 0 ? m + sides_[k] : m;
  }
  return out;
}

std::size_t Torus::index(const Point& p) const {
  Point w = wrap(p);
  std::size_t idx = 0;
  for (std::size_t k = 0; k < w.size(); ++k) idx += strides_[k] * static_cast<std::size_t>(w[k]);
  return idx;
}

Point Torus::point(std::size_t site) const {
  if (site >= count_) throw std::out_of_range("torus: site index");
  Point p(sides_.size());
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    p[k] = static_cast<int>(site / strides_[k]);
    site %= strides_[k];
  }
  return p;
}

std::size_t Torus::translate(std::size_t site, const Point& offset) const {
  Point p = point(site);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] += offset[k];
  return index(p);
}

bool Torus::fits(const Window& w) const {
  std::vector<std::size_t> idx;
  idx.reserve(w.size());
  for (const auto& p : w) idx.push_back(index(p));
  std::sort(idx.begin(), idx.end());
  return std::adjacent_find(idx.begin(), idx.end()) == idx.end();
}

std::vector<std::size_t> Torus::sites_of(const Window& w) const {
  if (!fits(w)) throw std::invalid_argument("torus too small: window wraps onto itself");
  std::vector<std::size_t> idx;
  idx.reserve(w.size());
  for (const auto& p : w) idx.push_back(index(p));
  return idx;
}

Window Torus::wrap(const Window& w) const {
  if (!fits(w)) throw std::invalid_argument("torus too small: window wraps onto itself");
  std::vector<Point> pts;
  for (const auto& p : w) pts.push_back(wrap(p));
  Window out(std::move(pts));
  return out;
}

Window Torus::all_sites() const {
  std::vector<Point> pts;
  pts.reserve(count_);
  for (std::size_t s = 0; s < count_; ++s) pts.push_back(point(s));
  return Window(std::move(pts));
}

std::vector<Window> translates_of(const Window& shape, const Window& anchors) {
  std::vector<Window> out;
  out.reserve(anchors.size());
  for (const auto& a : anchors) out.push_back(shape.translated(a));
  return out;
}

std::vector<Window> translates_of(const Torus& torus, const Window& shape, const Window& anchors) {
  std::vector<Window> out;
  out.reserve(anchors.size());
  for (const auto& a : anchors) out.push_back(torus.wrap(shape.translated(a)));
  return out;
}

namespace {

int pow2(int n) {
  if (n < 0 || n > 24) throw std::invalid_argument("box: n out of range");
  return 1 << n;
}

std::vector<Window> orthant_blocks(int lo, int hi, int d) {
  std::vector<Window> out;
  if (hi < lo) {
    out.assign(std::size_t{1} << d, Window());
    return out;
  }
  for (int k = 0; k < (1 << d); ++k) {
    std::vector<Point> pts;
    for (Point p : cube(lo, hi, d)) {
      for (int a = 0; a < d; ++a)
        if (k & (1 << a)) p[a] = -p[a];
      pts.push_back(std::move(p));
    }
    out.emplace_back(std::move(pts));
  }
  return out;
}

}  // namespace

Window box(int n, int d) {
  const int h = pow2(n) - 1;
  return cube(-h, h, d);
}

Window inner_box(int n, int d) {
  const int h = pow2(n) - n - 1;
  return cube(-h, h, d);
}

std::size_t box_volume(int n, int d) {
  std::size_t side = static_cast<std::size_t>(2 * pow2(n) - 1), v = 1;
  for (int k = 0; k < d; ++k) v *= side;
  return v;
}

// Subcubes are the open orthants of the box: coordinates in [1, 2^n-1] up to sign.
// The shrunken ones are the orthants of the shrunken box, which keeps them inside
// both the shrunken box and the matching subcube.
BoxFamily box_family(int n, int d) {
  if (n < 1) throw std::invalid_argument("box_family: n must be >= 1");
  if (d < 1) throw std::invalid_argument("box_family: d must be >= 1");
  BoxFamily f;
  f.n = n;
  f.d = d;
  f.box = box(n, d);
  f.inner_box = inner_box(n, d);
  f.subcubes = orthant_blocks(1, pow2(n) - 1, d);
  f.inner_subcubes = orthant_blocks(1, pow2(n) - n - 1, d);
  return f;
}

}  // namespace ipslab
