#ifndef IPSLAB_GEOMETRY_HPP
#define IPSLAB_GEOMETRY_HPP

#include <initializer_list>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace ipslab {

using Point = std::vector<int>;

std::string to_string(const Point& p);

// Finite set of lattice sites, kept sorted lexicographically.
class Window {
 public:
  Window() = default;
  explicit Window(std::vector<Point> points);
  Window(std::initializer_list<Point> points) : Window(std::vector<Point>(points)) {}

  int dimension() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Point>& points() const { return points_; }
  const Point& operator[](std::size_t k) const { return points_[k]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool contains(const Point& p) const;
  std::optional<std::size_t> position(const Point& p) const;
  bool subset_of(const Window& other) const;

  Window translated(const Point& offset) const;
  Window united(const Window& other) const;
  Window intersected(const Window& other) const;
  Window minus(const Window& other) const;

  // largest |coordinate| over all sites
  int range() const;
  // max - min + 1 along an axis
  int extent(int axis) const;

  friend bool operator==(const Window& a, const Window& b) {
    return a.dim_ == b.dim_ && a.points_ == b.points_;
  }

 private:
  int dim_ = 0;
  std::vector<Point> points_;
};

Window singleton(const Point& p);
Window origin(int d);
Window cube(int lo, int hi, int d);
Window interval(int lo, int hi);
// Euclidean ball |j - center| <= radius
Window ball(const Point& center, int radius);

class Torus {
 public:
  explicit Torus(std::vector<int> sides);
  static Torus ring(int n) { return Torus({n}); }

  int dimension() const { return static_cast<int>(sides_.size()); }
  const std::vector<int>& sides() const { return sides_; }
  std::size_t site_count() const { return count_; }

  Point wrap(const Point& p) const;
  std::size_t index(const Point& p) const;
  Point point(std::size_t site) const;
  std::size_t translate(std::size_t site, const Point& offset) const;

  // true when the window has no two sites that coincide after wrapping
  bool fits(const Window& w) const;
  // torus indices in window order; throws if the window wraps onto itself
  std::vector<std::size_t> sites_of(const Window& w) const;
  Window wrap(const Window& w) const;
  Window all_sites() const;

  friend bool operator==(const Torus& a, const Torus& b) { return a.sides_ == b.sides_; }

 private:
  std::vector<int> sides_;
  std::vector<std::size_t> strides_;
  std::size_t count_ = 1;
};

std::vector<Window> translates_of(const Window& shape, const Window& anchors);
std::vector<Window> translates_of(const Torus& torus, const Window& shape, const Window& anchors);

// Lambda_n, its shrunken version and the 2^d subcubes of each.
struct BoxFamily {
  int n = 0;
  int d = 0;
  Window box;
  Window inner_box;
  std::vector<Window> subcubes;
  std::vector<Window> inner_subcubes;
};

BoxFamily box_family(int n, int d);
Window box(int n, int d);
Window inner_box(int n, int d);
// (2^{n+1}-1)^d
std::size_t box_volume(int n, int d);

}  // namespace ipslab

#endif
