#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ipslab/geometry.hpp"

using namespace ipslab;

TEST_CASE("ball sizes") {
  CHECK(ball({0, 0}, 2).size() == 13);
  CHECK(ball({0, 0}, 1).size() == 5);
  for (int r = 0; r < 6; ++r) CHECK(ball({3}, r).size() == static_cast<std::size_t>(2 * r + 1));
  // lattice points in a radius-3 disc, counted by hand: 29
  CHECK(ball({0, 0}, 3).size() == 29);
  CHECK(ball({1, -1}, 2).contains({3, -1}));
  CHECK_FALSE(ball({0, 0}, 2).contains({2, 1}));
}

TEST_CASE("box family n=1") {
  auto f = box_family(1, 1);
  CHECK(f.box == interval(-1, 1));
  CHECK(f.inner_box == interval(0, 0));
  REQUIRE(f.subcubes.size() == 2);
  CHECK(f.subcubes[0] == interval(1, 1));
  CHECK(f.subcubes[1] == interval(-1, -1));

  auto g = box_family(1, 2);
  REQUIRE(g.subcubes.size() == 4);
  for (const auto& s : g.subcubes) CHECK(s.size() == 1);
}

TEST_CASE("box family invariants") {
  for (int d = 1; d <= 2; ++d)
    for (int n = 1; n <= (d == 1 ? 5 : 3); ++n) {
      auto f = box_family(n, d);
      CHECK(f.box.size() == box_volume(n, d));
      CHECK(f.inner_box.subset_of(f.box));
      std::size_t side = (std::size_t{2} << n) - 2, expect = 1;
      for (int k = 0; k < d; ++k) expect *= side;
      Window all;
      for (std::size_t k = 0; k < f.subcubes.size(); ++k) {
        const auto& s = f.subcubes[k];
        CHECK(s.subset_of(f.box));
        CHECK(all.intersected(s).empty());
        all = all.empty() ? s : all.united(s);
        const auto& t = f.inner_subcubes[k];
        CHECK(t.subset_of(s));
        CHECK(t.subset_of(f.inner_box));
        std::size_t inner_side = (std::size_t{1} << n) - n - 1, inner = 1;
        for (int j = 0; j < d; ++j) inner *= inner_side;
        CHECK(t.size() == inner);
      }
      CHECK(all.size() == expect);
      CHECK(ball(Point(d, 0), n).subset_of(f.box));
    }
}

TEST_CASE("balls sit inside the translated box") {
  for (int n = 1; n <= 4; ++n)
    for (int i = -3; i <= 3; ++i) CHECK(ball({i}, n).subset_of(box(n, 1).translated({i})));
}

TEST_CASE("window algebra") {
  Window a({{2}, {0}, {1}});
  CHECK(a[0] == Point{0});
  CHECK(a.position({2}) == 2u);
  CHECK_FALSE(a.position({5}).has_value());
  CHECK_THROWS(Window({{1}, {1}}));
  CHECK_THROWS(Window({{1}, {1, 2}}));
  Window b = interval(1, 3);
  CHECK(a.united(b) == interval(0, 3));
  CHECK(a.intersected(b) == interval(1, 2));
  CHECK(a.minus(b) == interval(0, 0));
  CHECK(a.translated({-1}) == interval(-1, 1));
  CHECK(interval(-2, 1).range() == 2);
  CHECK(cube(-1, 1, 2).size() == 9);
}

TEST_CASE("torus indexing") {
  Torus t({3, 4});
  CHECK(t.site_count() == 12);
  for (std::size_t s = 0; s < t.site_count(); ++s) CHECK(t.index(t.point(s)) == s);
  CHECK(t.index({-1, 5}) == t.index({2, 1}));
  CHECK(t.translate(t.index({2, 3}), {1, 1}) == t.index({0, 0}));
  // site order of all_sites is the index order
  auto all = t.all_sites();
  for (std::size_t s = 0; s < all.size(); ++s) CHECK(t.index(all[s]) == s);
}

TEST_CASE("translates wrap on a ring") {
  Torus ring = Torus::ring(3);
  auto tr = translates_of(ring, interval(0, 1), Window({{2}}));
  REQUIRE(tr.size() == 1);
  CHECK(tr[0] == Window({{2}, {0}}));
  CHECK_THROWS(ring.sites_of(interval(0, 3)));
  CHECK(ring.fits(interval(-1, 1)));
  CHECK_FALSE(Torus::ring(2).fits(interval(-1, 1)));
  auto free = translates_of(interval(0, 1), interval(0, 2));
  CHECK(free.size() == 3);
  CHECK(free[2] == interval(2, 3));
}
