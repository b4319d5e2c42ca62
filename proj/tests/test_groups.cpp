#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mprof/groups.hpp"

using namespace mprof;

namespace {

// 3x3 upper unitriangular integer matrices, used as an independent model.
using Mat3 = std::array<std::array<Int, 3>, 3>;

Mat3 to_matrix(const Element& g) {
  return {{{1, g.v[0], g.v[2]}, {0, 1, g.v[1]}, {0, 0, 1}}};
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Element random_element(const Group& g, std::mt19937_64& rng, int len) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(2 * g.rank()) - 1);
  Word w;
  for (int i = 0; i < len; ++i) w.push_back(pick(rng));
  return g.evaluate(w);
}

}  // namespace

TEST_CASE("basic multiplication") {
  auto z2 = Group::free_abelian(2);
  CHECK(z2.multiply(Element{1, 0}, Element{0, 1}) == Element{1, 1});
  auto h = Group::heisenberg(1);
  CHECK(h.multiply(Element{1, 0, 0}, Element{0, 1, 0}) == Element{1, 1, 1});
  auto f2 = Group::free_group(2);
  CHECK(f2.multiply(f2.letter_element(0), f2.letter_element(1)) == f2.identity());
}

TEST_CASE("heisenberg agrees with the matrix model") {
  auto h = Group::heisenberg(1);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Int> c(-50, 50);
  for (int t = 0; t < 10000; ++t) {
    Element a{c(rng), c(rng), c(rng)}, b{c(rng), c(rng), c(rng)};
    Element p = h.multiply(a, b);
    CHECK(to_matrix(p) == matmul(to_matrix(a), to_matrix(b)));
    CHECK(h.multiply(a, h.inverse(a)) == h.identity());
  }
}

TEST_CASE("group axioms on random triples") {
  std::vector<Group> groups = {Group::free_abelian(3), Group::free_group(2), Group::heisenberg(1),
                               Group::heisenberg(2), Group::cyclic(7), Group::symmetric(4),
                               parse_group("ZxC3"), parse_group("C2wrZ"), parse_group("C2wrC3"),
                               parse_group("S3wrC2")};
  std::mt19937_64 rng(11);
  for (const auto& g : groups) {
    for (int t = 0; t < 200; ++t) {
      auto a = random_element(g, rng, 6), b = random_element(g, rng, 6), c = random_element(g, rng, 6);
      CHECK(g.multiply(g.multiply(a, b), c) == g.multiply(a, g.multiply(b, c)));
      CHECK(g.multiply(a, g.identity()) == a);
      CHECK(g.multiply(g.inverse(a), a) == g.identity());
      CHECK(g.inverse(g.inverse(a)) == a);
      CHECK_NOTHROW(g.validate(a));
    }
  }
}

TEST_CASE("ball sizes") {
  CHECK(growth(Group::free_abelian(1), 2) == 5);
  CHECK(growth(Group::free_abelian(2), 1) == 5);
  CHECK(growth(Group::free_abelian(2), 3) == 25);
  // Reference values from a BFS over 3x3 integer matrices.
  CHECK(growth(Group::heisenberg(1), 2) == 17);
  CHECK(growth(Group::heisenberg(1), 8) == 1793);
  CHECK(growth(Group::free_group(2), 2) == 17);
  CHECK(growth(Group::symmetric(3), 5) == 6);
  auto b = ball(Group::free_abelian(1), 2);
  std::vector<Element> expect{{0}, {-1}, {1}, {-2}, {2}};
  CHECK(b.elements == expect);
  CHECK_FALSE(ball(Group::heisenberg(1), 3).contains(Element{0, 0, 1}));
  CHECK(ball(Group::heisenberg(1), 4).contains(Element{0, 0, 1}));
  CHECK_THROWS_AS(ball(Group::free_group(3), 20, 1000), CapacityError);
}

TEST_CASE("heisenberg growth degree") {
  auto h = Group::heisenberg(1);
  std::vector<double> xs, ys;
  for (int n = 4; n <= 12; ++n) {
    xs.push_back(std::log(n));
    ys.push_back(std::log(static_cast<double>(growth(h, n))));
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= xs.size();
  my /= ys.size();
  double num = 0, den = 0;
  for (size_t i = 0; i < xs.size(); ++i) num += (xs[i] - mx) * (ys[i] - my), den += (xs[i] - mx) * (xs[i] - mx);
  double slope = num / den;
  CHECK(slope >= 3.5);
  CHECK(slope <= 4.5);
}

TEST_CASE("ball properties") {
  std::vector<Group> groups = {Group::free_abelian(2), Group::heisenberg(1), Group::free_group(2),
                               parse_group("C2wrZ"), Group::symmetric(4)};
  for (const auto& g : groups) {
    for (int n = 0; n <= 4; ++n) {
      auto b = ball(g, n);
      auto b1 = ball(g, n + 1);
      CHECK(b.elements[0] == g.identity());
      CHECK(b.lengths[0] == 0);
      for (const auto& x : b.elements) {
        CHECK(b.contains(g.inverse(x)));
        CHECK(b1.contains(x));
      }
    }
    for (int n = 0; n <= 4; ++n)
      for (int m = 0; m <= 4; ++m) CHECK(growth(g, n + m) <= growth(g, n) * growth(g, m));
  }
}

TEST_CASE("geodesic words") {
  auto g = Group::heisenberg(1);
  auto w = geodesic_words(g, 4);
  auto b = ball(g, 4);
  CHECK(w.size() == b.size());
  for (size_t i = 0; i < b.size(); ++i) {
    const auto& word = w.at(b.elements[i]);
    CHECK(static_cast<int>(word.size()) == b.lengths[i]);
    CHECK(g.evaluate(word) == b.elements[i]);
  }
  CHECK(word_length(g, Element{0, 0, 1}, 10) == 4);
}

TEST_CASE("quotient maps") {
  auto z = Group::free_abelian(1);
  CHECK(QuotientDescriptor::congruence(z, 5).map(Element{7}) == Element{2});
  auto z2 = Group::free_abelian(2);
  auto q = QuotientDescriptor::lattice(z2, {{2, 0}, {0, 3}});
  CHECK(q.map(Element{3, 4}) == Element{1, 1});
  CHECK(q.index() == 6);
  CHECK(q.elements().size() == 6);

  auto h = Group::heisenberg(1);
  auto hq = QuotientDescriptor::congruence(h, 2);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    auto a = random_element(h, rng, 8), b = random_element(h, rng, 8);
    CHECK(hq.map(h.multiply(a, b)) == hq.multiply(hq.map(a), hq.map(b)));
  }
  auto skew = QuotientDescriptor::lattice(z2, {{2, 1}, {0, 3}});
  for (int t = 0; t < 100; ++t) {
    auto a = random_element(z2, rng, 9), b = random_element(z2, rng, 9);
    CHECK(skew.map(z2.multiply(a, b)) == skew.multiply(skew.map(a), skew.map(b)));
  }
  auto qg = Group::quotient(hq);
  CHECK(qg.order() == 8);
  CHECK(enumerate_finite(qg).size() == 8);
  CHECK_THROWS(QuotientDescriptor::lattice(z2, {{2, 5}, {0, 3}}));
}

TEST_CASE("distortion") {
  CHECK(distortion(SubgroupData::scaled_lattice(1, 2), 4) == 4);
  auto line = SubgroupData::sublattice(2, {{1, 0}});
  for (int n = 1; n <= 5; ++n) CHECK(distortion(line, n) == n);
  // Largest central power in B(8) is z^4, in B(20) it is z^25 (matrix BFS).
  CHECK(distortion(SubgroupData::heisenberg_center(), 8) == 8);
  CHECK(distortion(SubgroupData::heisenberg_center(), 20) == 25);
}

TEST_CASE("subgroup decomposition") {
  auto s = SubgroupData::scaled_lattice(1, 2);
  CHECK(s.index() == 2);
  for (Int x = -7; x <= 7; ++x) {
    auto [i, h] = s.decompose(Element{x});
    CHECK(s.parent.multiply(s.coset_reps[i], s.embed(h)) == Element{x});
  }
}

TEST_CASE("json round trip and shorthand") {
  for (std::string d : {"Z", "Z^2", "H3", "F2", "C5", "Z/5", "S3", "C2wrZ", "C2wrC3", "ZxZ", "H5"}) {
    auto g = parse_group(d);
    auto g2 = Group::from_json(g.to_json());
    CHECK(g.same_as(g2));
    CHECK(g2.to_json() == g.to_json());
  }
  CHECK_THROWS(parse_group("Q8"));
  auto q = Group::quotient(QuotientDescriptor::congruence(Group::heisenberg(1), 3));
  CHECK(Group::from_json(q.to_json()).order() == 27);
}

TEST_CASE("formats") {
  CHECK(Group::free_abelian(1).format(Element{-3}) == "-3");
  CHECK(Group::free_abelian(2).format(Element{1, -2}) == "(1,-2)");
  auto f = Group::free_group(2);
  CHECK(f.format(f.identity()) == "e");
  CHECK(f.format(f.evaluate({0, 3})) == "aB");
  auto w = parse_group("C2wrZ");
  CHECK(w.format(w.identity()) == "[0|]");
  CHECK(w.format(w.letter_element(0)) == "[0|0:1]");
}
