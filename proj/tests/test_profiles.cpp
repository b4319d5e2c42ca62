#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "mprof/profiles.hpp"

using namespace mprof;

namespace {

const Group Z = Group::free_abelian(1);
const Group Z2 = Group::free_abelian(2);
const Group H3 = Group::heisenberg(1);

// Brute force over every assignment of Sym(k) to the ball of ℤ at radius n.
bool brute_sofic_Z(int n, std::size_t k) {
  std::vector<Permutation> perms;
  std::vector<std::uint32_t> p(k);
  std::iota(p.begin(), p.end(), 0u);
  do perms.emplace_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  const std::size_t m = 2 * static_cast<std::size_t>(n) + 1;
  std::vector<std::size_t> choice(m, 0);
  auto idx = [&](long x) { return static_cast<std::size_t>(x + n); };
  while (true) {
    bool ok = true;
    for (long a = -n; a <= n && ok; ++a)
      for (long b = -n; b <= n && ok; ++b) {
        const auto& pa = perms[choice[idx(a)]];
        const auto& pb = perms[choice[idx(b)]];
        if (a != b) {
          std::size_t diff = 0;
          for (std::size_t i = 0; i < k; ++i) diff += pa.images[i] != pb.images[i];
          ok = static_cast<long>(diff) * n > static_cast<long>((n - 1) * k);
        }
        if (ok && std::abs(a + b) <= n) {
          const auto& pt = perms[choice[idx(a + b)]];
          std::size_t bad = 0;
          for (std::size_t i = 0; i < k; ++i) bad += pa.images[pb.images[i]] != pt.images[i];
          ok = static_cast<long>(bad) * n < static_cast<long>(k);
        }
      }
    if (ok) return true;
    std::size_t i = 0;
    while (i < m && ++choice[i] == perms.size()) choice[i++] = 0;
    if (i == m) return false;
  }
}

// Σ_{|g|≤n} |(A+g)△A| / |A| on integer sets.
double interval_defect(const std::set<long>& a, int n) {
  double sum = 0;
  for (long g = -n; g <= n; ++g) {
    std::size_t kept = 0;
    for (long x : a) kept += a.count(x + g);
    sum += 2.0 * static_cast<double>(a.size() - kept);
  }
  return sum / static_cast<double>(a.size());
}

// Least index of a kernel of a surjection ℤ² → ℤ/a × ℤ/b (a | b) avoiding the
// ℓ¹ ball of radius n.
long rf_Z2_oracle(int n) {
  for (long k = 1;; ++k)
    for (long a = 1; a <= k; ++a) {
      if (k % a || (k / a) % a) continue;
      const long b = k / a;
      for (long x1 = 0; x1 < a; ++x1)
        for (long y1 = 0; y1 < b; ++y1)
          for (long x2 = 0; x2 < a; ++x2)
            for (long y2 = 0; y2 < b; ++y2) {
              std::set<std::pair<long, long>> span;
              for (long i = 0; i < a * b; ++i)
                for (long j = 0; j < a * b; ++j) span.emplace((i * x1 + j * x2) % a, (i * y1 + j * y2) % b);
              if (static_cast<long>(span.size()) != k) continue;
              bool avoids = true;
              for (long u = -n; u <= n && avoids; ++u)
                for (long v = -n + std::abs(u); v <= n - std::abs(u) && avoids; ++v) {
                  if (u == 0 && v == 0) continue;
                  const long px = ((u * x1 + v * x2) % a + a) % a;
                  const long py = ((u * y1 + v * y2) % b + b) % b;
                  avoids = px != 0 || py != 0;
                }
              if (avoids) return k;
            }
    }
}

// Least m such that no nontrivial (a, b, c) in the matrix-model ball has all
// entries divisible by m; (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab').
long heisenberg_modulus_oracle(int n) {
  using T = std::array<long, 3>;
  std::set<T> seen{{0, 0, 0}};
  std::vector<T> frontier{{0, 0, 0}};
  const std::vector<T> gens{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
  for (int r = 0; r < n; ++r) {
    std::vector<T> next;
    for (const auto& e : frontier)
      for (const auto& g : gens) {
        T t{e[0] + g[0], e[1] + g[1], e[2] + g[2] + e[0] * g[1]};
        if (seen.insert(t).second) next.push_back(t);
      }
    frontier = std::move(next);
  }
  for (long m = 1;; ++m) {
    bool ok = true;
    for (const auto& e : seen)
      if ((e[0] || e[1] || e[2]) && e[0] % m == 0 && e[1] % m == 0 && e[2] % m == 0) ok = false;
    if (ok) return m;
  }
}

long sigma(long m) {
  long s = 0;
  for (long d = 1; d <= m; ++d)
    if (m % d == 0) s += d;
  return s;
}

}  // namespace

TEST_CASE("sofic oracle on Z matches brute force") {
  auto r1 = sofic_exact_oracle(Z, 1);
  REQUIRE(r1.point.exact);
  CHECK(*r1.point.exact == 3);
  CHECK(r1.refuted_up_to == 2);
  CHECK(r1.point.provenance == "exact:oracle");
  REQUIRE(r1.witness);
  CHECK(verify_D(*r1.witness).pass);
  for (std::size_t k = 1; k <= 3; ++k) CHECK(brute_sofic_Z(1, k) == (k >= 3));

  auto r2 = sofic_exact_oracle(Z, 2);
  REQUIRE(r2.point.exact);
  const auto v = *r2.point.exact;
  CHECK(v >= 3);
  CHECK(v <= 5);
  for (std::size_t k = 1; k <= 4; ++k) CHECK(brute_sofic_Z(2, k) == (k >= v));
}

TEST_CASE("sofic oracle is invariant under relabeling") {
  for (int n = 1; n <= 2; ++n) {
    auto base = sofic_exact_oracle(Z, n);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      OracleOptions o;
      o.relabel_seed = seed;
      auto r = sofic_exact_oracle(Z, n, o);
      CHECK(r.point.exact == base.point.exact);
      CHECK(r.refuted_up_to == base.refuted_up_to);
      REQUIRE(r.witness);
      CHECK(verify_D(*r.witness).pass);
    }
  }
}

TEST_CASE("sofic oracle reports bounds when the budget runs out") {
  OracleOptions o;
  o.budget = 10;
  auto r = sofic_exact_oracle(Z, 2, o);
  CHECK_FALSE(r.point.exact);
  CHECK(r.point.trace["budget_exhausted"] == true);
  CHECK(r.point.consistent());
  o.budget = 50'000'000;
  o.k_max = 2;
  auto capped = sofic_exact_oracle(Z, 1, o);
  CHECK(capped.point.lower == 3u);
  CHECK(capped.point.kind() == Provenance::Lower);
}

TEST_CASE("sofic oracle on a finite group is bounded by its order") {
  const Group c3 = Group::cyclic(3);
  auto r = sofic_exact_oracle(c3, 1);
  REQUIRE(r.point.exact);
  CHECK(*r.point.exact <= 3);
}

TEST_CASE("weakly sofic profile of Z") {
  CHECK(weakly_sofic_exact_Z(Z, 0).exact == 1u);
  CHECK(weakly_sofic_exact_Z(Z, 1).exact == 3u);
  CHECK(weakly_sofic_exact_Z(Z, 10).exact == 21u);
  auto p = weakly_sofic_exact_Z(Z, 7);
  CHECK(p.lower == 15u);
  CHECK(p.upper == 15u);
  CHECK(p.provenance == "exact:meet");
  CHECK_THROWS_AS(weakly_sofic_exact_Z(Z2, 1), std::invalid_argument);
}

TEST_CASE("exhaustive Folner search on Z") {
  auto r = folner_search(Z, 1, FolnerStrategy::exhaustive(6, 4));
  REQUIRE(r.size);
  CHECK(*r.size == 4);
  CHECK(r.minimal);
  REQUIRE(r.witness);
  CHECK(r.witness->valid());
  CHECK(r.point().exact == 4u);

  // Independent minimum over subsets of [-6, 6] of size at most 4.
  std::size_t best = 0;
  for (std::size_t size = 1; size <= 4 && best == 0; ++size)
    for (unsigned mask = 1; mask < (1u << 13); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != size) continue;
      std::set<long> a;
      for (int i = 0; i < 13; ++i)
        if (mask & (1u << i)) a.insert(i - 6);
      if (interval_defect(a, 1) <= 1.0 + 1e-12) {
        best = size;
        break;
      }
    }
  CHECK(best == 4);

  auto small = folner_search(Z, 1, FolnerStrategy::exhaustive(6, 3));
  CHECK_FALSE(small.size);
  REQUIRE(small.best_defect);
  CHECK(*small.best_defect > mpq_class(1));
  CHECK(small.point().kind() == Provenance::Unknown);
}

TEST_CASE("interval Folner sets of Z and their sofic certificates") {
  for (int n = 1; n <= 10; ++n) {
    auto r = folner_search(Z, n, FolnerStrategy::boxes());
    REQUIRE(r.size);
    const auto bound = static_cast<std::uint64_t>(2 * n * n * (n + 1));
    CHECK(*r.size <= bound);
    CHECK(*r.size == bound);
    REQUIRE(r.witness);
    CHECK(r.witness->valid());
    CHECK(r.witness->defect == box_defect(1, *r.box_side, n));
    if (n >= 2) {
      auto c = folner_to_sofic(*r.witness, n / 2);
      CHECK(verify_D(c).pass);
      CHECK(*c.dimension().value() == *r.size);
    }
  }
}

TEST_CASE("box defect closed form matches the set evaluator") {
  for (int n = 1; n <= 3; ++n)
    for (std::int64_t side = 1; side <= 7; ++side) {
      std::vector<Element> set;
      for (Int x = 0; x < side; ++x)
        for (Int y = 0; y < side; ++y) set.push_back({x, y});
      CHECK(box_defect(2, side, n) == folner_defect(Z2, set, n));
    }
}

TEST_CASE("Folner search degenerate inputs") {
  CHECK_THROWS_AS(folner_search(Z, 0, FolnerStrategy::boxes()), std::invalid_argument);
  CHECK_THROWS_AS(make_folner_witness(Z, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_folner_witness(Z, {{0}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(folner_search(H3, 1, FolnerStrategy::boxes()), std::invalid_argument);
}

TEST_CASE("ball strategy and control") {
  auto r = folner_search(Z2, 1, FolnerStrategy::balls(30));
  REQUIRE(r.witness);
  CHECK(r.witness->valid());
  auto w = control(*r.witness);
  REQUIRE(w.radius_bound);
  CHECK(*w.radius_bound >= static_cast<int>(w.set.size()));
  CHECK(w.valid());

  auto interval = folner_search(Z, 2, FolnerStrategy::boxes());
  auto cw = control(*interval.witness);
  CHECK(cw.radius_bound == static_cast<int>(interval.witness->set.size()));
}

TEST_CASE("nilpotent Folner bound") {
  CHECK(folner_bound_nilpotent(1, 1) == 32);
  CHECK(folner_bound_nilpotent(4, 2) == 131072);
  for (int d = 0; d <= 4; ++d)
    for (int n = 1; n <= 6; ++n) {
      CHECK(folner_bound_nilpotent(d, n + 1) > folner_bound_nilpotent(d, n));
      CHECK(folner_bound_nilpotent(d + 1, n) > folner_bound_nilpotent(d, n));
    }
}

TEST_CASE("HNF sublattice counts") {
  for (long m = 1; m <= 30; ++m) CHECK(static_cast<long>(hnf_sublattices(2, m).size()) == sigma(m));
  for (long p : {2L, 3L, 5L, 7L}) CHECK(static_cast<long>(hnf_sublattices(3, p).size()) == p * p + p + 1);
  for (const auto& h : hnf_sublattices(3, 12)) CHECK(h[0][0] * h[1][1] * h[2][2] == 12);
}

TEST_CASE("full residual finiteness growth of Z") {
  for (int n = 0; n <= 30; ++n) {
    auto s = full_rf_growth(Z, n, QuotientFamily::Sublattices);
    CHECK(s.point.exact == static_cast<std::uint64_t>(n + 1));
    auto c = full_rf_growth(Z, n, QuotientFamily::Congruence);
    CHECK(c.point.exact == static_cast<std::uint64_t>(n + 1));
  }
}

TEST_CASE("full residual finiteness growth of Z^2") {
  for (int n = 1; n <= 6; ++n) {
    auto r = full_rf_growth(Z2, n, QuotientFamily::Sublattices);
    REQUIRE(r.point.exact);
    const auto v = static_cast<long>(*r.point.exact);
    CHECK(v == rf_Z2_oracle(n));
    CHECK(2 * v >= n * n);
    CHECK(v <= (n + 1) * (n + 1));
    auto cong = full_rf_growth(Z2, n, QuotientFamily::Congruence);
    CHECK(cong.point.upper == static_cast<std::uint64_t>((n + 1) * (n + 1)));
  }
  CHECK_THROWS_AS(full_rf_growth(H3, 2, QuotientFamily::Sublattices), std::invalid_argument);
  CHECK_THROWS_AS(full_rf_growth(Z2, 6, QuotientFamily::Sublattices, 10), CapacityError);
}

TEST_CASE("Heisenberg congruence growth") {
  auto c = rf_curve(H3, 3, 8, QuotientFamily::Congruence);
  for (const auto& p : c.points) {
    CHECK(p.kind() == Provenance::Upper);
    CHECK(p.provenance == "upper:congruence");
    const auto m = p.trace["modulus"].get<long>();
    CHECK(m == heisenberg_modulus_oracle(p.n));
    CHECK(*p.upper == static_cast<std::uint64_t>(m * m * m));
  }
  // z^m needs about 4√m letters, so the centre only forces m > n²/16 past n = 16.
  auto far = rf_curve(H3, 16, 24, QuotientFamily::Congruence);
  const double s = far.fit_slope(16, 24);
  CHECK(s >= 5.2);
  CHECK(s <= 6.8);
}

TEST_CASE("LE-F growth") {
  std::vector<Group> cyclic;
  for (Int m = 1; m <= 25; ++m) cyclic.push_back(Group::cyclic(m));
  for (int n = 1; n <= 5; ++n) {
    auto p = le_f_growth(Z, n, cyclic);
    CHECK(p.upper == weakly_sofic_exact_Z(Z, n).exact);
  }
  std::vector<Group> small(cyclic.begin(), cyclic.begin() + 10);
  auto f2 = le_f_growth(Group::free_group(2), 1, small);
  CHECK(f2.kind() == Provenance::Upper);
  CHECK(f2.upper == 5u);
  auto none = le_f_growth(Group::free_group(2), 1, std::vector<Group>(cyclic.begin(), cyclic.begin() + 4));
  CHECK(none.kind() == Provenance::Unknown);

  const Group s3 = Group::symmetric(3);
  auto self = le_f_growth(s3, 3, {Group::cyclic(6), s3}, LefOptions{10'000'000, true});
  CHECK(self.exact == 6u);
  CHECK(self.trace["target"] == s3.name());
}

TEST_CASE("RA profile") {
  CHECK(ra_profile(Z2, 2, {}).kind() == Provenance::Infinite);
  AmenableQuotient self{Z2, [](const Element& g) { return g; }, FolnerStrategy::boxes()};
  auto p = ra_profile(Z2, 1, {self});
  CHECK(p.value() == folner_search(Z2, 1, FolnerStrategy::boxes()).size);

  const Group c5 = Group::cyclic(5);
  AmenableQuotient fin{c5, [](const Element& g) { return g; }, FolnerStrategy::exhaustive(2, 5)};
  auto f = ra_profile(c5, 10, {fin});
  CHECK(f.exact == 5u);

  AmenableQuotient lossy{Group::cyclic(2), [](const Element& g) { return Element{((g.v[0] % 2) + 2) % 2}; },
                         FolnerStrategy::exhaustive(1, 2)};
  CHECK(ra_profile(Z, 1, {lossy}).kind() == Provenance::Infinite);
}

TEST_CASE("profile point invariants and CSV round trip") {
  ProfilePoint p;
  p.n = 3;
  p.lower = 4;
  p.exact = 5;
  p.upper = 7;
  CHECK(p.consistent());
  p.lower = 6;
  CHECK_FALSE(p.consistent());

  auto c = upper_curve(Z, Family::Tag::Fin, 1, 6, {"cyclic", "quotient"});
  c.points.push_back(ProfilePoint{});
  c.points.back().n = 7;
  c.points.back().infinite = true;
  c.points.back().provenance = "infinite";
  auto back = ProfileCurve::from_csv(c.to_csv(), "fin");
  REQUIRE(back.points.size() == c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(back.points[i].n == c.points[i].n);
    CHECK(back.points[i].lower == c.points[i].lower);
    CHECK(back.points[i].exact == c.points[i].exact);
    CHECK(back.points[i].upper == c.points[i].upper);
    CHECK(back.points[i].infinite == c.points[i].infinite);
    CHECK(back.points[i].provenance == c.points[i].provenance);
  }
  CHECK(back.to_csv() == c.to_csv());
  CHECK_THROWS_AS(ProfileCurve::from_csv("a,b\n", "fin"), std::invalid_argument);
}

TEST_CASE("weakly sofic curve of Z is exact") {
  auto c = upper_curve(Z, Family::Tag::Fin, 1, 10, {"cyclic"});
  for (const auto& p : c.points) {
    CHECK(p.exact == static_cast<std::uint64_t>(2 * p.n + 1));
    CHECK(p.provenance == "exact:meet");
  }
}

TEST_CASE("sofic upper curve of Z^2") {
  auto c = upper_curve(Z2, Family::Tag::Sofic, 2, 10, {"product"});
  for (const auto& p : c.points) {
    CHECK(p.upper == static_cast<std::uint64_t>((2 * p.n + 1) * (2 * p.n + 1)));
    CHECK(p.consistent());
  }
  const double s = c.fit_slope(2, 10);
  CHECK(s >= 1.6);
  CHECK(s <= 2.4);
}

TEST_CASE("exact and lower points are monotone") {
  auto c = upper_curve(Z, Family::Tag::Sofic, 1, 6, {"cyclic", "quotient", "folner"}, CurveOptions{{}, 5, {}});
  std::optional<std::uint64_t> prev;
  for (const auto& p : c.points) {
    CHECK(p.consistent());
    auto lo = p.low();
    REQUIRE(lo);
    if (prev) CHECK(*lo >= *prev);
    prev = lo;
  }
  CHECK(c.points[0].provenance == "exact:oracle");
  CHECK(c.points[1].exact == 5u);
}

TEST_CASE("inequality audit on Z") {
  std::vector<ProfileCurve> curves;
  curves.push_back(growth_curve(Z, 1, 10));
  curves.push_back(upper_curve(Z, Family::Tag::Fin, 1, 10, {"cyclic", "quotient"}));
  curves.push_back(rf_curve(Z, 1, 20, QuotientFamily::Sublattices));
  curves.push_back(upper_curve(Z, Family::Tag::Sofic, 1, 10, {"cyclic", "folner"}, CurveOptions{{}, 5, {}}));
  curves.push_back(upper_curve(Z, Family::Tag::Hyp, 1, 3, {"cyclic", "lift"}));
  curves.push_back(upper_curve(Z, Family::Tag::Lin, 1, 4, {"cyclic", "lift"}));
  curves.push_back(folner_curve(Z, 1, 20, FolnerStrategy::boxes()));
  auto r = inequality_audit(curves);
  CHECK(r.violations == 0);
  std::set<std::string> names;
  for (const auto& c : r.checks) names.insert(c.inequality.substr(0, c.inequality.find(" (")));
  for (const char* want : {"Z: beta(n) <= D_fin(n)", "Z: D_fin(n) <= Phi(2n)", "Z: D_lin(n) <= D_sof(n)",
                           "Z: D_hyp(n) <= D_sof(2n^2)", "Z: D_sof(n) <= Fol(2n)", "Z: log D_fin(n) <= log D_sof(n)!"})
    CHECK(names.count(want) == 1);
}

TEST_CASE("audit flags a planted violation") {
  ProfileCurve fin{"G", "fin", {}, 0, 0, 0}, rf{"G", "rf", {}, 0, 0, 0};
  ProfilePoint a;
  a.n = 1;
  a.lower = 10;
  fin.points.push_back(a);
  ProfilePoint b;
  b.n = 2;
  b.exact = 3;
  rf.points.push_back(b);
  auto r = inequality_audit({fin, rf});
  CHECK(r.violations == 1);
}

TEST_CASE("round trip audit") {
  CHECK(round_trip_audit(Z, 3).violations == 0);
  CHECK(round_trip_audit(Z2, 2).violations == 0);
  auto h = round_trip_audit(H3, 1);
  CHECK(h.violations == 0);
  CHECK(h.checks.size() == 3);
}
