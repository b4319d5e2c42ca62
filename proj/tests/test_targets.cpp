#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "mprof/targets.hpp"

using namespace mprof;

namespace {

UnitaryMatrix diag_unitary(std::vector<Complex> d) {
  std::vector<std::vector<Complex>> rows(d.size(), std::vector<Complex>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) rows[i][i] = d[i];
  return from_dense(rows);
}

RankMatrix dense_q(std::vector<std::vector<long>> a, Field f = Field{0}) {
  std::vector<std::vector<mpq_class>> m;
  for (auto& r : a) {
    std::vector<mpq_class> row;
    for (long x : r) row.push_back(mpq_class(x));
    m.push_back(row);
  }
  return RankMatrix::from_dense(m, f);
}

// Monic polynomials over F_p of given degree, coefficients low to high.
std::vector<std::vector<long>> monic_polys(long p, int deg) {
  std::vector<std::vector<long>> out;
  long count = 1;
  for (int i = 0; i < deg; ++i) count *= p;
  for (long code = 0; code < count; ++code) {
    std::vector<long> c(deg + 1);
    long x = code;
    for (int i = 0; i < deg; ++i) c[i] = x % p, x /= p;
    c[deg] = 1;
    out.push_back(c);
  }
  return out;
}

std::vector<long> polymul(const std::vector<long>& a, const std::vector<long>& b, long p) {
  std::vector<long> r(a.size() + b.size() - 1, 0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) r[i + j] = (r[i + j] + a[i] * b[j]) % p;
  return r;
}

// Irreducible monic polynomials of degree ≤ k by sieving products.
std::vector<std::vector<long>> irreducibles(long p, int k) {
  std::vector<std::vector<long>> irr;
  for (int d = 1; d <= k; ++d) {
    std::set<std::vector<long>> reducible;
    for (int e = 1; e <= d / 2; ++e)
      for (const auto& a : monic_polys(p, e))
        for (const auto& b : monic_polys(p, d - e)) reducible.insert(polymul(a, b, p));
    for (const auto& f : monic_polys(p, d))
      if (!reducible.count(f)) irr.push_back(f);
  }
  return irr;
}

size_t oracle_max_geom(const RankMatrix& m, long p, const std::vector<std::vector<long>>& irr) {
  size_t k = m.n;
  size_t best = 0;
  for (const auto& f : irr) {
    // f(M) by Horner.
    RankMatrix acc = RankMatrix::identity(k, m.field).scale(mpq_class(f.back()));
    for (int i = static_cast<int>(f.size()) - 2; i >= 0; --i) {
      acc = acc.multiply(m);
      RankMatrix c = RankMatrix::identity(k, m.field).scale(mpq_class(f[i]));
      acc = acc.subtract(c.scale(-1));
    }
    size_t ker = k - acc.rank();
    best = std::max(best, ker / (f.size() - 1));
  }
  return best;
}

}  // namespace

TEST_CASE("hamming distance") {
  CHECK(ham_distance(Permutation::identity(4), Permutation::identity(4)).exact == mpq_class(0));
  Permutation t({1, 0, 2, 3});
  CHECK(*ham_distance(t, Permutation::identity(4)).exact == mpq_class(1, 2));
  CHECK_THROWS(ham_distance(t, Permutation::identity(3)));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    size_t k = 1 + rng() % 64;
    auto r = random_permutation(k, rng), s = random_permutation(k, rng), u = random_permutation(k, rng);
    auto d = *ham_distance(s, u).exact;
    CHECK(*ham_distance(r.compose(s), r.compose(u)).exact == d);
    CHECK(*ham_distance(s.compose(r), u.compose(r)).exact == d);
  }
}

TEST_CASE("permutation composition is left action") {
  Permutation s({1, 0, 2}), t({2, 1, 0});
  auto st = s.compose(t);
  for (uint32_t i = 0; i < 3; ++i) CHECK(st(i) == s(t(i)));
}

TEST_CASE("hilbert schmidt distances") {
  auto i2 = UnitaryMatrix::identity(2);
  auto d = diag_unitary({1, -1});
  CHECK(hs_distance(i2, d) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  std::mt19937_64 rng(2);
  auto u = haar_unitary(5, rng);
  CHECK(u.unitarity_defect() < 1e-9);
  Complex lam = std::polar(1.0, 0.7);
  UnitaryMatrix lu = u;
  lu.m *= lam;
  CHECK(projective_hs_distance(u, lu) < 1e-7);
  CHECK(hs_distance(u, lu) > 0.1);
  for (int i = 0; i < 200; ++i) {
    size_t k = 1 + rng() % 8;
    auto a = haar_unitary(k, rng), b = haar_unitary(k, rng), c = haar_unitary(k, rng);
    CHECK(projective_hs_distance(a, b) <= hs_distance(a, b) + 1e-9);
    double d2 = hs_distance(a, UnitaryMatrix::identity(k));
    CHECK(d2 * d2 == doctest::Approx(2 - 2 * a.normalized_trace().real()).epsilon(1e-9));
    double p2 = projective_hs_distance(a, UnitaryMatrix::identity(k));
    CHECK(std::abs(p2 * p2 - (2 - 2 * std::abs(a.normalized_trace()))) < 1e-9);
    CHECK(hs_distance(a, c) <= hs_distance(a, b) + hs_distance(b, c) + 1e-9);
    CHECK(std::abs(hs_distance(c.multiply(a), c.multiply(b)) - hs_distance(a, b)) < 1e-9);
    CHECK(std::abs(hs_distance(a.multiply(c), b.multiply(c)) - hs_distance(a, b)) < 1e-9);
  }
}

TEST_CASE("hamming equals half squared hs on permutation matrices") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    size_t k = 1 + rng() % 64;
    auto s = random_permutation(k, rng), t = random_permutation(k, rng);
    double h = ham_distance(s, t).value;
    double d = hs_distance(perm_to_unitary(s), perm_to_unitary(t));
    CHECK(std::abs(h - 0.5 * d * d) < 1e-9);
  }
}

TEST_CASE("permutation matrices") {
  std::mt19937_64 rng(4);
  CHECK(hs_distance(perm_to_unitary(Permutation::identity(6)), UnitaryMatrix::identity(6)) == 0);
  CHECK(perm_to_rank(Permutation::identity(6), Field{0}) == RankMatrix::identity(6, Field{0}));
  for (int i = 0; i < 1000; ++i) {
    size_t k = 1 + rng() % 20;
    auto s = random_permutation(k, rng), t = random_permutation(k, rng);
    CHECK(hs_distance(perm_to_unitary(s.compose(t)), perm_to_unitary(s).multiply(perm_to_unitary(t))) < 1e-12);
    CHECK(perm_to_rank(s.compose(t), Field{5}) == perm_to_rank(s, Field{5}).multiply(perm_to_rank(t, Field{5})));
    CHECK(perm_to_unitary(s).trace().real() == doctest::Approx(static_cast<double>(s.fixed_points())));
  }
}

TEST_CASE("rank distances") {
  auto i2 = RankMatrix::identity(2, Field{0});
  auto d = dense_q({{1, 0}, {0, -1}});
  CHECK(rank_distance(i2, d) == mpq_class(1, 2));
  std::mt19937_64 rng(5);
  for (Field f : {Field{0}, Field{2}}) {
    for (int i = 0; i < 1000; ++i) {
      size_t k = 1 + rng() % 24;
      auto s = random_permutation(k, rng);
      auto u = perm_to_rank(s, f);
      auto id = RankMatrix::identity(k, f);
      CHECK(u.subtract(id).rank() == k - s.cycle_count());
      mpq_class dr = rank_distance(u, id);
      mpq_class dh = *ham_distance(s, Permutation::identity(k)).exact;
      CHECK(dr <= dh);
      CHECK(dh <= 2 * dr);
    }
  }
}

TEST_CASE("matrix inverse") {
  std::mt19937_64 rng(6);
  for (Field f : {Field{0}, Field{3}, Field{7}}) {
    for (int i = 0; i < 30; ++i) {
      auto m = random_invertible(1 + rng() % 6, f, rng);
      CHECK(m.multiply(m.inverse()) == RankMatrix::identity(m.n, f));
    }
  }
  CHECK_THROWS_AS(dense_q({{1, 2}, {2, 4}}).inverse(), std::domain_error);
}

TEST_CASE("projective rank on hand examples") {
  auto i2 = RankMatrix::identity(2, Field{0});
  auto rot = dense_q({{0, -1}, {1, 0}});
  // Eigenvalues ±i are not rational; over the closure each has multiplicity one.
  CHECK(projective_rank_distance(rot, i2) == mpq_class(1, 2));
  auto rr = block_sum(rot, rot);
  CHECK(projective_rank_distance(rr, RankMatrix::identity(4, Field{0})) == mpq_class(1, 2));
  auto jordan = dense_q({{1, 1}, {0, 1}});
  CHECK(projective_rank_distance(jordan, i2) == mpq_class(1, 2));
  auto scal = i2.scale(5);
  CHECK(projective_rank_distance(scal, i2) == 0);
  CHECK(rank_distance(scal, i2) == 1);
  std::mt19937_64 rng(7);
  for (Field f : {Field{0}, Field{3}}) {
    for (int i = 0; i < 50; ++i) {
      auto u = random_invertible(1 + rng() % 5, f, rng);
      auto v = random_invertible(u.n, f, rng);
      CHECK(projective_rank_distance(u, u.scale(f.is_rational() ? mpq_class(-7, 3) : mpq_class(2))) == 0);
      CHECK(projective_rank_distance(u, v) <= rank_distance(u, v));
    }
  }
}

TEST_CASE("projective rank against irreducible-factor oracle") {
  std::mt19937_64 rng(8);
  for (long p : {2L, 3L}) {
    auto irr = irreducibles(p, 4);
    for (int i = 0; i < 150; ++i) {
      size_t k = 1 + rng() % 4;
      auto m = random_invertible(k, Field{static_cast<uint64_t>(p)}, rng);
      CHECK(max_geometric_multiplicity(m) == oracle_max_geom(m, p, irr));
    }
  }
}

TEST_CASE("rank metric invariance and triangle inequality") {
  std::mt19937_64 rng(9);
  for (Field f : {Field{0}, Field{3}}) {
    for (int i = 0; i < 100; ++i) {
      size_t k = 1 + rng() % 5;
      auto a = random_invertible(k, f, rng), b = random_invertible(k, f, rng), c = random_invertible(k, f, rng);
      auto d = rank_distance(a, b);
      CHECK(rank_distance(c.multiply(a), c.multiply(b)) == d);
      CHECK(rank_distance(a.multiply(c), b.multiply(c)) == d);
      CHECK(rank_distance(a, c) <= d + rank_distance(b, c));
      auto pd = projective_rank_distance(a, b);
      CHECK(projective_rank_distance(c.multiply(a), c.multiply(b)) == pd);
      CHECK(projective_rank_distance(a.multiply(c), b.multiply(c)) == pd);
    }
  }
}

TEST_CASE("block sums") {
  Permutation swap({1, 0});
  auto s = block_sum(swap, Permutation::identity(2));
  CHECK(*ham_distance(s, Permutation::identity(4)).exact == mpq_class(1, 2));
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200; ++i) {
    size_t m = 1 + rng() % 10, q = 1 + rng() % 10;
    auto a = random_permutation(m, rng), b = random_permutation(q, rng);
    mpq_class lhs = *ham_distance(block_sum(a, b), Permutation::identity(m + q)).exact;
    mpq_class rhs = (mpq_class(m) * *ham_distance(a, Permutation::identity(m)).exact +
                     mpq_class(q) * *ham_distance(b, Permutation::identity(q)).exact) /
                    mpq_class(m + q);
    CHECK(lhs == rhs);

    auto u = haar_unitary(m, rng), v = haar_unitary(q, rng);
    double du = hs_distance(u, UnitaryMatrix::identity(m)), dv = hs_distance(v, UnitaryMatrix::identity(q));
    double ds = hs_distance(block_sum(u, v), UnitaryMatrix::identity(m + q));
    CHECK(std::abs(ds * ds - (m * du * du + q * dv * dv) / (m + q)) < 1e-9);

    Field f3{3};
    auto x = random_invertible(1 + m % 5, f3, rng), y = random_invertible(1 + q % 5, f3, rng);
    auto ix = RankMatrix::identity(x.n, f3), iy = RankMatrix::identity(y.n, f3);
    mpq_class lr = rank_distance(block_sum(x, y), RankMatrix::identity(x.n + y.n, f3));
    mpq_class rr = (mpq_class(x.n) * rank_distance(x, ix) + mpq_class(y.n) * rank_distance(y, iy)) /
                   mpq_class(x.n + y.n);
    CHECK(lr == rr);
  }
}

TEST_CASE("tensor powers") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    size_t k = 1 + rng() % 4;
    auto u = haar_unitary(k, rng), v = haar_unitary(k, rng);
    auto a = tensor_amplify(u, 1), b = tensor_amplify(v, 1);
    CHECK(std::abs(tensor_hs_distance(a, b) - hs_distance(a.base, b.base)) < 1e-12);
    CHECK(std::abs(tensor_projective_hs_distance(a, b) - projective_hs_distance(a.base, b.base)) < 1e-12);
    int l = 1 + static_cast<int>(rng() % 6);
    auto t = tensor_amplify(u, l);
    CHECK(std::abs(std::abs(t.normalized_trace()) - std::pow(std::abs(t.base.normalized_trace()), l)) < 1e-9);
  }
  for (int i = 0; i < 20; ++i) {
    auto u = haar_unitary(2, rng), v = haar_unitary(2, rng);
    auto a = tensor_amplify(u, 2), b = tensor_amplify(v, 2);
    auto ma = a.materialize(), mb = b.materialize();
    CHECK(ma.size() == 16);
    CHECK(std::abs(hs_distance(ma, mb) - tensor_hs_distance(a, b)) < 1e-9);
    CHECK(std::abs(projective_hs_distance(ma, mb) - tensor_projective_hs_distance(a, b)) < 1e-9);
    CHECK(std::abs(hs_distance(a.multiply(b).materialize(), ma.multiply(mb))) < 1e-9);
  }
  auto id = tensor_amplify(UnitaryMatrix::identity(3), 22);
  CHECK(std::abs(id.normalized_trace() - Complex(1, 0)) < 1e-12);
  CHECK_THROWS_AS(tensor_amplify(UnitaryMatrix::identity(3), 22).materialize(), CapacityError);
}

TEST_CASE("finite metric groups") {
  auto s3 = FiniteMetricGroup::from_group(Group::symmetric(3));
  CHECK_FALSE(s3->check().has_value());
  CHECK(s3->order() == 6);
  CHECK(s3->is_commutator_contractive(1.0));
  auto c4 = FiniteMetricGroup::from_group(Group::cyclic(4));
  auto with_metric = std::make_shared<FiniteMetricGroup>(*c4);
  // Word metric of C4 normalised by 2; bi-invariant as the group is abelian.
  with_metric->distance.assign(4, std::vector<mpq_class>(4));
  for (uint32_t a = 0; a < 4; ++a)
    for (uint32_t b = 0; b < 4; ++b) {
      uint32_t diff = c4->mul(a, c4->inverses[b]);
      auto len = word_length(Group::cyclic(4), Element{std::stoll(c4->labels[diff])}, 4);
      with_metric->distance[a][b] = ratio(*len, 2);
    }
  CHECK_FALSE(with_metric->check().has_value());
  auto rt = FiniteMetricGroup::from_json(with_metric->to_json());
  CHECK(rt->distance == with_metric->distance);
  auto broken = std::make_shared<FiniteMetricGroup>(*s3);
  broken->distance.assign(6, std::vector<mpq_class>(6, mpq_class(1)));
  for (int i = 0; i < 6; ++i) broken->distance[i][i] = 0;
  broken->distance[0][1] = broken->distance[1][0] = mpq_class(1, 3);
  CHECK(broken->check().has_value());
}

TEST_CASE("wreath metric") {
  auto top = FiniteMetricGroup::from_group(Group::cyclic(2));
  Family fam = Family::wreath(Family::sofic(2), top);
  std::vector<TargetElement> all;
  for (uint32_t x = 0; x < 2; ++x)
    for (int b0 = 0; b0 < 2; ++b0)
      for (int b1 = 0; b1 < 2; ++b1) {
        WreathElement w;
        w.top_group = top;
        w.top = x;
        w.base = {b0 ? Permutation({1, 0}) : Permutation::identity(2), b1 ? Permutation({1, 0}) : Permutation::identity(2)};
        all.push_back(w);
      }
  CHECK(all.size() == 8);
  for (const auto& a : all) {
    CHECK(*fam.mult_distance(a, a).exact == 0);
    for (const auto& b : all) {
      if (std::get<WreathElement>(a).top != std::get<WreathElement>(b).top)
        CHECK(*fam.mult_distance(a, b).exact == 1);
      auto d = *fam.mult_distance(a, b).exact;
      for (const auto& g : all) {
        CHECK(*fam.mult_distance(target_multiply(g, a), target_multiply(g, b)).exact == d);
        CHECK(*fam.mult_distance(target_multiply(a, g), target_multiply(b, g)).exact == d);
        for (const auto& c : all)
          CHECK(*fam.mult_distance(target_multiply(target_multiply(a, b), c), target_multiply(a, target_multiply(b, c))).exact == 0);
      }
    }
    auto inv = target_inverse(a);
    CHECK(*fam.mult_distance(target_multiply(a, inv), fam.identity()).exact == 0);
  }
  CHECK(fam.dimension().value() == 8u);
}

TEST_CASE("permutation wreath metric") {
  Family fam = Family::perm_wreath(Family::sofic(3), 4);
  std::mt19937_64 rng(12);
  auto rand_el = [&]() {
    PermWreathElement w;
    w.sigma = random_permutation(4, rng);
    for (int i = 0; i < 4; ++i) w.b.push_back(random_permutation(3, rng));
    return TargetElement(w);
  };
  for (int i = 0; i < 300; ++i) {
    auto a = rand_el(), b = rand_el(), g = rand_el(), h = rand_el();
    auto d = *fam.mult_distance(a, b).exact;
    CHECK(*fam.mult_distance(target_multiply(g, target_multiply(a, h)), target_multiply(g, target_multiply(b, h))).exact == d);
    CHECK(*fam.mult_distance(target_multiply(target_multiply(a, b), g), target_multiply(a, target_multiply(b, g))).exact == 0);
    CHECK(*fam.mult_distance(target_multiply(a, target_inverse(a)), fam.identity()).exact == 0);
    CHECK(*fam.mult_distance(a, g).exact <= d + *fam.mult_distance(b, g).exact);
  }
  CHECK(fam.dimension().value() == 12u);
}

TEST_CASE("family json round trip") {
  std::mt19937_64 rng(13);
  std::vector<std::pair<Family, TargetElement>> cases;
  cases.push_back({Family::sofic(5), random_permutation(5, rng)});
  cases.push_back({Family::hyp(3), haar_unitary(3, rng)});
  cases.push_back({Family::hyp(20), perm_to_unitary(random_permutation(20, rng))});
  cases.push_back({Family::lin(4, Field{7}), random_invertible(4, Field{7}, rng)});
  cases.push_back({Family::lin_projective(3, Field{0}), random_invertible(3, Field{0}, rng)});
  cases.push_back({Family::lin(20, Field{0}), perm_to_rank(random_permutation(20, rng), Field{0})});
  auto s3 = FiniteMetricGroup::from_group(Group::symmetric(3));
  cases.push_back({Family::fin(s3), TableElement{s3, 4}});
  cases.push_back({Family::tensor(4, 3), tensor_amplify(haar_unitary(2, rng), 3)});
  for (auto& [fam, el] : cases) {
    CHECK_NOTHROW(fam.check_member(el));
    Family f2 = Family::from_json(fam.to_json());
    CHECK(f2.to_json() == fam.to_json());
    auto el2 = f2.element_from_json(fam.element_to_json(el));
    CHECK_NOTHROW(f2.check_member(el2));
    CHECK(f2.element_to_json(el2) == fam.element_to_json(el));
    CHECK(f2.mult_distance(el2, el).value < 1e-12);
  }
  CHECK(Family::sofic(3).default_epsilon() == 1.0);
  CHECK(Family::lin(3, Field{2}).default_epsilon() == 0.25);
  CHECK(Family::lin_projective(3, Field{2}).default_epsilon() == 0.125);
  CHECK(Family::hyp(3).default_epsilon() == doctest::Approx(std::sqrt(2.0)));
  CHECK(Family::tensor(4, 22).dimension().to_string() == "4^22");
  CHECK_THROWS(Family::sofic(3).check_member(Permutation({0, 0, 1})));
  CHECK_THROWS(Family::hyp(2).check_member(diag_unitary({1, 2})));
}
