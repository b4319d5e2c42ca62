#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mprof/certify.hpp"

using namespace mprof;

namespace {

Permutation shift(Int k, Int m) {
  std::vector<std::uint32_t> im(static_cast<std::size_t>(m));
  for (Int i = 0; i < m; ++i) im[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(((i + k) % m + m) % m);
  return Permutation(im);
}

// ℤ → ℤ/m → Sym(m), left-regular.
ApproxCertificate cyclic_cert(int n, Int m) {
  Group z = Group::free_abelian(1);
  return ApproxCertificate::build(z, Family::sofic(static_cast<std::size_t>(m)), 1.0, n,
                                  [&](const Element& x) { return TargetElement(shift(x.v[0], m)); });
}

HomCertificate cyclic_hom(Int m) {
  HomCertificate h(Group::free_abelian(1), Family::sofic(static_cast<std::size_t>(m)), 1.0);
  h.images.push_back(shift(1, m));
  return h;
}

// ℤ² → (ℤ/m)² acting on m² points, index i*m + j.
ApproxCertificate torus_cert(int n, Int m) {
  Group z2 = Group::free_abelian(2);
  return ApproxCertificate::build(z2, Family::sofic(static_cast<std::size_t>(m * m)), 1.0, n, [&](const Element& x) {
    return TargetElement(product_action(shift(x.v[0], m), shift(x.v[1], m)));
  });
}

}  // namespace

TEST_CASE("cyclic certificate passes with defect 0 and separation 1") {
  auto c = cyclic_cert(3, 7);
  auto r = verify_D(c);
  CHECK(r.pass);
  CHECK(*r.worst_defect.exact == 0);
  CHECK(*r.min_separation->exact == 1);
  CHECK(r.pairs_checked == 21);
  CHECK(c.dimension().value() == 7u);
}

TEST_CASE("constant map fails injectivity") {
  Group z = Group::free_abelian(1);
  auto c = ApproxCertificate::build(z, Family::sofic(5), 1.0, 2,
                                    [](const Element&) { return TargetElement(Permutation::identity(5)); });
  auto r = verify_D(c);
  CHECK_FALSE(r.pass);
  CHECK(*r.worst_defect.exact == 0);
  CHECK(*r.min_separation->exact == 0);
  CHECK(r.failure.find("separation") != std::string::npos);
}

TEST_CASE("homomorphism of order at most the radius collides") {
  for (int n = 2; n <= 6; ++n) {
    auto c = cyclic_cert(n, n);
    auto r = verify_D(c);
    CHECK_FALSE(r.pass);
    CHECK(*r.min_separation->exact == 0);
  }
}

TEST_CASE("missing assignment and dimension mismatch are errors") {
  auto c = cyclic_cert(2, 5);
  ApproxCertificate partial(c.group, c.family, 1.0, 2);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) partial.assign(c.elements[i], c.targets[i]);
  CHECK_THROWS_AS(verify_D(partial), CertificateError);

  auto bad = c;
  bad.assign(c.elements[1], Permutation::identity(6));
  CHECK_THROWS_AS(verify_D(bad), CertificateError);

  json j = c.to_json();
  j["dimension"] = 6;
  CHECK_THROWS_AS(ApproxCertificate::from_json(j), CertificateError);
}

TEST_CASE("certificate JSON round trip") {
  auto c = torus_cert(2, 5);
  json j = c.to_json();
  CHECK(j.at("assignments").size() == 13);
  CHECK(j.at("assignments")[0].at("element") == "(0,0)");
  auto back = ApproxCertificate::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(verify_D(back).pass);

  json outside = j;
  outside["assignments"][0]["element"] = "(3,0)";
  CHECK_THROWS_AS(ApproxCertificate::from_json(outside), CertificateError);
}

TEST_CASE("single swapped assignment is caught") {
  auto c = cyclic_cert(4, 9);
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = a + 1; b < c.size(); ++b) {
      auto m = c;
      std::swap(m.targets[a], m.targets[b]);
      auto r = verify_D(m);
      CHECK_FALSE(r.pass);
      CHECK(r.defect_witness.size() == 2);
    }
}

TEST_CASE("verify_D is invariant under simultaneous conjugation") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    // A perturbed certificate so the defect is nonzero.
    auto c = cyclic_cert(3, 7);
    c.targets[2] = random_permutation(7, rng);
    auto r0 = verify_D(c);
    Permutation p = random_permutation(7, rng), pi = p.inverse();
    auto d = c;
    for (auto& t : d.targets) t = p.compose(std::get<Permutation>(t)).compose(pi);
    auto r1 = verify_D(d);
    CHECK(*r0.worst_defect.exact == *r1.worst_defect.exact);
    CHECK(*r0.min_separation->exact == *r1.min_separation->exact);
    CHECK(r0.pass == r1.pass);
  }
}

TEST_CASE("passing at n implies passing at smaller radii") {
  auto c = cyclic_cert(6, 13);
  REQUIRE(verify_D(c).pass);
  for (int k = 1; k < 6; ++k) {
    auto sub = ApproxCertificate::build(c.group, c.family, 1.0, k, [&](const Element& x) { return c.image(x); });
    CHECK(verify_D(sub).pass);
  }
}

TEST_CASE("worker count does not change the report") {
  auto c = torus_cert(3, 5);
  c.targets[4] = shift(1, 25);
  auto a = verify_D(c);
  VerifyOptions o;
  o.workers = 3;
  auto b = verify_D(c, o);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("hyperlinear certificate from permutation matrices") {
  auto s = cyclic_cert(2, 5);
  auto h = ApproxCertificate::build(s.group, Family::hyp(5), std::sqrt(2.0), 2, [&](const Element& x) {
    return TargetElement(perm_to_unitary(std::get<Permutation>(s.image(x))));
  });
  auto r = verify_D(h);
  CHECK(r.pass);
  CHECK(r.worst_defect.value == doctest::Approx(0.0));
  CHECK(r.min_separation->value == doctest::Approx(std::sqrt(2.0)));
  CHECK_FALSE(r.worst_defect.exact);
}

TEST_CASE("boundary defect exactly 1/n fails closed") {
  // Second block is wrong at 2, so the defect is 5/10 = 1/n at n = 2.
  Group z = Group::free_abelian(1);
  auto c = ApproxCertificate::build(z, Family::sofic(10), 0.75, 2, [](const Element& x) {
    const Int k = x.v[0];
    return TargetElement(block_sum(shift(k, 5), shift(k == 2 ? 3 : k, 5)));
  });
  auto r = verify_D(c);
  CHECK(*r.worst_defect.exact == mpq_class(1, 2));
  CHECK(r.defect_margin() == 0.0);
  CHECK(*r.min_separation->exact > mpq_class(1, 4));
  CHECK_FALSE(r.pass);
}

TEST_CASE("verify_W on exact cyclic quotients") {
  for (int n = 1; n <= 8; ++n) {
    auto h = cyclic_hom(n + 1);
    auto r = verify_W(h, n);
    CHECK(r.pass);
    CHECK(*r.worst_defect.exact == 0);
    CHECK(r.products_checked == static_cast<std::size_t>(2 * n + 1));
    VerifyOptions strict;
    strict.strict_separation = true;
    CHECK_FALSE(verify_W(h, n, strict).pass);
  }
  auto bad = cyclic_hom(2);
  auto r = verify_W(bad, 2);
  CHECK_FALSE(r.pass);
  CHECK(r.separation_witness[0] == "e1 e1");
}

TEST_CASE("empty word is always within 1/n") {
  HomCertificate h(Group::free_group(2), Family::sofic(4), 1.0);
  std::mt19937_64 rng(3);
  h.images = {random_permutation(4, rng), random_permutation(4, rng)};
  auto r = verify_W(h, 3);
  CHECK(*r.worst_defect.exact == 0);
  CHECK(r.defect_witness[0] == "e");
}

TEST_CASE("verify_R with relators") {
  Group z2 = Group::free_abelian(2);
  HomCertificate h(z2, Family::sofic(49), 1.0);
  h.images = {product_action(shift(1, 7), shift(0, 7)), product_action(shift(0, 7), shift(1, 7))};
  h.relators = default_relators(z2);
  REQUIRE(h.relators.size() == 1);
  CHECK(format_word(z2, h.relators[0]) == "e1 e2 e1^-1 e2^-1");
  CHECK(verify_R(h, 4).pass);
  CHECK(verify_W(h, 4).pass);

  HomCertificate bad(z2, Family::sofic(3), 1.0);
  bad.images = {Permutation({1, 0, 2}), Permutation({2, 1, 0})};
  bad.relators = h.relators;
  auto r = verify_R(bad, 4);
  CHECK_FALSE(r.pass);
  CHECK(r.defect_witness[0] == "e1 e2 e1^-1 e2^-1");
  // Below the relator length only separation is checked.
  CHECK(verify_R(bad, 3).worst_defect.value == 0.0);
}

TEST_CASE("default relators are trivial in the group") {
  for (const char* d : {"Z", "Z^3", "H3", "H5", "C6", "F2", "ZxH3", "C4xZ^2"}) {
    Group g = parse_group(d);
    for (const auto& r : default_relators(g)) CHECK(g.is_identity(g.evaluate(r)));
  }
  CHECK_THROWS(default_relators(parse_group("S3")));
}

TEST_CASE("verify_R passes whenever verify_W passes") {
  std::mt19937_64 rng(11);
  Group z2 = Group::free_abelian(2);
  int both = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + trial % 6;
    HomCertificate h(z2, Family::sofic(k), 1.0);
    if (trial % 2 == 0) {
      Permutation a = random_permutation(k, rng);
      h.images = {a, a.compose(a)};
    } else {
      h.images = {random_permutation(k, rng), random_permutation(k, rng)};
    }
    h.relators = default_relators(z2);
    for (int n = 1; n <= 4; ++n) {
      auto w = verify_W(h, n);
      auto r = verify_R(h, n);
      if (w.pass) {
        CHECK(r.pass);
        ++both;
      }
    }
  }
  CHECK(both > 0);
}

TEST_CASE("paired geodesics") {
  Group z2 = Group::free_abelian(2);
  auto w = paired_geodesics(z2, 3);
  CHECK(w.size() == 25);
  for (const auto& [g, word] : w) {
    CHECK(z2.evaluate(word) == g);
    CHECK(static_cast<int>(word.size()) == std::abs(g.v[0]) + std::abs(g.v[1]));
    CHECK(w.at(z2.inverse(g)) == inverse_word(word));
  }
  CHECK(w.at(Element{0, 0}).empty());
}

TEST_CASE("D_from_W round trip on Z") {
  for (int m = 1; m <= 3; ++m) {
    auto h = cyclic_hom(6 * m + 1);
    auto c = D_from_W(h, m);
    CHECK(c.n == m);
    CHECK(std::get<Permutation>(c.image(Element{0})).is_identity());
    auto r = verify_D(c);
    CHECK(r.pass);
    CHECK(*r.worst_defect.exact == 0);
  }
  CHECK_THROWS_AS(D_from_W(cyclic_hom(3), 1), VerificationFailure);
}

TEST_CASE("W_from_D round trip on Z and Z^2") {
  for (int m = 1; m <= 2; ++m) {
    auto c = cyclic_cert(3 * m * m, 6 * m * m + 1);
    auto h = W_from_D(c, m);
    CHECK(verify_W(h, m).pass);
    CHECK(*verify_W(h, m).worst_defect.exact == 0);
  }
  auto t = torus_cert(3, 7);
  auto h = W_from_D(t, 1);
  auto r = verify_W(h, 1);
  CHECK(r.pass);
  CHECK(r.separation_margin() > 0);
  CHECK_THROWS_AS(W_from_D(t, 2), CertificateError);
}

TEST_CASE("HomCertificate JSON round trip") {
  Group z2 = Group::free_abelian(2);
  HomCertificate h(z2, Family::sofic(9), 1.0);
  h.images = {product_action(shift(1, 3), shift(0, 3)), product_action(shift(0, 3), shift(1, 3))};
  h.relators = default_relators(z2);
  json j = h.to_json();
  auto back = HomCertificate::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.relators == h.relators);
}

TEST_CASE("graph verification") {
  Group z = Group::free_abelian(1);
  for (int n = 1; n <= 6; ++n) {
    const std::size_t k = static_cast<std::size_t>(2 * n + 1);
    GraphCertificate cay(k, 2, n, 0.0);
    for (std::size_t u = 0; u < k; ++u) {
      cay.add_edge(u, 0, (u + 1) % k);
      cay.add_edge(u, 1, (u + k - 1) % k);
    }
    auto r = verify_graph(cay, z);
    CHECK(r.pass);
    CHECK(r.good_fraction == 1.0);

    const std::size_t c = static_cast<std::size_t>(2 * n);
    GraphCertificate cyc(c, 2, n, 0.0);
    for (std::size_t u = 0; u < c; ++u) {
      cyc.add_edge(u, 0, (u + 1) % c);
      cyc.add_edge(u, 1, (u + c - 1) % c);
    }
    auto bad = verify_graph(cyc, z);
    CHECK_FALSE(bad.pass);
    CHECK(bad.good_fraction == 0.0);
    cyc.delta = 1.0;
    CHECK(verify_graph(cyc, z).pass);
  }
}

TEST_CASE("graph of a sofic certificate") {
  auto c = torus_cert(2, 5);
  auto gc = graph_from_sofic(c, 0.0);
  CHECK(verify_graph(gc, c.group).pass);
  auto j = gc.to_json(c.group);
  auto back = GraphCertificate::from_json(j, c.group);
  CHECK(back.out == gc.out);
  // Radius too large for the torus: wraparound.
  GraphCertificate far = gc;
  far.n = 3;
  CHECK_FALSE(verify_graph(far, c.group).pass);
  GraphCertificate dup(2, 2, 1, 0.0);
  dup.add_edge(0, 0, 1);
  CHECK_THROWS_AS(dup.add_edge(0, 0, 0), CertificateError);
}

TEST_CASE("delta solutions") {
  const Word comm{0, 2, 1, 3};
  Family f = Family::sofic(3);
  Permutation sigma({1, 0, 2}), tau({2, 1, 0});
  auto r = check_delta_solution({comm}, {sigma, tau}, f, 0.5);
  CHECK(*r.max_defect.exact == 1);
  CHECK_FALSE(r.pass);
  Permutation c3({1, 2, 0});
  auto ok = check_delta_solution({comm}, {c3, c3.compose(c3)}, f, 0.5);
  CHECK(*ok.max_defect.exact == 0);
  CHECK(ok.pass);
  auto exact = check_delta_solution({Word{0, 0, 0}}, {c3}, f, 1e-12);
  CHECK(exact.pass);
  CHECK_THROWS_AS(check_delta_solution({comm}, {sigma}, f, 0.5), std::invalid_argument);
  // Strict inequality.
  CHECK_FALSE(check_delta_solution({comm}, {sigma, tau}, f, 1.0).pass);
}

TEST_CASE("lemma suite on exact certificates") {
  for (int n = 2; n <= 6; ++n) {
    auto rep = lemma_consistency_suite(cyclic_cert(n, 2 * n + 1));
    CHECK(rep.pass);
    CHECK(rep.eps0 == 0.0);
    CHECK(rep.bounds.size() == 5);
    for (const auto& b : rep.bounds) CHECK(b.worst == 0.0);
  }
}

TEST_CASE("lemma suite on a cyclic certificate of too small order") {
  // ℤ → ℤ/5 at n = 4 is multiplicative, so ε₀ = 0, yet not injective.
  auto c = cyclic_cert(4, 5);
  CHECK_FALSE(verify_D(c).pass);
  auto rep = lemma_consistency_suite(c);
  CHECK(rep.pass);
  CHECK(rep.eps0 == 0.0);
  CHECK(rep.bounds[2].checked > 0);
}

TEST_CASE("lemma suite on perturbed unitaries") {
  std::mt19937_64 rng(5);
  auto s = cyclic_cert(4, 9);
  for (double t : {1e-3, 1e-2, 5e-2}) {
    double injected = 0;
    auto h = ApproxCertificate::build(s.group, Family::hyp(9), std::sqrt(2.0), 4, [&](const Element& x) {
      UnitaryMatrix p = perm_to_unitary(std::get<Permutation>(s.image(x)));
      UnitaryMatrix u = near_identity_unitary(9, t, rng);
      injected = std::max(injected, hs_distance(u, UnitaryMatrix::identity(9)));
      return TargetElement(p.multiply(u));
    });
    auto rep = lemma_consistency_suite(h);
    CHECK(rep.pass);
    CHECK(rep.eps0 > 0);
    CHECK(rep.eps0 <= 3 * injected + 1e-12);
    for (const auto& b : rep.bounds) CHECK(b.checked > 0);
  }
}

TEST_CASE("lemma suite with a perturbed identity") {
  Group z = Group::free_abelian(1);
  auto c = ApproxCertificate::build(z, Family::sofic(3), 1.0, 2, [](const Element& x) {
    return TargetElement(x.v[0] == 0 ? shift(1, 3) : shift(x.v[0], 3));
  });
  auto rep = lemma_consistency_suite(c);
  CHECK(rep.eps0 == 1.0);
  CHECK(rep.bounds[0].worst == 1.0);
  CHECK(rep.pass);
}

TEST_CASE("product table walk agrees with direct multiplication") {
  std::mt19937_64 rng(41);
  for (const char* name : {"Z^2", "H3", "F2", "S3", "C2wrZ"}) {
    Group g = parse_group(name);
    for (int n : {1, 2}) {
      auto c = ApproxCertificate::build(g, Family::sofic(6), 1.0, n,
                                        [&](const Element&) { return TargetElement(random_permutation(6, rng)); });
      VerifyOptions direct;
      direct.ball_cap = c.size();
      CHECK_MESSAGE(verify_D(c).to_json() == verify_D(c, direct).to_json(), name);
    }
  }
}
