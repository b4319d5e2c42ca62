#include "mprof/construct.hpp"

#include <cmath>
#include <unordered_map>

#include "construct_util.hpp"

namespace mprof {

namespace detail {

ApproxCertificate finalize(ApproxCertificate c, const VerifyOptions& opt) {
  VerificationReport r = verify_D(c, opt);
  if (!r.pass) throw VerificationFailure(r);
  c.provenance["verification"] = r.to_json();
  return c;
}

Element read_block(const std::vector<Int>& v, std::size_t& pos) {
  if (pos >= v.size()) throw std::invalid_argument("truncated composite element");
  const Int len = v[pos++];
  if (len < 0 || pos + static_cast<std::size_t>(len) > v.size())
    throw std::invalid_argument("truncated composite element");
  Element e(std::vector<Int>(v.begin() + static_cast<std::ptrdiff_t>(pos),
                             v.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(len))));
  pos += static_cast<std::size_t>(len);
  return e;
}

std::pair<Element, Element> split_product(const Element& e) {
  std::size_t pos = 0;
  Element a = read_block(e.v, pos);
  return {a, Element(std::vector<Int>(e.v.begin() + static_cast<std::ptrdiff_t>(pos), e.v.end()))};
}

WreathParts split_wreath(const Element& e) {
  WreathParts w;
  std::size_t pos = 0;
  w.top = read_block(e.v, pos);
  if (pos >= e.v.size()) throw std::invalid_argument("truncated wreath element");
  const Int count = e.v[pos++];
  for (Int i = 0; i < count; ++i) {
    Element p = read_block(e.v, pos);
    Element x = read_block(e.v, pos);
    w.support.emplace_back(std::move(p), std::move(x));
  }
  return w;
}

Element join_wreath(const WreathParts& w) {
  Element r;
  auto put = [&](const Element& x) {
    r.v.push_back(static_cast<Int>(x.v.size()));
    r.v.insert(r.v.end(), x.v.begin(), x.v.end());
  };
  put(w.top);
  r.v.push_back(static_cast<Int>(w.support.size()));
  for (const auto& [p, x] : w.support) {
    put(p);
    put(x);
  }
  return r;
}

ApproxCertificate restrict_to(const ApproxCertificate& c, int radius, std::size_t cap) {
  ApproxCertificate r(c.group, c.family, c.epsilon, radius);
  for (const auto& g : ball(c.group, radius, cap).elements) {
    auto k = c.find(g);
    if (!k) throw ConstructionError("certificate has no image for " + c.group.format(g));
    r.assign(g, c.targets[*k]);
  }
  return r;
}

}  // namespace detail

using detail::finalize;

json construction_trace(const std::string& builder, const json& params, int n, double epsilon,
                        const Dimension& dim, const std::vector<json>& inputs) {
  json in = json::array();
  for (const auto& i : inputs) in.push_back(i);
  return {{"builder", builder},
          {"params", params},
          {"claimed", {{"n", n}, {"epsilon", epsilon}, {"dimension", dim.to_json()}}},
          {"inputs", in}};
}

namespace {

Family family_for(Family::Tag tag, std::size_t k, const Field& field) {
  switch (tag) {
    case Family::Tag::Sofic: return Family::sofic(k);
    case Family::Tag::Hyp: return Family::hyp(k);
    case Family::Tag::HypProjective: return Family::hyp_projective(k);
    case Family::Tag::Lin: return Family::lin(k, field);
    case Family::Tag::LinProjective: return Family::lin_projective(k, field);
    default: throw ConstructionError("unsupported target family for this builder");
  }
}

TargetElement perm_as(const Family& f, const Permutation& p) {
  switch (f.tag) {
    case Family::Tag::Sofic: return p;
    case Family::Tag::Hyp:
    case Family::Tag::HypProjective: return perm_to_unitary(p);
    case Family::Tag::Lin:
    case Family::Tag::LinProjective: return perm_to_rank(p, f.field);
    default: throw ConstructionError("unsupported target family for this builder");
  }
}

json input_record(const ApproxCertificate& c) {
  json r = {{"group", c.group.name()},
            {"family", c.family.tag_name()},
            {"n", c.n},
            {"dimension", c.dimension().to_json()}};
  if (c.provenance.contains("builder")) r["provenance"] = c.provenance;
  return r;
}

void require_pass(const ApproxCertificate& c, const VerifyOptions& opt, const std::string& what) {
  VerificationReport r = verify_D(c, opt);
  if (!r.pass) throw ConstructionError(what + " does not pass verification: " + r.failure);
}

}  // namespace

ApproxCertificate cyclic_Z(int n, const BuildOptions& opt) {
  if (n < 1) throw ConstructionError("cyclic_Z needs n >= 1");
  const auto k = static_cast<Int>(2 * n + 1);
  Group z = Group::free_abelian(1);
  auto c = ApproxCertificate::build(z, Family::sofic(static_cast<std::size_t>(k)), 1.0, n, [&](const Element& g) {
    std::vector<std::uint32_t> im(static_cast<std::size_t>(k));
    const Int s = ((g.v[0] % k) + k) % k;
    for (Int i = 0; i < k; ++i) im[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>((i + s) % k);
    return TargetElement(Permutation(std::move(im)));
  });
  c.provenance = construction_trace("cyclic_Z", {{"n", n}}, n, 1.0, c.dimension());
  return finalize(std::move(c), opt.verify);
}

ApproxCertificate quotient_representation(const Group& g, const QuotientDescriptor& q, int radius,
                                          Family::Tag tag, Field field) {
  if (!q.parent().same_as(g)) throw ConstructionError("quotient descriptor belongs to another group");
  Group qg = Group::quotient(q);
  const auto elems = enumerate_finite(qg);
  std::unordered_map<Element, std::uint32_t, ElementHash> idx;
  for (std::size_t i = 0; i < elems.size(); ++i) idx.emplace(elems[i], static_cast<std::uint32_t>(i));
  const std::size_t k = elems.size();

  Family fam = Family::sofic(k);
  if (tag == Family::Tag::Fin) {
    fam = Family::fin(FiniteMetricGroup::from_group(qg));
  } else {
    fam = family_for(tag, k, field);
  }
  auto c = ApproxCertificate::build(g, fam, fam.default_epsilon(), radius, [&](const Element& x) -> TargetElement {
    const Element y = q.map(x);
    if (tag == Family::Tag::Fin) return TableElement{fam.table, idx.at(y)};
    std::vector<std::uint32_t> im(k);
    for (std::size_t i = 0; i < k; ++i) im[i] = idx.at(q.multiply(y, elems[i]));
    return perm_as(fam, Permutation(std::move(im)));
  });
  c.provenance = construction_trace("quotient_representation",
                                    {{"quotient", q.to_json()}, {"family", fam.tag_name()}}, radius,
                                    c.epsilon, c.dimension());
  return c;
}

ApproxCertificate from_quotient(const Group& g, const QuotientDescriptor& q, int n, Family::Tag tag, Field field,
                                const BuildOptions& opt) {
  if (n < 1) throw ConstructionError("from_quotient needs n >= 1");
  for (const auto& x : ball(g, 2 * n, opt.verify.ball_cap).elements)
    if (!g.is_identity(x) && q.in_kernel(x))
      throw ConstructionError("kernel meets B(" + std::to_string(2 * n) + ") at " + g.format(x));
  auto c = quotient_representation(g, q, n, tag, field);
  c.provenance = construction_trace("from_quotient", {{"quotient", q.to_json()}, {"family", c.family.tag_name()}},
                                    n, c.epsilon, c.dimension());
  return finalize(std::move(c), opt.verify);
}

CosetAction coset_action(const SubgroupData& sub, const Element& g) {
  if (!sub.finite_index()) throw ConstructionError("subgroup " + sub.description + " has no coset data");
  CosetAction a;
  for (const auto& gi : sub.coset_reps) {
    auto [j, h] = sub.decompose(sub.parent.multiply(g, gi));
    a.alpha.push_back(j);
    a.h.push_back(std::move(h));
  }
  return a;
}

ApproxCertificate induce_finite_index(const SubgroupData& sub, const ApproxCertificate& c_h,
                                      const BuildOptions& opt) {
  if (!sub.intrinsic.same_as(c_h.group))
    throw ConstructionError("c_H must certify the intrinsic group of " + sub.description);
  const std::size_t l = sub.index();
  const std::size_t m = c_h.family.degree;
  const int n = c_h.n;
  const Family fam = family_for(c_h.family.tag, l * m, c_h.family.field);
  auto lookup = [&](const Element& h) -> const TargetElement& {
    auto k = c_h.find(h);
    if (!k) throw ConstructionError("c_H has no image for " + sub.intrinsic.format(h) + "; its radius is too small");
    return c_h.targets[*k];
  };

  auto c = ApproxCertificate::build(sub.parent, fam, c_h.epsilon, n, [&](const Element& g) -> TargetElement {
    CosetAction a = coset_action(sub, g);
    switch (fam.tag) {
      case Family::Tag::Sofic: {
        std::vector<std::uint32_t> im(l * m);
        for (std::size_t i = 0; i < l; ++i) {
          const auto& p = std::get<Permutation>(lookup(a.h[i]));
          for (std::size_t j = 0; j < m; ++j) im[i * m + j] = static_cast<std::uint32_t>(a.alpha[i] * m + p(static_cast<std::uint32_t>(j)));
        }
        return Permutation(std::move(im));
      }
      case Family::Tag::Hyp:
      case Family::Tag::HypProjective: {
        std::vector<Eigen::Triplet<Complex>> t;
        for (std::size_t i = 0; i < l; ++i) {
          const auto& u = std::get<UnitaryMatrix>(lookup(a.h[i]));
          for (Eigen::Index r = 0; r < u.m.outerSize(); ++r)
            for (SparseC::InnerIterator it(u.m, r); it; ++it)
              t.emplace_back(static_cast<Eigen::Index>(a.alpha[i] * m) + it.row(),
                             static_cast<Eigen::Index>(i * m) + it.col(), it.value());
        }
        UnitaryMatrix u;
        u.m.resize(static_cast<Eigen::Index>(l * m), static_cast<Eigen::Index>(l * m));
        u.m.setFromTriplets(t.begin(), t.end());
        return u;
      }
      default: {
        RankMatrix out = RankMatrix::identity(l * m, fam.field);
        for (std::size_t i = 0; i < l; ++i) {
          const auto& x = std::get<RankMatrix>(lookup(a.h[i]));
          for (std::size_t r = 0; r < m; ++r) {
            SparseRow row;
            for (const auto& [col, v] : x.rows[r]) row.emplace_back(static_cast<std::uint32_t>(i * m + col), v);
            out.rows[a.alpha[i] * m + r] = std::move(row);
          }
        }
        return out;
      }
    }
  });
  c.provenance = construction_trace("induce_finite_index", {{"subgroup", sub.description}, {"index", l}}, n,
                                    c.epsilon, c.dimension(), {input_record(c_h)});
  return finalize(std::move(c), opt.verify);
}

ApproxCertificate direct_product(const ApproxCertificate& c_g, const ApproxCertificate& c_h,
                                 const BuildOptions& opt) {
  if (c_g.family.tag != c_h.family.tag || !(c_g.family.field == c_h.family.field))
    throw ConstructionError("direct_product needs certificates in the same family");
  const Family fam = family_for(c_g.family.tag, c_g.family.degree * c_h.family.degree, c_g.family.field);
  const int n = std::min(c_g.n, c_h.n);
  Group gh = Group::direct_product(c_g.group, c_h.group);
  auto c = ApproxCertificate::build(gh, fam, fam.default_epsilon(), n, [&](const Element& x) -> TargetElement {
    auto [a, b] = detail::split_product(x);
    TargetElement ta = c_g.image(a), tb = c_h.image(b);
    if (!c_g.find(a) || !c_h.find(b)) throw ConstructionError("factor certificate misses " + gh.format(x));
    switch (fam.tag) {
      case Family::Tag::Sofic: return product_action(std::get<Permutation>(ta), std::get<Permutation>(tb));
      case Family::Tag::Hyp:
      case Family::Tag::HypProjective: return kronecker(std::get<UnitaryMatrix>(ta), std::get<UnitaryMatrix>(tb));
      default: return kronecker(std::get<RankMatrix>(ta), std::get<RankMatrix>(tb));
    }
  });
  c.provenance = construction_trace("direct_product", json::object(), n, c.epsilon, c.dimension(),
                                    {input_record(c_g), input_record(c_h)});
  return finalize(std::move(c), opt.verify);
}

ApproxCertificate unitary_lift(const ApproxCertificate& c, double epsilon) {
  if (c.family.tag != Family::Tag::Sofic) throw ConstructionError("unitary_lift needs a sofic certificate");
  ApproxCertificate r(c.group, Family::hyp(c.family.degree), epsilon, c.n);
  for (std::size_t i = 0; i < c.size(); ++i)
    r.assign(c.elements[i], perm_to_unitary(std::get<Permutation>(c.targets[i])));
  r.provenance = construction_trace("unitary_lift", json::object(), c.n, epsilon, r.dimension(), {input_record(c)});
  return r;
}

ApproxCertificate perm_to_hyp(const ApproxCertificate& c, int n, const BuildOptions& opt) {
  if (c.family.tag != Family::Tag::Sofic) throw ConstructionError("perm_to_hyp needs a sofic certificate");
  if (n < 1 || c.n < 2 * n * n)
    throw ConstructionError("perm_to_hyp at n = " + std::to_string(n) + " needs an input at radius " +
                            std::to_string(2 * n * n));
  require_pass(c, opt.verify, "sofic input");
  ApproxCertificate r = unitary_lift(detail::restrict_to(c, n, opt.verify.ball_cap), std::sqrt(2.0));
  r.provenance = construction_trace("perm_to_hyp", {{"input_n", c.n}}, n, r.epsilon, r.dimension(), {input_record(c)});
  return finalize(std::move(r), opt.verify);
}

ApproxCertificate perm_to_lin(const ApproxCertificate& c, Field field, const BuildOptions& opt) {
  if (c.family.tag != Family::Tag::Sofic) throw ConstructionError("perm_to_lin needs a sofic certificate");
  require_pass(c, opt.verify, "sofic input");
  ApproxCertificate r(c.group, Family::lin(c.family.degree, field), 0.25, c.n);
  for (std::size_t i = 0; i < c.size(); ++i)
    r.assign(c.elements[i], perm_to_rank(std::get<Permutation>(c.targets[i]), field));
  r.provenance = construction_trace("perm_to_lin", {{"field", field.name()}}, c.n, r.epsilon, r.dimension(),
                                    {input_record(c)});
  return finalize(std::move(r), opt.verify);
}

int amplification_power(int n) {
  if (n < 1) throw ConstructionError("amplification needs n >= 1");
  const double nd = n;
  const double delta = std::sqrt(2.0) / (20 * nd) - 1.0 / (200 * nd * nd);
  return static_cast<int>(std::ceil(std::log(1.0 / delta) / std::log(5.0 / 4.0)));
}

ApproxCertificate amplify_projective(const ApproxCertificate& c, int n, const BuildOptions& opt) {
  const int threshold = static_cast<int>(std::ceil(1.0 / (4.0 * std::sqrt(2.0) / 5.0 - 1.0)));
  if (n < threshold)
    throw ConstructionError("amplification needs n >= " + std::to_string(threshold) + ", got " + std::to_string(n));
  if (c.family.tag != Family::Tag::Hyp) throw ConstructionError("amplify_projective needs a unitary certificate");
  if (c.n < 40 * n)
    throw ConstructionError("amplify_projective at n = " + std::to_string(n) + " needs an input at radius " +
                            std::to_string(40 * n));
  require_pass(c, opt.verify, "unitary input");
  const int l = amplification_power(n);
  const std::size_t k = c.family.degree;
  ApproxCertificate r(c.group, Family::tensor(2 * k, l), std::sqrt(2.0), n);
  for (const auto& g : ball(c.group, n, opt.verify.ball_cap).elements)
    r.assign(g, tensor_amplify(std::get<UnitaryMatrix>(c.image(g)), l));
  r.provenance = construction_trace("amplify_projective", {{"power", l}, {"base_dimension", 2 * k}}, n, r.epsilon,
                                    r.dimension(), {input_record(c)});
  return finalize(std::move(r), opt.verify);
}

}  // namespace mprof
