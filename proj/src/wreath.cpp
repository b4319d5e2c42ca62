#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "construct_util.hpp"
#include "mprof/construct.hpp"

namespace mprof {

namespace {

using detail::WreathParts;

// Indexes H/N by the table order of FiniteMetricGroup::from_quotient.
struct CosetIndex {
  std::vector<Element> elements;
  std::unordered_map<Element, std::uint32_t, ElementHash> index;

  explicit CosetIndex(const QuotientDescriptor& q) : elements(enumerate_finite(Group::quotient(q))) {
    for (std::size_t i = 0; i < elements.size(); ++i) index.emplace(elements[i], static_cast<std::uint32_t>(i));
  }
  std::uint32_t of(const QuotientDescriptor& q, const Element& h) const { return index.at(q.map(h)); }
  std::size_t size() const { return elements.size(); }
};

void require_kernel_avoids(const QuotientDescriptor& q, int radius, std::size_t cap) {
  const Group& h = q.parent();
  for (const auto& x : ball(h, radius, cap).elements)
    if (!h.is_identity(x) && q.in_kernel(x))
      throw ConstructionError("kernel meets B_H(" + std::to_string(radius) + ") at " + h.format(x));
}

// x̂ on H/N: the product of the values of x over each coset, in support order.
std::vector<std::optional<Element>> fold(const Group& g, const QuotientDescriptor& q, const CosetIndex& cosets,
                                         const WreathParts& w) {
  std::vector<std::optional<Element>> out(cosets.size());
  for (const auto& [p, x] : w.support) {
    auto& slot = out[cosets.of(q, p)];
    slot = slot ? g.multiply(*slot, x) : x;
  }
  return out;
}

}  // namespace

ApproxCertificate wreath_by_rf(const ApproxCertificate& c_g, const QuotientDescriptor& q, int n,
                               const BuildOptions& opt) {
  if (n < 1) throw ConstructionError("wreath_by_rf needs n >= 1");
  if (c_g.n < n) throw ConstructionError("c_G must cover B_G(" + std::to_string(n) + ")");
  const Group& h = q.parent();
  require_kernel_avoids(q, 4 * n, opt.verify.ball_cap);

  auto top = FiniteMetricGroup::from_quotient(q);
  CosetIndex cosets(q);
  // Coset kN ↦ the unique k' ∈ B_H(n) ∩ kN.
  std::vector<std::optional<Element>> rep(cosets.size());
  for (const auto& k : ball(h, n, opt.verify.ball_cap).elements) {
    auto& r = rep[cosets.of(q, k)];
    if (r) throw ConstructionError("B_H(n) meets a coset twice");
    r = k;
  }

  const Family fam = Family::wreath(c_g.family, top);
  Group w = Group::wreath(c_g.group, h);
  auto c = ApproxCertificate::build(w, fam, 1.0, n, [&](const Element& x) -> TargetElement {
    WreathParts parts = detail::split_wreath(x);
    WreathElement e;
    e.top_group = top;
    e.top = cosets.of(q, parts.top);
    e.base.assign(cosets.size(), c_g.family.identity());
    for (const auto& [p, v] : parts.support) {
      const auto coset = cosets.of(q, p);
      if (!rep[coset] || !(*rep[coset] == p)) throw ConstructionError("support of " + w.format(x) + " leaves B_H(n)");
      auto k = c_g.find(v);
      if (!k) throw ConstructionError("c_G has no image for " + c_g.group.format(v));
      e.base[coset] = c_g.targets[*k];
    }
    return e;
  });
  c.provenance = construction_trace("wreath_by_rf", {{"quotient", q.to_json()}, {"index", cosets.size()}}, n,
                                    c.epsilon, c.dimension(), {{{"group", c_g.group.name()}, {"n", c_g.n}}});
  return detail::finalize(std::move(c), opt.verify);
}

json WreathLemmaReport::to_json() const {
  return {{"eps", eps},
          {"ball_top", ball_top},
          {"bullet_mult", bullet_mult},
          {"bullet_mult_bound", bullet_mult_bound},
          {"bullet_top", bullet_top},
          {"bullet_left", bullet_left},
          {"bullet_right", bullet_right},
          {"defect", defect},
          {"min_separation", min_separation},
          {"mult_threshold", mult_threshold},
          {"inj_threshold", inj_threshold},
          {"pass", pass}};
}

namespace {

// Ψ(x,y)(f,b) = (f', ȳb) with f'(β) = θ(x̂(ȳbβ))·f(β), points indexed code(f)·|B| + b.
class WreathRepresentation {
 public:
  WreathRepresentation(const ApproxCertificate& c_g, const QuotientDescriptor& q, const BuildOptions& opt)
      : c_g_(c_g), q_(q), cosets_(q), k_(c_g.family.degree), beta_(cosets_.size()) {
    double dim = std::pow(static_cast<double>(k_), static_cast<double>(beta_)) * static_cast<double>(beta_);
    const bool sofic = c_g.family.tag == Family::Tag::Sofic;
    const double cap = sofic ? static_cast<double>(std::max<std::size_t>(opt.dimension_cap, 1u << 22))
                             : static_cast<double>(opt.dimension_cap);
    if (dim > cap) throw CapacityError("wreath representation of dimension " + std::to_string(dim) + " exceeds cap");
    dim_ = static_cast<std::size_t>(dim);
    switch (c_g.family.tag) {
      case Family::Tag::Sofic: family_ = Family::sofic(dim_); break;
      case Family::Tag::Hyp: family_ = Family::hyp(dim_); break;
      case Family::Tag::Lin: family_ = Family::lin(dim_, c_g.family.field); break;
      default: throw ConstructionError("wreath_sofic supports sofic, hyp and lin inputs");
    }
  }

  const Family& family() const { return family_; }
  std::size_t beta() const { return beta_; }

  TargetElement image(const WreathParts& w) const {
    auto xhat = fold(c_g_.group, q_, cosets_, w);
    std::vector<TargetElement> theta(beta_);
    for (std::size_t c = 0; c < beta_; ++c) theta[c] = xhat[c] ? lookup(*xhat[c]) : c_g_.family.identity();
    const std::uint32_t y = cosets_.of(q_, w.top);
    const FiniteMetricGroup& table = *cosets_table();
    // factor[b][β] = θ(x̂(ȳbβ))
    auto factor = [&](std::uint32_t b, std::uint32_t beta) -> const TargetElement& {
      return theta[table.mul(table.mul(y, b), beta)];
    };
    switch (family_.tag) {
      case Family::Tag::Sofic: {
        std::vector<std::uint32_t> im(dim_);
        const std::size_t codes = dim_ / beta_;
        std::vector<std::uint32_t> digits(beta_);
        for (std::size_t code = 0; code < codes; ++code) {
          std::size_t rest = code;
          for (std::size_t j = 0; j < beta_; ++j) {
            digits[j] = static_cast<std::uint32_t>(rest % k_);
            rest /= k_;
          }
          for (std::uint32_t b = 0; b < beta_; ++b) {
            std::size_t out = 0, place = 1;
            for (std::uint32_t j = 0; j < beta_; ++j) {
              out += place * std::get<Permutation>(factor(b, j))(digits[j]);
              place *= k_;
            }
            im[code * beta_ + b] = static_cast<std::uint32_t>(out * beta_ + table.mul(y, b));
          }
        }
        return Permutation(std::move(im));
      }
      case Family::Tag::Hyp: {
        std::vector<Eigen::Triplet<Complex>> t;
        for (std::uint32_t b = 0; b < beta_; ++b) {
          UnitaryMatrix kr = std::get<UnitaryMatrix>(factor(b, static_cast<std::uint32_t>(beta_ - 1)));
          for (std::size_t j = beta_ - 1; j-- > 0;)
            kr = kronecker(kr, std::get<UnitaryMatrix>(factor(b, static_cast<std::uint32_t>(j))));
          const std::size_t yb = table.mul(y, b);
          for (Eigen::Index r = 0; r < kr.m.outerSize(); ++r)
            for (SparseC::InnerIterator it(kr.m, r); it; ++it)
              t.emplace_back(static_cast<Eigen::Index>(static_cast<std::size_t>(it.row()) * beta_ + yb),
                             static_cast<Eigen::Index>(static_cast<std::size_t>(it.col()) * beta_ + b), it.value());
        }
        UnitaryMatrix u;
        u.m.resize(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        u.m.setFromTriplets(t.begin(), t.end());
        return u;
      }
      default: {
        RankMatrix out = RankMatrix::identity(dim_, family_.field);
        for (std::uint32_t b = 0; b < beta_; ++b) {
          RankMatrix kr = std::get<RankMatrix>(factor(b, static_cast<std::uint32_t>(beta_ - 1)));
          for (std::size_t j = beta_ - 1; j-- > 0;)
            kr = kronecker(kr, std::get<RankMatrix>(factor(b, static_cast<std::uint32_t>(j))));
          const std::size_t yb = table.mul(y, b);
          for (std::size_t r = 0; r < kr.n; ++r) {
            SparseRow row;
            for (const auto& [col, v] : kr.rows[r])
              row.emplace_back(static_cast<std::uint32_t>(col * beta_ + b), v);
            out.rows[r * beta_ + yb] = std::move(row);
          }
        }
        return out;
      }
    }
  }

 private:
  const TargetElement& lookup(const Element& g) const {
    auto k = c_g_.find(g);
    if (!k) throw ConstructionError("c_G has no image for " + c_g_.group.format(g));
    return c_g_.targets[*k];
  }
  std::shared_ptr<const FiniteMetricGroup> cosets_table() const {
    if (!table_) table_ = FiniteMetricGroup::from_quotient(q_);
    return table_;
  }

  const ApproxCertificate& c_g_;
  const QuotientDescriptor& q_;
  CosetIndex cosets_;
  std::size_t k_, beta_, dim_ = 0;
  Family family_;
  mutable std::shared_ptr<const FiniteMetricGroup> table_;
};

// Largest defect and (1 − smallest separation) of a certificate, as a single ε.
std::pair<double, double> measured_eps(const ApproxCertificate& c, const VerifyOptions& opt) {
  VerificationReport r = verify_D(c, opt);
  double sep = r.min_separation ? r.min_separation->value : 1.0;
  return {r.worst_defect.value, std::max(r.worst_defect.value, 1.0 - sep)};
}

// Functions with support in B_H(n) and values in B_G(n): all of them, or a seeded sample.
std::vector<WreathParts> small_functions(const Group& g, const Group& h, int n, std::size_t limit,
                                         std::size_t cap) {
  Ball bg = ball(g, n, cap), bh = ball(h, n, cap);
  const double total = std::pow(static_cast<double>(bg.size()), static_cast<double>(bh.size()));
  std::vector<WreathParts> out;
  auto make = [&](const std::vector<std::size_t>& choice) {
    WreathParts w;
    w.top = h.identity();
    for (std::size_t i = 0; i < bh.size(); ++i)
      if (choice[i] != 0) w.support.emplace_back(bh.elements[i], bg.elements[choice[i]]);
    std::sort(w.support.begin(), w.support.end());
    return w;
  };
  std::vector<std::size_t> choice(bh.size(), 0);
  if (total <= static_cast<double>(limit)) {
    while (true) {
      out.push_back(make(choice));
      std::size_t i = 0;
      while (i < choice.size() && ++choice[i] == bg.size()) choice[i++] = 0;
      if (i == choice.size()) break;
    }
    return out;
  }
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, bg.size() - 1);
  for (std::size_t s = 0; s < limit; ++s) {
    for (auto& c : choice) c = pick(rng);
    out.push_back(make(choice));
  }
  return out;
}

WreathParts multiply_parts(const Group& w, const WreathParts& a, const WreathParts& b) {
  return detail::split_wreath(w.multiply(detail::join_wreath(a), detail::join_wreath(b)));
}

}  // namespace

WreathSoficResult wreath_sofic(const ApproxCertificate& c_g, const QuotientDescriptor& q, int n,
                               const BuildOptions& opt) {
  if (n < 1) throw ConstructionError("wreath_sofic needs n >= 1");
  if (c_g.n < 4 * n) throw ConstructionError("c_G must cover B_G(" + std::to_string(4 * n) + ")");
  const Group& g = c_g.group;
  const Group& h = q.parent();
  const std::size_t cap = opt.verify.ball_cap;
  require_kernel_avoids(q, 2 * n, cap);

  WreathRepresentation psi(c_g, q, opt);
  const Family& fam = psi.family();
  Group w = Group::wreath(g, h);
  const bool hyp = fam.tag == Family::Tag::Hyp;

  WreathLemmaReport lemma;
  // Input ε on B(4n): θ from c_G, σ from the left-regular action of H/N.
  auto [delta_g, eps_g] = measured_eps(detail::restrict_to(c_g, 4 * n, cap), opt.verify);
  auto sigma = quotient_representation(h, q, 4 * n, Family::Tag::Sofic);
  auto [delta_h, eps_h] = measured_eps(sigma, opt.verify);
  lemma.eps = std::max(eps_g, eps_h);
  lemma.ball_top = sigma.size();
  const std::size_t ball_n = ball(h, n, cap).size();

  auto dist = [&](const TargetElement& a, const TargetElement& b) { return fam.mult_distance(a, b).value; };
  auto mul = [](const TargetElement& a, const TargetElement& b) { return target_multiply(a, b); };
  auto top_only = [&](const Element& y) { return WreathParts{{}, y}; };
  auto base_only = [&](const WreathParts& x) { return WreathParts{x.support, h.identity()}; };
  const double tol = opt.verify.margin;

  auto functions = small_functions(g, h, n, 512, cap);
  std::vector<TargetElement> base_img;
  base_img.reserve(functions.size());
  for (const auto& x : functions) base_img.push_back(psi.image(x));

  // Ψ(xy,1) against Ψ(x,1)Ψ(y,1).
  lemma.bullet_mult_bound = static_cast<double>(ball_n) * delta_g;
  for (std::size_t i = 0; i < functions.size(); ++i)
    for (std::size_t j = 0; j < functions.size(); ++j) {
      auto xy = multiply_parts(w, functions[i], functions[j]);
      lemma.bullet_mult = std::max(lemma.bullet_mult, dist(psi.image(base_only(xy)), mul(base_img[i], base_img[j])));
    }
  // Ψ(1,x)Ψ(1,y) against Ψ(1,xy).
  Ball bh = ball(h, n, cap);
  for (const auto& x : bh.elements)
    for (const auto& y : bh.elements)
      lemma.bullet_top = std::max(lemma.bullet_top, dist(mul(psi.image(top_only(x)), psi.image(top_only(y))),
                                                         psi.image(top_only(h.multiply(x, y)))));
  // Ψ(x,1)Ψ(1,y) = Ψ(x,y) and Ψ(1,y)Ψ(x,1) = Ψ(y·x, y).
  for (std::size_t i = 0; i < functions.size(); ++i)
    for (const auto& y : bh.elements) {
      const TargetElement ty = psi.image(top_only(y));
      WreathParts xy{functions[i].support, y};
      if (dist(mul(base_img[i], ty), psi.image(xy)) != 0) lemma.bullet_left = false;
      WreathParts yx = multiply_parts(w, top_only(y), functions[i]);
      if (dist(mul(ty, base_img[i]), psi.image(yx)) != 0) lemma.bullet_right = false;
    }

  ApproxCertificate c(w, fam, c_g.epsilon, n);
  for (const auto& x : ball(w, n, cap).elements) c.assign(x, psi.image(detail::split_wreath(x)));
  c.provenance = construction_trace("wreath_sofic", {{"quotient", q.to_json()}, {"top_size", psi.beta()}}, n,
                                    c.epsilon, c.dimension(), {{{"group", g.name()}, {"n", c_g.n}}});
  VerificationReport r = verify_D(c, opt.verify);
  lemma.defect = r.worst_defect.value;
  lemma.min_separation = r.min_separation ? r.min_separation->value : 1.0;
  const double scale = hyp ? std::sqrt(lemma.eps) : lemma.eps;
  const auto b4 = static_cast<double>(lemma.ball_top), b1 = static_cast<double>(ball_n);
  lemma.mult_threshold = 48 * b4 * b4 * scale;
  lemma.inj_threshold = 1 - 48 * b1 * b1 * scale;
  lemma.pass = lemma.bullet_mult <= lemma.bullet_mult_bound + tol && lemma.bullet_top <= delta_h + tol &&
               lemma.bullet_left && lemma.bullet_right && lemma.defect <= lemma.mult_threshold + tol &&
               lemma.min_separation + tol >= lemma.inj_threshold;
  c.provenance["lemma"] = lemma.to_json();
  if (!r.pass) throw VerificationFailure(r);
  if (!lemma.pass) throw ConstructionError("wreath lemma postconditions fail: " + lemma.to_json().dump());
  c.provenance["verification"] = r.to_json();
  return {std::move(c), lemma};
}

}  // namespace mprof
