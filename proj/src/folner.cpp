#include <unordered_map>
#include <unordered_set>

#include "construct_util.hpp"
#include "mprof/construct.hpp"

namespace mprof {

mpq_class folner_defect(const Group& g, const std::vector<Element>& set, int n, std::size_t cap) {
  if (n < 1) throw std::invalid_argument("Folner condition needs n >= 1");
  if (set.empty()) throw std::invalid_argument("Folner set must be nonempty");
  std::unordered_set<Element, ElementHash> a(set.begin(), set.end());
  unsigned long sum = 0;
  for (const auto& x : ball(g, n, cap).elements) {
    std::size_t kept = 0;
    for (const auto& e : a) kept += a.count(g.multiply(x, e));
    sum += 2 * (a.size() - kept);
  }
  return ratio(static_cast<long>(sum), a.size());
}

FolnerWitness make_folner_witness(const Group& g, std::vector<Element> set, int n, std::optional<int> radius_bound) {
  std::unordered_set<Element, ElementHash> seen;
  std::vector<Element> unique;
  for (auto& e : set) {
    g.validate(e);
    if (seen.insert(e).second) unique.push_back(std::move(e));
  }
  FolnerWitness w{g, n, std::move(unique), 0, radius_bound};
  w.defect = folner_defect(g, w.set, n);
  return w;
}

bool FolnerWitness::valid(std::size_t cap) const {
  if (n < 1 || set.empty()) return false;
  if (defect > mpq_class(1, static_cast<unsigned long>(n))) return false;
  if (!radius_bound) return true;
  if (set.size() > static_cast<std::size_t>(*radius_bound)) return false;
  Ball b = ball(group, *radius_bound, cap);
  for (const auto& e : set)
    if (!b.contains(e)) return false;
  return true;
}

json FolnerWitness::to_json() const {
  json s = json::array();
  for (const auto& e : set) s.push_back(e.v);
  json j = {{"group", group.to_json()}, {"n", n}, {"set", s}, {"defect", defect.get_str()}};
  if (radius_bound) j["radius_bound"] = *radius_bound;
  return j;
}

FolnerWitness FolnerWitness::from_json(const json& j) {
  std::vector<Element> set;
  for (const auto& e : j.at("set")) set.emplace_back(e.get<std::vector<Int>>());
  std::optional<int> k;
  if (j.contains("radius_bound")) k = j.at("radius_bound").get<int>();
  FolnerWitness w = make_folner_witness(Group::from_json(j.at("group")), std::move(set), j.at("n").get<int>(), k);
  if (j.contains("defect") && mpq_class(j.at("defect").get<std::string>()) != w.defect)
    throw std::invalid_argument("recorded Folner defect does not match the set");
  return w;
}

namespace {

// π(a) = target(a) where defined; the rest matched in set order.
Permutation complete(std::vector<std::int64_t> partial) {
  const std::size_t k = partial.size();
  std::vector<char> hit(k, 0);
  for (auto t : partial)
    if (t >= 0) hit[static_cast<std::size_t>(t)] = 1;
  std::size_t free_target = 0;
  std::vector<std::uint32_t> im(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (partial[i] >= 0) {
      im[i] = static_cast<std::uint32_t>(partial[i]);
      continue;
    }
    while (hit[free_target]) ++free_target;
    hit[free_target] = 1;
    im[i] = static_cast<std::uint32_t>(free_target);
  }
  return Permutation(std::move(im));
}

}  // namespace

ApproxCertificate folner_to_sofic(const FolnerWitness& w, std::optional<int> n_opt, const BuildOptions& opt) {
  const int n = n_opt.value_or(w.n / 2);
  if (n < 1) throw ConstructionError("folner_to_sofic needs n >= 1");
  if (w.n < 2 * n)
    throw ConstructionError("witness is at radius " + std::to_string(w.n) + ", needs " + std::to_string(2 * n));
  if (!w.valid(opt.verify.ball_cap)) throw ConstructionError("invalid Folner witness: defect " + w.defect.get_str());
  const std::size_t k = w.set.size();
  std::unordered_map<Element, std::int64_t, ElementHash> idx;
  for (std::size_t i = 0; i < k; ++i) idx.emplace(w.set[i], static_cast<std::int64_t>(i));
  auto c = ApproxCertificate::build(w.group, Family::sofic(k), 1.0, n, [&](const Element& g) -> TargetElement {
    std::vector<std::int64_t> partial(k, -1);
    for (std::size_t i = 0; i < k; ++i)
      if (auto it = idx.find(w.group.multiply(g, w.set[i])); it != idx.end()) partial[i] = it->second;
    return complete(std::move(partial));
  });
  c.provenance = construction_trace("folner_to_sofic", {{"witness_n", w.n}, {"defect", w.defect.get_str()}}, n,
                                    1.0, c.dimension());
  return detail::finalize(std::move(c), opt.verify);
}

AmenableExtension plane_over_line() {
  AmenableExtension e{SubgroupData::sublattice(2, {{1, 0}}), Group::free_abelian(1), {}, {}};
  e.project = [](const Element& g) { return Element{g.v[1]}; };
  e.section = [](const Element& q) { return Element{0, q.v[0]}; };
  return e;
}

namespace {

struct ExtensionData {
  std::vector<Element> lifts;  // σ(q) for q in the witness set
  std::unordered_map<Element, std::int64_t, ElementHash> index;
};

ExtensionData lift_witness(const FolnerWitness& w, const AmenableExtension& ext, int n, std::size_t cap) {
  if (!w.group.same_as(ext.quotient)) throw ConstructionError("witness is not for the quotient group");
  std::vector<Element> check = w.set;
  for (const auto& q : ball(ext.quotient, n, cap).elements) check.push_back(q);
  for (const auto& q : check)
    if (!(ext.project(ext.section(q)) == q))
      throw ConstructionError("section is not a right inverse at " + ext.quotient.format(q));
  ExtensionData d;
  for (std::size_t i = 0; i < w.set.size(); ++i) {
    d.lifts.push_back(ext.section(w.set[i]));
    d.index.emplace(w.set[i], static_cast<std::int64_t>(i));
  }
  return d;
}

// Target index of g·a and the N-part σ(‾(ga))⁻¹·g·a, or -1 when ‾(ga) leaves the set.
std::pair<std::int64_t, std::optional<Element>> step(const AmenableExtension& ext, const ExtensionData& d,
                                                     const Element& g, const Element& a) {
  const Group& G = ext.normal.parent;
  Element ga = G.multiply(g, a);
  auto it = d.index.find(ext.project(ga));
  if (it == d.index.end()) return {-1, std::nullopt};
  Element nval = G.multiply(G.inverse(d.lifts[static_cast<std::size_t>(it->second)]), ga);
  auto h = ext.normal.preimage(nval);
  if (!h) throw ConstructionError("projection and section disagree at " + G.format(ga));
  return {it->second, h};
}

}  // namespace

int extension_radius(const FolnerWitness& w, const AmenableExtension& ext, int n) {
  auto d = lift_witness(w, ext, n, kDefaultBallCap);
  int r = 0;
  for (const auto& g : ball(ext.normal.parent, n).elements)
    for (const auto& a : d.lifts) {
      auto [j, h] = step(ext, d, g, a);
      if (j < 0) continue;
      auto len = word_length(ext.normal.intrinsic, *h, 1 << 16);
      if (!len) throw CapacityError("cocycle value too long");
      r = std::max(r, *len);
    }
  return std::max(r, 1);
}

ApproxCertificate extend_by_amenable(const ApproxCertificate& c_n, const FolnerWitness& w,
                                     const AmenableExtension& ext, int n, const BuildOptions& opt) {
  if (n < 1) throw ConstructionError("extend_by_amenable needs n >= 1");
  if (!c_n.group.same_as(ext.normal.intrinsic)) throw ConstructionError("c_N certifies another group");
  if (!w.radius_bound) throw ConstructionError("extend_by_amenable needs a controlled witness");
  if (w.n < 10 * n) throw ConstructionError("witness must be valid at " + std::to_string(10 * n));
  if (!w.valid(opt.verify.ball_cap)) throw ConstructionError("invalid Folner witness: defect " + w.defect.get_str());
  const ExtensionData d = lift_witness(w, ext, n, opt.verify.ball_cap);
  const std::size_t k = d.lifts.size();

  auto c = ApproxCertificate::build(
      ext.normal.parent, Family::perm_wreath(c_n.family, k), 1.0, n, [&](const Element& g) -> TargetElement {
        std::vector<std::int64_t> partial(k, -1);
        PermWreathElement e;
        e.b.assign(k, c_n.family.identity());
        for (std::size_t i = 0; i < k; ++i) {
          auto [j, h] = step(ext, d, g, d.lifts[i]);
          if (j < 0) continue;
          partial[i] = j;
          auto t = c_n.find(*h);
          if (!t)
            throw ConstructionError("c_N has no image for " + ext.normal.intrinsic.format(*h) +
                                    "; needs radius " + std::to_string(extension_radius(w, ext, n)));
          e.b[i] = c_n.targets[*t];
        }
        e.sigma = complete(std::move(partial));
        return e;
      });
  c.provenance = construction_trace("extend_by_amenable",
                                    {{"subgroup", ext.normal.description}, {"witness_n", w.n},
                                     {"radius_bound", *w.radius_bound}},
                                    n, 1.0, c.dimension(), {{{"group", c_n.group.name()}, {"n", c_n.n}}});
  return detail::finalize(std::move(c), opt.verify);
}

}  // namespace mprof
