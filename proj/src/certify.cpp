#include "mprof/certify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

namespace mprof {

namespace {

// σ with u = perm_to_unitary(σ), or nullopt when u is not a permutation matrix.
std::optional<std::vector<std::uint32_t>> permutation_matrix_images(const UnitaryMatrix& u) {
  const std::size_t k = u.size();
  std::vector<std::uint32_t> p(k, 0);
  std::vector<char> hit(k, 0);
  for (Eigen::Index r = 0; r < u.m.outerSize(); ++r) {
    int entries = 0;
    for (SparseC::InnerIterator it(u.m, r); it; ++it) {
      if (it.value() == Complex(0, 0)) continue;
      if (it.value() != Complex(1, 0) || ++entries > 1) return std::nullopt;
      auto c = static_cast<std::size_t>(it.col());
      if (hit[c]) return std::nullopt;
      hit[c] = 1;
      p[c] = static_cast<std::uint32_t>(r);
    }
    if (entries != 1) return std::nullopt;
  }
  return p;
}

int compare(const Distance& a, const Distance& b) {
  if (a.exact && b.exact) {
    if (*a.exact < *b.exact) return -1;
    return *a.exact > *b.exact ? 1 : 0;
  }
  if (a.value < b.value) return -1;
  return a.value > b.value ? 1 : 0;
}

json distance_json(const Distance& d) {
  json j = {{"value", d.value}};
  if (d.exact) j["exact"] = d.exact->get_str();
  return j;
}

// Largest (or smallest) distance with the lexicographically first index pair on ties.
struct Extremum {
  bool want_max = true;
  std::optional<Distance> best;
  std::size_t i = 0, j = 0;

  void offer(const Distance& d, std::size_t a, std::size_t b) {
    if (!best) {
      best = d;
      i = a;
      j = b;
      return;
    }
    int c = compare(d, *best);
    if (!want_max) c = -c;
    if (c > 0 || (c == 0 && std::pair(a, b) < std::pair(i, j))) {
      best = d;
      i = a;
      j = b;
    }
  }
  void merge(const Extremum& o) {
    if (o.best) offer(*o.best, o.i, o.j);
  }
};

// Integer moved-point counts, ties broken by the smaller index pair.
struct CountExtremum {
  bool want_max = true;
  bool seen = false;
  unsigned long best = 0;
  std::size_t i = 0, j = 0;
  void offer(unsigned long c, std::size_t a, std::size_t b) {
    if (!seen || (want_max ? c > best : c < best) || (c == best && std::pair(a, b) < std::pair(i, j))) {
      seen = true;
      best = c;
      i = a;
      j = b;
    }
  }
};

// Right multiplication by letters on B(2n), with a BFS parent for each element of B(n).
// Row i of the product table is then a walk along parents in O(|B(n)|).
struct ProductWalk {
  std::vector<std::int32_t> right;  // |B(2n)| × letters, -1 outside B(2n)
  std::vector<std::int32_t> parent, letter;
  std::size_t letters = 0, m = 0;

  static std::optional<ProductWalk> build(const Group& g, const Ball& b, std::size_t cap) {
    Ball big;
    try {
      big = ball(g, 2 * b.radius, cap);
    } catch (const CapacityError&) {
      return std::nullopt;
    }
    ProductWalk w;
    w.m = b.size();
    w.letters = 2 * g.rank();
    std::vector<Element> gens;
    for (std::size_t a = 0; a < w.letters; ++a) gens.push_back(g.letter_element(static_cast<Letter>(a)));
    w.right.assign(big.size() * w.letters, -1);
    for (std::size_t x = 0; x < big.size(); ++x)
      for (std::size_t a = 0; a < w.letters; ++a)
        if (auto y = big.find(g.multiply(big.elements[x], gens[a]))) w.right[x * w.letters + a] = static_cast<std::int32_t>(*y);
    w.parent.assign(w.m, -1);
    w.letter.assign(w.m, -1);
    for (std::size_t x = 0; x < w.m; ++x)
      for (std::size_t a = 0; a < w.letters; ++a) {
        const std::int32_t y = w.right[x * w.letters + a];
        if (y > 0 && static_cast<std::size_t>(y) < w.m && w.parent[y] < 0 && b.lengths[y] == b.lengths[x] + 1) {
          w.parent[y] = static_cast<std::int32_t>(x);
          w.letter[y] = static_cast<std::int32_t>(a);
        }
      }
    return w;
  }

  // row[j] = index of g_i g_j in B(n), or -1.
  void row(std::size_t i, std::vector<std::int32_t>& pos, std::vector<std::int32_t>& out) const {
    pos[0] = static_cast<std::int32_t>(i);
    for (std::size_t j = 1; j < m; ++j) pos[j] = right[static_cast<std::size_t>(pos[parent[j]]) * letters + letter[j]];
    for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<std::size_t>(pos[j]) < m ? pos[j] : -1;
  }
};

template <class Fn>
void for_rows(std::size_t rows, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(rows, 1))));
  if (workers == 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(0u, r);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t r = w; r < rows; r += workers) fn(w, r);
    });
  for (auto& t : pool) t.join();
}

bool below(const Distance& d, const mpq_class& exact_bound, double bound, bool exact, double margin) {
  if (exact && d.exact) return *d.exact < exact_bound;
  return d.value < bound - margin;
}

bool above(const Distance& d, const mpq_class& exact_bound, double bound, bool exact, double margin) {
  if (exact && d.exact) return *d.exact > exact_bound;
  return d.value > bound + margin;
}

std::string letters_of(const Group& g, Letter a) { return g.letter_label(a); }

}  // namespace

// ---- certificates ----

void ApproxCertificate::assign(const Element& g, TargetElement t) {
  if (auto it = index_.find(g); it != index_.end()) {
    targets[it->second] = std::move(t);
    return;
  }
  index_.emplace(g, elements.size());
  elements.push_back(g);
  targets.push_back(std::move(t));
}

std::optional<std::size_t> ApproxCertificate::find(const Element& g) const {
  auto it = index_.find(g);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TargetElement ApproxCertificate::image(const Element& g) const {
  if (auto k = find(g)) return targets[*k];
  return family.identity();
}

json ApproxCertificate::to_json() const {
  json a = json::array();
  for (std::size_t i = 0; i < elements.size(); ++i)
    a.push_back({{"element", group.format(elements[i])}, {"target", family.element_to_json(targets[i])}});
  return {{"group", group.to_json()},         {"family", family.to_json()},
          {"epsilon", epsilon},               {"n", n},
          {"dimension", dimension().to_json()}, {"assignments", a},
          {"provenance", provenance}};
}

ApproxCertificate ApproxCertificate::from_json(const json& j, std::size_t cap) {
  ApproxCertificate c(Group::from_json(j.at("group")), Family::from_json(j.at("family")),
                      j.at("epsilon").get<double>(), j.at("n").get<int>());
  if (c.n < 0) throw CertificateError("negative radius");
  if (j.contains("dimension") && !(Dimension::from_json(j.at("dimension")) == c.dimension()))
    throw CertificateError("dimension " + Dimension::from_json(j.at("dimension")).to_string() +
                           " does not match the family dimension " + c.dimension().to_string());
  if (j.contains("provenance")) c.provenance = j.at("provenance");
  Ball b = ball(c.group, c.n, cap);
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < b.size(); ++i) by_name.emplace(c.group.format(b.elements[i]), i);
  for (const auto& a : j.at("assignments")) {
    const auto name = a.at("element").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CertificateError("assignment for " + name + " lies outside B(n)");
    const Element& g = b.elements[it->second];
    if (c.find(g)) throw CertificateError("duplicate assignment for " + name);
    c.assign(g, c.family.element_from_json(a.at("target")));
  }
  return c;
}

TargetElement HomCertificate::letter_image(Letter a) const {
  const auto i = static_cast<std::size_t>(a / 2);
  if (a < 0 || i >= images.size()) throw CertificateError("letter without an image");
  return (a & 1) ? target_inverse(images[i]) : images[i];
}

TargetElement HomCertificate::evaluate(const Word& w) const {
  TargetElement r = family.identity();
  for (Letter a : w) r = target_multiply(r, letter_image(a));
  return r;
}

std::string format_word(const Group& g, const Word& w) {
  if (w.empty()) return "e";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    s += letters_of(g, w[i]);
  }
  return s;
}

Word parse_word(const Group& g, const std::string& text) {
  std::unordered_map<std::string, Letter> by_label;
  for (Letter a = 0; a < static_cast<Letter>(2 * g.rank()); ++a) by_label.emplace(g.letter_label(a), a);
  Word w;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) {
    if (tok == "e") continue;
    auto it = by_label.find(tok);
    if (it == by_label.end()) throw std::invalid_argument("unknown generator label '" + tok + "'");
    w.push_back(it->second);
  }
  return w;
}

json HomCertificate::to_json() const {
  json im = json::array();
  for (std::size_t i = 0; i < images.size(); ++i)
    im.push_back({{"generator", group.generators().at(i).label}, {"target", family.element_to_json(images[i])}});
  json rel = json::array();
  for (const auto& r : relators) rel.push_back(format_word(group, r));
  return {{"group", group.to_json()}, {"family", family.to_json()}, {"epsilon", epsilon},
          {"images", im},             {"relators", rel},            {"provenance", provenance}};
}

HomCertificate HomCertificate::from_json(const json& j) {
  HomCertificate h(Group::from_json(j.at("group")), Family::from_json(j.at("family")), j.at("epsilon").get<double>());
  const auto& gens = h.group.generators();
  const auto& im = j.at("images");
  if (im.size() != gens.size()) throw CertificateError("one image per generator required");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    if (im[i].at("generator").get<std::string>() != gens[i].label)
      throw CertificateError("images must follow the generator order");
    h.images.push_back(h.family.element_from_json(im[i].at("target")));
  }
  if (j.contains("relators"))
    for (const auto& r : j.at("relators")) h.relators.push_back(parse_word(h.group, r.get<std::string>()));
  if (j.contains("provenance")) h.provenance = j.at("provenance");
  return h;
}

namespace {

Word commutator(Word a, Word b) {
  Word w = a;
  w.insert(w.end(), b.begin(), b.end());
  Word ai = inverse_word(a), bi = inverse_word(b);
  w.insert(w.end(), ai.begin(), ai.end());
  w.insert(w.end(), bi.begin(), bi.end());
  return w;
}

Word shifted(const Word& w, Letter offset) {
  Word r;
  for (Letter a : w) r.push_back(a + offset);
  return r;
}

}  // namespace

std::vector<Word> default_relators(const Group& g) {
  std::vector<Word> out;
  const auto rank = static_cast<Letter>(g.rank());
  switch (g.kind()) {
    case GroupKind::Free:
      return out;
    case GroupKind::FreeAbelian:
      for (Letter i = 0; i < rank; ++i)
        for (Letter j = i + 1; j < rank; ++j) out.push_back(commutator({2 * i}, {2 * j}));
      return out;
    case GroupKind::FiniteCyclic: {
      if (rank == 0) return out;
      const Int m = g.order().value();
      out.push_back(Word(static_cast<std::size_t>(m), 0));
      return out;
    }
    case GroupKind::Heisenberg: {
      // Generators x_i = letter 4i, y_i = letter 4i + 2; z = [x_1, y_1].
      const Letter l = rank / 2;
      const Word z = commutator({0}, {2});
      for (Letter i = 0; i < l; ++i) {
        out.push_back(commutator(z, {4 * i}));
        out.push_back(commutator(z, {4 * i + 2}));
        if (i > 0) {
          Word w = commutator({4 * i}, {4 * i + 2});
          Word zi = inverse_word(z);
          w.insert(w.end(), zi.begin(), zi.end());
          out.push_back(w);
        }
        for (Letter j = 0; j < l; ++j) {
          if (j > i) {
            out.push_back(commutator({4 * i}, {4 * j}));
            out.push_back(commutator({4 * i + 2}, {4 * j + 2}));
          }
          if (j != i) out.push_back(commutator({4 * i}, {4 * j + 2}));
        }
      }
      return out;
    }
    case GroupKind::DirectProduct: {
      const json desc = g.to_json();
      const auto& f = desc.at("params").at("factors");
      Group a = Group::from_json(f[0]), b = Group::from_json(f[1]);
      const auto off = static_cast<Letter>(2 * a.rank());
      for (auto& w : default_relators(a)) out.push_back(w);
      for (auto& w : default_relators(b)) out.push_back(shifted(w, off));
      for (Letter i = 0; i < static_cast<Letter>(a.rank()); ++i)
        for (Letter j = 0; j < static_cast<Letter>(b.rank()); ++j) out.push_back(commutator({2 * i}, {off + 2 * j}));
      return out;
    }
    default:
      throw std::invalid_argument("no default relators for " + g.name());
  }
}

// ---- reports ----

double VerificationReport::separation_margin() const {
  return min_separation ? min_separation->value - separation_bound : 0.0;
}

json VerificationReport::to_json() const {
  json j;
  j["pass"] = pass;
  j["defect"] = distance_json(worst_defect);
  j["defect"]["bound"] = defect_bound;
  j["defect"]["margin"] = defect_margin();
  j["defect"]["witness"] = defect_witness;
  if (min_separation) {
    j["separation"] = distance_json(*min_separation);
    j["separation"]["margin"] = separation_margin();
  } else {
    j["separation"] = json::object();
  }
  j["separation"]["bound"] = separation_bound;
  j["separation"]["witness"] = separation_witness;
  j["products_checked"] = products_checked;
  j["pairs_checked"] = pairs_checked;
  if (!failure.empty()) j["failure"] = failure;
  return j;
}

// ---- verify_D ----

VerificationReport verify_D(const ApproxCertificate& c, const VerifyOptions& opt) {
  if (c.n < 1) throw CertificateError("radius must be at least 1");
  const Group& g = c.group;
  const Family& fam = c.family;
  Ball b = ball(g, c.n, opt.ball_cap);
  const std::size_t m = b.size();
  std::vector<const TargetElement*> img(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto k = c.find(b.elements[i]);
    if (!k) throw CertificateError("missing assignment for " + g.format(b.elements[i]));
    img[i] = &c.targets[*k];
    try {
      fam.check_member(*img[i]);
    } catch (const std::invalid_argument& e) {
      throw CertificateError("assignment for " + g.format(b.elements[i]) + ": " + e.what());
    }
  }
  if (c.size() != m) throw CertificateError("assignments outside B(n)");

  VerificationReport rep;
  rep.defect_bound = 1.0 / c.n;
  rep.separation_bound = c.epsilon - 1.0 / c.n;
  const unsigned workers = std::max(1u, opt.workers);
  std::vector<Extremum> defect(workers), sep(workers);
  for (auto& s : sep) s.want_max = false;
  std::vector<std::size_t> products(workers, 0);
  std::vector<CountExtremum> count_defect(workers), count_sep(workers);
  for (auto& s : count_sep) s.want_max = false;

  const std::size_t k = fam.degree;
  // Permutations and permutation matrices are compared by counting moved points.
  std::vector<std::vector<std::uint32_t>> lifted;
  std::vector<const std::vector<std::uint32_t>*> perm(m, nullptr);
  bool sofic = fam.tag == Family::Tag::Sofic;
  const bool unitary = fam.tag == Family::Tag::Hyp || fam.tag == Family::Tag::HypProjective;
  if (sofic) {
    for (std::size_t i = 0; i < m; ++i) perm[i] = &std::get<Permutation>(*img[i]).images;
  } else if (unitary) {
    lifted.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      auto p = permutation_matrix_images(std::get<UnitaryMatrix>(*img[i]));
      if (!p) break;
      lifted.push_back(std::move(*p));
    }
    if (lifted.size() == m) {
      sofic = true;
      for (std::size_t i = 0; i < m; ++i) perm[i] = &lifted[i];
    }
  }
  auto count_distance = [&](unsigned long count) {
    if (!unitary) return Distance::of(ratio(static_cast<long>(count), k));
    return Distance::approx(std::sqrt(2.0 * static_cast<double>(count) / static_cast<double>(k)));
  };

  const auto walk = ProductWalk::build(g, b, std::min(opt.ball_cap, 64 * m + 64));
  std::vector<std::vector<std::int32_t>> pos(workers, std::vector<std::int32_t>(walk ? m : 0)),
      row(workers, std::vector<std::int32_t>(walk ? m : 0));
  for_rows(m, workers, [&](unsigned w, std::size_t i) {
    if (walk) walk->row(i, pos[w], row[w]);
    for (std::size_t j = 0; j < m; ++j) {
      std::optional<std::size_t> t;
      if (walk) {
        if (row[w][j] >= 0) t = static_cast<std::size_t>(row[w][j]);
      } else {
        t = b.find(g.multiply(b.elements[i], b.elements[j]));
      }
      if (t) ++products[w];
      if (sofic) {
        const std::uint32_t* pg = perm[i]->data();
        const std::uint32_t* ph = perm[j]->data();
        if (t) {
          const std::uint32_t* pgh = perm[*t]->data();
          std::uint32_t bad = 0;
          for (std::size_t x = 0; x < k; ++x) bad += pg[ph[x]] != pgh[x];
          count_defect[w].offer(bad, i, j);
        }
        if (j > i) {
          std::uint32_t diff = 0;
          for (std::size_t x = 0; x < k; ++x) diff += pg[x] != ph[x];
          count_sep[w].offer(diff, i, j);
        }
        continue;
      }
      if (t) defect[w].offer(fam.mult_distance(target_multiply(*img[i], *img[j]), *img[*t]), i, j);
      if (j > i) sep[w].offer(fam.sep_distance(*img[i], *img[j]), i, j);
    }
  });

  for (unsigned w = 0; w < workers; ++w) {
    if (count_defect[w].seen) defect[w].offer(count_distance(count_defect[w].best), count_defect[w].i, count_defect[w].j);
    if (count_sep[w].seen) sep[w].offer(count_distance(count_sep[w].best), count_sep[w].i, count_sep[w].j);
  }
  for (unsigned w = 1; w < workers; ++w) {
    defect[0].merge(defect[w]);
    sep[0].merge(sep[w]);
  }
  for (auto p : products) rep.products_checked += p;
  rep.pairs_checked = m * (m - 1) / 2;

  const bool exact = fam.exact_metric();
  const mpq_class inv_n(1, static_cast<unsigned long>(c.n));
  const mpq_class eps_q(c.epsilon);
  bool ok = true;
  if (defect[0].best) {
    rep.worst_defect = *defect[0].best;
    rep.defect_witness = {g.format(b.elements[defect[0].i]), g.format(b.elements[defect[0].j])};
    if (!below(rep.worst_defect, inv_n, rep.defect_bound, exact, opt.margin)) {
      ok = false;
      rep.failure = "multiplicativity defect " + std::to_string(rep.worst_defect.value) + " at (" +
                    rep.defect_witness[0] + ", " + rep.defect_witness[1] + ") is not below 1/n";
    }
  }
  if (sep[0].best) {
    rep.min_separation = *sep[0].best;
    rep.separation_witness = {g.format(b.elements[sep[0].i]), g.format(b.elements[sep[0].j])};
    if (!above(*rep.min_separation, eps_q - inv_n, rep.separation_bound, exact, opt.margin)) {
      if (ok)
        rep.failure = "separation " + std::to_string(rep.min_separation->value) + " at (" +
                      rep.separation_witness[0] + ", " + rep.separation_witness[1] + ") is not above epsilon - 1/n";
      ok = false;
    }
  }
  rep.pass = ok;
  return rep;
}

// ---- word verifiers ----

namespace {

// Visits every reduced word of length ≤ n with its value in G and in the target.
template <class Fn>
std::size_t walk_words(const HomCertificate& h, int n, std::size_t cap, Fn&& fn) {
  const Group& g = h.group;
  const auto letters = static_cast<Letter>(2 * g.rank());
  if (h.images.size() != g.rank()) throw CertificateError("one image per generator required");
  std::vector<Element> gl;
  std::vector<TargetElement> tl;
  for (Letter a = 0; a < letters; ++a) {
    gl.push_back(g.letter_element(a));
    tl.push_back(h.letter_image(a));
  }
  std::size_t count = 0;
  Word w;
  std::function<void(const Element&, const TargetElement&)> rec = [&](const Element& x, const TargetElement& t) {
    if (++count > cap) throw CapacityError("word enumeration exceeds cap");
    fn(w, x, t);
    if (static_cast<int>(w.size()) == n) return;
    for (Letter a = 0; a < letters; ++a) {
      if (!w.empty() && a == inverse_letter(w.back())) continue;
      w.push_back(a);
      rec(g.multiply(x, gl[static_cast<std::size_t>(a)]), target_multiply(t, tl[static_cast<std::size_t>(a)]));
      w.pop_back();
    }
  };
  rec(g.identity(), h.family.identity());
  return count;
}

struct WordExtremum {
  bool want_max = true;
  std::optional<Distance> best;
  Word witness;
  void offer(const Distance& d, const Word& w) {
    if (!best) {
      best = d;
      witness = w;
      return;
    }
    int c = compare(d, *best);
    if (!want_max) c = -c;
    if (c > 0) {
      best = d;
      witness = w;
    }
  }
};

VerificationReport word_report(const HomCertificate& h, int n, const VerifyOptions& opt, bool relators_only) {
  if (n < 1) throw CertificateError("radius must be at least 1");
  const Group& g = h.group;
  const Family& fam = h.family;
  for (const auto& t : h.images) {
    try {
      fam.check_member(t);
    } catch (const std::invalid_argument& e) {
      throw CertificateError(std::string("generator image: ") + e.what());
    }
  }
  const TargetElement e = fam.identity();
  WordExtremum defect, sep;
  sep.want_max = false;
  VerificationReport rep;
  rep.defect_bound = 1.0 / n;
  rep.separation_bound = opt.strict_separation ? h.epsilon : h.epsilon - 1.0 / n;

  std::size_t trivial = 0, nontrivial = 0;
  rep.products_checked = walk_words(h, n, opt.word_cap, [&](const Word& w, const Element& x, const TargetElement& t) {
    if (g.is_identity(x)) {
      if (!relators_only) {
        ++trivial;
        defect.offer(fam.mult_distance(t, e), w);
      }
    } else {
      ++nontrivial;
      sep.offer(fam.sep_distance(t, e), w);
    }
  });
  if (relators_only) {
    for (const auto& r : h.relators) {
      if (!g.is_identity(g.evaluate(r)))
        throw CertificateError("relator " + format_word(g, r) + " is not trivial in " + g.name());
      if (static_cast<int>(r.size()) > n) continue;
      ++trivial;
      defect.offer(fam.mult_distance(h.evaluate(r), e), r);
    }
  }
  rep.pairs_checked = nontrivial;

  const bool exact = fam.exact_metric();
  const mpq_class inv_n(1, static_cast<unsigned long>(n));
  const mpq_class sep_q = opt.strict_separation ? mpq_class(h.epsilon) : mpq_class(h.epsilon) - inv_n;
  bool ok = true;
  if (defect.best) {
    rep.worst_defect = *defect.best;
    rep.defect_witness = {format_word(g, defect.witness)};
    if (!below(rep.worst_defect, inv_n, rep.defect_bound, exact, opt.margin)) {
      ok = false;
      rep.failure = "trivial word " + rep.defect_witness[0] + " maps to distance " +
                    std::to_string(rep.worst_defect.value) + " from the identity";
    }
  }
  if (sep.best) {
    rep.min_separation = *sep.best;
    rep.separation_witness = {format_word(g, sep.witness)};
    if (!above(*rep.min_separation, sep_q, rep.separation_bound, exact, opt.margin)) {
      if (ok)
        rep.failure = "nontrivial word " + rep.separation_witness[0] + " maps to distance " +
                      std::to_string(rep.min_separation->value) + " from the identity";
      ok = false;
    }
  }
  rep.pass = ok;
  return rep;
}

}  // namespace

VerificationReport verify_W(const HomCertificate& h, int n, const VerifyOptions& opt) {
  return word_report(h, n, opt, false);
}

VerificationReport verify_R(const HomCertificate& h, int n, const VerifyOptions& opt) {
  return word_report(h, n, opt, true);
}

std::unordered_map<Element, Word, ElementHash> paired_geodesics(const Group& g, int m, std::size_t cap) {
  auto geo = geodesic_words(g, m, cap);
  Ball b = ball(g, m, cap);
  std::unordered_map<Element, Word, ElementHash> out;
  for (const auto& x : b.elements) {
    if (out.count(x)) continue;
    const Word& w = geo.at(x);
    out.emplace(x, w);
    Element y = g.inverse(x);
    if (!(y == x)) out.emplace(y, inverse_word(w));
  }
  return out;
}

ApproxCertificate D_from_W(const HomCertificate& h, int m, const VerifyOptions& opt) {
  VerificationReport up = verify_W(h, 3 * m, opt);
  if (!up.pass) throw VerificationFailure(up);
  auto words = paired_geodesics(h.group, m, opt.ball_cap);
  auto c = ApproxCertificate::build(h.group, h.family, h.epsilon, m,
                                    [&](const Element& x) { return h.evaluate(words.at(x)); }, opt.ball_cap);
  c.provenance = {{"builder", "D_from_W"}, {"m", m}, {"input", h.provenance}};
  VerificationReport out = verify_D(c, opt);
  if (!out.pass) throw VerificationFailure(out);
  return c;
}

HomCertificate W_from_D(const ApproxCertificate& c, int m, const VerifyOptions& opt) {
  if (c.n < 3 * m * m) throw CertificateError("certificate radius must be at least 3m^2");
  VerificationReport up = verify_D(c, opt);
  if (!up.pass) throw VerificationFailure(up);
  HomCertificate h(c.group, c.family, c.epsilon);
  for (const auto& s : c.group.generators()) h.images.push_back(c.image(s.element));
  try {
    h.relators = default_relators(c.group);
  } catch (const std::invalid_argument&) {
  }
  h.provenance = {{"builder", "W_from_D"}, {"m", m}, {"input", c.provenance}};
  VerificationReport out = verify_W(h, m, opt);
  if (!out.pass) throw VerificationFailure(out);
  return h;
}

// ---- graphs ----

GraphCertificate::GraphCertificate(std::size_t v, std::size_t num_letters, int radius, double d)
    : vertices(v), letters(num_letters), out(v, std::vector<std::int64_t>(num_letters, -1)), n(radius), delta(d) {}

void GraphCertificate::add_edge(std::size_t u, Letter a, std::size_t v) {
  if (u >= vertices || v >= vertices || a < 0 || static_cast<std::size_t>(a) >= letters)
    throw CertificateError("edge out of range");
  auto& slot = out[u][static_cast<std::size_t>(a)];
  if (slot >= 0) throw CertificateError("two edges with one label leave vertex " + std::to_string(u));
  slot = static_cast<std::int64_t>(v);
}

json GraphCertificate::to_json(const Group& g) const {
  json e = json::array();
  for (std::size_t u = 0; u < vertices; ++u)
    for (std::size_t a = 0; a < letters; ++a)
      if (out[u][a] >= 0) e.push_back({u, g.letter_label(static_cast<Letter>(a)), out[u][a]});
  return {{"vertices", vertices}, {"n", n}, {"delta", delta}, {"edges", e}};
}

GraphCertificate GraphCertificate::from_json(const json& j, const Group& g) {
  GraphCertificate gc(j.at("vertices").get<std::size_t>(), 2 * g.rank(), j.at("n").get<int>(),
                      j.at("delta").get<double>());
  std::unordered_map<std::string, Letter> by_label;
  for (Letter a = 0; a < static_cast<Letter>(2 * g.rank()); ++a) by_label.emplace(g.letter_label(a), a);
  for (const auto& e : j.at("edges")) {
    auto it = by_label.find(e.at(1).get<std::string>());
    if (it == by_label.end()) throw CertificateError("edge label is not a generator");
    gc.add_edge(e.at(0).get<std::size_t>(), it->second, e.at(2).get<std::size_t>());
  }
  return gc;
}

GraphReport verify_graph(const GraphCertificate& gc, const Group& g, std::size_t cap) {
  const std::size_t letters = 2 * g.rank();
  if (gc.letters != letters) throw CertificateError("graph labels do not match the generating set");
  Ball b = ball(g, gc.n, cap);
  const std::size_t m = b.size();
  std::vector<std::vector<std::int64_t>> nb(m, std::vector<std::int64_t>(letters, -1));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < letters; ++a)
      if (auto k = b.find(g.multiply(b.elements[i], g.letter_element(static_cast<Letter>(a)))))
        nb[i][a] = static_cast<std::int64_t>(*k);

  GraphReport rep;
  std::vector<std::int64_t> vertex_of(m);
  std::unordered_map<std::size_t, std::size_t> elem_of;
  for (std::size_t v = 0; v < gc.vertices; ++v) {
    std::fill(vertex_of.begin(), vertex_of.end(), -1);
    elem_of.clear();
    bool good = true;
    std::deque<std::size_t> queue{0};
    vertex_of[0] = static_cast<std::int64_t>(v);
    elem_of.emplace(v, 0);
    while (good && !queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      if (b.lengths[i] == gc.n) continue;
      const auto u = static_cast<std::size_t>(vertex_of[i]);
      for (std::size_t a = 0; a < letters && good; ++a) {
        const std::int64_t j = nb[i][a];
        const std::int64_t w = gc.out[u][a];
        if (j < 0) continue;
        if (w < 0) {
          good = false;
          break;
        }
        auto it = elem_of.find(static_cast<std::size_t>(w));
        if (it != elem_of.end()) {
          good = it->second == static_cast<std::size_t>(j);
        } else if (vertex_of[static_cast<std::size_t>(j)] >= 0) {
          good = false;
        } else {
          vertex_of[static_cast<std::size_t>(j)] = w;
          elem_of.emplace(static_cast<std::size_t>(w), static_cast<std::size_t>(j));
          queue.push_back(static_cast<std::size_t>(j));
        }
      }
    }
    // Edges leaving the inner ball must be exactly those of the Cayley ball.
    for (std::size_t i = 0; i < m && good; ++i) {
      if (vertex_of[i] < 0) {
        good = false;
        break;
      }
      if (b.lengths[i] == gc.n) continue;
      const auto u = static_cast<std::size_t>(vertex_of[i]);
      for (std::size_t a = 0; a < letters && good; ++a) {
        const std::int64_t w = gc.out[u][a];
        if (w < 0) continue;
        auto it = elem_of.find(static_cast<std::size_t>(w));
        if (it != elem_of.end() && static_cast<std::int64_t>(it->second) != nb[i][a]) good = false;
      }
    }
    if (good)
      ++rep.good_vertices;
    else if (!rep.first_bad_vertex)
      rep.first_bad_vertex = v;
  }
  rep.good_fraction = gc.vertices ? static_cast<double>(rep.good_vertices) / static_cast<double>(gc.vertices) : 0.0;
  rep.pass = gc.vertices > 0 && static_cast<double>(gc.vertices - rep.good_vertices) <=
                                    gc.delta * static_cast<double>(gc.vertices);
  return rep;
}

GraphCertificate graph_from_sofic(const ApproxCertificate& c, double delta) {
  if (c.family.tag != Family::Tag::Sofic) throw std::invalid_argument("graph_from_sofic needs a sofic certificate");
  const std::size_t letters = 2 * c.group.rank();
  GraphCertificate gc(c.family.degree, letters, c.n, delta);
  for (std::size_t a = 0; a < letters; ++a) {
    Permutation p = std::get<Permutation>(c.image(c.group.letter_element(static_cast<Letter>(a)))).inverse();
    for (std::uint32_t u = 0; u < p.degree(); ++u) gc.add_edge(u, static_cast<Letter>(a), p(u));
  }
  return gc;
}

// ---- δ-solutions ----

DeltaSolutionReport check_delta_solution(const std::vector<Word>& relators, const std::vector<TargetElement>& tuple,
                                         const Family& family, double delta) {
  for (const auto& r : relators)
    for (Letter a : r)
      if (a < 0 || static_cast<std::size_t>(a / 2) >= tuple.size())
        throw std::invalid_argument("relator uses a variable outside the tuple (arity mismatch)");
  std::vector<TargetElement> inv;
  for (const auto& t : tuple) {
    family.check_member(t);
    inv.push_back(target_inverse(t));
  }
  DeltaSolutionReport rep;
  const TargetElement e = family.identity();
  for (std::size_t i = 0; i < relators.size(); ++i) {
    TargetElement v = e;
    for (Letter a : relators[i]) {
      const auto k = static_cast<std::size_t>(a / 2);
      v = target_multiply(v, (a & 1) ? inv[k] : tuple[k]);
    }
    Distance d = family.mult_distance(v, e);
    if (i == 0 || compare(d, rep.max_defect) > 0) {
      rep.max_defect = d;
      rep.worst_relator = i;
    }
  }
  if (rep.max_defect.exact && family.exact_metric())
    rep.pass = *rep.max_defect.exact < mpq_class(delta);
  else
    rep.pass = rep.max_defect.value < delta;
  return rep;
}

// ---- approximate-homomorphism bounds ----

json LemmaReport::to_json() const {
  json b = json::array();
  for (const auto& x : bounds)
    b.push_back({{"name", x.name}, {"worst", x.worst}, {"bound", x.bound}, {"checked", x.checked}, {"pass", x.pass}});
  return {{"eps0", eps0}, {"subset_size", subset_size}, {"bounds", b}, {"pass", pass}};
}

LemmaReport lemma_consistency_suite(const ApproxCertificate& c, const LemmaOptions& opt) {
  const Group& g = c.group;
  const Family& fam = c.family;
  Ball f = ball(g, c.n / 2);
  const std::size_t m = f.size();
  std::vector<TargetElement> img, img_inv;
  for (const auto& x : f.elements) {
    img.push_back(c.image(x));
    img_inv.push_back(target_inverse(img.back()));
  }
  auto dist = [&](const TargetElement& a, const TargetElement& b) { return fam.mult_distance(a, b).value; };

  LemmaReport rep;
  rep.subset_size = m;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      rep.eps0 = std::max(rep.eps0, dist(target_multiply(img[i], img[j]),
                                         c.image(g.multiply(f.elements[i], f.elements[j]))));
  const double e0 = rep.eps0;
  rep.bounds = {{"identity", 0, e0, 0, true},
                {"inverse", 0, 2 * e0, 0, true},
                {"product", 0, 0, 0, true},
                {"signed-product", 0, 0, 0, true},
                {"combined", 0, 0, 0, true}};
  auto record = [&](LemmaBound& lb, double d, double bound) {
    ++lb.checked;
    lb.worst = std::max(lb.worst, d);
    lb.bound = std::max(lb.bound, bound);
    if (d > bound + opt.tolerance) lb.pass = false;
  };

  const TargetElement e = fam.identity();
  record(rep.bounds[0], dist(img[0], e), e0);
  for (std::size_t i = 0; i < m; ++i) {
    auto k = f.find(g.inverse(f.elements[i])).value();
    record(rep.bounds[1], dist(img[k], img_inv[i]), 2 * e0);
  }

  std::mt19937_64 rng(opt.seed);
  for (int len = 1; len <= opt.max_length; ++len) {
    double total = 1;
    for (int t = 0; t < len; ++t) total *= static_cast<double>(m);
    const bool all = total <= static_cast<double>(opt.max_tuples);
    const std::size_t count = all ? static_cast<std::size_t>(total) : opt.max_tuples;
    std::vector<std::size_t> tuple(static_cast<std::size_t>(len));
    for (std::size_t s = 0; s < count; ++s) {
      if (all) {
        std::size_t code = s;
        for (auto& t : tuple) {
          t = code % m;
          code /= m;
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (auto& t : tuple) t = pick(rng);
      }
      // Every signed prefix product must stay in F.
      bool admissible = true;
      std::vector<Element> signed_product(std::size_t{1} << len);
      for (std::size_t mask = 0; mask < signed_product.size() && admissible; ++mask) {
        Element p = g.identity();
        for (int t = 0; t < len && admissible; ++t) {
          const Element& x = f.elements[tuple[static_cast<std::size_t>(t)]];
          p = g.multiply(p, ((mask >> t) & 1) ? g.inverse(x) : x);
          admissible = f.contains(p);
        }
        signed_product[mask] = p;
      }
      if (!admissible) continue;
      for (std::size_t mask = 0; mask < signed_product.size(); ++mask) {
        TargetElement images_signed = e;  // π(g_1^{ε_1}) ⋯ π(g_k^{ε_k})
        TargetElement signed_images = e;  // π(g_1)^{ε_1} ⋯ π(g_k)^{ε_k}
        for (int t = 0; t < len; ++t) {
          const std::size_t i = tuple[static_cast<std::size_t>(t)];
          const bool inv = (mask >> t) & 1;
          const std::size_t gi = inv ? f.find(g.inverse(f.elements[i])).value() : i;
          images_signed = target_multiply(images_signed, img[gi]);
          signed_images = target_multiply(signed_images, inv ? img_inv[i] : img[i]);
        }
        const TargetElement whole = img[f.find(signed_product[mask]).value()];
        const double k = len;
        if (mask == 0 && len > 1) record(rep.bounds[2], dist(whole, signed_images), (k - 1) * e0);
        record(rep.bounds[3], dist(images_signed, signed_images), 2 * k * e0);
        record(rep.bounds[4], dist(whole, signed_images), (3 * k - 1) * e0);
      }
    }
  }
  for (const auto& b : rep.bounds) rep.pass = rep.pass && b.pass;
  return rep;
}

}  // namespace mprof
