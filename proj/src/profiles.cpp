#include "mprof/profiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "construct_util.hpp"

namespace mprof {

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Exact: return "exact";
    case Provenance::Upper: return "upper";
    case Provenance::Lower: return "lower";
    case Provenance::Unknown: return "unknown";
    case Provenance::Infinite: return "infinite";
  }
  return "unknown";
}

Provenance ProfilePoint::kind() const {
  if (infinite) return Provenance::Infinite;
  if (exact) return Provenance::Exact;
  if (upper || symbolic_upper) return Provenance::Upper;
  if (lower) return Provenance::Lower;
  return Provenance::Unknown;
}

std::optional<std::uint64_t> ProfilePoint::value() const { return exact ? exact : upper; }

bool ProfilePoint::consistent() const {
  if (infinite && (exact || upper)) return false;
  if (exact) {
    if (lower && *lower > *exact) return false;
    if (upper && *upper < *exact) return false;
  }
  return !(lower && upper && *lower > *upper);
}

json ProfilePoint::to_json() const {
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"n", n},
            {"lower", opt(lower)},
            {"exact", opt(exact)},
            {"upper", opt(upper)},
            {"infinite", infinite},
            {"kind", provenance_name(kind())},
            {"provenance", provenance},
            {"trace", trace}};
  if (symbolic_upper) j["symbolic_upper"] = symbolic_upper->to_json();
  return j;
}

const ProfilePoint* ProfileCurve::at(int n) const {
  for (const auto& p : points)
    if (p.n == n) return &p;
  return nullptr;
}

double ProfileCurve::fit_slope(int lo, int hi) {
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : points) {
    if (p.n < lo || p.n > hi || p.n < 1) continue;
    if (auto v = p.value(); v && *v > 0)
      xy.emplace_back(std::log(p.n), std::log(static_cast<double>(*v)));
    else if (p.symbolic_upper)
      xy.emplace_back(std::log(p.n), p.symbolic_upper->log_value());
  }
  if (xy.size() < 2) throw std::invalid_argument("slope fit needs two points with values in the window");
  double mx = 0, my = 0;
  for (auto [x, y] : xy) mx += x, my += y;
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxy = 0, sxx = 0;
  for (auto [x, y] : xy) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
  slope = sxy / sxx;
  slope_lo = lo;
  slope_hi = hi;
  return slope;
}

std::string ProfileCurve::to_csv() const {
  std::ostringstream out;
  out << "n,lower,exact,upper,provenance\n";
  auto cell = [&](const std::optional<std::uint64_t>& v) {
    if (v) out << *v;
  };
  for (const auto& p : points) {
    out << p.n << ',';
    cell(p.lower);
    out << ',';
    cell(p.exact);
    out << ',';
    if (p.infinite)
      out << "inf";
    else if (p.upper)
      out << *p.upper;
    else if (p.symbolic_upper)
      out << p.symbolic_upper->base << '^' << p.symbolic_upper->power;
    out << ',' << p.provenance << '\n';
  }
  return out.str();
}

ProfileCurve ProfileCurve::from_csv(const std::string& text, const std::string& quantity, const std::string& group) {
  ProfileCurve c;
  c.quantity = quantity;
  c.group = group;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  auto num = [](const std::string& s) -> std::optional<std::uint64_t> {
    if (s.empty()) return std::nullopt;
    return std::stoull(s);
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line != "n,lower,exact,upper,provenance") throw std::invalid_argument("unexpected CSV header: " + line);
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 5) throw std::invalid_argument("CSV row needs 5 fields: " + line);
    ProfilePoint p;
    p.n = std::stoi(f[0]);
    p.lower = num(f[1]);
    p.exact = num(f[2]);
    if (f[3] == "inf") {
      p.infinite = true;
    } else if (auto caret = f[3].find('^'); caret != std::string::npos) {
      p.symbolic_upper = Dimension{std::stoull(f[3].substr(0, caret)), std::stoi(f[3].substr(caret + 1))};
    } else {
      p.upper = num(f[3]);
    }
    p.provenance = f[4];
    c.points.push_back(std::move(p));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Exact sofic oracle.

namespace {

using Flat = std::vector<std::uint8_t>;

struct OracleSearch {
  int k = 0;
  int n = 0;
  std::size_t m = 0;
  std::vector<Flat> all;        // every permutation, in search order
  std::vector<Flat> canonical;  // one per conjugacy class
  // Triples (a, c, t) with a·c = t, grouped by max(a, c, t).
  std::vector<std::vector<std::array<std::size_t, 3>>> triples;
  std::vector<const Flat*> assigned;
  std::uint64_t nodes = 0;
  std::uint64_t budget = 0;
  bool exhausted = false;

  bool separated(const Flat& p, const Flat& q) const {
    int diff = 0;
    for (int i = 0; i < k; ++i) diff += p[i] != q[i];
    return diff * n > (n - 1) * k;
  }

  bool multiplicative(std::size_t i) const {
    for (const auto& [a, c, t] : triples[i]) {
      const Flat& pa = *assigned[a];
      const Flat& pc = *assigned[c];
      const Flat& pt = *assigned[t];
      int bad = 0;
      for (int x = 0; x < k; ++x) bad += pa[pc[x]] != pt[x];
      if (bad * n >= k) return false;
    }
    return true;
  }

  static bool is_identity(const Flat& p) {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] != i) return false;
    return true;
  }

  // While every earlier image is the identity, conjugating a solution fixes
  // them, so one representative per conjugacy class suffices.
  bool dfs(std::size_t i, bool identity_prefix) {
    if (i == m) return true;
    const auto& pool = identity_prefix ? canonical : all;
    for (const auto& p : pool) {
      if (++nodes > budget) {
        exhausted = true;
        return false;
      }
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) ok = separated(*assigned[j], p);
      if (!ok) continue;
      assigned[i] = &p;
      if (!multiplicative(i)) continue;
      if (dfs(i + 1, identity_prefix && is_identity(p))) return true;
      if (exhausted) return false;
    }
    return false;
  }
};

void partitions(int k, int max_part, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (k == 0) {
    out.push_back(cur);
    return;
  }
  for (int p = std::min(k, max_part); p >= 1; --p) {
    cur.push_back(p);
    partitions(k - p, p, cur, out);
    cur.pop_back();
  }
}

Flat conjugate(const Flat& p, const Flat& rho) {
  Flat r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[rho[i]] = rho[p[i]];
  return r;
}

}  // namespace

OracleResult sofic_exact_oracle(const Group& g, int n, const OracleOptions& opt) {
  if (n < 1) throw std::invalid_argument("sofic_exact_oracle needs n >= 1");
  OracleResult res;
  res.point.n = n;
  const int k_max = std::clamp(opt.k_max, 1, 9);
  Ball b = ball(g, n);
  if (b.size() > 64) {
    res.point.provenance = "unknown";
    res.point.trace = {{"note", "ball too large for the oracle"}, {"ball", b.size()}};
    return res;
  }
  OracleSearch s;
  s.n = n;
  s.m = b.size();
  s.budget = opt.budget;
  s.triples.assign(s.m, {});
  for (std::size_t a = 0; a < s.m; ++a)
    for (std::size_t c = 0; c < s.m; ++c)
      if (auto t = b.find(g.multiply(b.elements[a], b.elements[c])))
        s.triples[std::max({a, c, *t})].push_back({a, c, *t});

  std::mt19937_64 rng(opt.relabel_seed);
  for (int k = 1; k <= k_max; ++k) {
    s.k = k;
    Flat rho(k);
    std::iota(rho.begin(), rho.end(), 0);
    if (opt.relabel_seed != 0) std::shuffle(rho.begin(), rho.end(), rng);
    s.all.clear();
    Flat p(k);
    std::iota(p.begin(), p.end(), 0);
    do s.all.push_back(conjugate(p, rho));
    while (std::next_permutation(p.begin(), p.end()));
    s.canonical.clear();
    std::vector<std::vector<int>> parts;
    std::vector<int> cur;
    partitions(k, k, cur, parts);
    for (const auto& part : parts) {
      Flat q(k);
      int start = 0;
      for (int len : part) {
        for (int j = 0; j < len; ++j) q[start + j] = static_cast<std::uint8_t>(start + (j + 1) % len);
        start += len;
      }
      s.canonical.push_back(conjugate(q, rho));
    }
    s.assigned.assign(s.m, nullptr);
    if (s.dfs(0, true)) {
      ApproxCertificate c(g, Family::sofic(static_cast<std::size_t>(k)), 1.0, n);
      for (std::size_t i = 0; i < s.m; ++i)
        c.assign(b.elements[i], Permutation(std::vector<std::uint32_t>(s.assigned[i]->begin(), s.assigned[i]->end())));
      c.provenance = construction_trace("sofic_exact_oracle", {{"relabel_seed", opt.relabel_seed}}, n, 1.0,
                                        c.dimension());
      if (!verify_D(c).pass) throw std::logic_error("oracle witness fails verification");
      res.witness = std::move(c);
      res.point.exact = static_cast<std::uint64_t>(k);
      res.point.provenance = "exact:oracle";
      break;
    }
    if (s.exhausted) break;
    res.refuted_up_to = k;
  }
  res.nodes = s.nodes;
  auto& pt = res.point;
  if (!pt.exact) {
    if (res.refuted_up_to > 0) {
      pt.lower = static_cast<std::uint64_t>(res.refuted_up_to + 1);
      pt.provenance = "lower:enumeration";
    }
  }
  pt.trace = {{"refuted_up_to", res.refuted_up_to}, {"nodes", res.nodes}, {"budget_exhausted", s.exhausted},
              {"k_max", k_max}};
  return res;
}

ProfilePoint weakly_sofic_exact_Z(const Group& g, int n) {
  if (g.kind() != GroupKind::FreeAbelian || g.rank() != 1)
    throw std::invalid_argument("weakly_sofic_exact_Z needs the group Z");
  ProfilePoint p;
  p.n = n;
  if (n <= 0) {
    p.exact = p.lower = p.upper = 1;
    p.provenance = "exact:trivial";
    return p;
  }
  const auto lower = static_cast<std::uint64_t>(growth(g, n));
  auto c = from_quotient(g, QuotientDescriptor::congruence(g, 2 * n + 1), n, Family::Tag::Fin);
  const auto upper = *c.dimension().value();
  p.lower = lower;
  p.upper = upper;
  if (lower == upper) p.exact = upper;
  p.provenance = p.exact ? "exact:meet" : "upper:quotient";
  p.trace = {{"lower", "growth"}, {"upper", c.provenance}};
  return p;
}

// ---------------------------------------------------------------------------
// Følner search.

FolnerStrategy FolnerStrategy::exhaustive(int r_max, std::size_t size_max) {
  FolnerStrategy s;
  s.kind = Kind::Exhaustive;
  s.r_max = r_max;
  s.size_max = size_max;
  return s;
}

FolnerStrategy FolnerStrategy::balls(int r_max) {
  FolnerStrategy s;
  s.kind = Kind::Balls;
  s.r_max = r_max;
  return s;
}

FolnerStrategy FolnerStrategy::boxes(std::int64_t side_max) {
  FolnerStrategy s;
  s.kind = Kind::Boxes;
  s.side_max = side_max;
  return s;
}

ProfilePoint FolnerSearchResult::point() const {
  ProfilePoint p;
  if (witness) p.n = witness->n;
  if (size) {
    if (minimal) {
      p.exact = *size;
      p.provenance = "exact:exhaustive";
    } else {
      p.upper = *size;
      p.provenance = "upper:" + note;
    }
  } else {
    p.provenance = "unknown";
  }
  p.trace = {{"note", note}};
  if (defect) p.trace["defect"] = defect->get_str();
  if (best_defect) p.trace["best_defect"] = best_defect->get_str();
  if (box_side) p.trace["box_side"] = *box_side;
  return p;
}

mpq_class box_defect(int d, std::int64_t side, int n) {
  if (n < 1) throw std::invalid_argument("Folner condition needs n >= 1");
  if (d < 1 || side < 1) throw std::invalid_argument("box needs d >= 1 and side >= 1");
  const Group g = Group::free_abelian(d);
  mpz_class vol = 1;
  for (int i = 0; i < d; ++i) vol *= side;
  mpz_class sum = 0;
  for (const auto& x : ball(g, n).elements) {
    mpz_class kept = 1;
    for (Int c : x.v) kept *= std::max<Int>(side - std::abs(c), 0);
    sum += 2 * (vol - kept);
  }
  mpq_class r(sum, vol);
  r.canonicalize();
  return r;
}

namespace {

bool qualifies(const mpq_class& defect, int n) { return defect <= mpq_class(1, static_cast<unsigned long>(n)); }

FolnerSearchResult search_exhaustive(const Group& g, int n, const FolnerStrategy& s) {
  FolnerSearchResult r;
  r.note = "exhaustive";
  Ball w = ball(g, s.r_max, s.ball_cap);
  Ball bn = ball(g, n, s.ball_cap);
  const std::size_t size = w.size();
  std::vector<std::vector<std::int64_t>> mult(bn.size(), std::vector<std::int64_t>(size, -1));
  for (std::size_t x = 0; x < bn.size(); ++x)
    for (std::size_t a = 0; a < size; ++a)
      if (auto t = w.find(g.multiply(bn.elements[x], w.elements[a]))) mult[x][a] = static_cast<std::int64_t>(*t);

  std::vector<char> in(size, 0);
  auto defect_of = [&](const std::vector<std::size_t>& set) {
    for (auto i : set) in[i] = 1;
    long sum = 0;
    for (std::size_t x = 0; x < bn.size(); ++x) {
      std::size_t kept = 0;
      for (auto a : set) kept += mult[x][a] >= 0 && in[static_cast<std::size_t>(mult[x][a])];
      sum += static_cast<long>(2 * (set.size() - kept));
    }
    for (auto i : set) in[i] = 0;
    return ratio(sum, set.size());
  };

  // A right translate keeps the defect, so A may be assumed to contain e.
  for (std::size_t k = 1; k <= std::min(s.size_max, size); ++k) {
    std::vector<std::size_t> pick(k - 1);
    std::iota(pick.begin(), pick.end(), 1);
    while (true) {
      std::vector<std::size_t> set{0};
      set.insert(set.end(), pick.begin(), pick.end());
      mpq_class d = defect_of(set);
      if (!r.best_defect || d < *r.best_defect) r.best_defect = d;
      if (qualifies(d, n)) {
        std::vector<Element> elems;
        for (auto i : set) elems.push_back(w.elements[i]);
        r.witness = make_folner_witness(g, std::move(elems), n);
        r.size = k;
        r.defect = d;
        break;
      }
      // next combination of k-1 indices from [1, size)
      std::size_t j = pick.size();
      while (j > 0 && pick[j - 1] == size - pick.size() + j - 1) --j;
      if (j == 0) break;
      ++pick[j - 1];
      for (std::size_t t = j; t < pick.size(); ++t) pick[t] = pick[t - 1] + 1;
    }
    if (r.size) break;
  }
  if (r.size) {
    r.best_defect.reset();
    if (g.is_finite()) {
      r.minimal = static_cast<Int>(size) == *g.order();
    } else if (g.kind() == GroupKind::FreeAbelian && g.rank() == 1) {
      // Gaps of an optimal set can be closed to at most n + 1.
      r.minimal = static_cast<std::int64_t>(s.r_max) >= static_cast<std::int64_t>(s.size_max - 1) * (n + 1);
    }
  }
  return r;
}

FolnerSearchResult search_balls(const Group& g, int n, const FolnerStrategy& s) {
  FolnerSearchResult r;
  r.note = "balls";
  for (int rad = 0; rad <= s.r_max; ++rad) {
    Ball b = ball(g, rad, s.ball_cap);
    mpq_class d = folner_defect(g, b.elements, n, s.ball_cap);
    if (!r.best_defect || d < *r.best_defect) r.best_defect = d;
    if (qualifies(d, n)) {
      r.size = b.size();
      r.defect = d;
      r.witness = make_folner_witness(g, b.elements, n);
      r.best_defect.reset();
      r.note = "balls(r=" + std::to_string(rad) + ")";
      return r;
    }
  }
  return r;
}

FolnerSearchResult search_boxes(const Group& g, int n, const FolnerStrategy& s) {
  if (g.kind() != GroupKind::FreeAbelian) throw std::invalid_argument("box strategy needs a free abelian group");
  const int d = static_cast<int>(g.rank());
  FolnerSearchResult r;
  r.note = "boxes";
  mpq_class at_max = box_defect(d, s.side_max, n);
  if (!qualifies(at_max, n)) {
    r.best_defect = at_max;
    return r;
  }
  std::int64_t lo = 1, hi = s.side_max;  // the defect decreases with the side
  while (lo < hi) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (qualifies(box_defect(d, mid, n), n))
      hi = mid;
    else
      lo = mid + 1;
  }
  r.box_side = lo;
  mpz_class vol = 1;
  for (int i = 0; i < d; ++i) vol *= lo;
  r.size = vol.get_ui();
  r.defect = box_defect(d, lo, n);
  if (vol <= s.materialize_cap) {
    std::vector<Element> set;
    std::vector<Int> cur(static_cast<std::size_t>(d), 0);
    while (true) {
      set.emplace_back(cur);
      std::size_t i = 0;
      while (i < cur.size() && ++cur[i] == lo) cur[i++] = 0;
      if (i == cur.size()) break;
    }
    r.witness = make_folner_witness(g, std::move(set), n);
    if (r.witness->defect != *r.defect) throw std::logic_error("box defect disagrees with the set evaluator");
  }
  return r;
}

}  // namespace

FolnerSearchResult folner_search(const Group& g, int n, const FolnerStrategy& s) {
  if (n < 1) throw std::invalid_argument("Folner condition needs n >= 1");
  switch (s.kind) {
    case FolnerStrategy::Kind::Exhaustive: return search_exhaustive(g, n, s);
    case FolnerStrategy::Kind::Balls: return search_balls(g, n, s);
    case FolnerStrategy::Kind::Boxes: return search_boxes(g, n, s);
  }
  return {};
}

FolnerWitness control(FolnerWitness w, std::size_t cap) {
  const int base = std::max<int>(w.n, static_cast<int>(w.set.size()));
  int radius = base;
  while (true) {
    Ball b = ball(w.group, radius, cap);
    int longest = 0;
    bool covered = true;
    for (const auto& a : w.set) {
      auto i = b.find(a);
      if (!i) {
        covered = false;
        break;
      }
      longest = std::max(longest, b.lengths[*i]);
    }
    if (covered) {
      w.radius_bound = std::max(base, longest);
      return w;
    }
    radius *= 2;
  }
}

mpz_class folner_bound_nilpotent(int d, int n) {
  if (n < 1 || d < 0) throw std::invalid_argument("folner_bound_nilpotent needs n >= 1 and d >= 0");
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 2, static_cast<unsigned long>(d * n + 4));
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(d + 1));
  return r * p;
}

// ---------------------------------------------------------------------------
// Residual finiteness.

namespace {

void hnf_rec(std::size_t d, Int rest, std::vector<Int>& diag, std::vector<std::vector<std::vector<Int>>>& out) {
  if (diag.size() == d) {
    if (rest != 1) return;
    std::vector<std::vector<Int>> h(d, std::vector<Int>(d, 0));
    for (std::size_t i = 0; i < d; ++i) h[i][i] = diag[i];
    // Free entries h[i][j], j > i, range over [0, diag[j]).
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) cells.emplace_back(i, j);
    while (true) {
      out.push_back(h);
      std::size_t c = cells.size();
      while (c > 0) {
        auto [i, j] = cells[c - 1];
        if (++h[i][j] < diag[j]) break;
        h[i][j] = 0;
        --c;
      }
      if (c == 0) break;
    }
    return;
  }
  for (Int a = 1; a <= rest; ++a) {
    if (rest % a) continue;
    if (diag.size() + 1 == d && a != rest) continue;
    diag.push_back(a);
    hnf_rec(d, rest / a, diag, out);
    diag.pop_back();
  }
}

bool kernel_avoids(const QuotientDescriptor& q, const Ball& b) {
  for (std::size_t i = 1; i < b.size(); ++i)
    if (q.in_kernel(b.elements[i])) return false;
  return true;
}

}  // namespace

std::vector<std::vector<std::vector<Int>>> hnf_sublattices(int d, Int index) {
  if (d < 1 || index < 1) throw std::invalid_argument("hnf_sublattices needs d >= 1 and index >= 1");
  std::vector<std::vector<std::vector<Int>>> out;
  std::vector<Int> diag;
  hnf_rec(static_cast<std::size_t>(d), index, diag, out);
  return out;
}

RfResult full_rf_growth(const Group& g, int n, QuotientFamily family, std::int64_t index_cap) {
  if (n < 0) throw std::invalid_argument("full_rf_growth needs n >= 0");
  RfResult r;
  r.point.n = n;
  Ball b = ball(g, n);
  if (family == QuotientFamily::Sublattices) {
    if (g.kind() != GroupKind::FreeAbelian) throw std::invalid_argument("sublattice family needs a free abelian group");
    const int d = static_cast<int>(g.rank());
    std::uint64_t scanned = 0;
    for (Int m = 1; m <= index_cap; ++m) {
      for (auto& h : hnf_sublattices(d, m)) {
        ++scanned;
        auto q = QuotientDescriptor::lattice(g, std::move(h));
        if (kernel_avoids(q, b)) {
          r.point.exact = static_cast<std::uint64_t>(m);
          r.point.provenance = "exact:sublattices";
          r.point.trace = {{"quotient", q.to_json()}, {"scanned", scanned}};
          r.quotient = std::move(q);
          return r;
        }
      }
    }
    throw CapacityError("sublattice enumeration passed index " + std::to_string(index_cap));
  }
  const bool exact = g.kind() == GroupKind::FreeAbelian && g.rank() == 1;
  for (Int m = 1;; ++m) {
    auto q = QuotientDescriptor::congruence(g, m);
    if (q.index() > index_cap) throw CapacityError("congruence index passed " + std::to_string(index_cap));
    if (!kernel_avoids(q, b)) continue;
    const auto idx = static_cast<std::uint64_t>(q.index());
    if (exact)
      r.point.exact = idx;
    else
      r.point.upper = idx;
    r.point.provenance = exact ? "exact:congruence" : "upper:congruence";
    r.point.trace = {{"modulus", m}};
    r.quotient = std::move(q);
    return r;
  }
}

ProfilePoint le_f_growth(const Group& g, int n, std::vector<Group> catalog, const LefOptions& opt) {
  ProfilePoint p;
  p.n = n;
  for (const auto& f : catalog)
    if (!f.is_finite()) throw std::invalid_argument("LE-F catalog entries must be finite: " + f.name());
  std::stable_sort(catalog.begin(), catalog.end(),
                   [](const Group& a, const Group& b) { return *a.order() < *b.order(); });
  Ball b = ball(g, n);
  const std::size_t m = b.size();
  const std::size_t letters = 2 * g.rank();
  // b[i] = letter · b[pred[i]]
  std::vector<std::pair<Letter, std::size_t>> pred(m, {0, 0});
  for (std::size_t i = 1; i < m; ++i) {
    for (Letter a = 0; a < static_cast<Letter>(letters); ++a) {
      auto j = b.find(g.multiply(g.inverse(g.letter_element(a)), b.elements[i]));
      if (j && b.lengths[*j] + 1 == b.lengths[i]) {
        pred[i] = {a, *j};
        break;
      }
    }
  }
  std::vector<std::array<std::size_t, 3>> triples;
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      if (auto t = b.find(g.multiply(b.elements[x], b.elements[y]))) triples.push_back({x, y, *t});

  std::uint64_t nodes = 0;
  for (const auto& f : catalog) {
    auto t = FiniteMetricGroup::from_group(f);
    const std::size_t order = t->order();
    if (order < m) continue;
    std::vector<std::uint32_t> gen(g.rank(), 0);
    std::vector<std::uint32_t> phi(m);
    while (true) {
      if (++nodes > opt.budget) {
        p.provenance = "unknown";
        p.trace = {{"note", "search budget exhausted"}, {"at", f.name()}};
        return p;
      }
      phi[0] = t->identity;
      for (std::size_t i = 1; i < m; ++i) {
        auto [a, j] = pred[i];
        std::uint32_t s = gen[static_cast<std::size_t>(a / 2)];
        if (a % 2) s = t->inverses[s];
        phi[i] = t->mul(s, phi[j]);
      }
      bool ok = std::unordered_set<std::uint32_t>(phi.begin(), phi.end()).size() == m;
      for (std::size_t i = 0; ok && i < triples.size(); ++i)
        ok = t->mul(phi[triples[i][0]], phi[triples[i][1]]) == phi[triples[i][2]];
      if (ok) {
        const auto size = static_cast<std::uint64_t>(order);
        p.upper = size;
        if (opt.complete) p.exact = size;
        p.provenance = opt.complete ? "exact:le-f" : "upper:le-f";
        json images = json::array();
        for (auto x : gen) images.push_back(t->labels.empty() ? json(x) : json(t->labels[x]));
        p.trace = {{"target", f.name()}, {"generator_images", images}, {"nodes", nodes}};
        return p;
      }
      std::size_t i = 0;
      while (i < gen.size() && ++gen[i] == order) gen[i++] = 0;
      if (i == gen.size()) break;
    }
  }
  p.provenance = "unknown";
  p.trace = {{"note", "no catalog group admits a ball monomorphism"}, {"nodes", nodes}};
  return p;
}

ProfilePoint ra_profile(const Group& g, int n, const std::vector<AmenableQuotient>& catalog) {
  ProfilePoint p;
  p.n = n;
  Ball b = ball(g, n);
  bool any = false, all_minimal = true;
  std::optional<std::uint64_t> best;
  json tried = json::array();
  for (const auto& entry : catalog) {
    std::unordered_set<Element, ElementHash> images;
    for (const auto& x : b.elements) images.insert(entry.project(x));
    if (images.size() != b.size()) {
      tried.push_back({{"quotient", entry.quotient.name()}, {"injective", false}});
      continue;
    }
    any = true;
    auto r = folner_search(entry.quotient, n, entry.strategy);
    tried.push_back({{"quotient", entry.quotient.name()}, {"injective", true}, {"point", r.point().to_json()}});
    if (!r.size) {
      all_minimal = false;
      continue;
    }
    all_minimal = all_minimal && r.minimal;
    if (!best || *r.size < *best) best = r.size;
  }
  p.trace = {{"catalog", tried}};
  if (!any) {
    p.infinite = true;
    p.provenance = "infinite";
  } else if (best) {
    if (all_minimal) {
      p.exact = best;
      p.provenance = "exact:ra";
    } else {
      p.upper = best;
      p.provenance = "upper:ra";
    }
  } else {
    p.provenance = "unknown";
  }
  return p;
}

// ---------------------------------------------------------------------------
// Curves.

ProfileCurve growth_curve(const Group& g, int lo, int hi) {
  ProfileCurve c{g.name(), "growth", {}, 0, 0, 0};
  for (int n = lo; n <= hi; ++n) {
    ProfilePoint p;
    p.n = n;
    p.exact = static_cast<std::uint64_t>(growth(g, n));
    p.provenance = "exact:ball";
    c.points.push_back(std::move(p));
  }
  return c;
}

ProfileCurve rf_curve(const Group& g, int lo, int hi, QuotientFamily family) {
  ProfileCurve c{g.name(), "rf", {}, 0, 0, 0};
  for (int n = lo; n <= hi; ++n) c.points.push_back(full_rf_growth(g, n, family).point);
  return c;
}

ProfileCurve folner_curve(const Group& g, int lo, int hi, const FolnerStrategy& s) {
  ProfileCurve c{g.name(), "folner", {}, 0, 0, 0};
  for (int n = lo; n <= hi; ++n) {
    auto p = folner_search(g, n, s).point();
    p.n = n;
    c.points.push_back(std::move(p));
  }
  return c;
}

namespace {

std::string quantity_of(Family::Tag tag) {
  switch (tag) {
    case Family::Tag::Sofic: return "sofic";
    case Family::Tag::Hyp: return "hyp";
    case Family::Tag::Lin: return "lin";
    case Family::Tag::Fin: return "fin";
    default: throw std::invalid_argument("upper_curve supports the sofic, hyp, lin and fin families");
  }
}

bool is_z(const Group& g) { return g.kind() == GroupKind::FreeAbelian && g.rank() == 1; }

// Direct-product normal form of x ∈ ℤ^d as ((ℤ×ℤ)×ℤ)×…
Element nested(const Element& x, std::size_t d) {
  if (d == 1) return Element{x.v[0]};
  Element left = nested(Element(std::vector<Int>(x.v.begin(), x.v.begin() + static_cast<long>(d - 1))), d - 1);
  Element r;
  r.v.push_back(static_cast<Int>(left.v.size()));
  r.v.insert(r.v.end(), left.v.begin(), left.v.end());
  r.v.push_back(x.v[d - 1]);
  return r;
}

// Cyclic certificate of ℤ re-imaged in the target family.
ApproxCertificate cyclic_in(Family::Tag tag, int n, const BuildOptions& opt) {
  const Group z = Group::free_abelian(1);
  switch (tag) {
    case Family::Tag::Sofic: return cyclic_Z(n, opt);
    case Family::Tag::Hyp: return detail::finalize(unitary_lift(cyclic_Z(n, opt)), opt.verify);
    case Family::Tag::Lin: return perm_to_lin(cyclic_Z(n, opt), Field{}, opt);
    default: return from_quotient(z, QuotientDescriptor::congruence(z, 2 * n + 1), n, tag, Field{}, opt);
  }
}

ApproxCertificate product_builder(const Group& g, Family::Tag tag, int n, const BuildOptions& opt) {
  if (g.kind() != GroupKind::FreeAbelian || g.rank() < 2)
    throw ConstructionError("product builder needs Z^d with d >= 2");
  const std::size_t d = g.rank();
  ApproxCertificate acc = cyclic_in(tag, n, opt);
  for (std::size_t i = 1; i < d; ++i) acc = direct_product(acc, cyclic_in(tag, n, opt), opt);
  auto c = ApproxCertificate::build(g, acc.family, acc.epsilon, n,
                                    [&](const Element& x) { return acc.image(nested(x, d)); });
  c.provenance = construction_trace("product", {{"factors", d}}, n, c.epsilon, c.dimension(),
                                    {{{"group", acc.group.name()}, {"n", acc.n}}});
  return detail::finalize(std::move(c), opt.verify);
}

ApproxCertificate quotient_builder(const Group& g, Family::Tag tag, int n, const BuildOptions& opt) {
  const auto family = g.kind() == GroupKind::FreeAbelian ? QuotientFamily::Sublattices : QuotientFamily::Congruence;
  auto rf = full_rf_growth(g, 2 * n, family);
  return from_quotient(g, *rf.quotient, n, tag, Field{}, opt);
}

// Sofic certificate at radius r from the cheapest exact builder.
ApproxCertificate sofic_at(const Group& g, int r, const BuildOptions& opt) {
  if (is_z(g)) return cyclic_Z(r, opt);
  if (g.kind() == GroupKind::FreeAbelian) return product_builder(g, Family::Tag::Sofic, r, opt);
  return quotient_builder(g, Family::Tag::Sofic, r, opt);
}

constexpr std::size_t kLiftBallLimit = 1000;

ApproxCertificate run_builder(const std::string& name, const Group& g, Family::Tag tag, int n,
                              const BuildOptions& opt) {
  if (name == "cyclic") {
    if (!is_z(g)) throw ConstructionError("cyclic builder needs Z");
    return cyclic_in(tag, n, opt);
  }
  if (name == "product") return product_builder(g, tag, n, opt);
  if (name == "quotient") return quotient_builder(g, tag, n, opt);
  if (name == "folner") {
    if (tag != Family::Tag::Sofic) throw ConstructionError("folner builder produces sofic certificates");
    auto s = g.kind() == GroupKind::FreeAbelian ? FolnerStrategy::boxes() : FolnerStrategy::balls(12);
    auto r = folner_search(g, 2 * n, s);
    if (!r.witness) throw ConstructionError("no listed Folner set at " + std::to_string(2 * n) + ": " + r.note);
    return folner_to_sofic(*r.witness, n, opt);
  }
  if (name == "lift") {
    if (tag == Family::Tag::Hyp) {
      const int r = 2 * n * n;
      if (ball(g, r).size() > kLiftBallLimit) throw CapacityError("lift input ball too large");
      return perm_to_hyp(sofic_at(g, r, opt), n, opt);
    }
    if (tag == Family::Tag::Lin) return perm_to_lin(sofic_at(g, n, opt), Field{}, opt);
    throw ConstructionError("lift builder produces hyp and lin certificates");
  }
  throw std::invalid_argument("unknown builder: " + name);
}

std::uint64_t least_factorial_at_least(std::uint64_t v) {
  std::uint64_t k = 1, f = 1;
  while (f < v) f *= ++k;
  return k;
}

}  // namespace

ProfileCurve upper_curve(const Group& g, Family::Tag family, int lo, int hi, const std::vector<std::string>& builders,
                         const CurveOptions& opt) {
  ProfileCurve curve{g.name(), quantity_of(family), {}, 0, 0, 0};
  std::optional<std::uint64_t> carried;
  for (int n = lo; n <= hi; ++n) {
    ProfilePoint p;
    p.n = n;
    json cands = json::object(), skipped = json::object();
    std::vector<std::string> best_by;
    for (const auto& name : builders) {
      try {
        auto c = run_builder(name, g, family, n, opt.build);
        auto v = c.dimension().value();
        if (!v) continue;
        cands[name] = *v;
        if (!p.upper || *v < *p.upper) {
          p.upper = *v;
          best_by = {name};
        } else if (*v == *p.upper) {
          best_by.push_back(name);
        }
      } catch (const VerificationFailure& e) {
        skipped[name] = e.what();
      } catch (const std::invalid_argument& e) {
        skipped[name] = e.what();
      } catch (const CapacityError& e) {
        skipped[name] = e.what();
      }
    }
    std::string lower_tag;
    const auto beta = static_cast<std::uint64_t>(growth(g, n));
    if (family == Family::Tag::Fin) {
      p.lower = beta;
      lower_tag = "growth";
    } else if (family == Family::Tag::Sofic) {
      p.lower = least_factorial_at_least(beta);
      lower_tag = "injectivity";
    }
    if (family == Family::Tag::Sofic && ball(g, n).size() <= opt.oracle_ball) {
      auto o = sofic_exact_oracle(g, n, opt.oracle);
      if (o.point.exact) {
        p.exact = o.point.exact;
        p.provenance = "exact:oracle";
      } else if (o.point.lower && (!p.lower || *o.point.lower > *p.lower)) {
        p.lower = o.point.lower;
        lower_tag = "enumeration";
      }
      p.trace["oracle"] = o.point.trace;
    }
    // Restricting an approximation to a smaller ball keeps it valid.
    if (carried && (!p.lower || *carried > *p.lower)) {
      p.lower = carried;
      lower_tag = "monotone";
    }
    if (auto lo = p.exact ? p.exact : p.lower) carried = lo;
    if (!p.exact && p.lower && p.upper && *p.lower == *p.upper) {
      p.exact = p.upper;
      p.provenance = "exact:meet";
    }
    if (!p.exact) {
      if (p.upper) {
        std::string joined;
        for (const auto& b : best_by) joined += (joined.empty() ? "" : "+") + b;
        p.provenance = "upper:" + joined;
      } else if (p.lower) {
        p.provenance = "lower:" + lower_tag;
      }
    }
    p.trace["candidates"] = cands;
    if (!skipped.empty()) p.trace["skipped"] = skipped;
    if (!lower_tag.empty()) p.trace["lower"] = lower_tag;
    curve.points.push_back(std::move(p));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Audit.

json AuditReport::to_json() const {
  json cs = json::array();
  for (const auto& c : checks)
    cs.push_back({{"inequality", c.inequality}, {"n", c.n}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"ok", c.ok}});
  return {{"checks", cs}, {"violations", violations}, {"pass", violations == 0}};
}

namespace {

void add(AuditReport& r, std::string name, int n, double lhs, double rhs, bool ok) {
  r.checks.push_back({std::move(name), n, lhs, rhs, ok});
  if (!ok) ++r.violations;
}

// X(n) ≤ Y(map(n)): the lower bound of X against the upper bound of Y. Without
// a lower bound for X its construction value is compared.
void compare(AuditReport& r, const ProfileCurve& x, const ProfileCurve& y, const std::string& name,
             const std::function<long(long)>& map) {
  for (const auto& px : x.points) {
    const long target = map(px.n);
    if (target > std::numeric_limits<int>::max()) continue;
    const ProfilePoint* py = y.at(static_cast<int>(target));
    if (!py) continue;
    auto lhs = px.low();
    std::string label = name;
    if (!lhs) {
      lhs = px.high();
      label += " (construction)";
    }
    auto rhs = py->high();
    if (!lhs || !rhs) continue;
    add(r, label, px.n, static_cast<double>(*lhs), static_cast<double>(*rhs), *lhs <= *rhs);
  }
}

}  // namespace

AuditReport inequality_audit(const std::vector<ProfileCurve>& curves) {
  AuditReport r;
  std::map<std::string, std::map<std::string, const ProfileCurve*>> by_group;
  for (const auto& c : curves) by_group[c.group][c.quantity] = &c;
  auto same = [](long n) { return n; };
  auto twice = [](long n) { return 2 * n; };
  for (auto& [group, q] : by_group) {
    auto get = [&](const char* k) -> const ProfileCurve* {
      auto it = q.find(k);
      return it == q.end() ? nullptr : it->second;
    };
    for (auto& [name, c] : q)
      for (const auto& p : c->points)
        add(r, group + ": " + name + " bounds consistent", p.n, p.low() ? double(*p.low()) : 0,
            p.high() ? double(*p.high()) : 0, p.consistent());
    auto pair = [&](const char* x, const char* y, const std::string& label, const std::function<long(long)>& map) {
      if (auto* cx = get(x))
        if (auto* cy = get(y)) compare(r, *cx, *cy, group + ": " + label, map);
    };
    pair("growth", "fin", "beta(n) <= D_fin(n)", same);
    pair("fin", "rf", "D_fin(n) <= Phi(2n)", twice);
    pair("growth", "rf", "beta(n) <= Phi(2n)", twice);
    pair("sofic", "rf", "D_sof(n) <= Phi(2n)", twice);
    pair("hyp", "rf", "D_hyp(n) <= Phi(2n)", twice);
    pair("lin", "rf", "D_lin(n) <= Phi(2n)", twice);
    pair("lin", "sofic", "D_lin(n) <= D_sof(n)", same);
    pair("hyp", "sofic", "D_hyp(n) <= D_sof(2n^2)", [](long n) { return 2 * n * n; });
    pair("sofic", "folner", "D_sof(n) <= Fol(2n)", twice);
    if (auto* fin = get("fin"))
      if (auto* sof = get("sofic"))
        for (const auto& p : fin->points) {
          const auto* s = sof->at(p.n);
          if (!s || !s->high()) continue;
          auto lhs = p.low();
          if (!lhs) continue;
          const double log_lhs = std::log(static_cast<double>(*lhs));
          const double log_rhs = std::lgamma(static_cast<double>(*s->high()) + 1.0);
          add(r, group + ": log D_fin(n) <= log D_sof(n)!", p.n, log_lhs, log_rhs, log_lhs <= log_rhs + 1e-9);
        }
  }
  return r;
}

namespace {

HomCertificate hom_from_quotient(const Group& g, const QuotientDescriptor& q) {
  auto rep = quotient_representation(g, q, 1, Family::Tag::Sofic);
  HomCertificate h(g, rep.family, 1.0);
  for (const auto& gen : g.generators()) h.images.push_back(rep.image(gen.element));
  h.relators = default_relators(g);
  h.provenance = construction_trace("quotient_hom", {{"quotient", q.to_json()}}, 1, 1.0, rep.dimension());
  return h;
}

QuotientDescriptor avoiding(const Group& g, int radius) {
  return *full_rf_growth(g, radius, QuotientFamily::Congruence).quotient;
}

double dim_of(const Family& f) { return static_cast<double>(*f.dimension().value()); }

}  // namespace

AuditReport round_trip_audit(const Group& g, int m_max, const VerifyOptions& opt) {
  AuditReport r;
  const std::string group = g.name() + ": ";
  for (int m = 1; m <= m_max; ++m) {
    {
      auto h = hom_from_quotient(g, avoiding(g, 3 * m));
      bool ok = verify_W(h, 3 * m, opt).pass;
      double lhs = 0;
      if (ok) {
        auto c = D_from_W(h, m, opt);
        ok = verify_D(c, opt).pass;
        lhs = dim_of(c.family);
      }
      add(r, group + "D(m) <= W(3m)", m, lhs, dim_of(h.family), ok && lhs <= dim_of(h.family));
    }
    {
      const int big = 3 * m * m;
      auto q = avoiding(g, 2 * big);
      BuildOptions bo;
      bo.verify = opt;
      auto c = from_quotient(g, q, big, Family::Tag::Sofic, Field{}, bo);
      auto h = W_from_D(c, m, opt);
      bool ok = verify_W(h, m, opt).pass;
      add(r, group + "W(m) <= D(3m^2)", m, dim_of(h.family), dim_of(c.family),
          ok && dim_of(h.family) <= dim_of(c.family));
    }
    {
      auto h = hom_from_quotient(g, avoiding(g, m));
      const bool w = verify_W(h, m, opt).pass;
      const bool rel = verify_R(h, m, opt).pass;
      add(r, group + "R(m) <= W(m)", m, dim_of(h.family), dim_of(h.family), w && rel);
    }
  }
  return r;
}

}  // namespace mprof
