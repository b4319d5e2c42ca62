#include "mprof/groups.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <numeric>
#include <sstream>

namespace mprof {

std::size_t ElementHash::operator()(const Element& e) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ e.v.size();
  for (Int x : e.v) {
    std::uint64_t k = static_cast<std::uint64_t>(x);
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    h ^= k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

Word inverse_word(const Word& w) {
  Word r(w.rbegin(), w.rend());
  for (auto& a : r) a = inverse_letter(a);
  return r;
}

Word free_reduce(Word w) {
  Word out;
  out.reserve(w.size());
  for (Letter a : w) {
    if (!out.empty() && out.back() == inverse_letter(a))
      out.pop_back();
    else
      out.push_back(a);
  }
  return out;
}

namespace {

Int floor_mod(Int a, Int m) {
  Int r = a % m;
  return r < 0 ? r + m : r;
}

Int floor_div(Int a, Int m) { return (a - floor_mod(a, m)) / m; }

std::string join_ints(const std::vector<Int>& v, std::size_t from, std::size_t to) {
  std::string s;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

[[noreturn]] void bad_element(const std::string& group, const std::string& why) {
  throw std::invalid_argument("element is not a normal form of " + group + ": " + why);
}

// Length-prefixed nesting used by composite groups.
void append_block(std::vector<Int>& out, const Element& e) {
  out.push_back(static_cast<Int>(e.v.size()));
  out.insert(out.end(), e.v.begin(), e.v.end());
}

Element read_block(const std::vector<Int>& in, std::size_t& pos) {
  if (pos >= in.size()) throw std::invalid_argument("truncated composite element");
  Int len = in[pos++];
  if (len < 0 || pos + static_cast<std::size_t>(len) > in.size())
    throw std::invalid_argument("truncated composite element");
  Element e(std::vector<Int>(in.begin() + static_cast<std::ptrdiff_t>(pos),
                             in.begin() + static_cast<std::ptrdiff_t>(pos + len)));
  pos += static_cast<std::size_t>(len);
  return e;
}

class FreeAbelianImpl final : public GroupImpl {
 public:
  explicit FreeAbelianImpl(int d) : d_(d) {
    if (d < 1) throw std::invalid_argument("FreeAbelian needs d >= 1");
    for (int i = 0; i < d; ++i) {
      std::vector<Int> v(static_cast<std::size_t>(d), 0);
      v[static_cast<std::size_t>(i)] = 1;
      generators.push_back({"e" + std::to_string(i + 1), Element(v)});
    }
  }
  GroupKind kind() const override { return GroupKind::FreeAbelian; }
  std::string name() const override { return d_ == 1 ? "Z" : "Z^" + std::to_string(d_); }
  Element identity() const override { return Element(std::vector<Int>(static_cast<std::size_t>(d_), 0)); }
  Element multiply(const Element& a, const Element& b) const override {
    Element r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += b.v[i];
    return r;
  }
  Element inverse(const Element& a) const override {
    Element r = a;
    for (auto& x : r.v) x = -x;
    return r;
  }
  bool is_finite() const override { return false; }
  std::optional<Int> order() const override { return std::nullopt; }
  std::string format(const Element& a) const override {
    if (d_ == 1) return std::to_string(a.v[0]);
    return "(" + join_ints(a.v, 0, a.v.size()) + ")";
  }
  void validate(const Element& a) const override {
    if (a.v.size() != static_cast<std::size_t>(d_)) bad_element(name(), "wrong arity");
  }
  json to_json() const override { return {{"kind", "FreeAbelian"}, {"params", {{"d", d_}}}}; }
  int d() const { return d_; }

 private:
  int d_;
};

class FreeImpl final : public GroupImpl {
 public:
  explicit FreeImpl(int r) : r_(r) {
    if (r < 1 || r > 26) throw std::invalid_argument("Free needs 1 <= rank <= 26");
    for (int i = 0; i < r; ++i)
      generators.push_back({std::string(1, static_cast<char>('a' + i)), Element{2 * i}});
  }
  GroupKind kind() const override { return GroupKind::Free; }
  std::string name() const override { return "F" + std::to_string(r_); }
  Element identity() const override { return Element{}; }
  Element multiply(const Element& a, const Element& b) const override {
    Word w(a.v.begin(), a.v.end());
    for (Int x : b.v) {
      Letter l = static_cast<Letter>(x);
      if (!w.empty() && w.back() == inverse_letter(l))
        w.pop_back();
      else
        w.push_back(l);
    }
    return Element(std::vector<Int>(w.begin(), w.end()));
  }
  Element inverse(const Element& a) const override {
    Word w(a.v.begin(), a.v.end());
    Word r = inverse_word(w);
    return Element(std::vector<Int>(r.begin(), r.end()));
  }
  bool is_finite() const override { return false; }
  std::optional<Int> order() const override { return std::nullopt; }
  std::string format(const Element& a) const override {
    if (a.v.empty()) return "e";
    std::string s;
    for (Int x : a.v) {
      char base = (x % 2 == 0) ? 'a' : 'A';
      s += static_cast<char>(base + x / 2);
    }
    return s;
  }
  void validate(const Element& a) const override {
    for (std::size_t i = 0; i < a.v.size(); ++i) {
      if (a.v[i] < 0 || a.v[i] >= 2 * r_) bad_element(name(), "letter out of range");
      if (i > 0 && a.v[i] == (a.v[i - 1] ^ 1)) bad_element(name(), "word not reduced");
    }
  }
  json to_json() const override { return {{"kind", "Free"}, {"params", {{"rank", r_}}}}; }

 private:
  int r_;
};

// (a⃗, b⃗, c) with (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a·b').
class HeisenbergImpl final : public GroupImpl {
 public:
  explicit HeisenbergImpl(int l) : l_(l) {
    if (l < 1) throw std::invalid_argument("Heisenberg needs l >= 1");
    const auto n = static_cast<std::size_t>(2 * l + 1);
    for (int i = 0; i < l; ++i) {
      std::vector<Int> x(n, 0), y(n, 0);
      x[static_cast<std::size_t>(i)] = 1;
      y[static_cast<std::size_t>(l + i)] = 1;
      std::string suffix = l == 1 ? "" : std::to_string(i + 1);
      generators.push_back({"x" + suffix, Element(x)});
      generators.push_back({"y" + suffix, Element(y)});
    }
  }
  GroupKind kind() const override { return GroupKind::Heisenberg; }
  std::string name() const override { return "H" + std::to_string(2 * l_ + 1); }
  Element identity() const override {
    return Element(std::vector<Int>(static_cast<std::size_t>(2 * l_ + 1), 0));
  }
  Element multiply(const Element& a, const Element& b) const override {
    Element r = a;
    const auto l = static_cast<std::size_t>(l_);
    Int cross = 0;
    for (std::size_t i = 0; i < l; ++i) cross += a.v[i] * b.v[l + i];
    for (std::size_t i = 0; i < 2 * l + 1; ++i) r.v[i] += b.v[i];
    r.v[2 * l] += cross;
    return r;
  }
  Element inverse(const Element& a) const override {
    Element r = a;
    const auto l = static_cast<std::size_t>(l_);
    Int cross = 0;
    for (std::size_t i = 0; i < l; ++i) cross += a.v[i] * a.v[l + i];
    for (auto& x : r.v) x = -x;
    r.v[2 * l] += cross;
    return r;
  }
  bool is_finite() const override { return false; }
  std::optional<Int> order() const override { return std::nullopt; }
  std::string format(const Element& a) const override {
    if (l_ == 1) return "(" + join_ints(a.v, 0, 3) + ")";
    const auto l = static_cast<std::size_t>(l_);
    return "(" + join_ints(a.v, 0, l) + ";" + join_ints(a.v, l, 2 * l) + ";" +
           std::to_string(a.v[2 * l]) + ")";
  }
  void validate(const Element& a) const override {
    if (a.v.size() != static_cast<std::size_t>(2 * l_ + 1)) bad_element(name(), "wrong arity");
  }
  json to_json() const override { return {{"kind", "Heisenberg"}, {"params", {{"l", l_}}}}; }
  int l() const { return l_; }

 private:
  int l_;
};

class CyclicImpl final : public GroupImpl {
 public:
  explicit CyclicImpl(Int m) : m_(m) {
    if (m < 1) throw std::invalid_argument("FiniteCyclic needs m >= 1");
    if (m > 1) generators.push_back({"c", Element{1 % m}});
  }
  GroupKind kind() const override { return GroupKind::FiniteCyclic; }
  std::string name() const override { return "C" + std::to_string(m_); }
  Element identity() const override { return Element{0}; }
  Element multiply(const Element& a, const Element& b) const override {
    return Element{(a.v[0] + b.v[0]) % m_};
  }
  Element inverse(const Element& a) const override { return Element{(m_ - a.v[0]) % m_}; }
  bool is_finite() const override { return true; }
  std::optional<Int> order() const override { return m_; }
  std::string format(const Element& a) const override { return std::to_string(a.v[0]); }
  void validate(const Element& a) const override {
    if (a.v.size() != 1 || a.v[0] < 0 || a.v[0] >= m_) bad_element(name(), "bad residue");
  }
  json to_json() const override { return {{"kind", "FiniteCyclic"}, {"params", {{"m", m_}}}}; }
  Int m() const { return m_; }

 private:
  Int m_;
};

class SymImpl final : public GroupImpl {
 public:
  explicit SymImpl(int k) : k_(k) {
    if (k < 1 || k > 12) throw std::invalid_argument("FiniteSym needs 1 <= k <= 12");
    if (k >= 2) {
      std::vector<Int> t(static_cast<std::size_t>(k));
      std::iota(t.begin(), t.end(), 0);
      std::swap(t[0], t[1]);
      generators.push_back({"s", Element(t)});
    }
    if (k >= 3) {
      std::vector<Int> c(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = (i + 1) % k;
      generators.push_back({"r", Element(c)});
    }
  }
  GroupKind kind() const override { return GroupKind::FiniteSym; }
  std::string name() const override { return "S" + std::to_string(k_); }
  Element identity() const override {
    std::vector<Int> v(static_cast<std::size_t>(k_));
    std::iota(v.begin(), v.end(), 0);
    return Element(v);
  }
  Element multiply(const Element& a, const Element& b) const override {
    Element r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] = a.v[static_cast<std::size_t>(b.v[i])];
    return r;
  }
  Element inverse(const Element& a) const override {
    Element r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[static_cast<std::size_t>(a.v[i])] = static_cast<Int>(i);
    return r;
  }
  bool is_finite() const override { return true; }
  std::optional<Int> order() const override {
    Int f = 1;
    for (int i = 2; i <= k_; ++i) f *= i;
    return f;
  }
  std::string format(const Element& a) const override { return "[" + join_ints(a.v, 0, a.v.size()) + "]"; }
  void validate(const Element& a) const override {
    if (a.v.size() != static_cast<std::size_t>(k_)) bad_element(name(), "wrong degree");
    std::vector<bool> seen(static_cast<std::size_t>(k_), false);
    for (Int x : a.v) {
      if (x < 0 || x >= k_ || seen[static_cast<std::size_t>(x)]) bad_element(name(), "not a bijection");
      seen[static_cast<std::size_t>(x)] = true;
    }
  }
  json to_json() const override { return {{"kind", "FiniteSym"}, {"params", {{"k", k_}}}}; }

 private:
  int k_;
};

class ProductImpl final : public GroupImpl {
 public:
  ProductImpl(Group g, Group h) : g_(std::move(g)), h_(std::move(h)) {
    for (const auto& s : g_.generators()) generators.push_back({"L." + s.label, pack(s.element, h_.identity())});
    for (const auto& s : h_.generators()) generators.push_back({"R." + s.label, pack(g_.identity(), s.element)});
  }
  GroupKind kind() const override { return GroupKind::DirectProduct; }
  std::string name() const override { return "(" + g_.name() + "x" + h_.name() + ")"; }
  Element identity() const override { return pack(g_.identity(), h_.identity()); }
  Element multiply(const Element& a, const Element& b) const override {
    auto [a1, a2] = unpack(a);
    auto [b1, b2] = unpack(b);
    return pack(g_.multiply(a1, b1), h_.multiply(a2, b2));
  }
  Element inverse(const Element& a) const override {
    auto [a1, a2] = unpack(a);
    return pack(g_.inverse(a1), h_.inverse(a2));
  }
  bool is_finite() const override { return g_.is_finite() && h_.is_finite(); }
  std::optional<Int> order() const override {
    if (!is_finite()) return std::nullopt;
    return *g_.order() * *h_.order();
  }
  std::string format(const Element& a) const override {
    auto [a1, a2] = unpack(a);
    return "<" + g_.format(a1) + ";" + h_.format(a2) + ">";
  }
  void validate(const Element& a) const override {
    auto [a1, a2] = unpack(a);
    g_.validate(a1);
    h_.validate(a2);
  }
  json to_json() const override {
    return {{"kind", "DirectProduct"}, {"params", {{"factors", json::array({g_.to_json(), h_.to_json()})}}}};
  }

  static Element pack(const Element& a, const Element& b) {
    Element r;
    append_block(r.v, a);
    r.v.insert(r.v.end(), b.v.begin(), b.v.end());
    return r;
  }
  static std::pair<Element, Element> unpack(const Element& e) {
    std::size_t pos = 0;
    Element a = read_block(e.v, pos);
    Element b(std::vector<Int>(e.v.begin() + static_cast<std::ptrdiff_t>(pos), e.v.end()));
    return {a, b};
  }
  const Group& left() const { return g_; }
  const Group& right() const { return h_; }

 private:
  Group g_, h_;
};

class QuotientImpl final : public GroupImpl {
 public:
  explicit QuotientImpl(QuotientDescriptor q) : q_(std::move(q)) {
    for (const auto& s : q_.parent().generators()) generators.push_back({s.label, q_.map(s.element)});
  }
  GroupKind kind() const override { return GroupKind::Quotient; }
  std::string name() const override { return q_.parent().name() + "/N[" + std::to_string(q_.index()) + "]"; }
  Element identity() const override { return q_.identity_image(); }
  Element multiply(const Element& a, const Element& b) const override { return q_.multiply(a, b); }
  Element inverse(const Element& a) const override { return q_.inverse(a); }
  bool is_finite() const override { return true; }
  std::optional<Int> order() const override { return q_.index(); }
  std::string format(const Element& a) const override { return q_.format(a); }
  void validate(const Element& a) const override {
    q_.parent().validate(a);
    if (q_.map(a) != a) bad_element(name(), "not a canonical coset representative");
  }
  json to_json() const override {
    return {{"kind", "Quotient"}, {"params", {{"descriptor", q_.to_json()}}}};
  }
  const QuotientDescriptor& descriptor() const { return q_; }

 private:
  QuotientDescriptor q_;
};

}  // namespace

// Wreath product; support kept as a sorted association list.
class WreathImpl final : public GroupImpl {
 public:
  WreathImpl(Group base, Group top) : base_(std::move(base)), top_(std::move(top)) {
    if (!base_.is_finite() && !top_.is_finite() && top_.kind() != GroupKind::FreeAbelian)
      throw std::invalid_argument("wreath top must be finite or Z");
    for (const auto& r : base_.generators())
      generators.push_back({"B." + r.label, pack({{top_.identity(), r.element}}, top_.identity())});
    for (const auto& t : top_.generators()) generators.push_back({"T." + t.label, pack({}, t.element)});
  }
  using Support = std::vector<std::pair<Element, Element>>;

  GroupKind kind() const override {
    return top_.is_finite() ? GroupKind::WreathFiniteTop : GroupKind::Lamplighter;
  }
  std::string name() const override { return base_.name() + "wr" + top_.name(); }
  Element identity() const override { return pack({}, top_.identity()); }

  Element multiply(const Element& a, const Element& b) const override {
    auto [sa, ha] = unpack(a);
    auto [sb, hb] = unpack(b);
    std::vector<std::pair<Element, Element>> merged;
    merged.reserve(sa.size() + sb.size());
    for (auto& pv : sa) merged.push_back(pv);
    for (auto& [p, v] : sb) merged.push_back({top_.multiply(ha, p), v});
    return pack(normalize(std::move(merged)), top_.multiply(ha, hb));
  }
  Element inverse(const Element& a) const override {
    auto [s, h] = unpack(a);
    Element hinv = top_.inverse(h);
    Support out;
    for (auto& [p, v] : s) out.push_back({top_.multiply(hinv, p), base_.inverse(v)});
    std::sort(out.begin(), out.end());
    return pack(out, hinv);
  }
  bool is_finite() const override { return base_.is_finite() && top_.is_finite(); }
  std::optional<Int> order() const override {
    if (!is_finite()) return std::nullopt;
    Int t = *top_.order(), b = *base_.order(), r = t;
    for (Int i = 0; i < t; ++i) {
      if (r > (Int{1} << 50) / std::max<Int>(b, 1)) throw CapacityError("wreath order overflow");
      r *= b;
    }
    return r;
  }
  std::string format(const Element& a) const override {
    auto [s, h] = unpack(a);
    std::string out = "[" + top_.format(h) + "|";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ",";
      out += top_.format(s[i].first) + ":" + base_.format(s[i].second);
    }
    return out + "]";
  }
  void validate(const Element& a) const override {
    auto [s, h] = unpack(a);
    top_.validate(h);
    for (std::size_t i = 0; i < s.size(); ++i) {
      top_.validate(s[i].first);
      base_.validate(s[i].second);
      if (base_.is_identity(s[i].second)) bad_element(name(), "identity value in support");
      if (i && !(s[i - 1].first < s[i].first)) bad_element(name(), "support not sorted");
    }
  }
  json to_json() const override {
    if (top_.is_finite())
      return {{"kind", "WreathFiniteTop"}, {"params", {{"base", base_.to_json()}, {"top", top_.to_json()}}}};
    return {{"kind", "Lamplighter"}, {"params", {{"base", base_.to_json()}}}};
  }

  static Element pack(const Support& s, const Element& h) {
    Element r;
    append_block(r.v, h);
    r.v.push_back(static_cast<Int>(s.size()));
    for (auto& [p, v] : s) {
      append_block(r.v, p);
      append_block(r.v, v);
    }
    return r;
  }
  static std::pair<Support, Element> unpack(const Element& e) {
    std::size_t pos = 0;
    Element h = read_block(e.v, pos);
    if (pos >= e.v.size()) throw std::invalid_argument("truncated wreath element");
    Int count = e.v[pos++];
    Support s;
    for (Int i = 0; i < count; ++i) {
      Element p = read_block(e.v, pos);
      Element v = read_block(e.v, pos);
      s.push_back({std::move(p), std::move(v)});
    }
    return {s, h};
  }
  const Group& base() const { return base_; }
  const Group& top() const { return top_; }

 private:
  Support normalize(std::vector<std::pair<Element, Element>> entries) const {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    Support out;
    for (auto& [p, v] : entries) {
      if (!out.empty() && out.back().first == p)
        out.back().second = base_.multiply(out.back().second, v);
      else
        out.push_back({p, v});
      if (base_.is_identity(out.back().second)) out.pop_back();
    }
    return out;
  }
  Group base_, top_;
};

Group Group::free_abelian(int d) { return Group(std::make_shared<FreeAbelianImpl>(d)); }
Group Group::free_group(int rank) { return Group(std::make_shared<FreeImpl>(rank)); }
Group Group::heisenberg(int l) { return Group(std::make_shared<HeisenbergImpl>(l)); }
Group Group::cyclic(Int m) { return Group(std::make_shared<CyclicImpl>(m)); }
Group Group::symmetric(int k) { return Group(std::make_shared<SymImpl>(k)); }
Group Group::direct_product(const Group& g, const Group& h) { return Group(std::make_shared<ProductImpl>(g, h)); }
Group Group::wreath(const Group& base, const Group& top) { return Group(std::make_shared<WreathImpl>(base, top)); }
Group Group::lamplighter(const Group& base) {
  if (!base.is_finite()) throw std::invalid_argument("lamplighter base must be finite");
  return wreath(base, free_abelian(1));
}
Group Group::quotient(const QuotientDescriptor& q) { return Group(std::make_shared<QuotientImpl>(q)); }

GroupKind Group::kind() const { return impl_->kind(); }
std::string Group::name() const { return impl_->name(); }
Element Group::identity() const { return impl_->identity(); }
Element Group::multiply(const Element& a, const Element& b) const { return impl_->multiply(a, b); }
Element Group::inverse(const Element& a) const { return impl_->inverse(a); }
const std::vector<Generator>& Group::generators() const { return impl_->generators; }
bool Group::is_finite() const { return impl_->is_finite(); }
std::optional<Int> Group::order() const { return impl_->order(); }
std::string Group::format(const Element& a) const { return impl_->format(a); }
void Group::validate(const Element& a) const { impl_->validate(a); }
json Group::to_json() const { return impl_->to_json(); }
bool Group::same_as(const Group& other) const {
  return impl_ == other.impl_ || to_json() == other.to_json();
}

Element Group::power(const Element& a, Int k) const {
  Element base = k < 0 ? inverse(a) : a;
  std::uint64_t e = k < 0 ? static_cast<std::uint64_t>(-k) : static_cast<std::uint64_t>(k);
  Element r = identity();
  while (e) {
    if (e & 1) r = multiply(r, base);
    e >>= 1;
    if (e) base = multiply(base, base);
  }
  return r;
}

Element Group::letter_element(Letter a) const {
  const auto& gens = generators();
  auto i = static_cast<std::size_t>(a / 2);
  if (a < 0 || i >= gens.size()) throw std::invalid_argument("letter out of range");
  return (a & 1) ? inverse(gens[i].element) : gens[i].element;
}

std::string Group::letter_label(Letter a) const {
  const auto& gens = generators();
  auto i = static_cast<std::size_t>(a / 2);
  if (a < 0 || i >= gens.size()) throw std::invalid_argument("letter out of range");
  return gens[i].label + ((a & 1) ? "^-1" : "");
}

Element Group::evaluate(const Word& w) const {
  Element r = identity();
  for (Letter a : w) r = multiply(r, letter_element(a));
  return r;
}

Group Group::from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const json p = j.contains("params") ? j.at("params") : json::object();
  if (kind == "FreeAbelian") return free_abelian(p.at("d").get<int>());
  if (kind == "Free") return free_group(p.at("rank").get<int>());
  if (kind == "Heisenberg") return heisenberg(p.value("l", 1));
  if (kind == "FiniteCyclic") return cyclic(p.at("m").get<Int>());
  if (kind == "FiniteSym") return symmetric(p.at("k").get<int>());
  if (kind == "DirectProduct") {
    const auto& f = p.at("factors");
    if (f.size() != 2) throw std::invalid_argument("DirectProduct needs two factors");
    return direct_product(from_json(f[0]), from_json(f[1]));
  }
  if (kind == "WreathFiniteTop") {
    Group top = from_json(p.at("top"));
    if (!top.is_finite()) throw std::invalid_argument("WreathFiniteTop needs a finite top group");
    return wreath(from_json(p.at("base")), top);
  }
  if (kind == "Lamplighter") return lamplighter(from_json(p.at("base")));
  if (kind == "Quotient") return quotient(QuotientDescriptor::from_json(p.at("descriptor")));
  throw std::invalid_argument("unknown group kind: " + kind);
}

namespace {

int parse_int(const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw std::invalid_argument("bad integer in group shorthand: '" + s + "'");
  return std::stoi(s);
}

Group parse_atom(const std::string& s) {
  if (s == "Z") return Group::free_abelian(1);
  if (s.rfind("Z^", 0) == 0) return Group::free_abelian(parse_int(s.substr(2)));
  if (s.rfind("Z/", 0) == 0) return Group::cyclic(parse_int(s.substr(2)));
  if (s == "Heis" || s == "H") return Group::heisenberg(1);
  if (s.size() >= 2 && s[0] == 'Z') return Group::free_abelian(parse_int(s.substr(1)));
  if (s.size() >= 2 && s[0] == 'H') {
    int dim = parse_int(s.substr(1));
    if (dim < 3 || dim % 2 == 0) throw std::invalid_argument("Heisenberg shorthand is H3, H5, ...");
    return Group::heisenberg((dim - 1) / 2);
  }
  if (s.size() >= 2 && s[0] == 'F') return Group::free_group(parse_int(s.substr(1)));
  if (s.size() >= 2 && s[0] == 'C') return Group::cyclic(parse_int(s.substr(1)));
  if (s.size() >= 2 && s[0] == 'S') return Group::symmetric(parse_int(s.substr(1)));
  throw std::invalid_argument("unrecognised group shorthand: '" + s + "'");
}

}  // namespace

Group parse_group(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw std::invalid_argument("empty group descriptor");
  if (s[0] == '{') return Group::from_json(json::parse(text));
  if (auto p = s.find("wr"); p != std::string::npos) {
    Group base = parse_group(s.substr(0, p));
    Group top = parse_group(s.substr(p + 2));
    if (!top.is_finite() && top.kind() == GroupKind::FreeAbelian) return Group::lamplighter(base);
    return Group::wreath(base, top);
  }
  if (auto p = s.find('x'); p != std::string::npos)
    return Group::direct_product(parse_group(s.substr(0, p)), parse_group(s.substr(p + 1)));
  return parse_atom(s);
}

std::optional<std::size_t> Ball::find(const Element& g) const {
  auto it = index.find(g);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

namespace {

std::vector<Element> symmetric_generator_elements(const Group& g) {
  std::vector<Element> s;
  for (const auto& x : g.generators()) {
    s.push_back(x.element);
    s.push_back(g.inverse(x.element));
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

Ball ball(const Group& g, int n, std::size_t cap) {
  if (n < 0) throw std::invalid_argument("ball radius must be nonnegative");
  const auto gens = symmetric_generator_elements(g);
  std::unordered_map<Element, int, ElementHash> seen;
  std::vector<Element> frontier{g.identity()};
  seen.emplace(g.identity(), 0);
  for (int r = 1; r <= n && !frontier.empty(); ++r) {
    std::vector<Element> next;
    for (const auto& x : frontier) {
      for (const auto& s : gens) {
        Element y = g.multiply(x, s);
        if (seen.emplace(y, r).second) {
          if (seen.size() > cap)
            throw CapacityError("ball of " + g.name() + " exceeds element cap " + std::to_string(cap));
          next.push_back(std::move(y));
        }
      }
    }
    frontier = std::move(next);
  }
  Ball b;
  b.radius = n;
  std::vector<std::pair<int, Element>> order;
  order.reserve(seen.size());
  for (auto& [e, len] : seen) order.emplace_back(len, e);
  std::sort(order.begin(), order.end());
  b.elements.reserve(order.size());
  b.lengths.reserve(order.size());
  for (auto& [len, e] : order) {
    b.index.emplace(e, b.elements.size());
    b.lengths.push_back(len);
    b.elements.push_back(std::move(e));
  }
  return b;
}

Int growth(const Group& g, int n, std::size_t cap) { return static_cast<Int>(ball(g, n, cap).size()); }

std::optional<int> word_length(const Group& g, const Element& a, int max_radius, std::size_t cap) {
  if (g.kind() == GroupKind::FreeAbelian) {
    Int s = 0;
    for (Int x : a.v) s += x < 0 ? -x : x;
    if (s > max_radius) return std::nullopt;
    return static_cast<int>(s);
  }
  if (g.is_identity(a)) return 0;
  const auto gens = symmetric_generator_elements(g);
  std::unordered_map<Element, int, ElementHash> seen;
  std::vector<Element> frontier{g.identity()};
  seen.emplace(g.identity(), 0);
  for (int r = 1; r <= max_radius && !frontier.empty(); ++r) {
    std::vector<Element> next;
    for (const auto& x : frontier) {
      for (const auto& s : gens) {
        Element y = g.multiply(x, s);
        if (y == a) return r;
        if (seen.emplace(y, r).second) {
          if (seen.size() > cap) throw CapacityError("word length search exceeds cap");
          next.push_back(std::move(y));
        }
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

std::vector<Element> enumerate_finite(const Group& g, std::size_t cap) {
  if (!g.is_finite()) throw std::invalid_argument(g.name() + " is not finite");
  Int ord = *g.order();
  if (static_cast<std::size_t>(ord) > cap) throw CapacityError("finite group exceeds element cap");
  Ball b = ball(g, static_cast<int>(std::min<Int>(ord, 1 << 30)), cap);
  if (static_cast<Int>(b.size()) != ord)
    throw std::logic_error("generators of " + g.name() + " do not generate the group");
  return b.elements;
}

std::unordered_map<Element, Word, ElementHash> geodesic_words(const Group& g, int n, std::size_t cap) {
  const int letters = static_cast<int>(2 * g.rank());
  std::unordered_map<Element, Word, ElementHash> words;
  words.emplace(g.identity(), Word{});
  std::vector<std::pair<Word, Element>> layer{{Word{}, g.identity()}};
  for (int r = 1; r <= n && !layer.empty(); ++r) {
    std::vector<std::pair<Word, Element>> next;
    for (const auto& [w, x] : layer) {
      for (Letter a = 0; a < letters; ++a) {
        Element y = g.multiply(x, g.letter_element(a));
        if (words.count(y)) continue;
        Word wy = w;
        wy.push_back(a);
        words.emplace(y, wy);
        if (words.size() > cap) throw CapacityError("geodesic word table exceeds cap");
        next.emplace_back(std::move(wy), std::move(y));
      }
    }
    // Parents already sorted and letters scanned in order keep the layer sorted.
    layer = std::move(next);
  }
  return words;
}

// ---- quotients ----

QuotientDescriptor QuotientDescriptor::lattice(const Group& parent, std::vector<std::vector<Int>> hnf) {
  if (parent.kind() != GroupKind::FreeAbelian)
    throw std::invalid_argument("LatticeHNF quotient needs a free abelian parent");
  const auto d = static_cast<std::size_t>(dynamic_cast<const FreeAbelianImpl&>(parent.impl()).d());
  if (hnf.size() != d) throw std::invalid_argument("HNF must be square of size d");
  for (std::size_t i = 0; i < d; ++i) {
    if (hnf[i].size() != d) throw std::invalid_argument("HNF must be square of size d");
    if (hnf[i][i] <= 0) throw std::invalid_argument("HNF diagonal must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (hnf[i][j] != 0) throw std::invalid_argument("HNF must be upper triangular");
    for (std::size_t j = i + 1; j < d; ++j)
      if (hnf[i][j] < 0 || hnf[i][j] >= hnf[j][j])
        throw std::invalid_argument("HNF off-diagonal entries must be reduced modulo the diagonal");
  }
  QuotientDescriptor q;
  q.kind_ = Kind::LatticeHNF;
  q.parent_ = std::make_shared<Group>(parent);
  q.hnf_ = std::move(hnf);
  return q;
}

QuotientDescriptor QuotientDescriptor::congruence(const Group& parent, Int m) {
  if (m < 1) throw std::invalid_argument("congruence modulus must be positive");
  if (parent.kind() == GroupKind::FreeAbelian) {
    const auto d = static_cast<std::size_t>(dynamic_cast<const FreeAbelianImpl&>(parent.impl()).d());
    std::vector<std::vector<Int>> h(d, std::vector<Int>(d, 0));
    for (std::size_t i = 0; i < d; ++i) h[i][i] = m;
    return lattice(parent, h);
  }
  if (parent.kind() == GroupKind::FiniteCyclic) {
    Int n = dynamic_cast<const CyclicImpl&>(parent.impl()).m();
    if (n % m != 0) throw std::invalid_argument("congruence modulus must divide the cyclic order");
  } else if (parent.kind() != GroupKind::Heisenberg) {
    throw std::invalid_argument("CongruenceMod supports Heisenberg, free abelian and cyclic parents");
  }
  QuotientDescriptor q;
  q.kind_ = Kind::CongruenceMod;
  q.parent_ = std::make_shared<Group>(parent);
  q.modulus_ = m;
  return q;
}

QuotientDescriptor QuotientDescriptor::identity(const Group& parent) {
  if (!parent.is_finite()) throw std::invalid_argument("identity quotient needs a finite parent");
  QuotientDescriptor q;
  q.kind_ = Kind::Identity;
  q.parent_ = std::make_shared<Group>(parent);
  return q;
}

Int QuotientDescriptor::index() const {
  switch (kind_) {
    case Kind::LatticeHNF: {
      Int r = 1;
      for (std::size_t i = 0; i < hnf_.size(); ++i) r *= hnf_[i][i];
      return r;
    }
    case Kind::CongruenceMod: {
      if (parent_->kind() == GroupKind::FiniteCyclic) return modulus_;
      Int r = 1;
      for (std::size_t i = 0; i < parent_->identity().v.size(); ++i) r *= modulus_;
      return r;
    }
    case Kind::Identity:
      return *parent_->order();
  }
  return 0;
}

Element QuotientDescriptor::map(const Element& g) const {
  switch (kind_) {
    case Kind::LatticeHNF: {
      Element r = g;
      for (std::size_t i = 0; i < hnf_.size(); ++i) {
        Int q = floor_div(r.v[i], hnf_[i][i]);
        if (q != 0)
          for (std::size_t j = i; j < hnf_.size(); ++j) r.v[j] -= q * hnf_[i][j];
      }
      return r;
    }
    case Kind::CongruenceMod: {
      Element r = g;
      for (auto& x : r.v) x = floor_mod(x, modulus_);
      return r;
    }
    case Kind::Identity:
      return g;
  }
  return g;
}

Element QuotientDescriptor::multiply(const Element& a, const Element& b) const {
  return map(parent_->multiply(a, b));
}
Element QuotientDescriptor::inverse(const Element& a) const { return map(parent_->inverse(a)); }
Element QuotientDescriptor::identity_image() const { return map(parent_->identity()); }

std::vector<Element> QuotientDescriptor::elements() const {
  if (kind_ == Kind::Identity) {
    auto e = enumerate_finite(*parent_);
    std::sort(e.begin(), e.end());
    return e;
  }
  std::vector<Int> bounds;
  if (kind_ == Kind::LatticeHNF) {
    for (std::size_t i = 0; i < hnf_.size(); ++i) bounds.push_back(hnf_[i][i]);
  } else {
    bounds.assign(parent_->identity().v.size(), modulus_);
  }
  if (index() > static_cast<Int>(kDefaultBallCap)) throw CapacityError("quotient too large to enumerate");
  std::vector<Element> out;
  std::vector<Int> cur(bounds.size(), 0);
  while (true) {
    out.emplace_back(cur);
    std::size_t i = cur.size();
    while (i > 0) {
      --i;
      if (++cur[i] < bounds[i]) break;
      cur[i] = 0;
      if (i == 0) return out;
    }
    if (cur.empty()) return out;
  }
}

std::string QuotientDescriptor::format(const Element& a) const { return parent_->format(a); }

json QuotientDescriptor::to_json() const {
  json j;
  j["parent"] = parent_->to_json();
  switch (kind_) {
    case Kind::LatticeHNF:
      j["kind"] = "LatticeHNF";
      j["hnf"] = hnf_;
      break;
    case Kind::CongruenceMod:
      j["kind"] = "CongruenceMod";
      j["m"] = modulus_;
      break;
    case Kind::Identity:
      j["kind"] = "Identity";
      break;
  }
  return j;
}

QuotientDescriptor QuotientDescriptor::from_json(const json& j) {
  Group parent = Group::from_json(j.at("parent"));
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "LatticeHNF") return lattice(parent, j.at("hnf").get<std::vector<std::vector<Int>>>());
  if (kind == "CongruenceMod") return congruence(parent, j.at("m").get<Int>());
  if (kind == "Identity") return identity(parent);
  throw std::invalid_argument("unknown quotient kind: " + kind);
}

// ---- subgroups ----

std::pair<std::size_t, Element> SubgroupData::decompose(const Element& g) const {
  if (!finite_index()) throw std::invalid_argument("subgroup " + description + " has no coset data");
  std::size_t i = coset_of(g);
  auto h = preimage(parent.multiply(parent.inverse(coset_reps.at(i)), g));
  if (!h) throw std::logic_error("coset factorisation failed for " + parent.format(g));
  return {i, *h};
}

SubgroupData SubgroupData::scaled_lattice(int d, Int m) {
  if (m < 1) throw std::invalid_argument("scale must be positive");
  std::vector<std::vector<Int>> rows(static_cast<std::size_t>(d), std::vector<Int>(static_cast<std::size_t>(d), 0));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i][i] = m;
  SubgroupData s = sublattice(d, rows);
  s.description = std::to_string(m) + "Z^" + std::to_string(d) + " <= Z^" + std::to_string(d);
  return s;
}

SubgroupData SubgroupData::sublattice(int d, std::vector<std::vector<Int>> rows) {
  const auto du = static_cast<std::size_t>(d);
  std::vector<std::size_t> pivots;
  for (const auto& r : rows) {
    if (r.size() != du) throw std::invalid_argument("sublattice rows must have length d");
    std::size_t p = 0;
    while (p < du && r[p] == 0) ++p;
    if (p == du) throw std::invalid_argument("zero row in sublattice basis");
    if (!pivots.empty() && p <= pivots.back()) throw std::invalid_argument("sublattice basis must be in echelon form");
    pivots.push_back(p);
  }
  SubgroupData s{Group::free_abelian(d), Group::free_abelian(static_cast<int>(rows.size())), {}, {}, {}, {}, {}};
  s.embed = [rows, du](const Element& k) {
    Element g(std::vector<Int>(du, 0));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < du; ++j) g.v[j] += k.v[i] * rows[i][j];
    return g;
  };
  s.preimage = [rows, pivots, du](const Element& g) -> std::optional<Element> {
    Element rest = g;
    Element k(std::vector<Int>(rows.size(), 0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < pivots[i]; ++j)
        if (rest.v[j] != 0) return std::nullopt;
      Int piv = rows[i][pivots[i]];
      if (rest.v[pivots[i]] % piv != 0) return std::nullopt;
      Int c = rest.v[pivots[i]] / piv;
      k.v[i] = c;
      for (std::size_t j = 0; j < du; ++j) rest.v[j] -= c * rows[i][j];
    }
    for (Int x : rest.v)
      if (x != 0) return std::nullopt;
    return k;
  };
  bool square_upper = rows.size() == du;
  for (std::size_t i = 0; square_upper && i < du; ++i) square_upper = pivots[i] == i && rows[i][i] > 0;
  if (square_upper) {
    std::vector<std::vector<Int>> hnf = rows;
    // Reduce above-diagonal entries so the lattice quotient map is canonical.
    for (std::size_t j = 0; j < du; ++j)
      for (std::size_t i = 0; i < j; ++i) {
        Int q = floor_div(hnf[i][j], hnf[j][j]);
        if (q)
          for (std::size_t c = j; c < du; ++c) hnf[i][c] -= q * hnf[j][c];
      }
    auto q = QuotientDescriptor::lattice(Group::free_abelian(d), hnf);
    s.coset_reps = q.elements();
    auto reps = s.coset_reps;
    s.coset_of = [q, reps](const Element& g) {
      Element r = q.map(g);
      auto it = std::lower_bound(reps.begin(), reps.end(), r);
      return static_cast<std::size_t>(it - reps.begin());
    };
  }
  s.description = "sublattice of Z^" + std::to_string(d);
  return s;
}

SubgroupData SubgroupData::heisenberg_center() {
  SubgroupData s{Group::heisenberg(1), Group::free_abelian(1), {}, {}, {}, {}, "center <z> <= H3"};
  s.embed = [](const Element& k) { return Element{0, 0, k.v[0]}; };
  s.preimage = [](const Element& g) -> std::optional<Element> {
    if (g.v[0] != 0 || g.v[1] != 0) return std::nullopt;
    return Element{g.v[2]};
  };
  return s;
}

int distortion(const SubgroupData& h, int n, std::size_t cap) {
  Ball b = ball(h.parent, n, cap);
  int k = n;
  for (const auto& g : b.elements) {
    auto pre = h.preimage(g);
    if (!pre) continue;
    int limit = std::max(k, 4 * n * n + 4 * n + 4);
    auto len = word_length(h.intrinsic, *pre, limit, cap);
    if (!len) throw CapacityError("intrinsic word length exceeds search radius");
    k = std::max(k, *len);
  }
  return k;
}

}  // namespace mprof
