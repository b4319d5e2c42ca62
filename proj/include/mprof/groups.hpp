#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace mprof {

using Int = std::int64_t;
using json = nlohmann::json;

// Thrown when a configured resource limit (ball size, word count, search
// budget, dimension) would be exceeded.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Normal form of a group element. The meaning of the integers is fixed by the
// owning group; composite groups nest their factors with length prefixes.
struct Element {
  std::vector<Int> v;

  Element() = default;
  explicit Element(std::vector<Int> values) : v(std::move(values)) {}
  Element(std::initializer_list<Int> values) : v(values) {}

  friend bool operator==(const Element&, const Element&) = default;
  friend auto operator<=>(const Element&, const Element&) = default;
};

struct ElementHash {
  std::size_t operator()(const Element& e) const noexcept;
};

// Letters of the free group on X: 2*i is x_i and 2*i+1 is its formal inverse.
using Letter = int;
using Word = std::vector<Letter>;

inline Letter inverse_letter(Letter a) { return a ^ 1; }
Word inverse_word(const Word& w);
Word free_reduce(Word w);

struct Generator {
  std::string label;
  Element element;
};

enum class GroupKind {
  FreeAbelian,
  Free,
  Heisenberg,
  FiniteCyclic,
  FiniteSym,
  DirectProduct,
  WreathFiniteTop,
  Lamplighter,
  Quotient,
};

class QuotientDescriptor;
class GroupImpl;

class Group {
 public:
  static Group free_abelian(int d);
  static Group free_group(int rank);
  static Group heisenberg(int l);
  static Group cyclic(Int m);
  static Group symmetric(int k);
  static Group direct_product(const Group& g, const Group& h);
  // Restricted wreath product base ≀ top. A finite top gives WreathFiniteTop;
  // top = ℤ gives the lamplighter kind.
  static Group wreath(const Group& base, const Group& top);
  static Group lamplighter(const Group& base);
  static Group quotient(const QuotientDescriptor& q);

  GroupKind kind() const;
  std::string name() const;

  Element identity() const;
  Element multiply(const Element& a, const Element& b) const;
  Element inverse(const Element& a) const;
  Element power(const Element& a, Int k) const;
  bool is_identity(const Element& a) const { return a == identity(); }

  // Positive generators X. The symmetric generating set is X ⊔ X⁻¹.
  const std::vector<Generator>& generators() const;
  std::size_t rank() const { return generators().size(); }
  Element letter_element(Letter a) const;
  std::string letter_label(Letter a) const;
  Element evaluate(const Word& w) const;

  bool is_finite() const;
  std::optional<Int> order() const;

  std::string format(const Element& a) const;
  // Throws std::invalid_argument when the payload is not a normal form here.
  void validate(const Element& a) const;

  json to_json() const;
  static Group from_json(const json& j);

  const GroupImpl& impl() const { return *impl_; }
  bool same_as(const Group& other) const;

 private:
  explicit Group(std::shared_ptr<const GroupImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const GroupImpl> impl_;
  friend class GroupImpl;
};

class GroupImpl {
 public:
  virtual ~GroupImpl() = default;
  virtual GroupKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual Element identity() const = 0;
  virtual Element multiply(const Element& a, const Element& b) const = 0;
  virtual Element inverse(const Element& a) const = 0;
  virtual bool is_finite() const = 0;
  virtual std::optional<Int> order() const = 0;
  virtual std::string format(const Element& a) const = 0;
  virtual void validate(const Element& a) const = 0;
  virtual json to_json() const = 0;

  std::vector<Generator> generators;

 protected:
  static Group wrap(std::shared_ptr<const GroupImpl> impl) { return Group(std::move(impl)); }
};

// Parse a descriptor: either the JSON form or a shorthand such as "Z", "Z^2",
// "H3", "F2", "C5", "S3", "C2wrZ", "Z/5".
Group parse_group(const std::string& text);

struct Ball {
  int radius = 0;
  std::vector<Element> elements;
  std::vector<int> lengths;
  std::unordered_map<Element, std::size_t, ElementHash> index;

  std::size_t size() const { return elements.size(); }
  std::optional<std::size_t> find(const Element& g) const;
  bool contains(const Element& g) const { return index.count(g) != 0; }
};

inline constexpr std::size_t kDefaultBallCap = 1'000'000;

Ball ball(const Group& g, int n, std::size_t cap = kDefaultBallCap);
Int growth(const Group& g, int n, std::size_t cap = kDefaultBallCap);
// Word length of a (BFS up to max_radius; nullopt if longer).
std::optional<int> word_length(const Group& g, const Element& a, int max_radius,
                               std::size_t cap = kDefaultBallCap);
// Every element of a finite group, in ball order.
std::vector<Element> enumerate_finite(const Group& g, std::size_t cap = kDefaultBallCap);

// Lexicographically least geodesic words for every element of B(n), letters
// ordered as x_1 < x_1⁻¹ < x_2 < ...
std::unordered_map<Element, Word, ElementHash> geodesic_words(const Group& g, int n,
                                                              std::size_t cap = kDefaultBallCap);

class QuotientDescriptor {
 public:
  enum class Kind { LatticeHNF, CongruenceMod, Identity };

  // Rows of an upper-triangular Hermite normal form with positive diagonal and
  // off-diagonal entries reduced modulo the diagonal entry below them.
  static QuotientDescriptor lattice(const Group& parent, std::vector<std::vector<Int>> hnf);
  static QuotientDescriptor congruence(const Group& parent, Int m);
  static QuotientDescriptor identity(const Group& parent);

  Kind kind() const { return kind_; }
  const Group& parent() const { return *parent_; }
  Int modulus() const { return modulus_; }
  const std::vector<std::vector<Int>>& hnf() const { return hnf_; }

  Int index() const;
  Element map(const Element& g) const;
  Element multiply(const Element& a, const Element& b) const;
  Element inverse(const Element& a) const;
  Element identity_image() const;
  std::vector<Element> elements() const;
  bool in_kernel(const Element& g) const { return map(g) == identity_image(); }
  std::string format(const Element& a) const;

  json to_json() const;
  static QuotientDescriptor from_json(const json& j);

 private:
  QuotientDescriptor() = default;
  Kind kind_ = Kind::Identity;
  std::shared_ptr<Group> parent_;
  Int modulus_ = 0;
  std::vector<std::vector<Int>> hnf_;
};

// H ≤ G with H identified with a catalog group K through an embedding. For
// finite index, coset representatives g_i and the decomposition g = g_i h are
// available.
struct SubgroupData {
  Group parent;
  Group intrinsic;
  std::function<Element(const Element&)> embed;
  std::function<std::optional<Element>(const Element&)> preimage;
  std::vector<Element> coset_reps;
  std::function<std::size_t(const Element&)> coset_of;
  std::string description;

  bool finite_index() const { return !coset_reps.empty(); }
  std::size_t index() const { return coset_reps.size(); }
  // (i, h) with g = g_i · embed(h).
  std::pair<std::size_t, Element> decompose(const Element& g) const;

  // mℤ^d ≤ ℤ^d, generated by m·e_i.
  static SubgroupData scaled_lattice(int d, Int m);
  // Subgroup of ℤ^d spanned by echelon rows (any rank).
  static SubgroupData sublattice(int d, std::vector<std::vector<Int>> rows);
  // Centre ⟨z⟩ of Heisenberg(1).
  static SubgroupData heisenberg_center();
};

int distortion(const SubgroupData& h, int n, std::size_t cap = kDefaultBallCap);

}  // namespace mprof
