#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/SparseCore>
#include <gmpxx.h>

#include "mprof/groups.hpp"

namespace mprof {

using Complex = std::complex<double>;
using SparseC = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

inline constexpr double kUnitaryTolerance = 1e-9;

inline mpq_class ratio(long num, unsigned long den) {
  mpq_class q(num, den);
  q.canonicalize();
  return q;
}

// ---------------------------------------------------------------------------
// Permutations, left action: (σ∘τ)(i) = σ(τ(i)).

struct Permutation {
  std::vector<std::uint32_t> images;

  Permutation() = default;
  explicit Permutation(std::vector<std::uint32_t> im) : images(std::move(im)) {}
  static Permutation identity(std::size_t k);

  std::size_t degree() const { return images.size(); }
  std::uint32_t operator()(std::uint32_t i) const { return images[i]; }
  Permutation compose(const Permutation& tau) const;  // this ∘ tau
  Permutation inverse() const;
  std::size_t fixed_points() const;
  std::size_t cycle_count() const;
  bool is_identity() const;
  void validate() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;
};

Permutation random_permutation(std::size_t k, std::mt19937_64& rng);
Permutation block_sum(const Permutation& a, const Permutation& b);
// Product action on {0..|a|-1} × {0..|b|-1}, index i*|b| + j.
Permutation product_action(const Permutation& a, const Permutation& b);

// ---------------------------------------------------------------------------
// Unitary matrices.

struct UnitaryMatrix {
  SparseC m;
  double tolerance = kUnitaryTolerance;

  std::size_t size() const { return static_cast<std::size_t>(m.rows()); }
  static UnitaryMatrix identity(std::size_t k);
  UnitaryMatrix multiply(const UnitaryMatrix& b) const;
  UnitaryMatrix adjoint() const;
  Complex trace() const;
  Complex normalized_trace() const { return trace() / static_cast<double>(size()); }
  // ‖U*U − I‖_max.
  double unitarity_defect() const;
  void validate() const;
};

UnitaryMatrix perm_to_unitary(const Permutation& s);
UnitaryMatrix block_sum(const UnitaryMatrix& a, const UnitaryMatrix& b);
UnitaryMatrix kronecker(const UnitaryMatrix& a, const UnitaryMatrix& b);
UnitaryMatrix from_dense(const std::vector<std::vector<Complex>>& rows, double tolerance = kUnitaryTolerance);
UnitaryMatrix haar_unitary(std::size_t k, std::mt19937_64& rng);
// exp(i t H) for a random Hermitian H with unit operator norm scale.
UnitaryMatrix near_identity_unitary(std::size_t k, double t, std::mt19937_64& rng);

// τ(v* u) = (1/k) Σ conj(v_ij) u_ij.
Complex normalized_inner(const UnitaryMatrix& u, const UnitaryMatrix& v);
double hs_distance(const UnitaryMatrix& u, const UnitaryMatrix& v);
double projective_hs_distance(const UnitaryMatrix& u, const UnitaryMatrix& v);

// ---------------------------------------------------------------------------
// Matrices over an exact field: ℚ (p = 0) or 𝔽_p.

struct Field {
  std::uint64_t p = 0;

  bool is_rational() const { return p == 0; }
  mpq_class reduce(const mpq_class& x) const;
  mpq_class add(const mpq_class& a, const mpq_class& b) const { return reduce(a + b); }
  mpq_class sub(const mpq_class& a, const mpq_class& b) const { return reduce(a - b); }
  mpq_class mul(const mpq_class& a, const mpq_class& b) const { return reduce(a * b); }
  mpq_class inv(const mpq_class& a) const;
  mpq_class parse(const std::string& s) const;
  std::string name() const { return p == 0 ? "Q" : "F" + std::to_string(p); }

  friend bool operator==(const Field&, const Field&) = default;
};

using SparseRow = std::vector<std::pair<std::uint32_t, mpq_class>>;

struct RankMatrix {
  Field field;
  std::size_t n = 0;
  std::vector<SparseRow> rows;

  static RankMatrix identity(std::size_t k, Field f);
  static RankMatrix from_dense(const std::vector<std::vector<mpq_class>>& a, Field f);
  std::vector<std::vector<mpq_class>> to_dense() const;

  std::size_t size() const { return n; }
  RankMatrix multiply(const RankMatrix& b) const;
  RankMatrix subtract(const RankMatrix& b) const;
  RankMatrix scale(const mpq_class& c) const;
  // Throws std::domain_error when singular.
  RankMatrix inverse() const;
  std::size_t rank() const;
  bool is_monomial() const;
  void validate() const;

  friend bool operator==(const RankMatrix&, const RankMatrix&) = default;
};

RankMatrix perm_to_rank(const Permutation& s, Field f);
RankMatrix block_sum(const RankMatrix& a, const RankMatrix& b);
RankMatrix kronecker(const RankMatrix& a, const RankMatrix& b);
RankMatrix random_invertible(std::size_t k, Field f, std::mt19937_64& rng);

mpq_class rank_distance(const RankMatrix& a, const RankMatrix& b);
mpq_class projective_rank_distance(const RankMatrix& a, const RankMatrix& b);
// Largest geometric multiplicity of an eigenvalue of m over the algebraic closure.
std::size_t max_geometric_multiplicity(const RankMatrix& m);

// ---------------------------------------------------------------------------
// Finite groups given by tables.

struct FiniteMetricGroup {
  std::vector<std::vector<std::uint32_t>> table;
  std::vector<std::uint32_t> inverses;
  std::uint32_t identity = 0;
  // Empty means the trivial {0,1} metric.
  std::vector<std::vector<mpq_class>> distance;
  std::vector<std::string> labels;

  std::size_t order() const { return table.size(); }
  bool trivial_metric() const { return distance.empty(); }
  mpq_class dist(std::uint32_t a, std::uint32_t b) const;
  std::uint32_t mul(std::uint32_t a, std::uint32_t b) const { return table[a][b]; }

  // Table of a finite catalog group, elements in ball order.
  static std::shared_ptr<FiniteMetricGroup> from_group(const Group& g);
  static std::shared_ptr<FiniteMetricGroup> from_quotient(const QuotientDescriptor& q);
  // Group axioms, metric axioms, bi-invariance. Returns an error message or nullopt.
  std::optional<std::string> check() const;
  // d([a,b], e) ≤ C·d(a,e)·d(b,e) for all a, b.
  bool is_commutator_contractive(double c) const;

  json to_json() const;
  static std::shared_ptr<FiniteMetricGroup> from_json(const json& j);
};

struct TableElement {
  std::shared_ptr<const FiniteMetricGroup> group;
  std::uint32_t index = 0;
  friend bool operator==(const TableElement& a, const TableElement& b) {
    return a.group == b.group && a.index == b.index;
  }
};

// ---------------------------------------------------------------------------
// Implicit ℓ-fold tensor power of a unitary.

struct TensorPower {
  UnitaryMatrix base;
  int power = 1;

  TensorPower multiply(const TensorPower& b) const;
  TensorPower inverse() const;
  Complex normalized_trace() const;
  UnitaryMatrix materialize(std::size_t max_dim = 1u << 10) const;
};

// Embeds u as diag(u, 1_k) in U(2k) and tensors ℓ times.
TensorPower tensor_amplify(const UnitaryMatrix& u, int power);
double tensor_hs_distance(const TensorPower& a, const TensorPower& b);
double tensor_projective_hs_distance(const TensorPower& a, const TensorPower& b);

// ---------------------------------------------------------------------------
// Recursive target elements.

struct TargetElement;

// G ≀ F for a finite table group F; base indexed by elements of F.
struct WreathElement {
  std::vector<TargetElement> base;
  std::uint32_t top = 0;
  std::shared_ptr<const FiniteMetricGroup> top_group;
};

// Sym(A) ⋉ G^A with (σ0,b0)(σ1,b1) = (σ0σ1, a ↦ b0(σ1 a)·b1(a)).
struct PermWreathElement {
  Permutation sigma;
  std::vector<TargetElement> b;
};

struct TargetElement
    : std::variant<Permutation, UnitaryMatrix, RankMatrix, TableElement, TensorPower, WreathElement,
                   PermWreathElement> {
  using variant::variant;
};

TargetElement target_multiply(const TargetElement& a, const TargetElement& b);
TargetElement target_inverse(const TargetElement& a);

// ---------------------------------------------------------------------------
// Families.

struct Distance {
  double value = 0.0;
  std::optional<mpq_class> exact;

  static Distance of(const mpq_class& q) { return {q.get_d(), q}; }
  static Distance approx(double v) { return {v, std::nullopt}; }
};

// Symbolic dimension base^power; power 1 for ordinary dimensions.
struct Dimension {
  std::uint64_t base = 1;
  int power = 1;

  bool symbolic() const { return power != 1; }
  double log_value() const;
  std::optional<std::uint64_t> value() const;
  std::string to_string() const;
  json to_json() const;
  static Dimension from_json(const json& j);
  friend bool operator==(const Dimension&, const Dimension&) = default;
};

struct Family {
  enum class Tag {
    Sofic,
    Hyp,
    HypProjective,
    Lin,
    LinProjective,
    Fin,
    Trivial,
    Wreath,
    PermWreath,
    HypProjectiveTensor,
  };

  Tag tag = Tag::Sofic;
  // Permutation degree, matrix size, table order, |A| for PermWreath, 2k for tensor bases.
  std::size_t degree = 1;
  Field field;
  int power = 1;
  std::shared_ptr<const FiniteMetricGroup> table;  // Fin/Trivial target, Wreath top
  std::shared_ptr<const Family> base;              // Wreath, PermWreath

  static Family sofic(std::size_t k);
  static Family hyp(std::size_t k);
  static Family hyp_projective(std::size_t k);
  static Family lin(std::size_t k, Field f);
  static Family lin_projective(std::size_t k, Field f);
  static Family fin(std::shared_ptr<const FiniteMetricGroup> t);
  static Family wreath(Family base, std::shared_ptr<const FiniteMetricGroup> top);
  static Family perm_wreath(Family base, std::size_t a);
  static Family tensor(std::size_t base_dim, int power);

  std::string tag_name() const;
  Dimension dimension() const;
  double default_epsilon() const;
  bool exact_metric() const;

  TargetElement identity() const;
  // Metric for multiplicativity.
  Distance mult_distance(const TargetElement& a, const TargetElement& b) const;
  // (Pseudo)metric for separation; differs from mult_distance for projective tags.
  Distance sep_distance(const TargetElement& a, const TargetElement& b) const;
  // Throws std::invalid_argument when a is not an element of this family's group.
  void check_member(const TargetElement& a) const;

  json to_json() const;
  static Family from_json(const json& j);
  json element_to_json(const TargetElement& a) const;
  TargetElement element_from_json(const json& j) const;
};

// Parse a tag name such as "sofic", "lin", "hyp-projective".
Family::Tag parse_family_tag(const std::string& s);

Distance ham_distance(const Permutation& a, const Permutation& b);

}  // namespace mprof
