#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "mprof/certify.hpp"
#include "mprof/construct.hpp"
#include "mprof/groups.hpp"
#include "mprof/targets.hpp"

namespace mprof {

enum class Provenance { Exact, Upper, Lower, Unknown, Infinite };

std::string provenance_name(Provenance p);

struct ProfilePoint {
  int n = 0;
  std::optional<std::uint64_t> lower;
  std::optional<std::uint64_t> exact;
  std::optional<std::uint64_t> upper;
  // Set when the upper bound is only known symbolically (amplified tensors).
  std::optional<Dimension> symbolic_upper;
  bool infinite = false;
  // "exact", "upper:<builder>", "lower:<argument>", "unknown", "infinite".
  std::string provenance = "unknown";
  json trace = json::object();

  Provenance kind() const;
  // Exact value, else the upper bound.
  std::optional<std::uint64_t> value() const;
  // Best lower and upper bounds, folding in the exact value.
  std::optional<std::uint64_t> low() const { return exact ? exact : lower; }
  std::optional<std::uint64_t> high() const { return exact ? exact : upper; }
  bool consistent() const;
  json to_json() const;
};

struct ProfileCurve {
  std::string group;
  // "sofic", "hyp", "lin", "fin", "growth", "rf", "folner", "le-f", "ra".
  std::string quantity;
  std::vector<ProfilePoint> points;
  double slope = 0;
  int slope_lo = 0, slope_hi = 0;

  const ProfilePoint* at(int n) const;
  // Least-squares slope of log(value) against log(n) over [lo, hi].
  double fit_slope(int lo, int hi);
  std::string to_csv() const;
  static ProfileCurve from_csv(const std::string& text, const std::string& quantity, const std::string& group = "");
};

// ---------------------------------------------------------------------------
// Exact oracles.

struct OracleOptions {
  int k_max = 6;
  std::uint64_t budget = 50'000'000;  // search nodes over all k
  // Relabels points before enumeration; the result must not depend on it.
  std::uint64_t relabel_seed = 0;
};

struct OracleResult {
  ProfilePoint point;
  // Largest k refuted by complete enumeration.
  int refuted_up_to = 0;
  std::uint64_t nodes = 0;
  std::optional<ApproxCertificate> witness;
};

// Least k ≤ k_max admitting an (n,1)-approximation into Sym(k).
OracleResult sofic_exact_oracle(const Group& g, int n, const OracleOptions& opt = {});

ProfilePoint weakly_sofic_exact_Z(const Group& g, int n);

// ---------------------------------------------------------------------------
// Følner sets.

struct FolnerStrategy {
  enum class Kind { Exhaustive, Balls, Boxes };
  Kind kind = Kind::Boxes;
  int r_max = 6;            // exhaustive window radius, largest ball radius
  std::size_t size_max = 4;  // exhaustive size cap
  std::int64_t side_max = 1 << 14;  // largest box side
  std::size_t ball_cap = kDefaultBallCap;
  // Largest box listed element by element.
  std::uint64_t materialize_cap = 1 << 20;

  static FolnerStrategy exhaustive(int r_max, std::size_t size_max);
  static FolnerStrategy balls(int r_max);
  static FolnerStrategy boxes(std::int64_t side_max = 1 << 14);
};

struct FolnerSearchResult {
  // Size and defect of the set found; boxes too large to list have no witness.
  std::optional<std::uint64_t> size;
  std::optional<mpq_class> defect;
  std::optional<FolnerWitness> witness;
  std::optional<std::int64_t> box_side;
  // True when the size is certified minimal.
  bool minimal = false;
  // Smallest defect seen when nothing qualifies.
  std::optional<mpq_class> best_defect;
  std::string note;

  ProfilePoint point() const;
};

FolnerSearchResult folner_search(const Group& g, int n, const FolnerStrategy& s);
// Sets the radius bound to the least k ≥ n with A ⊆ B(k) and |A| ≤ k.
FolnerWitness control(FolnerWitness w, std::size_t cap = kDefaultBallCap);

// Σ_{g∈B(n)} |gA△A| / |A| for the box [0, side)^d in ℤ^d, in closed form.
mpq_class box_defect(int d, std::int64_t side, int n);

mpz_class folner_bound_nilpotent(int d, int n);

// ---------------------------------------------------------------------------
// Residual finiteness and LEF.

enum class QuotientFamily { Sublattices, Congruence };

struct RfResult {
  ProfilePoint point;
  std::optional<QuotientDescriptor> quotient;
};

// Least index of a quotient in the family whose kernel avoids B(n) \ {e}.
RfResult full_rf_growth(const Group& g, int n, QuotientFamily family, std::int64_t index_cap = 1 << 20);

// Every HNF sublattice of ℤ^d of the given index, in lexicographic order.
std::vector<std::vector<std::vector<Int>>> hnf_sublattices(int d, Int index);

struct LefOptions {
  std::uint64_t budget = 10'000'000;
  // Set when the catalog contains every group up to the largest order listed.
  bool complete = false;
};

// Least order of a finite catalog group admitting a ball monomorphism.
ProfilePoint le_f_growth(const Group& g, int n, std::vector<Group> catalog, const LefOptions& opt = {});

struct AmenableQuotient {
  Group quotient;
  std::function<Element(const Element&)> project;
  FolnerStrategy strategy;
};

ProfilePoint ra_profile(const Group& g, int n, const std::vector<AmenableQuotient>& catalog);

// ---------------------------------------------------------------------------
// Curves and the audit.

ProfileCurve growth_curve(const Group& g, int lo, int hi);
ProfileCurve rf_curve(const Group& g, int lo, int hi, QuotientFamily family);
ProfileCurve folner_curve(const Group& g, int lo, int hi, const FolnerStrategy& s);

struct CurveOptions {
  BuildOptions build;
  // Exact oracle for n with |B(n)| at most this size.
  std::size_t oracle_ball = 0;
  OracleOptions oracle;
};

// Pointwise minimum over builders: "cyclic", "product", "quotient", "folner", "lift".
ProfileCurve upper_curve(const Group& g, Family::Tag family, int lo, int hi, const std::vector<std::string>& builders,
                         const CurveOptions& opt = {});

struct AuditCheck {
  std::string inequality;
  int n = 0;
  double lhs = 0;
  double rhs = 0;
  bool ok = true;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  std::size_t violations = 0;
  json to_json() const;
};

// Checks lower(X) ≤ upper(Y) for every theorem X ≤ Y whose curves are present.
AuditReport inequality_audit(const std::vector<ProfileCurve>& curves);
// 𝒟(m) ≤ 𝒲(3m), 𝒲(m) ≤ 𝒟(3m²) and ℛ(m) ≤ 𝒲(m) on certificates built from
// congruence quotients of ℤ^d or the Heisenberg group.
AuditReport round_trip_audit(const Group& g, int m_max, const VerifyOptions& opt = {});

}  // namespace mprof
