#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "mprof/certify.hpp"
#include "mprof/groups.hpp"
#include "mprof/targets.hpp"

namespace mprof {

// Inputs that do not meet a builder's precondition.
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A finite set A with its Følner defect Σ_{g∈B(n)} |gA△A| / |A|.
struct FolnerWitness {
  Group group;
  int n = 1;
  std::vector<Element> set;
  mpq_class defect;
  // Controlled variant: A ⊆ B(k) and |A| ≤ k.
  std::optional<int> radius_bound;

  bool valid(std::size_t cap = kDefaultBallCap) const;
  json to_json() const;
  static FolnerWitness from_json(const json& j);
};

mpq_class folner_defect(const Group& g, const std::vector<Element>& set, int n,
                        std::size_t cap = kDefaultBallCap);
// Deduplicates the set and computes the defect. Throws on an empty set or n < 1.
FolnerWitness make_folner_witness(const Group& g, std::vector<Element> set, int n,
                                  std::optional<int> radius_bound = std::nullopt);

// Provenance record stored under "provenance" in certificate JSON.
json construction_trace(const std::string& builder, const json& params, int n, double epsilon,
                        const Dimension& dim, const std::vector<json>& inputs = {});

struct BuildOptions {
  VerifyOptions verify;
  // Largest materialized matrix size for the unitary and rank wreath analogues.
  std::size_t dimension_cap = 4096;
};

// Translation action of ℤ on ℤ/(2n+1).
ApproxCertificate cyclic_Z(int n, const BuildOptions& opt = {});

// Left-regular representation of G/N on B(radius) with no kernel check.
ApproxCertificate quotient_representation(const Group& g, const QuotientDescriptor& q, int radius,
                                          Family::Tag tag, Field field = {});
// Same, after checking that the kernel avoids B(2n) \ {e}.
ApproxCertificate from_quotient(const Group& g, const QuotientDescriptor& q, int n, Family::Tag tag,
                                Field field = {}, const BuildOptions& opt = {});

// Sofic certificate at n from a witness valid at 2n; n defaults to ⌊w.n/2⌋.
ApproxCertificate folner_to_sofic(const FolnerWitness& w, std::optional<int> n = std::nullopt,
                                  const BuildOptions& opt = {});

// g·g_i = g_{α(i)} · h.
struct CosetAction {
  std::vector<std::size_t> alpha;
  std::vector<Element> h;
};
CosetAction coset_action(const SubgroupData& sub, const Element& g);

// c_H is a certificate of the intrinsic group of sub.
ApproxCertificate induce_finite_index(const SubgroupData& sub, const ApproxCertificate& c_h,
                                      const BuildOptions& opt = {});

ApproxCertificate direct_product(const ApproxCertificate& c_g, const ApproxCertificate& c_h,
                                 const BuildOptions& opt = {});

// Same radius, images replaced by permutation matrices. Not verified.
ApproxCertificate unitary_lift(const ApproxCertificate& c, double epsilon = 1.4142135623730951);

// Sofic certificate at 2n² to unitary permutation matrices at n.
ApproxCertificate perm_to_hyp(const ApproxCertificate& c, int n, const BuildOptions& opt = {});
ApproxCertificate perm_to_lin(const ApproxCertificate& c, Field field, const BuildOptions& opt = {});

// ℓ = ⌈log(1/δ) / log(5/4)⌉ with δ = √2/(20n) − 1/(200n²).
int amplification_power(int n);
// Projective tensor certificate at n from a unitary certificate at 40n.
ApproxCertificate amplify_projective(const ApproxCertificate& c, int n, const BuildOptions& opt = {});

// Certificate of G ≀ H into G_α ≀ H/N; q is a quotient of H whose kernel avoids B_H(4n).
ApproxCertificate wreath_by_rf(const ApproxCertificate& c_g, const QuotientDescriptor& q, int n,
                               const BuildOptions& opt = {});

struct WreathLemmaReport {
  double eps = 0;            // input ε on B(4n)
  std::size_t ball_top = 0;  // |B_H(4n)|
  double bullet_mult = 0;    // max d(Ψ(xy,1), Ψ(x,1)Ψ(y,1))
  double bullet_mult_bound = 0;
  double bullet_top = 0;     // max d(Ψ(1,x)Ψ(1,y), Ψ(1,xy))
  bool bullet_left = true;   // Ψ(x,1)Ψ(1,y) = Ψ(x,y)
  bool bullet_right = true;  // Ψ(1,y)Ψ(x,1) = Ψ(y·x,y)
  double defect = 0;
  double min_separation = 0;
  double mult_threshold = 0;
  double inj_threshold = 0;
  bool pass = false;
  json to_json() const;
};

struct WreathSoficResult {
  ApproxCertificate certificate;
  WreathLemmaReport lemma;
};

// Certificate of G ≀ H from c_G (radius ≥ 4n) and the left-regular action of H/N.
// Sofic, unitary and rank families are supported; matrices above the cap throw.
WreathSoficResult wreath_sofic(const ApproxCertificate& c_g, const QuotientDescriptor& q, int n,
                               const BuildOptions& opt = {});

// N ⊴ G with G/N presented as a catalog group.
struct AmenableExtension {
  SubgroupData normal;
  Group quotient;
  std::function<Element(const Element&)> project;
  std::function<Element(const Element&)> section;
};

// ℤ² with N = ℤ×{0} and G/N = ℤ through the second coordinate.
AmenableExtension plane_over_line();

// Radius of c_N needed by extend_by_amenable.
int extension_radius(const FolnerWitness& w, const AmenableExtension& ext, int n);

// Certificate into Sym(A) ⋉ N_α^A from c_N and a controlled witness of G/N at 10n.
ApproxCertificate extend_by_amenable(const ApproxCertificate& c_n, const FolnerWitness& w,
                                     const AmenableExtension& ext, int n, const BuildOptions& opt = {});

}  // namespace mprof
