#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mprof/groups.hpp"
#include "mprof/targets.hpp"

namespace mprof {

// Malformed certificate: missing or unknown assignment, wrong dimension,
// target outside the family.
class CertificateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ApproxCertificate {
  Group group;
  Family family;
  double epsilon = 1.0;
  int n = 0;
  std::vector<Element> elements;
  std::vector<TargetElement> targets;
  json provenance = json::object();

  ApproxCertificate(Group g, Family f, double eps, int radius)
      : group(std::move(g)), family(std::move(f)), epsilon(eps), n(radius) {}

  // Assigns π(g) over the whole ball B(n) in ball order.
  template <class F>
  static ApproxCertificate build(const Group& g, const Family& f, double eps, int radius, F&& image,
                                 std::size_t cap = kDefaultBallCap) {
    ApproxCertificate c(g, f, eps, radius);
    Ball b = ball(g, radius, cap);
    for (const auto& x : b.elements) c.assign(x, image(x));
    return c;
  }

  Dimension dimension() const { return family.dimension(); }
  std::size_t size() const { return elements.size(); }
  void assign(const Element& g, TargetElement t);
  std::optional<std::size_t> find(const Element& g) const;
  // π(g), or the identity target outside the assigned set.
  TargetElement image(const Element& g) const;

  json to_json() const;
  static ApproxCertificate from_json(const json& j, std::size_t cap = kDefaultBallCap);

 private:
  std::unordered_map<Element, std::size_t, ElementHash> index_;
};

struct HomCertificate {
  Group group;
  Family family;
  double epsilon = 1.0;
  // Images of the positive generators; inverses are forced.
  std::vector<TargetElement> images;
  std::vector<Word> relators;
  json provenance = json::object();

  HomCertificate(Group g, Family f, double eps) : group(std::move(g)), family(std::move(f)), epsilon(eps) {}

  TargetElement letter_image(Letter a) const;
  TargetElement evaluate(const Word& w) const;

  json to_json() const;
  static HomCertificate from_json(const json& j);
};

// Standard relators of catalog groups: commutators for ℤ^d and direct
// products, [[x,y],x] and [[x,y],y] for the Heisenberg group, a^m for ℤ/m.
std::vector<Word> default_relators(const Group& g);

std::string format_word(const Group& g, const Word& w);
Word parse_word(const Group& g, const std::string& text);

struct VerifyOptions {
  // Floating metrics must clear each bound by this much.
  double margin = 1e-9;
  // verify_W / verify_R: nontrivial words need d > ε − 1/n (default) or d > ε.
  bool strict_separation = false;
  std::size_t word_cap = 1'000'000;
  std::size_t ball_cap = kDefaultBallCap;
  unsigned workers = 1;
};

struct VerificationReport {
  bool pass = false;
  Distance worst_defect = Distance::of(0);
  std::vector<std::string> defect_witness;
  std::optional<Distance> min_separation;
  std::vector<std::string> separation_witness;
  double defect_bound = 0;
  double separation_bound = 0;
  std::size_t products_checked = 0;
  std::size_t pairs_checked = 0;
  std::string failure;

  // bound − defect and separation − bound; positive when the inequality holds.
  double defect_margin() const { return defect_bound - worst_defect.value; }
  double separation_margin() const;
  json to_json() const;
};

class VerificationFailure : public std::runtime_error {
 public:
  explicit VerificationFailure(VerificationReport r)
      : std::runtime_error("verification failed: " + r.failure), report(std::move(r)) {}
  VerificationReport report;
};

VerificationReport verify_D(const ApproxCertificate& c, const VerifyOptions& opt = {});
VerificationReport verify_W(const HomCertificate& h, int n, const VerifyOptions& opt = {});
VerificationReport verify_R(const HomCertificate& h, int n, const VerifyOptions& opt = {});

// Certificate at m from a homomorphism verified at 3m.
ApproxCertificate D_from_W(const HomCertificate& h, int m, const VerifyOptions& opt = {});
// Homomorphism induced by the generator images of a certificate verified at 3m².
HomCertificate W_from_D(const ApproxCertificate& c, int m, const VerifyOptions& opt = {});

// Words w_g for g ∈ B(m): lexicographically least geodesics with w_{g⁻¹} = w_g⁻¹
// whenever g is not an involution.
std::unordered_map<Element, Word, ElementHash> paired_geodesics(const Group& g, int m,
                                                                std::size_t cap = kDefaultBallCap);

struct GraphCertificate {
  std::size_t vertices = 0;
  std::size_t letters = 0;
  // out[v][a] = target of the edge labelled by letter a, or -1.
  std::vector<std::vector<std::int64_t>> out;
  int n = 0;
  double delta = 0;

  GraphCertificate(std::size_t v, std::size_t num_letters, int radius, double d);
  void add_edge(std::size_t u, Letter a, std::size_t v);

  json to_json(const Group& g) const;
  static GraphCertificate from_json(const json& j, const Group& g);
};

struct GraphReport {
  double good_fraction = 0;
  std::size_t good_vertices = 0;
  bool pass = false;
  std::optional<std::size_t> first_bad_vertex;
};

GraphReport verify_graph(const GraphCertificate& gc, const Group& g, std::size_t cap = kDefaultBallCap);
// Schreier graph of a sofic certificate: u --s--> π(s)⁻¹(u).
GraphCertificate graph_from_sofic(const ApproxCertificate& c, double delta);

struct DeltaSolutionReport {
  Distance max_defect = Distance::of(0);
  std::size_t worst_relator = 0;
  bool pass = false;
};

// Letters in the relators index the tuple: 2i is g_i, 2i+1 its inverse.
DeltaSolutionReport check_delta_solution(const std::vector<Word>& relators,
                                         const std::vector<TargetElement>& tuple, const Family& family,
                                         double delta);

struct LemmaBound {
  std::string name;
  double worst = 0;
  double bound = 0;
  std::size_t checked = 0;
  bool pass = true;
};

struct LemmaReport {
  double eps0 = 0;
  std::size_t subset_size = 0;
  std::vector<LemmaBound> bounds;
  bool pass = true;
  json to_json() const;
};

struct LemmaOptions {
  int max_length = 3;
  std::size_t max_tuples = 4000;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;
};

// Checks the five approximate-homomorphism bounds with ε₀ the largest defect
// on F = B(⌊n/2⌋).
LemmaReport lemma_consistency_suite(const ApproxCertificate& c, const LemmaOptions& opt = {});

}  // namespace mprof
