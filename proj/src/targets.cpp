#include "mprof/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace mprof {

// ---- permutations ----

Permutation Permutation::identity(std::size_t k) {
  std::vector<std::uint32_t> im(k);
  std::iota(im.begin(), im.end(), 0u);
  return Permutation(std::move(im));
}

Permutation Permutation::compose(const Permutation& tau) const {
  if (tau.degree() != degree()) throw std::invalid_argument("permutation degree mismatch");
  std::vector<std::uint32_t> im(degree());
  for (std::size_t i = 0; i < im.size(); ++i) im[i] = images[tau.images[i]];
  return Permutation(std::move(im));
}

Permutation Permutation::inverse() const {
  std::vector<std::uint32_t> im(degree());
  for (std::size_t i = 0; i < im.size(); ++i) im[images[i]] = static_cast<std::uint32_t>(i);
  return Permutation(std::move(im));
}

std::size_t Permutation::fixed_points() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < images.size(); ++i) c += images[i] == i;
  return c;
}

std::size_t Permutation::cycle_count() const {
  std::vector<char> seen(degree(), 0);
  std::size_t c = 0;
  for (std::size_t i = 0; i < degree(); ++i) {
    if (seen[i]) continue;
    ++c;
    for (std::size_t j = i; !seen[j]; j = images[j]) seen[j] = 1;
  }
  return c;
}

bool Permutation::is_identity() const { return fixed_points() == degree(); }

void Permutation::validate() const {
  std::vector<char> seen(degree(), 0);
  for (auto x : images) {
    if (x >= degree() || seen[x]) throw std::invalid_argument("permutation images are not a bijection");
    seen[x] = 1;
  }
}

Permutation random_permutation(std::size_t k, std::mt19937_64& rng) {
  Permutation p = Permutation::identity(k);
  for (std::size_t i = k; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(p.images[i - 1], p.images[d(rng)]);
  }
  return p;
}

Permutation block_sum(const Permutation& a, const Permutation& b) {
  std::vector<std::uint32_t> im = a.images;
  const auto off = static_cast<std::uint32_t>(a.degree());
  for (auto x : b.images) im.push_back(x + off);
  return Permutation(std::move(im));
}

Permutation product_action(const Permutation& a, const Permutation& b) {
  const std::size_t m = b.degree();
  std::vector<std::uint32_t> im(a.degree() * m);
  for (std::size_t i = 0; i < a.degree(); ++i)
    for (std::size_t j = 0; j < m; ++j) im[i * m + j] = static_cast<std::uint32_t>(a.images[i] * m + b.images[j]);
  return Permutation(std::move(im));
}

Distance ham_distance(const Permutation& a, const Permutation& b) {
  if (a.degree() != b.degree()) throw std::invalid_argument("permutation degree mismatch");
  if (a.degree() == 0) return Distance::of(0);
  long moved = 0;
  for (std::size_t i = 0; i < a.degree(); ++i) moved += a.images[i] != b.images[i];
  return Distance::of(ratio(moved, static_cast<unsigned long>(a.degree())));
}

// ---- unitaries ----

namespace {

void prune_zeros(SparseC& m) {
  m.prune([](Eigen::Index, Eigen::Index, const Complex& v) { return v != Complex(0.0, 0.0); });
}

using DenseC = Eigen::MatrixXcd;

DenseC to_dense(const UnitaryMatrix& u) { return DenseC(u.m); }

UnitaryMatrix from_eigen(const DenseC& d, double tol) {
  UnitaryMatrix u;
  u.m = d.sparseView();
  prune_zeros(u.m);
  u.tolerance = tol;
  return u;
}

}  // namespace

UnitaryMatrix UnitaryMatrix::identity(std::size_t k) {
  UnitaryMatrix u;
  u.m.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  u.m.setIdentity();
  return u;
}

UnitaryMatrix UnitaryMatrix::multiply(const UnitaryMatrix& b) const {
  if (b.size() != size()) throw std::invalid_argument("unitary size mismatch");
  UnitaryMatrix r;
  r.m = m * b.m;
  prune_zeros(r.m);
  r.tolerance = std::max(tolerance, b.tolerance);
  return r;
}

UnitaryMatrix UnitaryMatrix::adjoint() const {
  UnitaryMatrix r;
  r.m = m.adjoint();
  r.tolerance = tolerance;
  return r;
}

Complex UnitaryMatrix::trace() const {
  Complex t(0, 0);
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) t += m.coeff(i, i);
  return t;
}

double UnitaryMatrix::unitarity_defect() const {
  SparseC p = m.adjoint() * m;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.outerSize(); ++i) {
    bool diag_seen = false;
    for (SparseC::InnerIterator it(p, i); it; ++it) {
      Complex v = it.value();
      if (it.col() == i) {
        v -= 1.0;
        diag_seen = true;
      }
      worst = std::max(worst, std::abs(v));
    }
    if (!diag_seen) worst = std::max(worst, 1.0);
  }
  return worst;
}

void UnitaryMatrix::validate() const {
  if (m.rows() != m.cols()) throw std::invalid_argument("unitary must be square");
  if (unitarity_defect() > tolerance) throw std::invalid_argument("matrix is not unitary within tolerance");
}

UnitaryMatrix perm_to_unitary(const Permutation& s) {
  const auto k = static_cast<Eigen::Index>(s.degree());
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(s.degree());
  for (Eigen::Index j = 0; j < k; ++j) t.emplace_back(s.images[static_cast<std::size_t>(j)], j, Complex(1, 0));
  UnitaryMatrix u;
  u.m.resize(k, k);
  u.m.setFromTriplets(t.begin(), t.end());
  return u;
}

UnitaryMatrix block_sum(const UnitaryMatrix& a, const UnitaryMatrix& b) {
  const auto n = static_cast<Eigen::Index>(a.size() + b.size());
  const auto off = static_cast<Eigen::Index>(a.size());
  std::vector<Eigen::Triplet<Complex>> t;
  for (Eigen::Index i = 0; i < a.m.outerSize(); ++i)
    for (SparseC::InnerIterator it(a.m, i); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < b.m.outerSize(); ++i)
    for (SparseC::InnerIterator it(b.m, i); it; ++it) t.emplace_back(it.row() + off, it.col() + off, it.value());
  UnitaryMatrix u;
  u.m.resize(n, n);
  u.m.setFromTriplets(t.begin(), t.end());
  u.tolerance = std::max(a.tolerance, b.tolerance);
  return u;
}

UnitaryMatrix kronecker(const UnitaryMatrix& a, const UnitaryMatrix& b) {
  const auto nb = static_cast<Eigen::Index>(b.size());
  const auto n = static_cast<Eigen::Index>(a.size()) * nb;
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(static_cast<std::size_t>(a.m.nonZeros() * b.m.nonZeros()));
  for (Eigen::Index i = 0; i < a.m.outerSize(); ++i)
    for (SparseC::InnerIterator x(a.m, i); x; ++x)
      for (Eigen::Index k = 0; k < b.m.outerSize(); ++k)
        for (SparseC::InnerIterator y(b.m, k); y; ++y)
          t.emplace_back(x.row() * nb + y.row(), x.col() * nb + y.col(), x.value() * y.value());
  UnitaryMatrix u;
  u.m.resize(n, n);
  u.m.setFromTriplets(t.begin(), t.end());
  u.tolerance = std::max(a.tolerance, b.tolerance);
  return u;
}

UnitaryMatrix from_dense(const std::vector<std::vector<Complex>>& rows, double tolerance) {
  const auto k = static_cast<Eigen::Index>(rows.size());
  DenseC d(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != k)
      throw std::invalid_argument("unitary must be square");
    for (Eigen::Index j = 0; j < k; ++j) d(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return from_eigen(d, tolerance);
}

UnitaryMatrix haar_unitary(std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(k);
  DenseC z(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<DenseC> qr(z);
  DenseC q = qr.householderQ();
  DenseC r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    Complex d = r(j, j);
    double a = std::abs(d);
    if (a > 0) q.col(j) *= d / a;
  }
  return from_eigen(q, kUnitaryTolerance);
}

UnitaryMatrix near_identity_unitary(std::size_t k, double t, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(k);
  DenseC h(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) h(i, j) = Complex(g(rng), g(rng));
  DenseC herm = (h + h.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<DenseC> es(herm);
  Eigen::VectorXd ev = es.eigenvalues();
  double scale = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  if (scale == 0) scale = 1;
  Eigen::VectorXcd phases(n);
  for (Eigen::Index i = 0; i < n; ++i) phases(i) = std::exp(Complex(0, t * ev(i) / scale));
  DenseC u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return from_eigen(u, kUnitaryTolerance);
}

Complex normalized_inner(const UnitaryMatrix& u, const UnitaryMatrix& v) {
  if (u.size() != v.size()) throw std::invalid_argument("unitary size mismatch");
  Complex s = u.m.cwiseProduct(SparseC(v.m.conjugate())).sum();
  return s / static_cast<double>(u.size());
}

double hs_distance(const UnitaryMatrix& u, const UnitaryMatrix& v) {
  if (u.size() != v.size()) throw std::invalid_argument("unitary size mismatch");
  SparseC d = u.m - v.m;
  return std::sqrt(d.squaredNorm() / static_cast<double>(u.size()));
}

double projective_hs_distance(const UnitaryMatrix& u, const UnitaryMatrix& v) {
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * std::abs(normalized_inner(u, v))));
}

// ---- finite tables ----

mpq_class FiniteMetricGroup::dist(std::uint32_t a, std::uint32_t b) const {
  if (trivial_metric()) return a == b ? 0 : 1;
  return distance[a][b];
}

std::shared_ptr<FiniteMetricGroup> FiniteMetricGroup::from_group(const Group& g) {
  auto elems = enumerate_finite(g);
  std::unordered_map<Element, std::uint32_t, ElementHash> idx;
  for (std::size_t i = 0; i < elems.size(); ++i) idx.emplace(elems[i], static_cast<std::uint32_t>(i));
  auto t = std::make_shared<FiniteMetricGroup>();
  const std::size_t m = elems.size();
  t->table.assign(m, std::vector<std::uint32_t>(m));
  t->inverses.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) t->table[i][j] = idx.at(g.multiply(elems[i], elems[j]));
    t->inverses[i] = idx.at(g.inverse(elems[i]));
    t->labels.push_back(g.format(elems[i]));
  }
  t->identity = idx.at(g.identity());
  return t;
}

std::shared_ptr<FiniteMetricGroup> FiniteMetricGroup::from_quotient(const QuotientDescriptor& q) {
  return from_group(Group::quotient(q));
}

std::optional<std::string> FiniteMetricGroup::check() const {
  const std::size_t m = order();
  if (m == 0) return "empty table";
  if (identity >= m) return "identity out of range";
  if (inverses.size() != m) return "inverse table has wrong size";
  for (const auto& row : table) {
    if (row.size() != m) return "table is not square";
    for (auto x : row)
      if (x >= m) return "table entry out of range";
  }
  for (std::size_t a = 0; a < m; ++a) {
    if (table[identity][a] != a || table[a][identity] != a) return "identity law fails";
    if (table[a][inverses[a]] != identity) return "inverse law fails";
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t c = 0; c < m; ++c)
        if (table[table[a][b]][c] != table[a][table[b][c]]) return "associativity fails";
  }
  if (trivial_metric()) return std::nullopt;
  if (distance.size() != m) return "distance matrix has wrong size";
  for (std::size_t a = 0; a < m; ++a) {
    if (distance[a].size() != m) return "distance matrix is not square";
    for (std::size_t b = 0; b < m; ++b) {
      const auto& d = distance[a][b];
      if (d < 0 || d > 1) return "distance outside [0,1]";
      if ((d == 0) != (a == b)) return "distance does not separate points";
      if (d != distance[b][a]) return "distance is not symmetric";
      for (std::size_t c = 0; c < m; ++c)
        if (d > distance[a][c] + distance[c][b]) return "triangle inequality fails";
    }
  }
  for (std::size_t g = 0; g < m; ++g)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        if (distance[table[g][a]][table[g][b]] != distance[a][b]) return "metric is not left invariant";
        if (distance[table[a][g]][table[b][g]] != distance[a][b]) return "metric is not right invariant";
      }
  return std::nullopt;
}

bool FiniteMetricGroup::is_commutator_contractive(double c) const {
  const std::size_t m = order();
  for (std::uint32_t a = 0; a < m; ++a)
    for (std::uint32_t b = 0; b < m; ++b) {
      std::uint32_t comm = mul(mul(a, b), mul(inverses[a], inverses[b]));
      double lhs = dist(comm, identity).get_d();
      double rhs = c * dist(a, identity).get_d() * dist(b, identity).get_d();
      if (lhs > rhs + 1e-12) return false;
    }
  return true;
}

json FiniteMetricGroup::to_json() const {
  json j;
  j["table"] = table;
  j["identity"] = identity;
  if (!trivial_metric()) {
    json rows = json::array();
    for (const auto& r : distance) {
      json row = json::array();
      for (const auto& d : r) row.push_back(d.get_str());
      rows.push_back(row);
    }
    j["distance"] = rows;
  }
  if (!labels.empty()) j["labels"] = labels;
  return j;
}

std::shared_ptr<FiniteMetricGroup> FiniteMetricGroup::from_json(const json& j) {
  auto t = std::make_shared<FiniteMetricGroup>();
  t->table = j.at("table").get<std::vector<std::vector<std::uint32_t>>>();
  t->identity = j.value("identity", 0u);
  const std::size_t m = t->table.size();
  t->inverses.assign(m, 0);
  for (std::uint32_t a = 0; a < m; ++a) {
    bool found = false;
    for (std::uint32_t b = 0; b < m && !found; ++b)
      if (t->table[a].size() == m && t->table[a][b] == t->identity) {
        t->inverses[a] = b;
        found = true;
      }
    if (!found) throw std::invalid_argument("table element without inverse");
  }
  if (j.contains("distance")) {
    for (const auto& row : j.at("distance")) {
      std::vector<mpq_class> r;
      for (const auto& d : row) {
        mpq_class q;
        if (d.is_string()) {
          if (q.set_str(d.get<std::string>(), 10) != 0) throw std::invalid_argument("bad distance entry");
          q.canonicalize();
        } else {
          q = mpq_class(d.get<double>());
        }
        r.push_back(q);
      }
      t->distance.push_back(std::move(r));
    }
  }
  if (j.contains("labels")) t->labels = j.at("labels").get<std::vector<std::string>>();
  if (auto err = t->check()) throw std::invalid_argument("invalid finite metric group: " + *err);
  return t;
}

// ---- tensor powers ----

TensorPower TensorPower::multiply(const TensorPower& b) const {
  if (b.power != power) throw std::invalid_argument("tensor power mismatch");
  return {base.multiply(b.base), power};
}

TensorPower TensorPower::inverse() const { return {base.adjoint(), power}; }

Complex TensorPower::normalized_trace() const { return std::pow(base.normalized_trace(), power); }

UnitaryMatrix TensorPower::materialize(std::size_t max_dim) const {
  double dim = std::pow(static_cast<double>(base.size()), power);
  if (dim > static_cast<double>(max_dim)) throw CapacityError("tensor power too large to materialize");
  UnitaryMatrix r = base;
  for (int i = 1; i < power; ++i) r = kronecker(r, base);
  return r;
}

TensorPower tensor_amplify(const UnitaryMatrix& u, int power) {
  if (power < 1) throw std::invalid_argument("tensor power must be >= 1");
  return {block_sum(u, UnitaryMatrix::identity(u.size())), power};
}

double tensor_hs_distance(const TensorPower& a, const TensorPower& b) {
  if (a.power != b.power) throw std::invalid_argument("tensor power mismatch");
  Complex t = std::pow(normalized_inner(a.base, b.base), a.power);
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * t.real()));
}

double tensor_projective_hs_distance(const TensorPower& a, const TensorPower& b) {
  if (a.power != b.power) throw std::invalid_argument("tensor power mismatch");
  double t = std::pow(std::abs(normalized_inner(a.base, b.base)), a.power);
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * t));
}

// ---- generic elements ----

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

TargetElement target_multiply(const TargetElement& a, const TargetElement& b) {
  if (a.index() != b.index()) throw std::invalid_argument("target element kinds differ");
  return std::visit(
      overloaded{
          [&](const Permutation& x) -> TargetElement { return x.compose(std::get<Permutation>(b)); },
          [&](const UnitaryMatrix& x) -> TargetElement { return x.multiply(std::get<UnitaryMatrix>(b)); },
          [&](const RankMatrix& x) -> TargetElement { return x.multiply(std::get<RankMatrix>(b)); },
          [&](const TableElement& x) -> TargetElement {
            const auto& y = std::get<TableElement>(b);
            if (x.group != y.group) throw std::invalid_argument("table mismatch");
            return TableElement{x.group, x.group->mul(x.index, y.index)};
          },
          [&](const TensorPower& x) -> TargetElement { return x.multiply(std::get<TensorPower>(b)); },
          [&](const WreathElement& x) -> TargetElement {
            const auto& y = std::get<WreathElement>(b);
            const auto& f = *x.top_group;
            WreathElement r;
            r.top_group = x.top_group;
            r.top = f.mul(x.top, y.top);
            r.base.reserve(x.base.size());
            // (x·b')(p) = b'(x⁻¹ p)
            for (std::uint32_t p = 0; p < f.order(); ++p)
              r.base.push_back(target_multiply(x.base[p], y.base[f.mul(f.inverses[x.top], p)]));
            return r;
          },
          [&](const PermWreathElement& x) -> TargetElement {
            const auto& y = std::get<PermWreathElement>(b);
            PermWreathElement r;
            r.sigma = x.sigma.compose(y.sigma);
            r.b.reserve(x.b.size());
            for (std::uint32_t a = 0; a < x.b.size(); ++a) r.b.push_back(target_multiply(x.b[y.sigma(a)], y.b[a]));
            return r;
          },
      },
      a);
}

TargetElement target_inverse(const TargetElement& a) {
  return std::visit(
      overloaded{
          [](const Permutation& x) -> TargetElement { return x.inverse(); },
          [](const UnitaryMatrix& x) -> TargetElement { return x.adjoint(); },
          [](const RankMatrix& x) -> TargetElement { return x.inverse(); },
          [](const TableElement& x) -> TargetElement { return TableElement{x.group, x.group->inverses[x.index]}; },
          [](const TensorPower& x) -> TargetElement { return x.inverse(); },
          [](const WreathElement& x) -> TargetElement {
            // (b,x)⁻¹ = (p ↦ b(x p)⁻¹, x⁻¹)
            const auto& f = *x.top_group;
            WreathElement r;
            r.top_group = x.top_group;
            r.top = f.inverses[x.top];
            for (std::uint32_t p = 0; p < f.order(); ++p) r.base.push_back(target_inverse(x.base[f.mul(x.top, p)]));
            return r;
          },
          [](const PermWreathElement& x) -> TargetElement {
            PermWreathElement r;
            r.sigma = x.sigma.inverse();
            for (std::uint32_t a = 0; a < x.b.size(); ++a) r.b.push_back(target_inverse(x.b[r.sigma(a)]));
            return r;
          },
      },
      a);
}

// ---- dimensions ----

double Dimension::log_value() const { return power * std::log(static_cast<double>(base)); }

std::optional<std::uint64_t> Dimension::value() const {
  std::uint64_t r = 1;
  for (int i = 0; i < power; ++i) {
    if (base != 0 && r > UINT64_MAX / base) return std::nullopt;
    r *= base;
  }
  return r;
}

std::string Dimension::to_string() const {
  if (!symbolic()) return std::to_string(base);
  return std::to_string(base) + "^" + std::to_string(power);
}

json Dimension::to_json() const {
  if (!symbolic()) return base;
  return {{"base", base}, {"power", power}};
}

Dimension Dimension::from_json(const json& j) {
  if (j.is_number()) return {j.get<std::uint64_t>(), 1};
  return {j.at("base").get<std::uint64_t>(), j.at("power").get<int>()};
}

// ---- families ----

Family Family::sofic(std::size_t k) { return Family{Tag::Sofic, k, {}, 1, nullptr, nullptr}; }
Family Family::hyp(std::size_t k) { return Family{Tag::Hyp, k, {}, 1, nullptr, nullptr}; }
Family Family::hyp_projective(std::size_t k) { return Family{Tag::HypProjective, k, {}, 1, nullptr, nullptr}; }
Family Family::lin(std::size_t k, Field f) { return Family{Tag::Lin, k, f, 1, nullptr, nullptr}; }
Family Family::lin_projective(std::size_t k, Field f) { return Family{Tag::LinProjective, k, f, 1, nullptr, nullptr}; }
Family Family::fin(std::shared_ptr<const FiniteMetricGroup> t) {
  std::size_t k = t->order();
  Tag tag = t->trivial_metric() ? Tag::Trivial : Tag::Fin;
  return Family{tag, k, {}, 1, std::move(t), nullptr};
}
Family Family::wreath(Family base, std::shared_ptr<const FiniteMetricGroup> top) {
  if (!base.exact_metric() && base.tag != Tag::Hyp)
    throw std::invalid_argument("wreath base must carry a genuine metric");
  std::size_t f = top->order();
  return Family{Tag::Wreath, f, {}, 1, std::move(top), std::make_shared<const Family>(std::move(base))};
}
Family Family::perm_wreath(Family base, std::size_t a) {
  return Family{Tag::PermWreath, a, {}, 1, nullptr, std::make_shared<const Family>(std::move(base))};
}
Family Family::tensor(std::size_t base_dim, int power) {
  return Family{Tag::HypProjectiveTensor, base_dim, {}, power, nullptr, nullptr};
}

std::string Family::tag_name() const {
  switch (tag) {
    case Tag::Sofic: return "sofic";
    case Tag::Hyp: return "hyp";
    case Tag::HypProjective: return "hyp-projective";
    case Tag::Lin: return "lin";
    case Tag::LinProjective: return "lin-projective";
    case Tag::Fin: return "fin";
    case Tag::Trivial: return "trivial";
    case Tag::Wreath: return "wreath";
    case Tag::PermWreath: return "perm-wreath";
    case Tag::HypProjectiveTensor: return "hyp-projective-tensor";
  }
  return "?";
}

Family::Tag parse_family_tag(const std::string& s) {
  static const std::pair<const char*, Family::Tag> names[] = {
      {"sofic", Family::Tag::Sofic},          {"hyp", Family::Tag::Hyp},
      {"hyp-projective", Family::Tag::HypProjective}, {"lin", Family::Tag::Lin},
      {"lin-projective", Family::Tag::LinProjective}, {"fin", Family::Tag::Fin},
      {"trivial", Family::Tag::Trivial},      {"wreath", Family::Tag::Wreath},
      {"perm-wreath", Family::Tag::PermWreath}, {"hyp-projective-tensor", Family::Tag::HypProjectiveTensor},
  };
  for (const auto& [n, t] : names)
    if (s == n) return t;
  throw std::invalid_argument("unknown family '" + s + "'");
}

Dimension Family::dimension() const {
  switch (tag) {
    case Tag::Wreath: {
      // |F| · k^|F|
      Dimension b = base->dimension();
      if (b.symbolic()) throw std::invalid_argument("wreath over a symbolic base");
      auto v = Dimension{b.base, static_cast<int>(degree)}.value();
      if (!v || *v > UINT64_MAX / degree) return {b.base, static_cast<int>(degree)};
      return {degree * *v, 1};
    }
    case Tag::PermWreath: {
      Dimension b = base->dimension();
      return {degree * b.base, 1};
    }
    case Tag::HypProjectiveTensor:
      return {degree, power};
    default:
      return {degree, 1};
  }
}

double Family::default_epsilon() const {
  switch (tag) {
    case Tag::Hyp:
    case Tag::HypProjective:
    case Tag::HypProjectiveTensor:
      return std::sqrt(2.0);
    case Tag::Lin: return 0.25;
    case Tag::LinProjective: return 0.125;
    default: return 1.0;
  }
}

bool Family::exact_metric() const {
  switch (tag) {
    case Tag::Hyp:
    case Tag::HypProjective:
    case Tag::HypProjectiveTensor:
      return false;
    case Tag::Wreath:
    case Tag::PermWreath:
      return base->exact_metric();
    default:
      return true;
  }
}

TargetElement Family::identity() const {
  switch (tag) {
    case Tag::Sofic: return Permutation::identity(degree);
    case Tag::Hyp:
    case Tag::HypProjective: return UnitaryMatrix::identity(degree);
    case Tag::Lin:
    case Tag::LinProjective: return RankMatrix::identity(degree, field);
    case Tag::Fin:
    case Tag::Trivial: return TableElement{table, table->identity};
    case Tag::Wreath: {
      WreathElement w;
      w.top_group = table;
      w.top = table->identity;
      w.base.assign(table->order(), base->identity());
      return w;
    }
    case Tag::PermWreath: {
      PermWreathElement w;
      w.sigma = Permutation::identity(degree);
      w.b.assign(degree, base->identity());
      return w;
    }
    case Tag::HypProjectiveTensor: return TensorPower{UnitaryMatrix::identity(degree), power};
  }
  throw std::logic_error("unreachable");
}

namespace {

Distance combine_max(const std::vector<Distance>& parts) {
  Distance r = Distance::of(0);
  for (const auto& d : parts) {
    if (r.exact && d.exact) {
      if (*d.exact > *r.exact) r = d;
    } else {
      r.exact.reset();
      r.value = std::max(r.value, d.value);
    }
  }
  return r;
}

}  // namespace

Distance Family::mult_distance(const TargetElement& a, const TargetElement& b) const {
  switch (tag) {
    case Tag::Sofic: return ham_distance(std::get<Permutation>(a), std::get<Permutation>(b));
    case Tag::Hyp:
    case Tag::HypProjective:
      return Distance::approx(hs_distance(std::get<UnitaryMatrix>(a), std::get<UnitaryMatrix>(b)));
    case Tag::Lin:
    case Tag::LinProjective:
      return Distance::of(rank_distance(std::get<RankMatrix>(a), std::get<RankMatrix>(b)));
    case Tag::Fin:
    case Tag::Trivial: {
      const auto& x = std::get<TableElement>(a);
      const auto& y = std::get<TableElement>(b);
      return Distance::of(table->dist(x.index, y.index));
    }
    case Tag::Wreath: {
      const auto& x = std::get<WreathElement>(a);
      const auto& y = std::get<WreathElement>(b);
      if (x.top != y.top) return Distance::of(1);
      std::vector<Distance> parts;
      for (std::size_t p = 0; p < x.base.size(); ++p) parts.push_back(base->mult_distance(x.base[p], y.base[p]));
      return combine_max(parts);
    }
    case Tag::PermWreath: {
      const auto& x = std::get<PermWreathElement>(a);
      const auto& y = std::get<PermWreathElement>(b);
      const auto n = static_cast<unsigned long>(degree);
      mpq_class exact_sum = 0;
      double sum = 0;
      bool exact = true;
      for (std::uint32_t i = 0; i < degree; ++i) {
        if (x.sigma(i) != y.sigma(i)) {
          exact_sum += 1;
          sum += 1;
          continue;
        }
        Distance d = base->mult_distance(x.b[i], y.b[i]);
        sum += d.value;
        if (d.exact)
          exact_sum += *d.exact;
        else
          exact = false;
      }
      if (exact) return Distance::of(exact_sum / mpq_class(n));
      return Distance::approx(sum / static_cast<double>(n));
    }
    case Tag::HypProjectiveTensor:
      return Distance::approx(tensor_hs_distance(std::get<TensorPower>(a), std::get<TensorPower>(b)));
  }
  throw std::logic_error("unreachable");
}

Distance Family::sep_distance(const TargetElement& a, const TargetElement& b) const {
  switch (tag) {
    case Tag::HypProjective:
      return Distance::approx(projective_hs_distance(std::get<UnitaryMatrix>(a), std::get<UnitaryMatrix>(b)));
    case Tag::LinProjective:
      return Distance::of(projective_rank_distance(std::get<RankMatrix>(a), std::get<RankMatrix>(b)));
    case Tag::HypProjectiveTensor:
      return Distance::approx(
          tensor_projective_hs_distance(std::get<TensorPower>(a), std::get<TensorPower>(b)));
    default:
      return mult_distance(a, b);
  }
}

void Family::check_member(const TargetElement& a) const {
  auto fail = [&](const std::string& why) { throw std::invalid_argument(tag_name() + " target: " + why); };
  switch (tag) {
    case Tag::Sofic: {
      const auto* p = std::get_if<Permutation>(&a);
      if (!p) fail("expected a permutation");
      if (p->degree() != degree) fail("degree mismatch");
      p->validate();
      return;
    }
    case Tag::Hyp:
    case Tag::HypProjective: {
      const auto* u = std::get_if<UnitaryMatrix>(&a);
      if (!u) fail("expected a unitary matrix");
      if (u->size() != degree) fail("size mismatch");
      u->validate();
      return;
    }
    case Tag::Lin:
    case Tag::LinProjective: {
      const auto* r = std::get_if<RankMatrix>(&a);
      if (!r) fail("expected a matrix");
      if (r->n != degree || !(r->field == field)) fail("size or field mismatch");
      r->validate();
      if (r->rank() != r->n) fail("matrix is singular");
      return;
    }
    case Tag::Fin:
    case Tag::Trivial: {
      const auto* t = std::get_if<TableElement>(&a);
      if (!t) fail("expected a table element");
      if (t->index >= table->order()) fail("index out of range");
      return;
    }
    case Tag::Wreath: {
      const auto* w = std::get_if<WreathElement>(&a);
      if (!w) fail("expected a wreath element");
      if (w->base.size() != table->order() || w->top >= table->order()) fail("shape mismatch");
      for (const auto& x : w->base) base->check_member(x);
      return;
    }
    case Tag::PermWreath: {
      const auto* w = std::get_if<PermWreathElement>(&a);
      if (!w) fail("expected a permutation-wreath element");
      if (w->sigma.degree() != degree || w->b.size() != degree) fail("shape mismatch");
      w->sigma.validate();
      for (const auto& x : w->b) base->check_member(x);
      return;
    }
    case Tag::HypProjectiveTensor: {
      const auto* t = std::get_if<TensorPower>(&a);
      if (!t) fail("expected a tensor power");
      if (t->base.size() != degree || t->power != power) fail("shape mismatch");
      t->base.validate();
      return;
    }
  }
}

// ---- JSON ----

namespace {

json field_to_json(const Field& f) {
  if (f.is_rational()) return "Q";
  return {{"Fp", f.p}};
}

Field field_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "Q") return Field{0};
  if (j.is_object() && j.contains("Fp")) {
    auto p = j.at("Fp").get<std::uint64_t>();
    if (p < 2) throw std::invalid_argument("bad prime");
    for (std::uint64_t d = 2; d * d <= p; ++d)
      if (p % d == 0) throw std::invalid_argument("field characteristic must be prime");
    return Field{p};
  }
  throw std::invalid_argument("bad field descriptor");
}

constexpr std::size_t kDenseJsonLimit = 16;

json unitary_to_json(const UnitaryMatrix& u) {
  json j;
  j["size"] = u.size();
  j["tolerance"] = u.tolerance;
  if (u.size() <= kDenseJsonLimit) {
    DenseC d(u.m);
    json entries = json::array();
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index k = 0; k < d.cols(); ++k) entries.push_back({d(i, k).real(), d(i, k).imag()});
    j["entries"] = entries;
  } else {
    json sp = json::array();
    for (Eigen::Index i = 0; i < u.m.outerSize(); ++i)
      for (SparseC::InnerIterator it(u.m, i); it; ++it)
        sp.push_back({it.row(), it.col(), it.value().real(), it.value().imag()});
    j["sparse"] = sp;
  }
  return j;
}

UnitaryMatrix unitary_from_json(const json& j) {
  UnitaryMatrix u;
  const auto k = j.at("size").get<Eigen::Index>();
  u.tolerance = j.value("tolerance", kUnitaryTolerance);
  if (!(u.tolerance > 0 && u.tolerance <= 1e-3)) throw std::invalid_argument("tolerance must lie in (0, 1e-3]");
  std::vector<Eigen::Triplet<Complex>> t;
  if (j.contains("entries")) {
    const auto& e = j.at("entries");
    if (static_cast<Eigen::Index>(e.size()) != k * k) throw std::invalid_argument("unitary entry count mismatch");
    for (Eigen::Index i = 0; i < k * k; ++i) {
      Complex v(e[static_cast<std::size_t>(i)].at(0).get<double>(), e[static_cast<std::size_t>(i)].at(1).get<double>());
      if (v != Complex(0, 0)) t.emplace_back(i / k, i % k, v);
    }
  } else {
    for (const auto& x : j.at("sparse")) {
      auto r = x.at(0).get<Eigen::Index>(), c = x.at(1).get<Eigen::Index>();
      if (r < 0 || r >= k || c < 0 || c >= k) throw std::invalid_argument("unitary index out of range");
      t.emplace_back(r, c, Complex(x.at(2).get<double>(), x.at(3).get<double>()));
    }
  }
  u.m.resize(k, k);
  u.m.setFromTriplets(t.begin(), t.end());
  return u;
}

json rank_to_json(const RankMatrix& r) {
  json j;
  j["size"] = r.n;
  j["field"] = field_to_json(r.field);
  if (r.n <= kDenseJsonLimit) {
    json rows = json::array();
    for (const auto& row : r.to_dense()) {
      json jr = json::array();
      for (const auto& v : row) jr.push_back(v.get_str());
      rows.push_back(jr);
    }
    j["rows"] = rows;
  } else {
    json sp = json::array();
    for (std::size_t i = 0; i < r.n; ++i)
      for (const auto& [c, v] : r.rows[i]) sp.push_back({i, c, v.get_str()});
    j["sparse"] = sp;
  }
  return j;
}

RankMatrix rank_from_json(const json& j, const Field& expected) {
  Field f = j.contains("field") ? field_from_json(j.at("field")) : expected;
  if (!(f == expected)) throw std::invalid_argument("matrix field does not match family field");
  if (j.contains("rows")) {
    std::vector<std::vector<mpq_class>> a;
    for (const auto& row : j.at("rows")) {
      std::vector<mpq_class> r;
      for (const auto& v : row) r.push_back(f.parse(v.get<std::string>()));
      a.push_back(std::move(r));
    }
    return RankMatrix::from_dense(a, f);
  }
  const auto n = j.at("size").get<std::size_t>();
  RankMatrix r{f, n, std::vector<SparseRow>(n)};
  for (const auto& x : j.at("sparse")) {
    auto i = x.at(0).get<std::size_t>();
    auto c = x.at(1).get<std::uint32_t>();
    if (i >= n || c >= n) throw std::invalid_argument("matrix index out of range");
    mpq_class v = f.parse(x.at(2).get<std::string>());
    if (v != 0) r.rows[i].emplace_back(c, v);
  }
  for (auto& row : r.rows) std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return r;
}

}  // namespace

json Family::to_json() const {
  json j;
  j["tag"] = tag_name();
  switch (tag) {
    case Tag::Lin:
    case Tag::LinProjective:
      j["field"] = field_to_json(field);
      [[fallthrough]];
    case Tag::Sofic:
    case Tag::Hyp:
    case Tag::HypProjective:
      j["degree"] = degree;
      break;
    case Tag::Fin:
    case Tag::Trivial:
      j["table"] = table->to_json();
      break;
    case Tag::Wreath:
      j["base"] = base->to_json();
      j["top"] = table->to_json();
      break;
    case Tag::PermWreath:
      j["base"] = base->to_json();
      j["degree"] = degree;
      break;
    case Tag::HypProjectiveTensor:
      j["degree"] = degree;
      j["power"] = power;
      break;
  }
  return j;
}

Family Family::from_json(const json& j) {
  Tag t = parse_family_tag(j.at("tag").get<std::string>());
  switch (t) {
    case Tag::Sofic: return sofic(j.at("degree").get<std::size_t>());
    case Tag::Hyp: return hyp(j.at("degree").get<std::size_t>());
    case Tag::HypProjective: return hyp_projective(j.at("degree").get<std::size_t>());
    case Tag::Lin: return lin(j.at("degree").get<std::size_t>(), field_from_json(j.at("field")));
    case Tag::LinProjective: return lin_projective(j.at("degree").get<std::size_t>(), field_from_json(j.at("field")));
    case Tag::Fin:
    case Tag::Trivial: {
      Family f = fin(FiniteMetricGroup::from_json(j.at("table")));
      if (f.tag != t) throw std::invalid_argument("table metric does not match family tag");
      return f;
    }
    case Tag::Wreath: return wreath(from_json(j.at("base")), FiniteMetricGroup::from_json(j.at("top")));
    case Tag::PermWreath: return perm_wreath(from_json(j.at("base")), j.at("degree").get<std::size_t>());
    case Tag::HypProjectiveTensor: return tensor(j.at("degree").get<std::size_t>(), j.at("power").get<int>());
  }
  throw std::logic_error("unreachable");
}

json Family::element_to_json(const TargetElement& a) const {
  switch (tag) {
    case Tag::Sofic: return std::get<Permutation>(a).images;
    case Tag::Hyp:
    case Tag::HypProjective: return unitary_to_json(std::get<UnitaryMatrix>(a));
    case Tag::Lin:
    case Tag::LinProjective: return rank_to_json(std::get<RankMatrix>(a));
    case Tag::Fin:
    case Tag::Trivial: return std::get<TableElement>(a).index;
    case Tag::Wreath: {
      const auto& w = std::get<WreathElement>(a);
      json b = json::array();
      for (const auto& x : w.base) b.push_back(base->element_to_json(x));
      return {{"top", w.top}, {"base", b}};
    }
    case Tag::PermWreath: {
      const auto& w = std::get<PermWreathElement>(a);
      json b = json::array();
      for (const auto& x : w.b) b.push_back(base->element_to_json(x));
      return {{"sigma", w.sigma.images}, {"b", b}};
    }
    case Tag::HypProjectiveTensor: {
      const auto& t = std::get<TensorPower>(a);
      return {{"base", unitary_to_json(t.base)}, {"power", t.power}};
    }
  }
  throw std::logic_error("unreachable");
}

TargetElement Family::element_from_json(const json& j) const {
  switch (tag) {
    case Tag::Sofic: return Permutation(j.get<std::vector<std::uint32_t>>());
    case Tag::Hyp:
    case Tag::HypProjective: return unitary_from_json(j);
    case Tag::Lin:
    case Tag::LinProjective: return rank_from_json(j, field);
    case Tag::Fin:
    case Tag::Trivial: return TableElement{table, j.get<std::uint32_t>()};
    case Tag::Wreath: {
      WreathElement w;
      w.top_group = table;
      w.top = j.at("top").get<std::uint32_t>();
      for (const auto& x : j.at("base")) w.base.push_back(base->element_from_json(x));
      return w;
    }
    case Tag::PermWreath: {
      PermWreathElement w;
      w.sigma = Permutation(j.at("sigma").get<std::vector<std::uint32_t>>());
      for (const auto& x : j.at("b")) w.b.push_back(base->element_from_json(x));
      return w;
    }
    case Tag::HypProjectiveTensor:
      return TensorPower{unitary_from_json(j.at("base")), j.at("power").get<int>()};
  }
  throw std::logic_error("unreachable");
}

}  // namespace mprof
