#include <algorithm>
#include <stdexcept>

#include "mprof/targets.hpp"

namespace mprof {

mpq_class Field::reduce(const mpq_class& x) const {
  if (p == 0) return x;
  mpz_class P(static_cast<unsigned long>(p));
  mpz_class num = x.get_num();
  mpz_class den = x.get_den();
  mpz_class r;
  mpz_fdiv_r(r.get_mpz_t(), num.get_mpz_t(), P.get_mpz_t());
  if (den != 1) {
    mpz_class d;
    if (!mpz_invert(d.get_mpz_t(), den.get_mpz_t(), P.get_mpz_t()))
      throw std::domain_error("denominator not invertible in " + name());
    r = (r * d) % P;
  }
  return mpq_class(r);
}

mpq_class Field::inv(const mpq_class& a) const {
  if (a == 0) throw std::domain_error("division by zero in " + name());
  if (p == 0) return 1 / a;
  mpz_class P(static_cast<unsigned long>(p)), d;
  mpz_class num = reduce(a).get_num();
  mpz_invert(d.get_mpz_t(), num.get_mpz_t(), P.get_mpz_t());
  return mpq_class(d);
}

mpq_class Field::parse(const std::string& s) const {
  mpq_class q;
  if (q.set_str(s, 10) != 0) throw std::invalid_argument("bad field element '" + s + "'");
  q.canonicalize();
  return reduce(q);
}

namespace {

SparseRow axpy(const SparseRow& x, const mpq_class& c, const SparseRow& y, const Field& f) {
  // x + c*y
  SparseRow out;
  out.reserve(x.size() + y.size());
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < y.size()) {
    if (j == y.size() || (i < x.size() && x[i].first < y[j].first)) {
      out.push_back(x[i++]);
    } else if (i == x.size() || y[j].first < x[i].first) {
      mpq_class v = f.mul(c, y[j].second);
      if (v != 0) out.emplace_back(y[j].first, v);
      ++j;
    } else {
      mpq_class v = f.add(x[i].second, f.mul(c, y[j].second));
      if (v != 0) out.emplace_back(x[i].first, v);
      ++i;
      ++j;
    }
  }
  return out;
}

void check_compatible(const RankMatrix& a, const RankMatrix& b) {
  if (a.n != b.n) throw std::invalid_argument("matrix size mismatch");
  if (!(a.field == b.field)) throw std::invalid_argument("field mismatch");
}

}  // namespace

RankMatrix RankMatrix::identity(std::size_t k, Field f) {
  RankMatrix r{f, k, std::vector<SparseRow>(k)};
  for (std::size_t i = 0; i < k; ++i) r.rows[i].emplace_back(static_cast<std::uint32_t>(i), mpq_class(1));
  return r;
}

RankMatrix RankMatrix::from_dense(const std::vector<std::vector<mpq_class>>& a, Field f) {
  RankMatrix r{f, a.size(), std::vector<SparseRow>(a.size())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != a.size()) throw std::invalid_argument("matrix must be square");
    for (std::size_t j = 0; j < a.size(); ++j) {
      mpq_class v = f.reduce(a[i][j]);
      if (v != 0) r.rows[i].emplace_back(static_cast<std::uint32_t>(j), v);
    }
  }
  return r;
}

std::vector<std::vector<mpq_class>> RankMatrix::to_dense() const {
  std::vector<std::vector<mpq_class>> d(n, std::vector<mpq_class>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, v] : rows[i]) d[i][j] = v;
  return d;
}

RankMatrix RankMatrix::multiply(const RankMatrix& b) const {
  check_compatible(*this, b);
  RankMatrix r{field, n, std::vector<SparseRow>(n)};
  std::vector<mpq_class> acc(n);
  std::vector<char> used(n, 0);
  std::vector<std::uint32_t> touched;
  for (std::size_t i = 0; i < n; ++i) {
    touched.clear();
    for (const auto& [k, av] : rows[i]) {
      for (const auto& [j, bv] : b.rows[k]) {
        if (!used[j]) {
          used[j] = 1;
          acc[j] = 0;
          touched.push_back(j);
        }
        acc[j] += av * bv;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto j : touched) {
      used[j] = 0;
      mpq_class v = field.reduce(acc[j]);
      if (v != 0) r.rows[i].emplace_back(j, v);
    }
  }
  return r;
}

RankMatrix RankMatrix::subtract(const RankMatrix& b) const {
  check_compatible(*this, b);
  RankMatrix r{field, n, std::vector<SparseRow>(n)};
  for (std::size_t i = 0; i < n; ++i) r.rows[i] = axpy(rows[i], mpq_class(-1), b.rows[i], field);
  return r;
}

RankMatrix RankMatrix::scale(const mpq_class& c) const {
  RankMatrix r{field, n, std::vector<SparseRow>(n)};
  mpq_class cc = field.reduce(c);
  if (cc == 0) return r;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, v] : rows[i]) r.rows[i].emplace_back(j, field.mul(cc, v));
  return r;
}

bool RankMatrix::is_monomial() const {
  std::vector<char> col(n, 0);
  for (const auto& row : rows) {
    if (row.size() != 1 || col[row[0].first]) return false;
    col[row[0].first] = 1;
  }
  return true;
}

RankMatrix RankMatrix::inverse() const {
  if (is_monomial()) {
    RankMatrix r{field, n, std::vector<SparseRow>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& [j, v] = rows[i][0];
      r.rows[j].emplace_back(static_cast<std::uint32_t>(i), field.inv(v));
    }
    return r;
  }
  // Dense Gauss–Jordan on [A | I].
  auto a = to_dense();
  auto inv = identity(n, field).to_dense();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    while (piv < n && a[piv][c] == 0) ++piv;
    if (piv == n) throw std::domain_error("matrix is singular");
    std::swap(a[piv], a[c]);
    std::swap(inv[piv], inv[c]);
    mpq_class s = field.inv(a[c][c]);
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] = field.mul(a[c][j], s);
      inv[c][j] = field.mul(inv[c][j], s);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c || a[i][c] == 0) continue;
      mpq_class f = a[i][c];
      for (std::size_t j = 0; j < n; ++j) {
        if (a[c][j] != 0) a[i][j] = field.sub(a[i][j], field.mul(f, a[c][j]));
        if (inv[c][j] != 0) inv[i][j] = field.sub(inv[i][j], field.mul(f, inv[c][j]));
      }
    }
  }
  return from_dense(inv, field);
}

std::size_t RankMatrix::rank() const {
  std::vector<SparseRow> pivot(n);
  std::vector<char> has(n, 0);
  std::size_t r = 0;
  for (const auto& row0 : rows) {
    SparseRow row = row0;
    while (!row.empty()) {
      std::uint32_t c = row[0].first;
      if (!has[c]) {
        mpq_class s = field.inv(row[0].second);
        for (auto& e : row) e.second = field.mul(e.second, s);
        pivot[c] = std::move(row);
        has[c] = 1;
        ++r;
        break;
      }
      mpq_class lead = row[0].second;
      row = axpy(row, -lead, pivot[c], field);
    }
  }
  return r;
}

void RankMatrix::validate() const {
  if (rows.size() != n) throw std::invalid_argument("row count does not match size");
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].first >= n) throw std::invalid_argument("column index out of range");
      if (i && row[i - 1].first >= row[i].first) throw std::invalid_argument("row entries not sorted");
      if (row[i].second == 0 || field.reduce(row[i].second) != row[i].second)
        throw std::invalid_argument("entry not a reduced nonzero field element");
    }
}

RankMatrix perm_to_rank(const Permutation& s, Field f) {
  // Column σ(j) of row ... : u_σ e_j = e_{σ(j)}, so entry (σ(j), j) = 1.
  const std::size_t k = s.degree();
  RankMatrix r{f, k, std::vector<SparseRow>(k)};
  for (std::size_t j = 0; j < k; ++j) r.rows[s(static_cast<std::uint32_t>(j))].emplace_back(static_cast<std::uint32_t>(j), mpq_class(1));
  return r;
}

RankMatrix block_sum(const RankMatrix& a, const RankMatrix& b) {
  if (!(a.field == b.field)) throw std::invalid_argument("field mismatch");
  RankMatrix r{a.field, a.n + b.n, a.rows};
  const auto off = static_cast<std::uint32_t>(a.n);
  for (const auto& row : b.rows) {
    SparseRow s;
    for (const auto& [j, v] : row) s.emplace_back(j + off, v);
    r.rows.push_back(std::move(s));
  }
  return r;
}

RankMatrix kronecker(const RankMatrix& a, const RankMatrix& b) {
  if (!(a.field == b.field)) throw std::invalid_argument("field mismatch");
  RankMatrix r{a.field, a.n * b.n, std::vector<SparseRow>(a.n * b.n)};
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t k = 0; k < b.n; ++k) {
      auto& row = r.rows[i * b.n + k];
      for (const auto& [j, av] : a.rows[i])
        for (const auto& [l, bv] : b.rows[k])
          row.emplace_back(static_cast<std::uint32_t>(j * b.n + l), a.field.mul(av, bv));
    }
  return r;
}

RankMatrix random_invertible(std::size_t k, Field f, std::mt19937_64& rng) {
  const long lo = f.is_rational() ? -3 : 0;
  const long hi = f.is_rational() ? 3 : static_cast<long>(f.p) - 1;
  std::uniform_int_distribution<long> d(lo, hi);
  while (true) {
    std::vector<std::vector<mpq_class>> a(k, std::vector<mpq_class>(k));
    for (auto& row : a)
      for (auto& x : row) x = d(rng);
    auto m = RankMatrix::from_dense(a, f);
    if (m.rank() == k) return m;
  }
}

mpq_class rank_distance(const RankMatrix& a, const RankMatrix& b) {
  check_compatible(a, b);
  if (a.n == 0) return 0;
  return ratio(static_cast<long>(a.subtract(b).rank()), static_cast<unsigned long>(a.n));
}

namespace {

// Polynomials with coefficients low to high, no trailing zeros.
using Poly = std::vector<mpq_class>;

void trim(Poly& p) {
  while (!p.empty() && p.back() == 0) p.pop_back();
}

int degree(const Poly& p) { return static_cast<int>(p.size()) - 1; }

Poly poly_sub_mul(const Poly& a, const Poly& q, const Poly& b, const Field& f) {
  // a − q*b
  Poly r = a;
  if (q.empty() || b.empty()) return r;
  r.resize(std::max(a.size(), q.size() + b.size() - 1), mpq_class(0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0) continue;
    for (std::size_t j = 0; j < b.size(); ++j)
      if (b[j] != 0) r[i + j] = f.sub(r[i + j], f.mul(q[i], b[j]));
  }
  trim(r);
  return r;
}

std::pair<Poly, Poly> poly_divmod(const Poly& a, const Poly& b, const Field& f) {
  Poly r = a, q;
  if (degree(a) < degree(b)) return {q, r};
  q.assign(a.size() - b.size() + 1, mpq_class(0));
  mpq_class lead_inv = f.inv(b.back());
  while (!r.empty() && degree(r) >= degree(b)) {
    std::size_t shift = r.size() - b.size();
    mpq_class c = f.mul(r.back(), lead_inv);
    q[shift] = c;
    for (std::size_t j = 0; j < b.size(); ++j) r[shift + j] = f.sub(r[shift + j], f.mul(c, b[j]));
    trim(r);
  }
  trim(q);
  return {q, r};
}

Poly poly_monic(Poly p, const Field& f) {
  if (p.empty()) return p;
  mpq_class s = f.inv(p.back());
  for (auto& c : p) c = f.mul(c, s);
  return p;
}

Poly poly_gcd(Poly a, Poly b, const Field& f) {
  while (!b.empty()) {
    auto r = poly_divmod(a, b, f).second;
    a = std::move(b);
    b = std::move(r);
  }
  return poly_monic(a, f);
}

Poly poly_mul(const Poly& a, const Poly& b, const Field& f) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, mpq_class(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = f.add(r[i + j], f.mul(a[i], b[j]));
  trim(r);
  return r;
}

}  // namespace

std::size_t max_geometric_multiplicity(const RankMatrix& m) {
  const std::size_t k = m.n;
  if (k == 0) return 0;
  if (m.is_monomial()) {
    bool perm = true;
    for (const auto& row : m.rows) perm = perm && row[0].second == 1;
    if (perm) {
      // Each cycle is a companion block of x^L − 1, and 1 is a root of every one.
      std::vector<std::uint32_t> im(k);
      for (std::size_t i = 0; i < k; ++i) im[m.rows[i][0].first] = static_cast<std::uint32_t>(i);
      return Permutation(im).cycle_count();
    }
  }
  if (k > 96) throw CapacityError("projective rank limited to size 96 for non-permutation matrices");
  const Field& f = m.field;
  // Diagonalise xI − M over K[x], then normalise the diagonal into a divisibility chain.
  std::vector<std::vector<Poly>> a(k, std::vector<Poly>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& [j, v] : m.rows[i]) a[i][j] = Poly{f.reduce(-v)};
    if (a[i][i].empty()) a[i][i] = Poly{mpq_class(0)};
    a[i][i].resize(2, mpq_class(0));
    a[i][i][1] = 1;
    trim(a[i][i]);
  }
  std::vector<Poly> diag;
  for (std::size_t t = 0; t < k; ++t) {
    while (true) {
      std::size_t bi = k, bj = k;
      int best = 1 << 30;
      for (std::size_t i = t; i < k; ++i)
        for (std::size_t j = t; j < k; ++j)
          if (!a[i][j].empty() && degree(a[i][j]) < best) {
            best = degree(a[i][j]);
            bi = i;
            bj = j;
          }
      if (bi == k) throw std::domain_error("characteristic matrix unexpectedly singular");
      std::swap(a[t], a[bi]);
      for (auto& row : a) std::swap(row[t], row[bj]);
      bool clean = true;
      for (std::size_t i = t + 1; i < k; ++i) {
        if (a[i][t].empty()) continue;
        auto [q, r] = poly_divmod(a[i][t], a[t][t], f);
        for (std::size_t j = t; j < k; ++j) a[i][j] = poly_sub_mul(a[i][j], q, a[t][j], f);
        if (!r.empty()) clean = false;
      }
      for (std::size_t j = t + 1; j < k; ++j) {
        if (a[t][j].empty()) continue;
        auto [q, r] = poly_divmod(a[t][j], a[t][t], f);
        for (std::size_t i = t; i < k; ++i) a[i][j] = poly_sub_mul(a[i][j], q, a[i][t], f);
        if (!r.empty()) clean = false;
      }
      if (clean) break;
    }
    diag.push_back(poly_monic(a[t][t], f));
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      if (degree(diag[i]) == 0) break;
      Poly g = poly_gcd(diag[i], diag[j], f);
      Poly l = poly_divmod(poly_mul(diag[i], diag[j], f), g, f).first;
      diag[i] = std::move(g);
      diag[j] = poly_monic(std::move(l), f);
    }
  std::size_t s = 0;
  for (const auto& d : diag)
    if (degree(d) > 0) ++s;
  return s;
}

mpq_class projective_rank_distance(const RankMatrix& a, const RankMatrix& b) {
  check_compatible(a, b);
  if (a.n == 0) return 0;
  RankMatrix m = b.inverse().multiply(a);
  std::size_t s = max_geometric_multiplicity(m);
  return ratio(static_cast<long>(a.n - s), static_cast<unsigned long>(a.n));
}

}  // namespace mprof
