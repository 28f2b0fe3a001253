#pragma once

// Test-only generators and reference computations. Oracles here avoid the
// library's own code paths: they use long double Gauss-Jordan elimination
// and Eigen's divide-and-conquer SVD (the library uses Jacobi SVD).

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <random>
#include <stdexcept>

namespace oracle {

using MatXd = Eigen::MatrixXd;
using VecXd = Eigen::VectorXd;
using MatXl = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecXl = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }

  MatXd gaussian(Eigen::Index r, Eigen::Index c) {
    MatXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal();
    return m;
  }
  VecXd gaussian(Eigen::Index n) { return gaussian(n, 1); }

  /// Random r x c matrix of exact rank k (product of Gaussian factors).
  MatXd of_rank(Eigen::Index r, Eigen::Index c, Eigen::Index k) {
    if (k == 0) return MatXd::Zero(r, c);
    return gaussian(r, k) * gaussian(k, c);
  }
};

/// Inverse by Gauss-Jordan with partial pivoting in long double.
inline MatXl gauss_jordan_inverse(MatXl a) {
  const Eigen::Index n = a.rows();
  MatXl inv = MatXl::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index p = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    }
    if (a(p, c) == 0.0L) throw std::runtime_error("gauss_jordan_inverse: singular");
    a.row(c).swap(a.row(p));
    inv.row(c).swap(inv.row(p));
    const long double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = a(r, c);
      if (f == 0.0L) continue;
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

struct SchurResult {
  MatXd h;
  VecXd b;
};

/// Brute-force Schur complement of H = J^T J, b = J^T r over the first n_mu
/// columns, formed explicitly in long double.
inline SchurResult schur_brute_force(const MatXd& j, const VecXd& r, Eigen::Index n_mu) {
  const MatXl jl = j.cast<long double>();
  const VecXl rl = r.cast<long double>();
  const MatXl h = jl.transpose() * jl;
  const VecXl b = jl.transpose() * rl;
  const Eigen::Index nk = j.cols() - n_mu;
  const MatXl hmm_inv = gauss_jordan_inverse(h.topLeftCorner(n_mu, n_mu));
  const MatXl hkm = h.bottomLeftCorner(nk, n_mu);
  const MatXl ht = h.bottomRightCorner(nk, nk) - hkm * hmm_inv * hkm.transpose();
  const VecXl bt = b.tail(nk) - hkm * hmm_inv * b.head(n_mu);
  return {ht.cast<double>(), bt.cast<double>()};
}

inline Eigen::Index svd_rank(const MatXd& a, double rel_tol = 1e-10) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<MatXd> svd(a);
  const auto s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index k = 0;
  while (k < s.size() && s(k) > rel_tol * s(0)) ++k;
  return k;
}

/// Orthonormal basis U1 of range(A) from the SVD.
inline MatXd range_basis(const MatXd& a, double rel_tol = 1e-10) {
  const Eigen::Index k = svd_rank(a, rel_tol);
  Eigen::BDCSVD<MatXd> svd(a, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(k);
}

/// Pseudo Schur complement H_kk - J_k^T U1 U1^T J_k, b_k - J_k^T U1 U1^T r
/// with U1 spanning range(J_mu), evaluated in long double.
inline SchurResult pseudo_schur_projector(const MatXd& j, const VecXd& r, Eigen::Index n_mu) {
  const Eigen::Index k = svd_rank(j.leftCols(n_mu));
  const MatXl jm = j.leftCols(n_mu).cast<long double>();
  const MatXl jk = j.rightCols(j.cols() - n_mu).cast<long double>();
  const VecXl rl = r.cast<long double>();
  Eigen::BDCSVD<MatXl> svd(jm, Eigen::ComputeThinU);
  const MatXl u1 = svd.matrixU().leftCols(k);
  const MatXl pjk = jk - u1 * (u1.transpose() * jk);
  const VecXl pr = rl - u1 * (u1.transpose() * rl);
  return {(jk.transpose() * pjk).cast<double>(), (jk.transpose() * pr).cast<double>()};
}

/// Moore-Penrose inverse via BDCSVD.
inline MatXd pinv(const MatXd& a, double rel_tol = 1e-10) {
  Eigen::BDCSVD<MatXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto s = svd.singularValues();
  MatXd out = MatXd::Zero(a.cols(), a.rows());
  if (s.size() == 0 || s(0) == 0.0) return out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) {
      out += svd.matrixV().col(i) * (1.0 / s(i)) * svd.matrixU().col(i).transpose();
    }
  }
  return out;
}

/// Relative Frobenius error ||a - b|| / max(||b||, floor).
inline double rel_err(const MatXd& a, const MatXd& b, double floor = 1e-300) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Central finite difference of f: R^n -> R^m at x.
template <typename F>
MatXd numeric_jacobian(F&& f, const VecXd& x, double step) {
  const VecXd f0 = f(x);
  MatXd jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VecXd xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    jac.col(i) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return jac;
}

}  // namespace oracle
