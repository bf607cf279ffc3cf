#pragma once

// Dense linear algebra and polynomial helpers used by the pose solvers.
// Everything here is a pure function templated on the scalar type.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "qadapose/errors.hpp"

namespace qadapose {

/// Fixed numerical thresholds shared across the library.
struct Tolerances {
  static constexpr double symmetry_rel = 1e-10;      // sym_eig input check
  static constexpr double imag_cutoff = 1e-6;        // |Im| < cutoff*(1+|Re|) is "real"
  static constexpr double root_residual = 1e-8;      // |p(r)| bound, relative to max|coeff|
  static constexpr double root_merge = 1e-4;         // clustered roots collapse within this*(1+|r|)
  static constexpr double collinear_rel = 1e-12;     // second/first singular value
  static constexpr double planarity_rel = 1e-9;      // smallest/largest covariance eigenvalue
  static constexpr double quasi_planar_rel = 1e-2;   // IPPE fits a plane below this
  static constexpr double homography_h33 = 1e-12;    // below this H is not rescaled
  static constexpr double gimbal_cos = 1e-9;         // |cos(beta)| below this is gimbal lock
  static constexpr double min_depth = 1e-9;          // metres; nearer is near-singular
  static constexpr int jacobi_max_sweeps = 64;
  static constexpr int max_poly_degree = 8;
};

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

template <typename Scalar>
struct SymEig {
  VecX<Scalar> values;   // ascending
  MatX<Scalar> vectors;  // column i pairs with values(i)
};

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& input) {
  using Scalar = typename Derived::Scalar;
  require(input.rows() == input.cols(), ErrorKind::contract, "sym_eig: matrix is not square");
  const Eigen::Index n = input.rows();
  MatX<Scalar> a = input;
  const Scalar norm = a.norm();
  require((a - a.transpose()).norm() <= Scalar(Tolerances::symmetry_rel) * norm,
          ErrorKind::contract, "sym_eig: matrix is not symmetric");

  MatX<Scalar> v = MatX<Scalar>::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int sweep = 0; sweep < Tolerances::jacobi_max_sweeps; ++sweep) {
    Scalar off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= eps * Scalar(1e-2) * norm || off == Scalar(0)) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymEig<Scalar> out{VecX<Scalar>(n), MatX<Scalar>(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

template <typename Scalar>
struct Svd3 {
  Mat3<Scalar> u;
  Vec3<Scalar> singular;  // non-negative, descending
  Mat3<Scalar> v;
};

template <typename Derived>
Svd3<typename Derived::Scalar> svd3(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Mat3<Scalar>> svd(Mat3<Scalar>(m), Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Minimum-norm least-squares solution of A x = b.
template <typename DerivedA, typename DerivedB>
VecX<typename DerivedA::Scalar> lstsq(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  require(a.rows() >= 1 && a.rows() == b.rows(), ErrorKind::contract, "lstsq: shape mismatch");
  Eigen::CompleteOrthogonalDecomposition<MatX<Scalar>> cod(a);
  return cod.solve(VecX<Scalar>(b));
}

/// Evaluates a polynomial with ascending coefficients.
template <typename Scalar, typename T>
T poly_eval(const std::vector<Scalar>& coeffs, T x) {
  T acc = T(0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + T(*it);
  return acc;
}

template <typename Scalar>
std::vector<Scalar> poly_derivative(const std::vector<Scalar>& coeffs) {
  std::vector<Scalar> d;
  for (std::size_t k = 1; k < coeffs.size(); ++k) d.push_back(Scalar(k) * coeffs[k]);
  if (d.empty()) d.push_back(Scalar(0));
  return d;
}

/// Ascending-order product of two polynomials.
template <typename Scalar>
std::vector<Scalar> poly_mul(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  std::vector<Scalar> out(a.size() + b.size() - 1, Scalar(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

namespace detail {

// Parlett-Reinsch balancing with power-of-two scale factors.
template <typename Scalar>
void balance(MatX<Scalar>& m) {
  const Eigen::Index n = m.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar c = m.col(i).cwiseAbs().sum() - std::abs(m(i, i));
      Scalar r = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
      if (c == Scalar(0) || r == Scalar(0)) continue;
      const Scalar s = c + r;
      Scalar f = 1;
      while (c < r / 2) { c *= 2; r /= 2; f *= 2; }
      while (c >= r * 2) { c /= 2; r *= 2; f /= 2; }
      if ((c + r) < Scalar(0.95) * s) {
        done = false;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
}

}  // namespace detail

/// Real roots of a polynomial (ascending coefficients) from the eigenvalues
/// of its balanced companion matrix. Returned roots are sorted ascending,
/// multiple roots appear once, and each root gets one Newton polish step.
template <typename Scalar>
std::vector<Scalar> real_poly_roots(std::vector<Scalar> coeffs) {
  while (!coeffs.empty() && coeffs.back() == Scalar(0)) coeffs.pop_back();
  require(!coeffs.empty(), ErrorKind::contract, "real_poly_roots: zero polynomial");
  const int degree = static_cast<int>(coeffs.size()) - 1;
  require(degree >= 1, ErrorKind::contract, "real_poly_roots: degree must be >= 1");
  require(degree <= Tolerances::max_poly_degree, ErrorKind::contract,
          "real_poly_roots: degree exceeds 8");

  Scalar max_coeff = 0;
  for (Scalar c : coeffs) max_coeff = std::max(max_coeff, std::abs(c));
  auto residual_ok = [&](Scalar r) {
    const Scalar bound = Scalar(Tolerances::root_residual) * max_coeff *
                         std::pow(std::max(Scalar(1), std::abs(r)), Scalar(degree));
    return std::abs(poly_eval(coeffs, r)) <= bound;
  };

  MatX<Scalar> companion = MatX<Scalar>::Zero(degree, degree);
  for (int k = 0; k < degree; ++k) companion(0, k) = -coeffs[degree - 1 - k] / coeffs[degree];
  for (int k = 1; k < degree; ++k) companion(k, k - 1) = Scalar(1);
  detail::balance(companion);
  Eigen::EigenSolver<MatX<Scalar>> es(companion, false);
  const auto eig = es.eigenvalues();

  struct Candidate {
    Scalar re;
    bool classified_real;
  };
  std::vector<Candidate> candidates;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const Scalar re = eig(i).real();
    const Scalar im = eig(i).imag();
    if (std::abs(im) < Scalar(Tolerances::imag_cutoff) * (Scalar(1) + std::abs(re))) {
      candidates.push_back({re, true});
    } else if (residual_ok(re)) {
      // near-real member of a split multiple root
      candidates.push_back({re, false});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.re < b.re; });

  const auto deriv = poly_derivative(coeffs);
  std::vector<Scalar> roots;
  for (std::size_t i = 0; i < candidates.size();) {
    std::size_t j = i + 1;
    Scalar sum = candidates[i].re;
    bool any_real = candidates[i].classified_real;
    while (j < candidates.size() &&
           candidates[j].re - candidates[j - 1].re <=
               Scalar(Tolerances::root_merge) * (Scalar(1) + std::abs(candidates[j].re))) {
      sum += candidates[j].re;
      any_real = any_real || candidates[j].classified_real;
      ++j;
    }
    Scalar r = sum / Scalar(j - i);
    const Scalar fr = poly_eval(coeffs, r);
    const Scalar dfr = poly_eval(deriv, r);
    if (dfr != Scalar(0)) {
      const Scalar polished = r - fr / dfr;
      if (std::isfinite(polished) && std::abs(poly_eval(coeffs, polished)) < std::abs(fr))
        r = polished;
    }
    if (any_real || residual_ok(r)) roots.push_back(r);
    i = j;
  }
  return roots;
}

template <typename Scalar>
struct RigidTransform {
  Mat3<Scalar> rotation;
  Vec3<Scalar> translation;
};

/// Least-squares rigid alignment q_i ~ R p_i + t (columns are points).
/// Reflections are suppressed by flipping the weakest singular direction.
template <typename Scalar>
RigidTransform<Scalar> procrustes(const Points3<Scalar>& p, const Points3<Scalar>& q) {
  require(p.cols() == q.cols(), ErrorKind::contract, "procrustes: point count mismatch");
  require(p.cols() >= 3, ErrorKind::contract, "procrustes: need at least 3 points");
  const Vec3<Scalar> pc = p.rowwise().mean();
  const Vec3<Scalar> qc = q.rowwise().mean();
  const Points3<Scalar> p0 = p.colwise() - pc;
  const Points3<Scalar> q0 = q.colwise() - qc;

  const auto spread = svd3(Mat3<Scalar>(p0 * p0.transpose()));
  if (!(spread.singular(1) > Scalar(Tolerances::collinear_rel) * spread.singular(0)))
    fail(ErrorKind::degeneracy, "procrustes: points are collinear");

  const Mat3<Scalar> h = q0 * p0.transpose();
  const auto svd = svd3(h);
  if (!(svd.singular(1) > Scalar(Tolerances::collinear_rel) * svd.singular(0)))
    fail(ErrorKind::degeneracy, "procrustes: target points are collinear");
  Mat3<Scalar> d = Mat3<Scalar>::Identity();
  if ((svd.u * svd.v.transpose()).determinant() < 0) d(2, 2) = Scalar(-1);
  RigidTransform<Scalar> out;
  out.rotation = svd.u * d * svd.v.transpose();
  out.translation = qc - out.rotation * pc;
  return out;
}

template <typename Scalar>
Mat3<Scalar> skew(const Vec3<Scalar>& w) {
  Mat3<Scalar> s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

/// Nearest rotation in the Frobenius sense.
template <typename Scalar>
Mat3<Scalar> orthonormalize(const Mat3<Scalar>& r) {
  const auto svd = svd3(r);
  Mat3<Scalar> d = Mat3<Scalar>::Identity();
  if ((svd.u * svd.v.transpose()).determinant() < 0) d(2, 2) = Scalar(-1);
  return svd.u * d * svd.v.transpose();
}

}  // namespace qadapose
