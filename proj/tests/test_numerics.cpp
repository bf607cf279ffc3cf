#include <algorithm>
#include <random>

#include "doctest.h"
#include "qadapose/numerics.hpp"

using namespace qadapose;

namespace {

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  return (a + a.transpose()) / 2;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

std::vector<double> from_roots(const std::vector<double>& roots) {
  std::vector<double> p{1.0};
  for (double r : roots) p = poly_mul(p, std::vector<double>{-r, 1.0});
  return p;
}

}  // namespace

TEST_CASE("sym_eig: identity and diagonal") {
  auto e = sym_eig(Eigen::Matrix3d::Identity());
  CHECK(e.values.isApprox(Eigen::Vector3d::Ones()));

  Eigen::Matrix3d d = Eigen::Vector3d(2, -1, 5).asDiagonal();
  e = sym_eig(d);
  CHECK(e.values(0) == doctest::Approx(-1));
  CHECK(e.values(1) == doctest::Approx(2));
  CHECK(e.values(2) == doctest::Approx(5));
  // columns are signed unit axes: y, x, z
  CHECK(std::abs(e.vectors(1, 0)) == doctest::Approx(1));
  CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(1));
  CHECK(std::abs(e.vectors(2, 2)) == doctest::Approx(1));
}

TEST_CASE("sym_eig: random symmetric reconstruction, trace and orthonormality") {
  std::mt19937_64 rng(11);
  for (int n = 1; n <= 12; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::MatrixXd a = random_symmetric(rng, n);
      const auto e = sym_eig(a);
      const Eigen::MatrixXd rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
      CHECK((rec - a).norm() / a.norm() < 1e-10);
      CHECK((e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-10);
      CHECK(std::abs(a.trace() - e.values.sum()) <= 1e-9 * std::max(1.0, a.norm()));
      for (int i = 0; i < n; ++i)
        CHECK((a * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).norm() < 1e-8 * a.norm());
      CHECK(std::is_sorted(e.values.data(), e.values.data() + n));
      // independent oracle
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
      CHECK((ref.eigenvalues() - e.values).norm() < 1e-10 * a.norm());
    }
  }
}

TEST_CASE("sym_eig: contract violations") {
  Eigen::MatrixXd rect(2, 3);
  rect.setZero();
  CHECK_THROWS_AS(sym_eig(rect), Error);
  Eigen::Matrix2d asym;
  asym << 1, 2, 0, 1;
  try {
    sym_eig(asym);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::contract);
  }
}

TEST_CASE("svd3") {
  auto s = svd3(Eigen::Matrix3d::Identity());
  CHECK(s.singular.isApprox(Eigen::Vector3d::Ones()));

  const Eigen::Vector3d a(1, 2, 3), b(-2, 0.5, 1);
  s = svd3(Eigen::Matrix3d(a * b.transpose()));
  CHECK(s.singular(0) == doctest::Approx(a.norm() * b.norm()).epsilon(1e-12));
  CHECK(std::abs(s.singular(1)) < 1e-12);
  CHECK(std::abs(s.singular(2)) < 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i) = u(rng);
    s = svd3(m);
    const Eigen::Matrix3d rec = s.u * s.singular.asDiagonal() * s.v.transpose();
    CHECK((rec - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.singular(0) >= s.singular(1));
    CHECK(s.singular(1) >= s.singular(2));
    CHECK(s.singular(2) >= 0);
    CHECK((s.u.transpose() * s.u - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK((s.v.transpose() * s.v - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("real_poly_roots: reference examples") {
  auto r = real_poly_roots(std::vector<double>{-1, 0, 1});
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(-1));
  CHECK(r[1] == doctest::Approx(1));

  r = real_poly_roots(from_roots({2, 2, 2}));
  REQUIRE(r.size() == 1);
  CHECK(r[0] == doctest::Approx(2).epsilon(1e-4));

  // (x-1)(x+3)(x^2+1)(x-0.5)(x^2+4)
  std::vector<double> p = from_roots({1, -3, 0.5});
  p = poly_mul(p, std::vector<double>{1, 0, 1});
  p = poly_mul(p, std::vector<double>{4, 0, 1});
  REQUIRE(p.size() == 8);
  r = real_poly_roots(p);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(-3).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r[2] == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("real_poly_roots: residual bound and round trip on random distinct roots") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  std::uniform_int_distribution<int> deg(1, 8);
  for (int rep = 0; rep < 300; ++rep) {
    const int d = deg(rng);
    std::vector<double> roots;
    while (static_cast<int>(roots.size()) < d) {
      const double c = u(rng);
      bool far = std::all_of(roots.begin(), roots.end(), [&](double x) { return std::abs(x - c) > 0.05; });
      if (far) roots.push_back(c);
    }
    std::sort(roots.begin(), roots.end());
    const auto p = from_roots(roots);
    const auto got = real_poly_roots(p);
    REQUIRE(got.size() == roots.size());
    double cmax = 0;
    for (double c : p) cmax = std::max(cmax, std::abs(c));
    for (std::size_t i = 0; i < roots.size(); ++i) {
      CHECK(std::abs(got[i] - roots[i]) < 1e-7 * std::max(1.0, std::abs(roots[i])));
      CHECK(std::abs(poly_eval(p, got[i])) <= 1e-8 * cmax * std::pow(std::max(1.0, std::abs(got[i])), d));
    }
  }
}

TEST_CASE("real_poly_roots: errors") {
  CHECK_THROWS_AS(real_poly_roots(std::vector<double>{0, 0, 0}), Error);
  CHECK_THROWS_AS(real_poly_roots(std::vector<double>{3}), Error);
  // trailing zero leading coefficients are stripped
  auto r = real_poly_roots(std::vector<double>{-2, 1, 0, 0});
  REQUIRE(r.size() == 1);
  CHECK(r[0] == doctest::Approx(2));
  // no real roots
  CHECK(real_poly_roots(std::vector<double>{1, 0, 1}).empty());
}

TEST_CASE("lstsq") {
  const Eigen::Vector3d b(1, -2, 3);
  CHECK(lstsq(Eigen::Matrix3d::Identity(), b).isApprox(b));

  Eigen::MatrixXd a(4, 2);
  a << 1, 0, 0, 1, 1, 1, 2, -1;
  const Eigen::Vector2d x0(0.5, -1.5);
  const Eigen::VectorXd x = lstsq(a, a * x0);
  CHECK((x - x0).norm() < 1e-12);

  // rank deficient: columns parallel; oracle is the pseudo-inverse via svd3 of the normal equations
  Eigen::MatrixXd rd(3, 2);
  rd << 1, 2, 2, 4, -1, -2;
  const Eigen::Vector3d rhs(1, 0, 2);
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  ata.topLeftCorner<2, 2>() = rd.transpose() * rd;
  const auto s = svd3(ata);
  Eigen::Matrix3d pinv = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i)
    if (s.singular(i) > 1e-12 * s.singular(0)) pinv += s.v.col(i) * s.u.col(i).transpose() / s.singular(i);
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  atb.head<2>() = rd.transpose() * rhs;
  const Eigen::Vector2d oracle = (pinv * atb).head<2>();
  const Eigen::VectorXd got = lstsq(rd, rhs);
  CHECK((got - oracle).norm() < 1e-12);
  CHECK((rd.transpose() * (rd * got - rhs)).norm() < 1e-8 * rd.norm() * rhs.norm());
}

TEST_CASE("procrustes") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  Points3<double> p(3, 6);
  for (int i = 0; i < p.size(); ++i) p(i) = u(rng);

  auto rt = procrustes<double>(p, p);
  CHECK((rt.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(rt.translation.norm() < 1e-12);

  const Eigen::Matrix3d rz = Eigen::AngleAxisd(30 * EIGEN_PI / 180, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d t(1, 2, 3);
  Points3<double> q = (rz * p).colwise() + t;
  rt = procrustes<double>(p, q);
  CHECK((rt.rotation - rz).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((rt.translation - t).cwiseAbs().maxCoeff() < 1e-12);

  // noisy target: no random rotation (with its optimal translation) does better
  std::normal_distribution<double> g(0, 0.05);
  const Eigen::Matrix3d r0 = random_rotation(rng);
  q = (r0 * p).colwise() + t;
  for (int i = 0; i < q.size(); ++i) q(i) += g(rng);
  rt = procrustes<double>(p, q);
  auto residual = [&](const Eigen::Matrix3d& r) {
    const Eigen::Vector3d tt = q.rowwise().mean() - r * p.rowwise().mean();
    return ((r * p).colwise() + tt - q).squaredNorm();
  };
  const double best = residual(rt.rotation);
  for (int k = 0; k < 1000; ++k) CHECK(best <= residual(random_rotation(rng)) + 1e-15);
  CHECK(((rt.rotation - r0).norm()) < 0.2);
}

TEST_CASE("procrustes: orthonormal output and collinear rejection") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int rep = 0; rep < 200; ++rep) {
    Points3<double> p(3, 5), q(3, 5);
    for (int i = 0; i < p.size(); ++i) {
      p(i) = u(rng);
      q(i) = u(rng);
    }
    const auto rt = procrustes<double>(p, q);
    CHECK((rt.rotation.transpose() * rt.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rt.rotation.determinant() == doctest::Approx(1));
  }
  Points3<double> line(3, 4);
  for (int i = 0; i < 4; ++i) line.col(i) = Eigen::Vector3d(1, 2, 3) * i;
  try {
    procrustes<double>(line, line);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degeneracy);
  }
}
