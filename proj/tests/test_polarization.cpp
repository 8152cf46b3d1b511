#include <doctest.h>

#include <cmath>

#include "ischem/fibers.hpp"
#include "ischem/polarization.hpp"
#include "support.hpp"

using namespace ischem;
using ischem::testing::Rand01;

namespace {

Eigen::Matrix2d diag2(double a, double b) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Eigen::Matrix2d rotated(const Eigen::Matrix2d& m, double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r * m * r.transpose();
}

// Componentwise agreement relative to the dominant entry.
double relative_gap(const PolarizationTensor& a, const PolarizationTensor& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

const Eigen::Matrix2d kHealthy = diag2(1.200, 0.2538);
const Eigen::Matrix2d kIschemic = diag2(0.2308, 0.0062);

}  // namespace

TEST_CASE("polarization closed form: zero contrast gives the identity") {
  const Eigen::Matrix2d k0 = rotated(kHealthy, 0.7);
  CHECK((polarization_disk(k0, k0) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("polarization closed form: isotropic disk value") {
  const double k0 = 1.2, k1 = 0.2308;
  const PolarizationTensor m = polarization_disk(k0 * Eigen::Matrix2d::Identity(),
                                                 k1 * Eigen::Matrix2d::Identity());
  const double expected = 2.0 * k0 / (k0 + k1);
  CHECK(std::abs(m(0, 0) - expected) <= 1e-12);
  CHECK(std::abs(m(1, 1) - expected) <= 1e-12);
  CHECK(std::abs(m(0, 1)) <= 1e-12);
  CHECK(m(0, 0) == doctest::Approx(1.6774).epsilon(5e-5));
}

TEST_CASE("polarization closed form: frame equivariance is exact") {
  for (double theta : {0.3, 1.1}) {
    const PolarizationTensor base = polarization_disk(kHealthy, kIschemic);
    const PolarizationTensor rot =
        polarization_disk(rotated(kHealthy, theta), rotated(kIschemic, theta));
    CHECK((rot - rotated(base, theta)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("polarization closed form: admissible contrast amplifies the interior field") {
  Rand01 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const double kpar = 0.5 + rng.next();
    const double ktr = 0.1 + 0.3 * rng.next();
    const double theta = 2.0 * M_PI * rng.next();
    const Eigen::Matrix2d k0 = rotated(diag2(kpar, std::min(ktr, kpar)), theta);
    const Eigen::Matrix2d k1 =
        rotated(diag2(kpar * (0.1 + 0.8 * rng.next()), std::min(ktr, kpar) * (0.1 + 0.8 * rng.next())),
                theta);
    const auto eig = symmetric_eigen(polarization_disk(k0, k1));
    CHECK(eig.value2 >= 1.0 - 1e-12);
  }
}

TEST_CASE("polarization closed form: non-commuting input is rejected") {
  CHECK_THROWS_AS(polarization_disk(kHealthy, rotated(kIschemic, 0.4)), ParamError);
}

TEST_CASE("transmission oracle: zero contrast") {
  const Eigen::Matrix2d k0 = 0.8 * Eigen::Matrix2d::Identity();
  const PolarizationTensor m = transmission_oracle(k0, k0, 0.1, 2.4, 0.1 / 16);
  CHECK((m - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("transmission oracle: isotropic contrast 2:1") {
  const PolarizationTensor m = transmission_oracle(2.0 * Eigen::Matrix2d::Identity(),
                                                   Eigen::Matrix2d::Identity(), 0.1, 2.4, 0.1 / 16);
  const double expected = 4.0 / 3.0;
  CHECK(std::abs(m(0, 0) - expected) / expected <= 0.02);
  CHECK(std::abs(m(1, 1) - expected) / expected <= 0.02);
  CHECK(std::abs(m(0, 1)) <= 0.01 * expected);
  CHECK(std::abs(m(0, 1) - m(1, 0)) <= 0.01 * expected);
}

TEST_CASE("transmission oracle: precondition checks") {
  const Eigen::Matrix2d k0 = Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(transmission_oracle(k0, 0.5 * k0, 0.1, 1.0, 0.1 / 16), ParamError);  // small box
  CHECK_THROWS_AS(transmission_oracle(k0, 0.5 * k0, 0.1, 2.4, 0.05), ParamError);      // coarse
}

TEST_CASE("closed form matches the oracle for the anisotropic pairs") {
  const double r = 0.1, box = 2.4, h = 0.1 / 16;

  SUBCASE("Table values, fibers along x") {
    const PolarizationTensor closed = polarization_disk(kHealthy, kIschemic);
    const PolarizationTensor oracle = transmission_oracle(kHealthy, kIschemic, r, box, h);
    CHECK(relative_gap(closed, oracle) <= 0.02);
  }

  SUBCASE("rotated by 30 degrees") {
    const double th = M_PI / 6.0;
    const PolarizationTensor closed =
        polarization_disk(rotated(kHealthy, th), rotated(kIschemic, th));
    const PolarizationTensor oracle =
        transmission_oracle(rotated(kHealthy, th), rotated(kIschemic, th), r, box, h);
    CHECK(relative_gap(closed, oracle) <= 0.02);
  }

  SUBCASE("rotated by 60 degrees") {
    const double th = M_PI / 3.0;
    const PolarizationTensor closed =
        polarization_disk(rotated(kHealthy, th), rotated(kIschemic, th));
    const PolarizationTensor oracle =
        transmission_oracle(rotated(kHealthy, th), rotated(kIschemic, th), r, box, h);
    CHECK(relative_gap(closed, oracle) <= 0.02);
  }
}

TEST_CASE("transmission oracle: scale invariance") {
  const PolarizationTensor small =
      transmission_oracle(kHealthy, kIschemic, 0.1, 2.4, 0.1 / 16);
  const PolarizationTensor large =
      transmission_oracle(kHealthy, kIschemic, 0.2, 4.8, 0.2 / 16);
  CHECK(relative_gap(small, large) <= 0.01);
}

TEST_CASE("transmission oracle: monotonicity on random admissible pairs") {
  Rand01 rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const double a1 = 0.5 + rng.next();
    const double a2 = 0.2 + 0.5 * rng.next();
    const double theta = M_PI * rng.next();
    const Eigen::Matrix2d k0 = rotated(diag2(std::max(a1, a2), std::min(a1, a2)), theta);
    const Eigen::Matrix2d k1 = rotated(
        diag2(std::max(a1, a2) * (0.2 + 0.6 * rng.next()), std::min(a1, a2) * (0.2 + 0.6 * rng.next())),
        theta);
    const PolarizationTensor m = transmission_oracle(k0, k1, 0.1, 2.0, 0.1 / 16);
    const auto eig = symmetric_eigen(0.5 * (m + m.transpose()));
    CHECK(eig.value2 >= 1.0 - 0.02);
  }
}
