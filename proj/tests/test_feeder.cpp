#include <doctest.h>

#include <cmath>

#include "evcoord/errors.hpp"
#include "evcoord/feeder.hpp"
#include "support.hpp"

using namespace evcoord;
using testing::line;

TEST_CASE("path impedance of a single line is the line itself") {
  FeederModel f({0, 1}, {line(0, 1, "a", {{"aa", {0.1, 0.2}}})}, {}, 1.0);
  const auto z = f.path_impedance(1, 1, Phase::a, Phase::a);
  CHECK(z.real() == doctest::Approx(0.1));
  CHECK(z.imag() == doctest::Approx(0.2));
}

TEST_CASE("disjoint branches share no impedance") {
  FeederModel f({0, 1, 2},
                {line(0, 1, "a", {{"aa", {0.1, 0.2}}}), line(0, 2, "a", {{"aa", {0.3, 0.1}}})}, {}, 1.0);
  CHECK(f.path_impedance(1, 2, Phase::a, Phase::a) == std::complex<double>(0.0, 0.0));
}

TEST_CASE("chain path impedance sums the shared lines") {
  FeederModel f({0, 1, 2},
                {line(0, 1, "a", {{"aa", {0.1, 0.1}}}), line(1, 2, "a", {{"aa", {0.2, 0.1}}})}, {}, 1.0);
  const auto z22 = f.path_impedance(2, 2, Phase::a, Phase::a);
  CHECK(z22.real() == doctest::Approx(0.3));
  CHECK(z22.imag() == doctest::Approx(0.2));
  const auto z12 = f.path_impedance(1, 2, Phase::a, Phase::a);
  CHECK(z12.real() == doctest::Approx(0.1));
  CHECK(z12.imag() == doctest::Approx(0.1));
}

TEST_CASE("missing phase pair contributes zero") {
  FeederModel f({0, 1}, {line(0, 1, "ab", {{"aa", {0.1, 0.2}}, {"bb", {0.1, 0.2}}})}, {}, 1.0);
  CHECK(f.path_impedance(1, 1, Phase::a, Phase::b) == std::complex<double>(0.0, 0.0));
  CHECK_THROWS_AS(f.path_impedance(1, 1, Phase::c, Phase::a), InvalidQuery);
  CHECK_THROWS_AS(f.path_impedance(0, 1, Phase::a, Phase::a), InvalidQuery);
}

TEST_CASE("sensitivity entries for one line") {
  const double r = 0.03, x = 0.02;
  FeederModel f({0, 1}, {line(0, 1, "ab", {{"aa", {r, x}}, {"bb", {r, x}}, {"ab", {r, x}}})}, {}, 1.0);
  const auto s = build_sensitivity(f);
  CHECK(s.R(0, 0) == doctest::Approx(2 * r).epsilon(1e-14));
  CHECK(s.X(0, 0) == doctest::Approx(2 * x).epsilon(1e-14));
  // 2 Re{(r - ix)(-1/2 + i√3/2)}
  const std::complex<double> rot(-0.5, std::sqrt(3.0) / 2.0);
  const double expected = 2.0 * (std::complex<double>(r, -x) * rot).real();
  CHECK(expected == doctest::Approx(-r + std::sqrt(3.0) * x));
  CHECK(s.R(0, 1) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("identity incidence gives D = -R") {
  FeederModel f({0, 1, 2},
                {line(0, 1, "ab", {{"aa", {0.03, 0.02}}, {"bb", {0.03, 0.02}}, {"ab", {0.01, 0.005}}}),
                 line(1, 2, "a", {{"aa", {0.02, 0.01}}})},
                {{1, Phase::a}, {1, Phase::b}, {2, Phase::a}}, 1.0);
  const auto s = build_sensitivity(f);
  REQUIRE(f.incidence().isIdentity());
  CHECK((s.D + s.R).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("customer incidence has one nonzero per column in supply-point order") {
  FeederModel f({0, 1}, {line(0, 1, "abc", {{"aa", {0.1, 0.1}}, {"bb", {0.1, 0.1}}, {"cc", {0.1, 0.1}}})},
                {{1, Phase::c}, {1, Phase::a}, {1, Phase::c}}, 1.0);
  const auto u = f.incidence();
  CHECK(u.rows() == 3);
  CHECK(u.colwise().sum().isOnes());
  CHECK(u(2, 0) == 1.0);
  CHECK(u(0, 1) == 1.0);
  CHECK(f.customer_row(2) == 2);
}

TEST_CASE("voltage profile") {
  FeederModel f({0, 1, 2},
                {line(0, 1, "ab", {{"aa", {0.03, 0.02}}, {"bb", {0.03, 0.02}}, {"ab", {0.01, 0.004}}}),
                 line(1, 2, "b", {{"bb", {0.02, 0.01}}})},
                {{1, Phase::a}, {2, Phase::b}}, 1.02);
  const auto s = build_sensitivity(f);
  Eigen::MatrixXd p(3, 1), q(3, 1);
  p << 0.5, 0.3, 0.4;
  q << 0.1, 0.05, 0.2;
  const auto base = BaselineSeries::from_loads(f, s, p, q);

  SUBCASE("zero EV load leaves the baseline") {
    const auto v = voltage_profile(s, base, Eigen::MatrixXd::Zero(2, 1));
    CHECK((v - base.v_squared).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("charging lowers the local voltage") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    x(0, 0) = 1.0;
    const auto v = voltage_profile(s, base, x);
    CHECK(v(f.supply_index({1, Phase::a}), 0) < base.v_squared(f.supply_index({1, Phase::a}), 0));
  }
  SUBCASE("matches V = V0 - R(P + Υx) - XQ") {
    Eigen::MatrixXd x(2, 1);
    x << 2.0, -1.5;
    const auto v = voltage_profile(s, base, x);
    Eigen::VectorXd inj = p.col(0);
    inj(f.customer_row(0)) += x(0, 0);
    inj(f.customer_row(1)) += x(1, 0);
    const Eigen::VectorXd direct = Eigen::VectorXd::Constant(3, 1.02) - s.R * inj - s.X * q.col(0);
    CHECK((v.col(0) - direct).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("per-unit scaling by the power base") {
  FeederModel f({0, 1}, {line(0, 1, "a", {{"aa", {0.1, 0.2}}})}, {{1, Phase::a}}, 1.0, 100.0);
  const auto s = build_sensitivity(f);
  CHECK(s.D(0, 0) == doctest::Approx(-0.2 / 100.0));
}

TEST_CASE("malformed feeders are rejected") {
  CHECK_THROWS_AS(FeederModel({0, 1, 2}, {line(0, 1, "a", {})}, {}, 1.0), ModelError);
  CHECK_THROWS_AS(FeederModel({0, 1, 2}, {line(0, 1, "a", {}), line(2, 1, "a", {})}, {}, 1.0), ModelError);
  CHECK_THROWS_AS(FeederModel({0, 1, 2}, {line(0, 1, "a", {}), line(1, 2, "b", {})}, {}, 1.0), ModelError);
  CHECK_THROWS_AS(FeederModel({0, 1}, {line(0, 1, "a", {{"ab", {0.1, 0.1}}})}, {}, 1.0), ModelError);
  CHECK_THROWS_AS(FeederModel({0, 1}, {line(0, 1, "a", {})}, {{1, Phase::b}}, 1.0), ModelError);
  CHECK_THROWS_AS(FeederModel({1, 2}, {line(1, 2, "a", {})}, {}, 1.0), ModelError);
  CHECK_THROWS_AS(SupplyPoint::parse("3b"), ModelError);
  CHECK(SupplyPoint::parse("3:b").label() == "3:b");
}
