// Grassmann layer: product signs, nilpotency, even inversion, Taylor
// composition, odd derivatives.
#include "berez/super.hpp"

#include "berez/errors.hpp"
#include "doctest.h"

using namespace berez;

namespace {

SuperNumber gen(int q, uint32_t mask, double c = 1.0) {
  SuperNumber r(q);
  r.set(mask, ScalarExpr(c));
  return r;
}

const std::vector<std::string> UV{"u", "v"};
const std::vector<std::array<double, 2>> BOX{{0.2, 1.8}, {0.2, 1.8}};

}  // namespace

TEST_CASE("product signs") {
  // xi2 * xi1 = -xi1 xi2
  SuperNumber p = gen(2, 0b10) * gen(2, 0b01);
  CHECK(p.coeff(0b11).const_value() == -1.0);
  // xi1 * xi1 = 0
  CHECK((gen(2, 0b01) * gen(2, 0b01)).is_zero());
  // (xi1 xi2)(xi3 xi4) = xi1 xi2 xi3 xi4, even factors commute
  SuperNumber a = gen(4, 0b0011), b = gen(4, 0b1100);
  CHECK((a * b).coeff(0b1111).const_value() == 1.0);
  CHECK((b * a).coeff(0b1111).const_value() == 1.0);
  // odd factors anticommute: xi3 * xi1 xi2 xi4
  SuperNumber c = gen(4, 0b0100) * gen(4, 0b1011);
  CHECK(c.coeff(0b1111).const_value() == 1.0);  // two transpositions
}

TEST_CASE("associativity on random data") {
  Rng rng(42);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    SuperNumber x(3), y(3), z(3);
    for (uint32_t m = 0; m < 8; ++m) {
      x.set(m, ScalarExpr(uni(rng)));
      y.set(m, ScalarExpr(uni(rng)));
      z.set(m, ScalarExpr(uni(rng)));
    }
    SuperNumber lhs = (x * y) * z, rhs = x * (y * z);
    for (uint32_t m = 0; m < 8; ++m)
      CHECK(lhs.coeff(m).const_value() ==
            doctest::Approx(rhs.coeff(m).const_value()).epsilon(1e-13));
  }
}

TEST_CASE("soul nilpotency") {
  SuperNumber s(4);
  s.set(0b0011, ScalarExpr::var("u"));
  s.set(0b1100, ScalarExpr(2.0));
  s.set(0b0101, ScalarExpr(0.7));
  CHECK_FALSE(pow_sn(s, 2).is_zero());
  CHECK(pow_sn(s, 3).is_zero());  // exceeds floor(q/2) factors
}

TEST_CASE("even inversion") {
  ScalarExpr u = ScalarExpr::var("u");
  SuperNumber x(4, ScalarExpr(1.0) + pow_i(u, 2));
  x.set(0b0011, u);
  x.set(0b1100, ScalarExpr(0.5));
  x.set(0b1111, ScalarExpr(-0.25) * u);
  SuperNumber inv = invert_even(x);
  Rng rng(5);
  CHECK(sn_numerically_equal(x * inv, SuperNumber(4, ScalarExpr(1.0)), UV, BOX, rng));
  CHECK(sn_numerically_equal(inv * x, SuperNumber(4, ScalarExpr(1.0)), UV, BOX, rng));

  SuperNumber odd = gen(2, 0b01);
  CHECK_THROWS_AS(invert_even(odd), ParityError);
}

TEST_CASE("Taylor composition of sqrt") {
  // sqrt(u^2 + v^2 + 2 xi1 xi2) = r + xi1 xi2 / r with r = sqrt(u^2+v^2)
  ScalarExpr u = ScalarExpr::var("u"), v = ScalarExpr::var("v");
  SuperNumber arg(2, pow_i(u, 2) + pow_i(v, 2));
  arg.set(0b11, ScalarExpr(2.0));
  SuperNumber res = compose_scalar(sqrt_e(ScalarExpr::var("t")), {"t"}, {arg});
  ScalarExpr r = sqrt_e(pow_i(u, 2) + pow_i(v, 2));
  SuperNumber expect(2, r);
  expect.set(0b11, ScalarExpr(1.0) / r);
  Rng rng(11);
  CHECK(sn_numerically_equal(res, expect, UV, BOX, rng));
  // composition squares back to the argument
  CHECK(sn_numerically_equal(res * res, arg, UV, BOX, rng));
}

TEST_CASE("Taylor composition with two arguments") {
  ScalarExpr s = ScalarExpr::var("s"), t = ScalarExpr::var("t");
  ScalarExpr u = ScalarExpr::var("u"), v = ScalarExpr::var("v");
  SuperNumber a1(4, u);
  a1.set(0b0011, ScalarExpr(1.0));
  SuperNumber a2(4, v);
  a2.set(0b1100, u);
  // g = s*t: expect u*v + v xi1xi2 + u^2 xi3xi4 + xi1xi2xi3xi4 * u ... via product
  SuperNumber res = compose_scalar(s * t, {"s", "t"}, {a1, a2});
  Rng rng(17);
  CHECK(sn_numerically_equal(res, a1 * a2, UV, BOX, rng));
}

TEST_CASE("odd derivative signs and Leibniz rule") {
  // d/dxi2 (xi1 xi2) = -xi1
  SuperNumber f = gen(2, 0b11);
  CHECK(sderiv_odd(f, 1).coeff(0b01).const_value() == -1.0);
  // d/dxi1 (xi1 xi2) = xi2
  CHECK(sderiv_odd(f, 0).coeff(0b10).const_value() == 1.0);

  // graded Leibniz for homogeneous left factor
  Rng rng(23);
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    SuperNumber x(3), y(3);
    for (uint32_t m = 0; m < 8; ++m) {
      if ((mask_grade(m) & 1) == 0) x.set(m, ScalarExpr(uni(rng)));  // even x
      y.set(m, ScalarExpr(uni(rng)));
    }
    for (int j = 0; j < 3; ++j) {
      SuperNumber lhs = sderiv_odd(x * y, j);
      SuperNumber rhs = sderiv_odd(x, j) * y + x * sderiv_odd(y, j);
      for (uint32_t m = 0; m < 8; ++m)
        CHECK(lhs.coeff(m).const_value() ==
              doctest::Approx(rhs.coeff(m).const_value()).epsilon(1e-13));
    }
    // odd left factor flips the second term
    SuperNumber xo(3);
    xo.set(0b001, ScalarExpr(uni(rng)));
    xo.set(0b111, ScalarExpr(uni(rng)));
    for (int j = 0; j < 3; ++j) {
      SuperNumber lhs = sderiv_odd(xo * y, j);
      SuperNumber rhs = sderiv_odd(xo, j) * y - xo * sderiv_odd(y, j);
      for (uint32_t m = 0; m < 8; ++m)
        CHECK(lhs.coeff(m).const_value() ==
              doctest::Approx(rhs.coeff(m).const_value()).epsilon(1e-13));
    }
  }
}

TEST_CASE("parity classification") {
  SuperNumber x(2, ScalarExpr(1.0));
  CHECK(x.parity() == Parity::Even);
  x.set(0b01, ScalarExpr(1.0));
  CHECK(x.parity() == Parity::Mixed);
  CHECK(SuperNumber(2).parity() == Parity::Even);
  CHECK(gen(2, 0b10).parity() == Parity::Odd);
  CHECK(x.grade_part(0).parity() == Parity::Even);
  CHECK(x.grade_part(1).parity() == Parity::Odd);
}
