// Quadrature: closed-form integrals, mapped regions, masks, sampling.
#include "berez/quad.hpp"

#include <cmath>

#include "doctest.h"

using namespace berez;

TEST_CASE("polynomial exactness and closed forms") {
  Quadrature q(32);
  ScalarExpr x = ScalarExpr::var("x");
  Region r = box_region({"x"}, {{0.0, 1.0}});
  CHECK(q.integrate(pow_i(x, 3), r) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(q.integrate(sin_e(x), box_region({"x"}, {{0.0, M_PI}})) ==
        doctest::Approx(2.0).epsilon(1e-14));

  // degree 2n-1 exactness at low order
  Quadrature q4(4);
  CHECK(q4.integrate(pow_i(x, 7), r) == doctest::Approx(0.125).epsilon(1e-13));

  ScalarExpr y = ScalarExpr::var("y");
  Region r2 = box_region({"x", "y"}, {{0.0, 2.0}, {-1.0, 1.0}});
  CHECK(q.integrate(x * pow_i(y, 2), r2) ==
        doctest::Approx(2.0 * 2.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("disk via polar map") {
  Quadrature q(32);
  ScalarExpr r = ScalarExpr::var("r"), t = ScalarExpr::var("t");
  Region disk;
  disk.params = {"r", "t"};
  disk.box = {{0.0, 1.0}, {-M_PI, M_PI}};
  disk.target_vars = {"v1", "v2"};
  disk.map = {r * cos_e(t), r * sin_e(t)};
  CHECK(q.volume(disk) == doctest::Approx(M_PI).epsilon(1e-12));
  ScalarExpr v1 = ScalarExpr::var("v1"), v2 = ScalarExpr::var("v2");
  CHECK(q.integrate(ScalarExpr(1.0) - pow_i(v1, 2) - pow_i(v2, 2), disk) ==
        doctest::Approx(M_PI / 2.0).epsilon(1e-12));
}

TEST_CASE("masked region, coarse accuracy only") {
  Quadrature q(64);
  ScalarExpr x = ScalarExpr::var("x"), y = ScalarExpr::var("y");
  Region quarter = box_region({"x", "y"}, {{0.0, 1.0}, {0.0, 1.0}});
  quarter.mask = ScalarExpr(1.0) - pow_i(x, 2) - pow_i(y, 2);
  // indicator is discontinuous; only expect a few digits
  CHECK(q.volume(quarter) == doctest::Approx(M_PI / 4.0).epsilon(2e-3));
}

TEST_CASE("cutoff integrand converges root-exponentially") {
  // all derivatives vanish at the support edge; order 32 carries ~1e-8 there
  ScalarExpr x = ScalarExpr::var("x");
  Region r = box_region({"x"}, {{-1.0, 1.0}});
  double ref = 1.2069003224378836;
  CHECK(std::abs(Quadrature(32).integrate(bump(x), r) - ref) < 5e-8);
  CHECK(std::abs(Quadrature(64).integrate(bump(x), r) - ref) < 1e-11);
}

TEST_CASE("zero-dimensional region integrates to the constant") {
  Quadrature q(32);
  Region pt = box_region({}, {});
  CHECK(q.integrate(ScalarExpr(3.25), pt) == 3.25);
  CHECK(q.volume(pt) == 1.0);
}

TEST_CASE("sample points respect box, map and mask") {
  Quadrature q(16);
  Rng rng(3);
  ScalarExpr r = ScalarExpr::var("r"), t = ScalarExpr::var("t");
  Region annulus;
  annulus.params = {"r", "t"};
  annulus.box = {{0.5, 1.0}, {-M_PI, M_PI}};
  annulus.target_vars = {"v1", "v2"};
  annulus.map = {r * cos_e(t), r * sin_e(t)};
  for (const Env& env : q.sample_points(annulus, 40, rng)) {
    double rr = std::hypot(env.at("v1"), env.at("v2"));
    CHECK(rr >= 0.5);
    CHECK(rr <= 1.0);
  }
}
