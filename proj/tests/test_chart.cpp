// Charts: shift inversion, decomposition along retractions, adapted slot
// views, morphism pullbacks.
#include "berez/chart.hpp"

#include <cmath>

#include "berez/errors.hpp"
#include "doctest.h"

using namespace berez;

namespace {

Chart interval_chart() {
  return make_chart(1, 2, {"u"}, box_region({"u"}, {{0.0, 1.0}}));
}

Chart plane_chart() {
  return make_chart(2, 4, {"u1", "u2"},
                    box_region({"u1", "u2"}, {{0.1, 1.0}, {0.1, 1.0}}));
}

const std::vector<std::string> U1U2{"u1", "u2"};
const std::vector<std::array<double, 2>> BOX2{{0.1, 1.0}, {0.1, 1.0}};

}  // namespace

TEST_CASE("shift inversion round trip") {
  Chart c = plane_chart();
  ScalarExpr u1 = ScalarExpr::var("u1"), u2 = ScalarExpr::var("u2");
  SuperNumber g1 = c.evar_sn(0);
  g1.set(0b0011, ScalarExpr(0.7));
  g1.set(0b1100, ScalarExpr(0.4) * u2);
  SuperNumber g2 = c.evar_sn(1);
  g2.set(0b0101, ScalarExpr(0.5));
  g2.set(0b1111, ScalarExpr(0.25) * u1);
  std::vector<SuperNumber> imgs{g1, g2};
  std::vector<SuperNumber> inv = invert_shift(c, imgs);
  std::vector<SuperNumber> odd_id;
  for (int j = 0; j < 4; ++j) odd_id.push_back(c.odd_sn(j));
  Rng rng(31);
  for (int i = 0; i < 2; ++i) {
    SuperNumber fwd_bwd = pullback_fn(c.evars, inv, odd_id, imgs[i]);
    SuperNumber bwd_fwd = pullback_fn(c.evars, imgs, odd_id, inv[i]);
    CHECK(sn_numerically_equal(fwd_bwd, c.evar_sn(i), U1U2, BOX2, rng));
    CHECK(sn_numerically_equal(bwd_fwd, c.evar_sn(i), U1U2, BOX2, rng));
  }
}

TEST_CASE("invert_shift rejects structural body mismatch") {
  Chart c = interval_chart();
  SuperNumber bad(2, ScalarExpr::var("u") + ScalarExpr(0.1));
  CHECK_THROWS_AS(invert_shift(c, {bad}), UnsupportedSystem);
}

TEST_CASE("decomposition along the interval retraction") {
  Chart c = interval_chart();
  SuperNumber img = c.evar_sn(0);
  img.set(0b11, ScalarExpr(1.0));  // u + xi1 xi2
  Retraction gam{{img}};

  // f = u: coefficients u and -1
  auto dec = decompose(c, c.evar_sn(0), gam);
  CHECK(dec.at(0).str() == "u");
  CHECK(dec.at(0b11).const_value() == -1.0);

  // f = u + xi1 xi2 is exactly the pulled-back coordinate
  SuperNumber f = c.evar_sn(0);
  f.set(0b11, ScalarExpr(1.0));
  auto dec2 = decompose(c, f, gam);
  CHECK(dec2.at(0).str() == "u");
  CHECK(dec2.count(0b11) == 0);

  // round trip through recompose
  ScalarExpr u = ScalarExpr::var("u");
  SuperNumber g(2, sin_e(u));
  g.set(0b01, u);
  g.set(0b10, ScalarExpr(2.0));
  g.set(0b11, exp_e(u));
  Rng rng(7);
  SuperNumber back = recompose(c, decompose(c, g, gam), gam);
  CHECK(sn_numerically_equal(back, g, {"u"}, {{0.05, 0.95}}, rng));
}

TEST_CASE("decomposition round trip in (2,4)") {
  Chart c = plane_chart();
  ScalarExpr u1 = ScalarExpr::var("u1"), u2 = ScalarExpr::var("u2");
  SuperNumber g1 = c.evar_sn(0);
  g1.set(0b0011, ScalarExpr(0.7) * u2);
  g1.set(0b1111, ScalarExpr(0.3));
  SuperNumber g2 = c.evar_sn(1);
  g2.set(0b1010, ScalarExpr(0.6));
  Retraction gam{{g1, g2}};
  SuperNumber f(4, exp_e(u1) * u2);
  f.set(0b0011, sin_e(u1 + u2));
  f.set(0b0110, u1 * u2);
  f.set(0b1011, u2);
  f.set(0b1111, ScalarExpr(1.0) + u1);
  Rng rng(13);
  SuperNumber back = recompose(c, decompose(c, f, gam), gam);
  CHECK(sn_numerically_equal(back, f, U1U2, BOX2, rng));
}

TEST_CASE("retraction validation") {
  Chart c = interval_chart();
  Quadrature quad(8);
  Rng rng(1);
  Retraction good = canonical_retraction(c);
  CHECK_NOTHROW(validate_retraction(c, good, quad, rng));

  Retraction odd_part{{c.evar_sn(0) + c.odd_sn(0)}};
  CHECK_THROWS_AS(validate_retraction(c, odd_part, quad, rng), ParityError);

  Retraction wrong_body{{SuperNumber(2, ScalarExpr(2.0) * ScalarExpr::var("u"))}};
  CHECK_THROWS_AS(validate_retraction(c, wrong_body, quad, rng), DomainError);
}

TEST_CASE("system validation flags singular body Jacobian") {
  Chart c = make_chart(2, 2, {"u1", "u2"},
                       box_region({"u1", "u2"}, {{0.0, 1.0}, {0.0, 1.0}}));
  CoordSystem sys = standard_system(c, "bad");
  sys.evens[1] = sys.evens[0];  // both rows equal u1
  Quadrature quad(8);
  Rng rng(2);
  CHECK_THROWS_AS(validate_system(c, sys, quad, rng), DomainError);
}

TEST_CASE("slot view: shift system delta property and Leibniz") {
  Chart c = interval_chart();
  SuperNumber img = c.evar_sn(0);
  img.set(0b11, ScalarExpr::var("u"));  // u + u xi1 xi2
  Retraction gam{{img}};
  Quadrature quad(8);
  Rng rng(3);
  auto samples = quad.sample_points(c.region, 12, rng);
  SlotView view(c, shift_adapted(c, gam, "g"), samples);

  std::vector<std::string> uvar{"u"};
  std::vector<std::array<double, 2>> ubox{{0.05, 0.95}};
  // system coordinates are (u + u xi1xi2, xi1, xi2)
  std::vector<SuperNumber> coords{img, c.odd_sn(0), c.odd_sn(1)};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      SuperNumber d = view.derive(coords[j], i);
      SuperNumber expect(2, ScalarExpr(i == j ? 1.0 : 0.0));
      CHECK(sn_numerically_equal(d, expect, uvar, ubox, rng));
    }

  // Leibniz for the even system derivative on even factors
  ScalarExpr u = ScalarExpr::var("u");
  SuperNumber f(2, sin_e(u));
  f.set(0b11, u);
  SuperNumber g(2, exp_e(u));
  g.set(0b11, ScalarExpr(2.0));
  SuperNumber lhs = view.derive(f * g, 0);
  SuperNumber rhs = view.derive(f, 0) * g + f * view.derive(g, 0);
  CHECK(sn_numerically_equal(lhs, rhs, uvar, ubox, rng));
}

TEST_CASE("slot view: polar adapted system on an annulus") {
  Region annulus;
  annulus.params = {"r", "t"};
  annulus.box = {{0.25, 0.95}, {-3.0, 3.0}};
  annulus.target_vars = {"v1", "v2"};
  annulus.map = {ScalarExpr::var("r") * cos_e(ScalarExpr::var("t")),
                 ScalarExpr::var("r") * sin_e(ScalarExpr::var("t"))};
  Chart c = make_chart(2, 2, {"v1", "v2"}, annulus);

  ScalarExpr v1 = ScalarExpr::var("v1"), v2 = ScalarExpr::var("v2");
  ScalarExpr r2 = pow_i(v1, 2) + pow_i(v2, 2);
  // forward images carry a soul: w1 = sqrt(v1^2+v2^2+2 xi1xi2) - eps
  SuperNumber arg(2, r2);
  arg.set(0b11, ScalarExpr(2.0));
  double eps = 0.2;
  SuperNumber w1 = compose_scalar(sqrt_e(ScalarExpr::var("t")) - ScalarExpr(eps),
                                  {"t"}, {arg});
  SuperNumber w2(2, atan2_e(v2, v1));

  AdaptedSystem sys;
  sys.name = "polar";
  sys.slots = {"w1", "w2"};
  sys.forward = {w1, w2};
  ScalarExpr s1 = ScalarExpr::var("w1"), s2 = ScalarExpr::var("w2");
  sys.inverse = {(s1 + ScalarExpr(eps)) * cos_e(s2),
                 (s1 + ScalarExpr(eps)) * sin_e(s2)};

  Quadrature quad(8);
  Rng rng(4);
  auto samples = quad.sample_points(c.region, 12, rng);
  SlotView view(c, sys, samples);

  // round trip on a function with soul components, checked on a sub-box
  SuperNumber f(2, v1 + pow_i(v2, 2));
  f.set(0b01, v2);
  f.set(0b11, v1 * v2);
  SuperNumber back = view.from_slots(view.to_slots(f));
  std::vector<std::array<double, 2>> inner{{0.35, 0.65}, {0.35, 0.65}};
  Rng rng2(5);
  CHECK(sn_numerically_equal(back, f, {"v1", "v2"}, inner, rng2));

  // delta property for the even system coordinates
  std::vector<SuperNumber> coords{w1, w2};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      SuperNumber d = view.derive(coords[j], i);
      SuperNumber expect(2, ScalarExpr(i == j ? 1.0 : 0.0));
      CHECK(sn_numerically_equal(d, expect, {"v1", "v2"}, inner, rng2));
    }
}

TEST_CASE("morphism pullback preserves the radius relation") {
  // polar-to-plane morphism with odd rotation; v1^2+v2^2+2 eta1 eta2 = u1^2
  Region polar_box = box_region({"u1", "u2"}, {{0.2, 1.0}, {-3.0, 3.0}});
  Chart src = make_chart(2, 2, {"u1", "u2"}, polar_box);
  Chart dst = make_chart(2, 2, {"v1", "v2"},
                         box_region({"v1", "v2"}, {{-1.0, 1.0}, {-1.0, 1.0}}));
  ScalarExpr u1 = ScalarExpr::var("u1"), u2 = ScalarExpr::var("u2");

  SuperNumber scale(2, ScalarExpr(1.0));
  scale.set(0b11, -pow_i(u1, -2));
  Morphism phi;
  phi.src = &src;
  phi.dst = &dst;
  phi.evens = {SuperNumber(2, u1 * cos_e(u2)) * scale,
               SuperNumber(2, u1 * sin_e(u2)) * scale};
  SuperNumber eta1(2), eta2(2);
  eta1.set(0b01, cos_e(u2));
  eta1.set(0b10, -sin_e(u2));
  eta2.set(0b01, sin_e(u2));
  eta2.set(0b10, cos_e(u2));
  phi.odds = {eta1, eta2};

  ScalarExpr v1 = ScalarExpr::var("v1"), v2 = ScalarExpr::var("v2");
  SuperNumber f(2, pow_i(v1, 2) + pow_i(v2, 2));
  f.set(0b11, ScalarExpr(2.0));  // v1^2 + v2^2 + 2 eta1 eta2
  SuperNumber pulled = pullback_fn(phi, f);
  Rng rng(6);
  CHECK(sn_numerically_equal(pulled, SuperNumber(2, pow_i(u1, 2)), {"u1", "u2"},
                             {{0.2, 1.0}, {-3.0, 3.0}}, rng));
}

TEST_CASE("snap_body_to validates before replacing") {
  Chart c = interval_chart();
  ScalarExpr u = ScalarExpr::var("u");
  SuperNumber x(2, u * (ScalarExpr(1.0) + ScalarExpr(1e-15) * u));
  std::vector<Env> samples{{{"u", 0.3}}, {{"u", 0.8}}};
  SuperNumber snapped = snap_body_to(x, u, samples);
  CHECK(snapped.body().str() == "u");
  SuperNumber y(2, u + ScalarExpr(0.5));
  CHECK_THROWS_AS(snap_body_to(y, u, samples), DomainError);
}
