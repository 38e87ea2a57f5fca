#include "berez/builtins.hpp"

namespace berez {

namespace {

const char* kRudakov = R"scn(# Interval with two odd generators.  Shifting the retraction by the soul
# xi1*xi2 moves the integral of (u + xi1*xi2)|Du| from -1 to 0; the endpoint
# terms account for the difference.

[chart]
p = 1
q = 2
vars = u
box = 0, 1

[settings]
order = 32
tolerance = 1e-12

[retraction plain]
u = u

[retraction shifted]
u = u + xi1*xi2

[density]
f = u + xi1*xi2

[face left]
vanishing = 0
slots = t
forward = u
inverse = t

[face right]
vanishing = 1
slots = t
forward = 1 - u
inverse = 1 - t

[derivation dleft]
slot = u
valid = 0, 0.45

[derivation dright]
slot = u
coeff = -1
valid = 0.55, 1

[cov endpoints]
gamma = plain
gamma-prime = shifted
rho = u; 1 - u
faces = left; right
derivations = dleft; dright
)scn";

const char* kRayStokes = R"scn(# Ray window with four odd generators.  The flux 0.5*v^2 of the adapted
# coordinate v = u + xi1*xi2 + xi3*xi4, cut off smoothly before u = 3, obeys
# the boundary identity on the adapted face with no correction; on the naive
# coordinate face the transversal term is +1 and two correction terms
# (+2 and -1) cancel it.

[chart]
p = 1
q = 4
vars = u
box = 0, 3

[settings]
order = 96
tolerance = 1e-8

[retraction ray]
u = u + xi1*xi2 + xi3*xi4

[density]
kind = form
comp1 = 0.5*(u + xi1*xi2 + xi3*xi4)^2*(1 - (u/3)^4)^8
comp2 = 0
comp3 = 0
comp4 = 0
comp5 = 0

[face adapted]
vanishing = 0
slots = t
forward = u + xi1*xi2 + xi3*xi4
inverse = t

[face coordinate]
vanishing = 0
slots = t
forward = u
inverse = t

[derivation du]
slot = u

[stokes corrected]
kind = faces
gamma = ray
faces = adapted

[stokes naive]
kind = general
gamma-prime = ray
faces = coordinate
derivations = du
)scn";

const char* kPolar = R"scn(# Annulus eps < |v| < 1 with a radial soul retraction.  Changing to the
# canonical retraction produces one boundary term on the inner circle; as
# eps shrinks the term extrapolates (in eps^2) to otop*2*pi times the
# density body at the origin, here 2*pi.

[chart]
p = 2
q = 2
vars = v1; v2
params = r; th
box = eps, 1; -pi, pi
map = r*cos(th); r*sin(th)

[const]
eps = 0.2

[settings]
order = 96
tolerance = 1e-6

[retraction soul]
v1 = v1*(1 + xi1*xi2/(v1^2 + v2^2))
v2 = v2*(1 + xi1*xi2/(v1^2 + v2^2))

[retraction flat]
v1 = v1
v2 = v2

[density]
f = bumps((v1^2 + v2^2)/0.64)*(1 + 0.3*v1) + 0.5*bumps((v1^2 + v2^2)/0.64)*(1 + v1)*xi1*xi2

[face circle]
vanishing = 0
slots = t; th
forward = pull(soul, sqrt(v1^2 + v2^2) - eps); pull(soul, atan2(v2, v1))
inverse = (t + eps)*cos(th); (t + eps)*sin(th)
box = -pi, pi
thick = 0.25

[derivation dt]
frame = circle
slot = t

[cov change]
gamma = soul
gamma-prime = flat
rho = sqrt(v1^2 + v2^2) - eps
faces = circle
derivations = dt

[limit]
param = eps
values = 0.2; 0.1; 0.05
power = 2
quantity = boundary
target = otop*2*pi
target-tolerance = 1e-4
)scn";

const char* kQuadrantQ4 = R"scn(# Quarter window [0,3]^2 with four odd generators and a Gaussian envelope.
# The change of retraction decomposes into five structurally nonzero
# boundary terms: two per edge (orders 1 and 2) and one corner term.

[chart]
p = 2
q = 4
vars = u1; u2
box = 0, 3; 0, 3

[settings]
order = 48
tolerance = 1e-8

[retraction base]
u1 = u1
u2 = u2

[retraction shifted]
u1 = u1 + 0.7*xi1*xi2 + 0.4*u2*xi3*xi4
u2 = u2 + 0.5*xi1*xi3 + 0.6*xi3*xi4 + 0.25*u1*xi1*xi2*xi3*xi4

[density]
f = exp(-3*(u1^2 + u2^2))*(1 + 0.5*u1 + 0.3*u2^2) + exp(-3*(u1^2 + u2^2))*sin(u1 + 0.7)*xi1*xi2 + exp(-3*(u1^2 + u2^2))*(0.4 + 0.2*u2)*xi3*xi4 + exp(-3*(u1^2 + u2^2))*0.3*u1*xi1*xi4 + exp(-3*(u1^2 + u2^2))*(0.2 + 0.1*u1*u2)*xi1*xi2*xi3*xi4

[face e1]
vanishing = 0
slots = t; w
forward = u1; u2
inverse = t; w
box = 0, 3

[face e2]
vanishing = 1
slots = t; w
forward = u2; u1
inverse = w; t
box = 0, 3

[face corner]
vanishing = 0; 1
slots = t1; t2
forward = u1; u2
inverse = t1; t2

[derivation da]
slot = u1

[derivation db]
slot = u2

[cov quadrant]
gamma = base
gamma-prime = shifted
rho = u1; u2
faces = e1; e2; corner
derivations = da; db
)scn";

const char* kSquareQ4 = R"scn(# Unit square with four odd generators: the full corner decomposition with
# four edges and four corners.  Exactly thirteen summands are structurally
# nonzero: the bulk, two per edge, and one per corner.

[chart]
p = 2
q = 4
vars = u1; u2
box = 0, 1; 0, 1

[settings]
order = 48
tolerance = 1e-8

[retraction base]
u1 = u1
u2 = u2

[retraction shifted]
u1 = u1 + 0.4*xi1*xi2 + 0.3*u2*xi3*xi4
u2 = u2 + 0.2*u1*xi1*xi2 + 0.25*xi2*xi3 + 0.1*xi1*xi2*xi3*xi4

[density]
f = 1 + 0.2*u1 + 0.3*u1*u2 + sin(u1 + u2)*xi1*xi2 + 0.4*xi3*xi4 + 0.2*u1*xi2*xi3 + (0.1 + u2)*xi1*xi2*xi3*xi4

[face e1]
vanishing = 0
slots = t; w
forward = u1; u2
inverse = t; w
box = 0, 1

[face e2]
vanishing = 1
slots = t; w
forward = 1 - u1; u2
inverse = 1 - t; w
box = 0, 1

[face e3]
vanishing = 2
slots = t; w
forward = u2; u1
inverse = w; t
box = 0, 1

[face e4]
vanishing = 3
slots = t; w
forward = 1 - u2; u1
inverse = w; 1 - t
box = 0, 1

[face c13]
vanishing = 0; 2
slots = t1; t2
forward = u1; u2
inverse = t1; t2

[face c14]
vanishing = 0; 3
slots = t1; t2
forward = u1; 1 - u2
inverse = t1; 1 - t2

[face c23]
vanishing = 1; 2
slots = t1; t2
forward = 1 - u1; u2
inverse = 1 - t1; t2

[face c24]
vanishing = 1; 3
slots = t1; t2
forward = 1 - u1; 1 - u2
inverse = 1 - t1; 1 - t2

[derivation d1]
slot = u1
valid = 0, 0.45; 0, 1

[derivation d2]
slot = u1
coeff = -1
valid = 0.55, 1; 0, 1

[derivation d3]
slot = u2
valid = 0, 1; 0, 0.45

[derivation d4]
slot = u2
coeff = -1
valid = 0, 1; 0.55, 1

[cov square]
gamma = base
gamma-prime = shifted
rho = u1; 1 - u1; u2; 1 - u2
faces = e1; e2; e3; e4; c13; c14; c23; c24
derivations = d1; d2; d3; d4
)scn";

}  // namespace

const std::vector<BuiltinExample>& builtin_examples() {
  static const std::vector<BuiltinExample> all{
      {"rudakov",
       "interval endpoint correction for a soul-shifted retraction",
       kRudakov},
      {"r14-stokes",
       "ray boundary identity, adapted face vs naive face with corrections",
       kRayStokes},
      {"polar",
       "annulus boundary term of a radial soul retraction and its limit",
       kPolar},
      {"quadrant-q4",
       "quarter window change of retraction with five boundary terms",
       kQuadrantQ4},
      {"square-q4",
       "unit square corner decomposition with thirteen summands",
       kSquareQ4},
  };
  return all;
}

const BuiltinExample* find_example(const std::string& name) {
  for (const auto& ex : builtin_examples())
    if (ex.name == name) return &ex;
  return nullptr;
}

}  // namespace berez
