"""Reference values from independent routes (see tools/derive_frozen.py).

Nothing here is computed by the package's series or reduction code.
"""

import math

PI = math.pi

# Exact first-order averages of the fixture B field over the angle (sympy):
#   f1_rho = pi*rho*(-rho^2 + 28 z^2 - 12)/28,  f1_z = pi*z*(-7 rho^2 + 4 z^2 + 108)/7


def fixture_b_f1_exact(a1, a2):
    return (PI * a1 * (-a1**2 + 28 * a2**2 - 12) / 28,
            PI * a2 * (-7 * a1**2 + 4 * a2**2 + 108) / 7)


# Jacobian of the exact average at (4, 1).
FIXTURE_B_DF1_PLUS = ((-8 * PI / 7, 8 * PI), (-8 * PI, 8 * PI / 7))

# Shooting + variational equation, b = -1.1267, orbit through (4, 1):
# (|omega_max|^2 - 1) / eps^2 at eps = 1/200, 1/400, 1/800.
FIXTURE_B_PLUS_MODULUS = {200: -229.53754304112283, 400: -256.6888098499653, 800: -269.67262530455116}
FIXTURE_B_MINUS_MODULUS = {200: -171.5450916905281, 400: -197.77341245236002, 800: -210.3375636988858}
# b = 10, orbit through (4, 1): the real part of the eigenvalue jet is negative
# but the multipliers leave the unit disk.
FIXTURE_B_B10_PLUS_MODULUS = {200: 198.00879311100417, 400: 115.53981261947399, 800: 67.16667979375757}

# Fixture A at eps = 1/45 and (b, c, d, e) = (1/250, 150, -1, -1).
FIXTURE_A_ORBIT_45 = (0.7385929827727935, 0.5360926689752595, 0.526902562608203)
FIXTURE_A_MAX_MODULUS_45 = 0.9952413469956035
