# Prints the modulus of convexity of l_p^2 on a grid of eps together with the quadratic lower bound eps^2 / 8
# (p >= 2, up to p = 2) or eps^2 / 16 (p < 2), and the verdict of the power-type-2 check per exponent.

from math import inf
from polyakconvexity.geometry_utilities import modulus_bruteforce_2d, modulus_closed_form, NormSpace, \
    power_type2_constant

EXPONENTS = [1.25, 1.5, 2.0, 3.0, 4.0, 8.0, inf]
EPS_VALUES = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0]


def modulus_row(space, eps):
    """Closed form where available, otherwise the 2D grid search"""
    if space.p >= 2.0 and not space.is_infinite:
        return modulus_closed_form(space, eps)
    return modulus_bruteforce_2d(space, eps, grid=720)


if __name__ == "__main__":
    print(f'{"p":>6} ' + " ".join(f"{f'eps={eps}':>12}" for eps in EPS_VALUES) + f' {"power type 2":>14}')
    for p in EXPONENTS:
        space = NormSpace(2, p)
        constant = power_type2_constant(space)
        values = " ".join(f"{modulus_row(space, eps):>12.6f}" for eps in EPS_VALUES)
        verdict = f"c={constant.c:.4g}" if constant.holds else "fails"
        print(f"{p:>6} {values} {verdict:>14}")
