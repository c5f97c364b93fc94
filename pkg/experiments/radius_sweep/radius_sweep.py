# Certifies convexity of f(B(x0, eps)) at multiples of the admissible radius eps0 for the built-in maps.
# The verdict is expected to stay "certified" up to eps0 and for a while beyond it, since eps0 is a sufficient bound,
# while the rank-deficient map is refuted at every radius.

from time import time
from polyakconvexity.convexity_utilities import certify_convexity, estimate_radius
from polyakconvexity.exceptions import NotSurjective
from polyakconvexity.geometry_utilities import NormSpace
from polyakconvexity.problem_io import load_registry

MULTIPLES = [0.5, 1.0, 2.0, 4.0, 8.0]


def sweep(name, n_pairs=500, seed=0):
    """Prints one line per multiple of eps0 for a registry map

    :param name: registry instance
    :param n_pairs: number of sampled pairs per certificate
    :param seed: random seed
    """
    bundle = load_registry(name)
    space = NormSpace(bundle.space.dim) if bundle.space.p > 2 else bundle.space
    try:
        eps0 = estimate_radius(bundle.map, bundle.x0, space, seed=seed).eps0
    except NotSurjective:
        eps0 = bundle.eps
        print(f"{name}: derivative is not onto, sweeping around eps={eps0}")

    for multiple in MULTIPLES:
        start = time()
        cert = certify_convexity(bundle.map, bundle.x0, space, multiple * eps0, n_pairs=n_pairs, seed=seed, eps0=eps0)
        print(f"{name:>22} {multiple:>6.1f} {multiple * eps0:>10.4f} {cert.verdict:>13} "
              f"{len(cert.candidates):>10} {time() - start:>8.2f}")


if __name__ == "__main__":
    print(f'{"map":>22} {"eps/eps0":>6} {"eps":>10} {"verdict":>13} {"candidates":>10} {"time (s)":>8}')
    for name in ("positive-quadratic", "remark-linf", "remark-rank-deficient"):
        sweep(name)
