"""Random sampling on p-norm spheres and balls, deterministic seed splitting, and chunked parallel dispatch."""
from .progress import Progress
import math
from multiprocessing import Pool, cpu_count
import numpy as np
import psutil

LOW_MEMORY_THRESHOLD = 1e9  # 1 GB
SURFACE_FRACTION = 0.7
DEFAULT_CHUNK_SIZE = 250


def as_generator(seed):
    """Accepts an int, a SeedSequence, a Generator, or None and returns a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed, n):
    """Splits ``seed`` into ``n`` independent child SeedSequences.

    :param seed: root seed (int or SeedSequence)
    :type seed: int or numpy.random.SeedSequence
    :param n: number of children
    :type n: int
    :rtype: list[numpy.random.SeedSequence]
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n)


def seeded_chunks(total, seed, chunk_size=DEFAULT_CHUNK_SIZE):
    """Splits ``total`` samples into fixed-size chunks, each paired with its own child seed.

    The split depends only on ``total`` and ``chunk_size``, never on the number of workers, so any way of scheduling
    the chunks reproduces the same samples.

    :return: list of (count, SeedSequence) pairs whose counts sum to ``total``
    :rtype: list[tuple[int, numpy.random.SeedSequence]]
    """
    if total <= 0:
        return []
    num_chunks = math.ceil(total / chunk_size)
    counts = [chunk_size] * (num_chunks - 1) + [total - chunk_size * (num_chunks - 1)]
    return list(zip(counts, spawn_seeds(seed, num_chunks)))


def sample_unit_sphere(dim, p, n, rng):
    r"""Samples ``n`` points on the unit sphere of :math:`\|\cdot\|_p` in dimension ``dim``.

    For finite ``p`` this draws generalized Gaussian coordinates (:math:`|t|^p \sim \Gamma(1/p)`) and normalizes them,
    which yields the cone measure of the sphere. For ``p = inf`` one random coordinate is pinned to :math:`\pm 1` and
    the others are uniform on :math:`[-1, 1]`.

    :rtype: numpy.ndarray of shape (n, dim)
    """
    rng = as_generator(rng)
    if n == 0:
        return np.zeros((0, dim))

    if math.isinf(p):
        points = rng.uniform(-1.0, 1.0, size=(n, dim))
        pinned = rng.integers(0, dim, size=n)
        points[np.arange(n), pinned] = rng.choice([-1.0, 1.0], size=n)
        return points

    magnitudes = rng.gamma(1.0 / p, 1.0, size=(n, dim)) ** (1.0 / p)
    points = magnitudes * rng.choice([-1.0, 1.0], size=(n, dim))
    norms = np.sum(np.abs(points) ** p, axis=1) ** (1.0 / p)

    # all-zero draws have probability zero, but replace them so division is always safe
    degenerate = norms == 0
    if degenerate.any():
        points[degenerate] = 0.0
        points[degenerate, 0] = 1.0
        norms[degenerate] = 1.0

    return points / norms[:, None]


def sample_ball_points(dim, p, center, radius, n, rng, surface_fraction=SURFACE_FRACTION):
    """Samples ``n`` points of the p-norm ball B(center, radius).

    A share ``surface_fraction`` of the points (rounded to the nearest integer) lies exactly on the sphere; the rest is
    uniform in the ball.

    :rtype: numpy.ndarray of shape (n, dim)
    """
    rng = as_generator(rng)
    center = np.asarray(center, dtype=float)
    n_surface = int(round(surface_fraction * n))
    directions = sample_unit_sphere(dim, p, n, rng)
    scales = np.ones(n)
    scales[n_surface:] = rng.uniform(0.0, 1.0, size=n - n_surface) ** (1.0 / dim)
    return center + radius * scales[:, None] * directions


def parallel_starmap(func, params, single_threaded=True, show_progress=False, chunk_dispatch=True, name="Sampling:"):
    """Applies ``func`` to every argument tuple of ``params``, using all CPU cores unless ``single_threaded``.

    Results come back in the order of ``params``.

    :param func: module-level (picklable) function
    :param params: argument tuples
    :type params: list[tuple]
    :param single_threaded: if True, run in serial
    :type single_threaded: bool
    :param show_progress: if True, render a progress bar on stderr
    :type show_progress: bool
    :param chunk_dispatch: if True, dispatch parallel work in chunks. Setting this to False may increase performance,
                           but can lead to out-of-memory issues
    :type chunk_dispatch: bool
    :rtype: list
    """
    params = list(params)
    if not params:
        return []

    if single_threaded:
        progress = Progress(len(params), name=name) if show_progress else None
        results = []
        for args in params:
            results.append(func(*args))
            if progress is not None:
                progress.increment()
        if progress is not None:
            progress.done()
        return results

    chunk_size = len(params) // 99
    if chunk_size > 0 and chunk_dispatch:
        chunks = [params[i:i + chunk_size] for i in range(0, len(params), chunk_size)]
    else:
        chunks = [params]

    progress = Progress(len(chunks), name=name) if show_progress else None
    pool = Pool(processes=cpu_count())
    results = []

    for chunk in chunks:
        results.extend(pool.starmap(func, chunk))

        if progress is not None:
            progress.increment()

        if psutil.virtual_memory().available < LOW_MEMORY_THRESHOLD:
            # Reinitialize pool to get around an apparent memory leak in multiprocessing
            pool.close()
            pool = Pool(processes=cpu_count())

    if progress is not None:
        progress.done()

    pool.close()
    return results
