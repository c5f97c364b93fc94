# this makes the main entry points importable from the top-level package
from .convexity_utilities import certify_convexity, estimate_radius  # noqa
from .localization_utilities import solve_localization  # noqa
from .problem_io import load_registry  # noqa
