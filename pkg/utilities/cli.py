"""Command-line front end: ``polyakconvexity <command> [problem.pkp | --registry NAME] [options]``.

Exit codes are 0 when every requested check passes or certifies, 2 on a refutation, witness or failed check, and 1 on
errors (including usage errors).
"""
from .cone_utilities import check_normal_cone
from .convexity_utilities import certify_convexity, CERTIFIED, estimate_radius, find_nonconvexity_witness
from .duality_utilities import duality_gap_estimate, saddle_point_check
from .exceptions import PolyakConvexityError, ValidationFailed
from .geometry_utilities import (modulus_bruteforce_2d, modulus_closed_form, modulus_lower_bound,
                                 modulus_random_search, MODULUS_EPS_GRID, NormSpace, power_type2_constant)
from .localization_utilities import (check_lagrangian_min, compute_multiplier, solve_localization,
                                     verify_localized_optimality)
from .perturbation_utilities import calmness_check, sample_value_function, subgradient_check
from .problem_io import load_registry, read_problem_file, write_certificate_csv, write_value_function_csv
from .regularity_utilities import (linear_openness_check, metric_reg_constant, surjectivity_check,
                                   validate_metric_regularity)
import argparse
from dataclasses import dataclass, fields, replace
import logging
import math
import numpy as np
import sys

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUTED = 2
GAP_TOLERANCE = 1e-5
WEAK_DUALITY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one run, echoed at the top of every report."""
    command: str
    source: str = None
    seed: int = 42
    samples: int = 2000
    tol_res: float = 1e-8
    eps: str = None
    x0: tuple = None
    p: float = None
    dim: int = None
    eps_grid: tuple = None
    full_search: bool = False
    radius: float = None
    perturbations: int = None
    emit_samples: str = None
    parallel: bool = False

    @classmethod
    def from_args(cls, args):
        values = {f.name: getattr(args, f.name) for f in fields(cls) if hasattr(args, f.name)}
        if getattr(args, "registry", None):
            values["source"] = f"registry:{args.registry}"
        elif getattr(args, "problem", None):
            values["source"] = args.problem
        return cls(**values)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _exponent(text):
    try:
        return math.inf if text in ("inf", "infinity") else float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'inf', got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="root random seed (default: 42)")
    common.add_argument("--samples", type=int, default=2000, help="sample count for sampled checks (default: 2000)")
    common.add_argument("--tol", dest="tol_res", type=float, default=1e-8,
                        help="preimage residual tolerance (default: 1e-8)")
    common.add_argument("--parallel", action="store_true", help="use all CPU cores for sampling")
    common.add_argument("--progress", action="store_true", help="show progress bars on stderr")
    common.add_argument("--verbose", "-v", action="count", default=0, help="log to stderr (-vv for debug)")

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("problem", nargs="?", help="path of a .pkp problem file")
    problem.add_argument("--registry", help="name of a built-in instance")
    problem.add_argument("--x0", type=_float_list, help="reference point, comma separated")
    problem.add_argument("--p", type=_exponent, help="override the domain exponent p")

    parser = _ArgumentParser(prog="polyakconvexity",
                             description="Numerical verification of convexity of images of small balls under "
                                         "regular smooth maps, and of localized Lagrangian duality.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    modulus = subparsers.add_parser("modulus", parents=[common], help="moduli of convexity of l_p spaces")
    modulus.add_argument("--p", type=_exponent, default=2.0, help="exponent p in (1, inf] (default: 2)")
    modulus.add_argument("--dim", type=int, default=2, help="space dimension (default: 2)")
    modulus.add_argument("--eps-grid", dest="eps_grid", type=_float_list, default=MODULUS_EPS_GRID,
                         help="comma-separated eps values in [0, 2]")
    modulus.add_argument("--full-search", dest="full_search", action="store_true",
                         help="also search 2D sections numerically")

    certify = subparsers.add_parser("certify", parents=[common, problem], help="certify convexity of f(B(x0, eps))")
    certify.add_argument("--eps", help="ball radius, or 'auto' to use the estimated admissible radius")
    certify.add_argument("--emit-samples", dest="emit_samples", help="write per-pair records to this CSV file")

    witness = subparsers.add_parser("witness", parents=[common, problem], help="search a nonconvexity witness")
    witness.add_argument("--eps", help="ball radius")

    regularity = subparsers.add_parser("regularity", parents=[common, problem],
                                       help="surjectivity, metric regularity and linear openness at x0")
    regularity.add_argument("--radius", type=float, default=1.0, help="initial validation radius (default: 1)")

    for name, text in (("localize", "solve the eps-localized problem and extract multipliers"),
                       ("duality", "check the saddle point and the duality gap"),
                       ("calm", "check the value function subgradient and calmness")):
        sub = subparsers.add_parser(name, parents=[common, problem], help=text)
        sub.add_argument("--eps", help="localization radius")
        if name == "calm":
            sub.add_argument("--radius", type=float, default=0.05, help="perturbation radius (default: 0.05)")
            sub.add_argument("--perturbations", type=int, default=200,
                             help="number of sampled perturbations (default: 200)")
            sub.add_argument("--emit-samples", dest="emit_samples", help="write (y, v(y)) samples to this CSV file")
    return parser


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f"{value:.9g}"
    if isinstance(value, str):
        return value
    return "(" + ", ".join(f"{v:.9g}" for v in np.asarray(value, dtype=float).ravel()) + ")"


def _section(out, title, rows):
    print(f"[{title}]", file=out)
    for key, value in rows:
        print(f"  {key:<28}{_fmt(value)}", file=out)
    print(file=out)


def _witness_vector(witness):
    if hasattr(witness, "y"):
        return witness.y
    if isinstance(witness, tuple):
        return np.concatenate([np.atleast_1d(np.asarray(w, dtype=float)) for w in witness if not isinstance(w, str)])
    return witness


def _check_rows(name, result):
    rows = [(name, "pass" if result else "FAIL")]
    if not result and result.witness is not None:
        rows.append(("  witness", _witness_vector(result.witness)))
    return rows


def _load(args, parser):
    if args.registry:
        bundle = load_registry(args.registry)
    elif args.problem:
        bundle = read_problem_file(args.problem)
    else:
        parser.error("a problem file or --registry is required")

    space = bundle.space if args.p is None else NormSpace(bundle.space.dim, args.p)
    if args.x0 is not None:
        x0 = np.array(args.x0, dtype=float)
    elif bundle.x0 is not None:
        x0 = bundle.x0
    else:
        parser.error("missing x0: pass --x0 or set x0 in the [defaults] section")
    if x0.shape != (space.dim,):
        parser.error(f"x0 has {x0.shape[0]} coordinates but the space has dimension {space.dim}")
    return bundle, space, x0


def _eps(args, bundle, parser, allow_auto=False):
    text = getattr(args, "eps", None)
    if text is None:
        if bundle.eps is None:
            parser.error("missing eps: pass --eps or set eps in the [defaults] section")
        return bundle.eps
    if text == "auto":
        if not allow_auto:
            parser.error("--eps auto is only available for certify")
        return "auto"
    try:
        return float(text)
    except ValueError:
        parser.error(f"--eps expects a number{' or auto' if allow_auto else ''}, got {text!r}")


def cmd_modulus(args, parser, out):
    for eps in args.eps_grid:
        if not 0.0 <= eps <= 2.0:
            parser.error(f"eps values must lie in [0, 2], got {eps}")
    space = NormSpace(args.dim, args.p)

    print(f"[modulus p={_fmt(space.p)} dim={space.dim}]", file=out)
    header = f"  {'eps':>12}{'closed form':>18}"
    if args.full_search:
        header += f"{'2D search':>18}"
        if space.dim > 2:
            header += f"{'random planes':>18}"
    print(header, file=out)
    for eps in args.eps_grid:
        if space.p >= 2.0 and not space.is_infinite:
            exact = modulus_closed_form(space, eps)
        elif space.p < 2.0:
            exact = modulus_lower_bound(space, eps)
        else:
            exact = None
        line = f"  {_fmt(eps):>12}{_fmt(exact):>18}"
        if args.full_search and space.dim >= 2:
            line += f"{_fmt(modulus_bruteforce_2d(space, eps)):>18}"
            if space.dim > 2:
                line += f"{_fmt(modulus_random_search(space, eps, seed=args.seed)):>18}"
        print(line, file=out)
    print(file=out)

    constant = power_type2_constant(space)
    _section(out, "power type 2", [("condition", "holds" if constant.holds else "fails"), ("c", constant.c),
                                   ("violating eps", constant.violating_eps), ("reason", constant.reason)])
    return EXIT_OK if constant.holds else EXIT_REFUTED


def cmd_certify(args, parser, out):
    bundle, space, x0 = _load(args, parser)
    f = bundle.target_map()
    eps = _eps(args, bundle, parser, allow_auto=True)
    eps0 = None
    if eps == "auto":
        bound = estimate_radius(f, x0, space, samples=min(args.samples, 1000), seed=args.seed,
                                single_threaded=not args.parallel)
        eps = eps0 = bound.eps0
        _section(out, "radius", [("eps0", bound.eps0), ("r", bound.r), ("c", bound.c), ("mu", bound.mu),
                                 ("L", bound.L), ("lipschitz kind", bound.lipschitz_kind),
                                 ("delta_mu", bound.delta_mu), ("zeta", bound.zeta), ("theta", bound.theta),
                                 ("formula", bound.formula_used)])

    cert = certify_convexity(f, x0, space, eps, n_pairs=args.samples, seed=args.seed, tol_res=args.tol_res,
                             record_samples=args.emit_samples is not None, eps0=eps0,
                             single_threaded=not args.parallel, show_progress=args.progress)
    _section(out, "certificate", [("verdict", cert.verdict.upper()), ("eps", cert.eps),
                                  ("pairs tested", cert.pairs_tested), ("pairs skipped", cert.pairs_skipped),
                                  ("max preimage residual", cert.max_preimage_residual),
                                  ("max norm excess", cert.max_norm_excess), ("candidates", len(cert.candidates)),
                                  ("margin eps/eps0", cert.margin)])
    for i, w in enumerate(cert.witnesses, start=1):
        _section(out, f"witness {i}", [("y1", w.y1), ("y2", w.y2), ("midpoint", w.ybar), ("x1", w.x1), ("x2", w.x2),
                                       ("gap lower bound", w.gap_lower_bound), ("cell slack", w.slack)])
    if args.emit_samples:
        write_certificate_csv(cert, args.emit_samples)
    return EXIT_OK if cert.verdict == CERTIFIED else EXIT_REFUTED


def cmd_witness(args, parser, out):
    bundle, space, x0 = _load(args, parser)
    eps = _eps(args, bundle, parser)
    witness = find_nonconvexity_witness(bundle.target_map(), x0, space, eps, budget=args.samples, seed=args.seed)
    if witness is None:
        _section(out, "witness", [("found", False)])
        return EXIT_OK
    _section(out, "witness", [("found", True), ("y1", witness.y1), ("y2", witness.y2), ("midpoint", witness.ybar),
                              ("x1", witness.x1), ("x2", witness.x2), ("gap lower bound", witness.gap_lower_bound),
                              ("cell slack", witness.slack)])
    return EXIT_REFUTED


def cmd_regularity(args, parser, out):
    bundle, space, x0 = _load(args, parser)
    f = bundle.target_map()
    surjectivity = surjectivity_check(f, x0)
    _section(out, "surjectivity", [("onto", surjectivity.passed), ("rank", surjectivity.rank),
                                   ("n_out", surjectivity.n_out), ("singular values", surjectivity.singular_values)])
    if not surjectivity:
        return EXIT_REFUTED

    cert = metric_reg_constant(f, x0, space_in=space)
    try:
        cert = validate_metric_regularity(f, x0, cert, space_in=space, r=args.radius, samples=args.samples,
                                          seed=args.seed, single_threaded=not args.parallel,
                                          show_progress=args.progress)
    except ValidationFailed as e:
        _section(out, "metric regularity", [("validated", False), ("mu", e.mu), ("worst ratio", e.worst_ratio),
                                            ("worst x", e.x), ("worst y", e.y)])
        return EXIT_REFUTED
    _section(out, "metric regularity", [("validated", True), ("mu", cert.mu), ("sigma_min", cert.sigma_min),
                                        ("delta_mu", cert.delta_mu), ("zeta", cert.zeta),
                                        ("worst ratio", cert.worst_ratio), ("samples", cert.samples_checked),
                                        ("halvings", cert.halvings)])
    openness = linear_openness_check(f, x0, cert, space_in=space, samples=min(args.samples, 200), seed=args.seed)
    _section(out, "linear openness", _check_rows("openness", openness) +
             [("sigma", openness.details["sigma"]), ("radius", openness.details["radius"])])
    return EXIT_OK if openness else EXIT_REFUTED


def _localize(args, parser, out):
    bundle, space, x0 = _load(args, parser)
    if not bundle.is_problem:
        parser.error(f"{args.command} needs a constrained problem, not a map")
    P = replace(bundle.problem, space=space)
    eps = _eps(args, bundle, parser)

    sol = solve_localization(P, x0, eps, seed=args.seed)
    sol = compute_multiplier(P, sol, samples=args.samples, seed=args.seed)
    diagnostics = sol.diagnostics
    _section(out, "localized solution", [("x_eps", sol.x_eps), ("value", sol.value), ("lambda_eps", sol.lambda_eps),
                                         ("nu_eps", sol.nu_eps), ("boundary gap", sol.boundary_gap),
                                         ("multiplier method", diagnostics["multiplier_method"]),
                                         ("stationarity residual", diagnostics["stationarity_residual"]),
                                         ("separation residual", diagnostics["separation_residual"]),
                                         ("complementarity", diagnostics["complementarity"]),
                                         ("methods disagree", diagnostics["multiplier_discrepancy"])])
    return P, sol


def cmd_localize(args, parser, out):
    P, sol = _localize(args, parser, out)
    optimality = verify_localized_optimality(P, sol, samples=args.samples, seed=args.seed)
    normal = check_normal_cone(sol.lambda_eps, P.cone.project(P.g(sol.x_eps)), P.cone)
    lagrangian = check_lagrangian_min(P, sol, samples=args.samples, seed=args.seed)
    _section(out, "checks", _check_rows("localized optimality", optimality) + _check_rows("normal cone", normal) +
             _check_rows("lagrangian minimality", lagrangian))
    return EXIT_OK if optimality and normal and lagrangian else EXIT_REFUTED


def cmd_duality(args, parser, out):
    P, sol = _localize(args, parser, out)
    saddle = saddle_point_check(P, sol, samples=args.samples, seed=args.seed)
    gap = duality_gap_estimate(P, sol, seed=args.seed)
    weak = gap >= -WEAK_DUALITY_TOLERANCE
    closed = gap <= GAP_TOLERANCE
    _section(out, "duality", _check_rows("saddle point", saddle) +
             [("primal", sol.value), ("dual", sol.value - gap), ("gap", gap), ("weak duality", weak),
              ("gap closed", closed)])
    return EXIT_OK if saddle and weak and closed else EXIT_REFUTED


def cmd_calm(args, parser, out):
    P, sol = _localize(args, parser, out)
    values = sample_value_function(P, sol, radius_y=args.radius, samples=args.perturbations, seed=args.seed)
    subgradient = subgradient_check(P, sol, values=values)
    calmness = calmness_check(P, sol, r=args.radius, samples=args.perturbations, seed=args.seed)
    _section(out, "value function", _check_rows("subgradient", subgradient) +
             [("perturbations", subgradient.details["checked"]), ("infeasible", subgradient.details["skipped"]),
              ("min slack", subgradient.details["min_slack"])])
    _section(out, "calmness", [("quotient lower bound", calmness.quotient_lower_bound), ("bound", calmness.bound),
                               ("calm", calmness.passed), ("worst y", calmness.worst_y),
                               ("perturbations", calmness.checked), ("infeasible", calmness.skipped)])
    if args.emit_samples:
        write_value_function_csv(values, args.emit_samples)
    return EXIT_OK if subgradient and calmness else EXIT_REFUTED


COMMANDS = {"modulus": cmd_modulus, "certify": cmd_certify, "witness": cmd_witness, "regularity": cmd_regularity,
            "localize": cmd_localize, "duality": cmd_duality, "calm": cmd_calm}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO if args.verbose == 1 else logging.DEBUG, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")

    config = RunConfig.from_args(args)
    _section(out, "config", [(f.name, getattr(config, f.name)) for f in fields(config)])
    try:
        return COMMANDS[args.command](args, parser, out)
    except PolyakConvexityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
