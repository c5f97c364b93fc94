"""Reading and writing ``.pkp`` problem files, the built-in problem registry, and CSV output.

A problem file is line oriented::

    # description
    [space]
    dim = 2
    p = 2.0

    [objective]
    1.0 : 1 0

    [constraint 1]
    1.0 : 2 0
    1.0 : 0 2
    -1.0 : 0 0

    [cone]
    nonpositive = 1

    [defaults]
    x0 = 0.5 0.5
    eps = 0.1

Each term line ``coeff : e1 ... en`` adds one monomial to the polynomial of its section; a section whose only line is
``0`` holds the zero polynomial. A file either describes a map through ``[map 1]``, ``[map 2]``, ... sections or a
constrained problem through ``[objective]``, ``[constraint i]`` and ``[cone]`` sections. Comment lines before the first
section form the description and are kept on serialization.
"""
from .cone_utilities import ConeSpec, NONPOSITIVE, ZERO
from .exceptions import DimensionMismatch, DomainError, NotFound, ParseError, SemanticError, UnsupportedExponent
from .geometry_utilities import NormSpace
from .localization_utilities import ConstrainedProblem
from .polymap_utilities import PolyMap
import csv
from dataclasses import dataclass
import math
import numpy as np
import re

NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
INTEGER = re.compile(r"[+-]?\d+$")
SECTION = re.compile(r"\[\s*([a-z]+)(?:\s+(\d+))?\s*\]$")
SECTION_KEYS = {"space": ("dim", "p"), "cone": (NONPOSITIVE, ZERO), "defaults": ("x0", "eps")}
TERM_SECTIONS = ("objective", "map", "constraint")


@dataclass(frozen=True, eq=False)
class ProblemFile:
    """Parsed contents of a ``.pkp`` file: a map (``map``) or a constrained problem (``problem``), plus defaults."""
    space: NormSpace
    map: PolyMap = None
    problem: ConstrainedProblem = None
    x0: np.ndarray = None
    eps: float = None
    description: tuple = ()

    @property
    def is_problem(self):
        return self.problem is not None

    def target_map(self):
        """The map to certify: the map itself, or ``(phi, g)`` for a constrained problem."""
        return self.problem.stacked_map() if self.is_problem else self.map


def _number(token, line, column):
    if not NUMBER.match(token):
        raise ParseError(f"expected a number, got {token!r}", line, column)
    return float(token)


def _tokens(text, start):
    """Whitespace-separated tokens of ``text`` with their 1-based columns, offset by ``start``."""
    return [(m.group(), start + m.start() + 1) for m in re.finditer(r"\S+", text)]


def _parse_term(raw, line):
    coefficient_text, _, exponent_text = raw.partition(":")
    coefficient_tokens = _tokens(coefficient_text, 0)
    if len(coefficient_tokens) != 1:
        raise ParseError("term lines read 'coeff : e1 ... en'", line, 1)
    token, column = coefficient_tokens[0]
    coefficient = _number(token, line, column)
    exponents = []
    for token, column in _tokens(exponent_text, len(coefficient_text) + 1):
        if not INTEGER.match(token):
            raise ParseError(f"expected an integer exponent, got {token!r}", line, column)
        exponents.append(int(token))
    if not exponents:
        raise ParseError("term without exponents", line, len(raw) + 1)
    return coefficient, tuple(exponents), line


def _parse_sections(text):
    """Splits the text into description lines and ordered ``(name, index, line, entries)`` sections."""
    description = []
    sections = []
    seen = set()
    for line_number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if not sections:
                description.append(stripped[1:].strip())
            continue

        if stripped.startswith("["):
            match = SECTION.match(stripped)
            if match is None:
                raise ParseError(f"malformed section header {stripped!r}", line_number, raw.index("[") + 1)
            name, index = match.group(1), match.group(2)
            if name not in TERM_SECTIONS + tuple(SECTION_KEYS):
                raise ParseError(f"unknown section {name!r}", line_number, raw.index("[") + 2)
            if (index is not None) != (name in ("map", "constraint")):
                raise ParseError(f"section {name!r} {'needs' if index is None else 'takes no'} index", line_number,
                                 raw.index("[") + 1)
            key = (name, None if index is None else int(index))
            if key in seen:
                raise ParseError(f"duplicate section {stripped}", line_number, raw.index("[") + 1)
            seen.add(key)
            sections.append((name, key[1], line_number, []))
            continue

        if not sections:
            raise ParseError("content before the first section", line_number, len(raw) - len(raw.lstrip()) + 1)
        name, _, _, entries = sections[-1]
        if name in TERM_SECTIONS and stripped == "0":
            entries.append((None, (), line_number))
            continue
        if name in TERM_SECTIONS:
            if ":" not in raw:
                raise ParseError("term lines read 'coeff : e1 ... en'", line_number, len(raw) - len(raw.lstrip()) + 1)
            entries.append(_parse_term(raw, line_number))
        else:
            if "=" not in raw:
                raise ParseError("expected 'key = value'", line_number, len(raw) - len(raw.lstrip()) + 1)
            key, _, value = raw.partition("=")
            if key.strip() not in SECTION_KEYS[name]:
                raise ParseError(f"unknown key {key.strip()!r} in section [{name}]", line_number,
                                 len(key) - len(key.lstrip()) + 1)
            entries.append((key.strip(), _tokens(value, len(key) + 1), line_number))

    return tuple(description), sections


def _polynomial(entries, n_in, label):
    for coefficient, exponents, line in entries:
        if coefficient is None:
            continue
        if len(exponents) != n_in:
            raise SemanticError(f"line {line}: {label} term has {len(exponents)} exponents but dim = {n_in}")
        if min(exponents) < 0:
            raise SemanticError(f"line {line}: {label} term has a negative exponent")
    return tuple((coefficient, exponents) for coefficient, exponents, _ in entries if coefficient is not None)


def _numbered(sections, name):
    numbered = sorted((index, line, entries) for section, index, line, entries in sections if section == name)
    for expected, (index, line, _) in enumerate(numbered, start=1):
        if index != expected:
            raise SemanticError(f"line {line}: [{name} {index}] found where [{name} {expected}] was expected")
    return numbered


def parse(text):
    """Parses the text of a ``.pkp`` file.

    :param text: file contents
    :type text: str
    :raises ParseError: on malformed lines, with their line and column
    :raises SemanticError: on inconsistent dimensions, negative exponents or missing sections
    :rtype: ProblemFile
    """
    description, sections = _parse_sections(text)
    by_name = {name: (line, entries) for name, index, line, entries in sections if index is None}

    for name, index, line, entries in sections:
        if name not in TERM_SECTIONS:
            continue
        if not entries:
            label = name if index is None else f"{name} {index}"
            raise ParseError(f"section [{label}] has no terms", line, 1)
        zero_lines = [term_line for coefficient, _, term_line in entries if coefficient is None]
        if zero_lines and len(entries) > 1:
            raise ParseError("the zero polynomial '0' must be the only line of its section", zero_lines[0], 1)

    if "space" not in by_name:
        raise SemanticError("missing [space] section")
    space_values = {}
    for key, tokens, line in by_name["space"][1]:
        if len(tokens) != 1:
            raise ParseError(f"{key} takes a single value", line, tokens[1][1] if tokens else 1)
        token, column = tokens[0]
        if key == "dim":
            if not INTEGER.match(token):
                raise ParseError(f"expected an integer dimension, got {token!r}", line, column)
            space_values[key] = int(token)
        else:
            space_values[key] = math.inf if token == "inf" else _number(token, line, column)
    if "dim" not in space_values:
        raise SemanticError("[space] needs a dim")
    try:
        space = NormSpace(space_values["dim"], space_values.get("p", 2.0))
    except (DimensionMismatch, DomainError, UnsupportedExponent) as e:
        raise SemanticError(str(e)) from e

    maps = _numbered(sections, "map")
    constraints = _numbered(sections, "constraint")
    has_problem = "objective" in by_name or constraints or "cone" in by_name
    if maps and has_problem:
        raise SemanticError("a file describes either a map or a constrained problem, not both")

    polymap = problem = None
    if maps:
        polymap = PolyMap(space.dim, tuple(_polynomial(entries, space.dim, f"map {index}")
                                           for index, _, entries in maps))
    elif has_problem:
        if "objective" not in by_name or not constraints or "cone" not in by_name:
            raise SemanticError("a constrained problem needs [objective], [constraint i] and [cone] sections")
        objective = PolyMap(space.dim, (_polynomial(by_name["objective"][1], space.dim, "objective"),))
        constraint = PolyMap(space.dim, tuple(_polynomial(entries, space.dim, f"constraint {index}")
                                              for index, _, entries in constraints))
        blocks = []
        for kind, tokens, line in by_name["cone"][1]:
            if len(tokens) != 1 or not INTEGER.match(tokens[0][0]):
                raise ParseError(f"{kind} takes a single integer", line, tokens[0][1] if tokens else 1)
            blocks.append((kind, int(tokens[0][0])))
        try:
            cone = ConeSpec(tuple(blocks))
            problem = ConstrainedProblem(objective, constraint, cone, space)
        except (DimensionMismatch, DomainError, UnsupportedExponent) as e:
            raise SemanticError(str(e)) from e
    else:
        raise SemanticError("no [map i] or [objective] sections")

    x0 = eps = None
    for key, tokens, line in by_name.get("defaults", (None, ()))[1]:
        values = [_number(token, line, column) for token, column in tokens]
        if key == "x0":
            if len(values) != space.dim:
                raise SemanticError(f"line {line}: x0 has {len(values)} coordinates but dim = {space.dim}")
            x0 = np.array(values)
        else:
            if len(values) != 1 or not values[0] > 0:
                raise SemanticError(f"line {line}: eps must be a single positive number")
            eps = values[0]

    return ProblemFile(space, map=polymap, problem=problem, x0=x0, eps=eps, description=description)


def _format_number(value):
    return "inf" if math.isinf(value) else repr(float(value))


def _term_lines(terms, n_in):
    if not terms:
        return ["0"]
    return [f"{_format_number(c)} : {' '.join(str(e) for e in exps)}" for c, exps in terms]


def serialize(bundle):
    """Canonical text of a :class:`ProblemFile`; ``parse(serialize(b))`` reproduces ``b``.

    :rtype: str
    """
    space = bundle.space
    header = [f"# {line}" if line else "#" for line in bundle.description]
    blocks = [header + ["[space]", f"dim = {space.dim}", f"p = {_format_number(space.p)}"]]

    if bundle.is_problem:
        P = bundle.problem
        blocks.append(["[objective]"] + _term_lines(P.objective.components[0], space.dim))
        for i, terms in enumerate(P.constraint.components, start=1):
            blocks.append([f"[constraint {i}]"] + _term_lines(terms, space.dim))
        blocks.append(["[cone]"] + [f"{kind} = {m}" for kind, m in P.cone.blocks])
    else:
        for i, terms in enumerate(bundle.map.components, start=1):
            blocks.append([f"[map {i}]"] + _term_lines(terms, space.dim))

    defaults = []
    if bundle.x0 is not None:
        defaults.append(f"x0 = {' '.join(_format_number(v) for v in bundle.x0)}")
    if bundle.eps is not None:
        defaults.append(f"eps = {_format_number(bundle.eps)}")
    if defaults:
        blocks.append(["[defaults]"] + defaults)
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"


def read_problem_file(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse(f.read())


def write_problem_file(bundle, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize(bundle))


REGISTRY = {
    "remark-rank-deficient": """\
# f(x1, x2) = (x1 + x2, (x1 + x2)^2): Df(0) has rank one and balls map onto parabola arcs
[space]
dim = 2
p = 2.0

[map 1]
1.0 : 1 0
1.0 : 0 1

[map 2]
1.0 : 2 0
2.0 : 1 1
1.0 : 0 2

[defaults]
x0 = 0.0 0.0
eps = 0.5
""",
    "remark-linf": """\
# f(x1, x2) = (x1, x1^2 + x2) under the max norm: a regular map whose small balls have nonconvex images
[space]
dim = 2
p = inf

[map 1]
1.0 : 1 0

[map 2]
1.0 : 2 0
1.0 : 0 1

[defaults]
x0 = 0.0 0.0
eps = 0.5
""",
    "positive-quadratic": """\
# f(x1, x2) = (x1 + 0.1 x2^2, x2 + 0.1 x1^2): a regular perturbation of the identity
[space]
dim = 2
p = 2.0

[map 1]
1.0 : 1 0
0.1 : 0 2

[map 2]
1.0 : 0 1
0.1 : 2 0

[defaults]
x0 = 0.0 0.0
""",
    "disk-inactive": """\
# minimize x1 subject to x1^2 + x2^2 <= 1; the disk constraint is inactive near x0
[space]
dim = 2
p = 2.0

[objective]
1.0 : 1 0

[constraint 1]
1.0 : 2 0
1.0 : 0 2
-1.0 : 0 0

[cone]
nonpositive = 1

[defaults]
x0 = 0.5 0.5
eps = 0.1
""",
    "disk-active": """\
# minimize x2 subject to x1^2 + x2^2 >= 1; the localized solution lies on the unit circle
[space]
dim = 2
p = 2.0

[objective]
1.0 : 0 1

[constraint 1]
-1.0 : 2 0
-1.0 : 0 2
1.0 : 0 0

[cone]
nonpositive = 1

[defaults]
x0 = 0.70711 0.70711
eps = 0.1
""",
}


def load_registry(name):
    """Parses a built-in instance by name.

    :raises NotFound: for unknown names
    :rtype: ProblemFile
    """
    if name not in REGISTRY:
        raise NotFound(f"no registry instance {name!r}; known instances: {', '.join(sorted(REGISTRY))}")
    return parse(REGISTRY[name])


def write_certificate_csv(certificate, path):
    """Writes the per-pair records of a convexity certificate (run with ``record_samples=True``)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["pair", "x1", "x2", "ybar", "residual", "norm_excess"])
        for i, record in enumerate(certificate.records):
            writer.writerow([i, _vector_field(record.x1), _vector_field(record.x2), _vector_field(record.ybar),
                             repr(float(record.residual)), repr(float(record.norm_excess))])


def write_value_function_csv(samples, path):
    """Writes ``(y, v(y), feasible)`` rows for a sequence of value function samples."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["y", "v_of_y", "feasible"])
        for sample in samples:
            writer.writerow([_vector_field(sample.y), _format_number(sample.v_of_y), int(sample.feasible)])


def _vector_field(v):
    return " ".join(repr(float(x)) for x in np.atleast_1d(v))
