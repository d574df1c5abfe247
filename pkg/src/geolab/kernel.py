"""Geometry construction kernel.

A construction is an ordered list of steps forming a dependency DAG:
free points carry literal coordinates, every other step is computed from
earlier steps.  Evaluation is a single pass in list order, so list order
doubles as a topological order.  Degenerate configurations (coincident
defining points, parallel lines, missed intersections) evaluate to
``UNDEFINED`` rather than raising: dragging a free point must never be
able to crash a live session.

All mutating operations return a new ``Construction`` and leave the
argument untouched.  That keeps snapshotting for synchronization and
replay a matter of keeping a reference.

Numeric policy: lines are unit-normalized (``a**2 + b**2 == 1``) with the
sign fixed so the first nonzero of ``(a, b)`` is positive; two lines are
parallel when the cross product of their normals is below 1e-12; the two
intersection points of branched kinds are ordered lexicographically by
``(x, y)`` and selected by the step's ``branch`` so re-evaluation is
reproducible everywhere (live, snapshots, replay).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union


PARALLEL_EPS = 1e-12
COINCIDENT_EPS = 1e-12

FORMAT_NAME = "geolab-construction"
FORMAT_VERSION = 1


class KernelError(Exception):
    """Base for all construction-kernel errors."""


class UnknownInput(KernelError):
    pass


class UnknownStep(KernelError):
    pass


class ArityMismatch(KernelError):
    pass


class KindMismatch(KernelError):
    pass


class NonFiniteParam(KernelError):
    pass


class NotFreePoint(KernelError):
    pass


class ParseError(KernelError):
    """Base for construction-format parse failures."""


class MalformedConstruction(ParseError):
    pass


class InvariantViolation(ParseError):
    pass


class VersionUnsupported(ParseError):
    pass


class ValueKind(Enum):
    POINT = "point"
    LINE = "line"
    SEGMENT = "segment"
    CIRCLE = "circle"


class StepKind(Enum):
    FREE_POINT = "FreePoint"
    LINE_THROUGH_POINTS = "LineThroughPoints"
    SEGMENT_THROUGH_POINTS = "SegmentThroughPoints"
    CIRCLE_CENTER_THROUGH_POINT = "CircleCenterThroughPoint"
    MIDPOINT = "Midpoint"
    INTERSECT_LINE_LINE = "IntersectLineLine"
    INTERSECT_LINE_CIRCLE = "IntersectLineCircle"
    INTERSECT_CIRCLE_CIRCLE = "IntersectCircleCircle"
    PERPENDICULAR_THROUGH_POINT = "PerpendicularThroughPoint"
    PARALLEL_THROUGH_POINT = "ParallelThroughPoint"


# kind -> (input value-kinds, output value-kind, takes a branch selector)
_SIGNATURES: Dict[StepKind, Tuple[Tuple[ValueKind, ...], ValueKind, bool]] = {
    StepKind.FREE_POINT: ((), ValueKind.POINT, False),
    StepKind.LINE_THROUGH_POINTS: ((ValueKind.POINT, ValueKind.POINT), ValueKind.LINE, False),
    StepKind.SEGMENT_THROUGH_POINTS: ((ValueKind.POINT, ValueKind.POINT), ValueKind.SEGMENT, False),
    StepKind.CIRCLE_CENTER_THROUGH_POINT: ((ValueKind.POINT, ValueKind.POINT), ValueKind.CIRCLE, False),
    StepKind.MIDPOINT: ((ValueKind.POINT, ValueKind.POINT), ValueKind.POINT, False),
    StepKind.INTERSECT_LINE_LINE: ((ValueKind.LINE, ValueKind.LINE), ValueKind.POINT, False),
    StepKind.INTERSECT_LINE_CIRCLE: ((ValueKind.LINE, ValueKind.CIRCLE), ValueKind.POINT, True),
    StepKind.INTERSECT_CIRCLE_CIRCLE: ((ValueKind.CIRCLE, ValueKind.CIRCLE), ValueKind.POINT, True),
    StepKind.PERPENDICULAR_THROUGH_POINT: ((ValueKind.LINE, ValueKind.POINT), ValueKind.LINE, False),
    StepKind.PARALLEL_THROUGH_POINT: ((ValueKind.LINE, ValueKind.POINT), ValueKind.LINE, False),
}

_KIND_BY_NAME = {kind.value: kind for kind in StepKind}


def output_kind(kind: StepKind) -> ValueKind:
    return _SIGNATURES[kind][1]


def is_branched(kind: StepKind) -> bool:
    return _SIGNATURES[kind][2]


# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class Line:
    """ax + by + c = 0 with a**2 + b**2 = 1, sign-canonicalized."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class Segment:
    x1: float
    y1: float
    x2: float
    y2: float


class _Undefined:
    _instance: Optional["_Undefined"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"


UNDEFINED = _Undefined()

GeometryValue = Union[Point, Line, Circle, Segment, _Undefined]

Evaluation = Dict[int, GeometryValue]


# ---------------------------------------------------------------------------
# construction


@dataclass(frozen=True)
class ConstructionStep:
    id: int
    kind: StepKind
    inputs: Tuple[int, ...]
    params: Tuple[float, ...]
    branch: Optional[int] = None


@dataclass(frozen=True)
class Construction:
    steps: Tuple[ConstructionStep, ...] = ()

    @property
    def next_id(self) -> int:
        return self.steps[-1].id + 1 if self.steps else 1

    def step(self, step_id: int) -> ConstructionStep:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise UnknownStep(f"no step with id {step_id}")

    def has_step(self, step_id: int) -> bool:
        return any(s.id == step_id for s in self.steps)


EMPTY = Construction()


def _validate_step_shape(
    kind: StepKind,
    inputs: Sequence[int],
    params: Sequence[float],
    branch: Optional[int],
    kinds_by_id: Dict[int, StepKind],
) -> None:
    """Signature checks shared by add_step and the parser."""
    input_kinds, _, branched = _SIGNATURES[kind]
    if len(inputs) != len(input_kinds):
        raise ArityMismatch(
            f"{kind.value} takes {len(input_kinds)} inputs, got {len(inputs)}"
        )
    for ref, want in zip(inputs, input_kinds):
        if ref not in kinds_by_id:
            raise UnknownInput(f"input {ref} does not exist")
        got = output_kind(kinds_by_id[ref])
        if got is not want:
            raise KindMismatch(
                f"{kind.value} needs a {want.value} input, step {ref} is a {got.value}"
            )
    if kind is StepKind.FREE_POINT:
        if len(params) != 2:
            raise ArityMismatch("FreePoint takes exactly two params")
        if not all(math.isfinite(p) for p in params):
            raise NonFiniteParam(f"non-finite FreePoint params {params!r}")
    elif params:
        raise ArityMismatch(f"{kind.value} takes no params")
    if branched:
        if branch not in (0, 1):
            raise KindMismatch(f"{kind.value} needs branch 0 or 1, got {branch!r}")
    elif branch is not None:
        raise KindMismatch(f"{kind.value} takes no branch selector")


def add_step(
    c: Construction,
    kind: StepKind,
    inputs: Sequence[int] = (),
    params: Sequence[float] = (),
    branch: Optional[int] = None,
) -> Tuple[Construction, int]:
    """Append a step, returning the new construction and the new step's id."""
    kinds_by_id = {s.id: s.kind for s in c.steps}
    _validate_step_shape(kind, inputs, params, branch, kinds_by_id)
    step = ConstructionStep(
        id=c.next_id,
        kind=kind,
        inputs=tuple(int(i) for i in inputs),
        params=tuple(float(p) for p in params),
        branch=branch,
    )
    return Construction(steps=c.steps + (step,)), step.id


def remove_step_cascade(c: Construction, step_id: int) -> Tuple[Construction, List[int]]:
    """Remove a step and, transitively, everything depending on it."""
    if not c.has_step(step_id):
        raise UnknownStep(f"no step with id {step_id}")
    removed = {step_id}
    for s in c.steps:  # list order is topological, one pass suffices
        if s.id not in removed and any(ref in removed for ref in s.inputs):
            removed.add(s.id)
    remaining = tuple(s for s in c.steps if s.id not in removed)
    return Construction(steps=remaining), sorted(removed)


def move_free_point(c: Construction, step_id: int, x: float, y: float) -> Construction:
    target = c.step(step_id)
    if target.kind is not StepKind.FREE_POINT:
        raise NotFreePoint(f"step {step_id} is a {target.kind.value}")
    if not (math.isfinite(x) and math.isfinite(y)):
        raise NonFiniteParam(f"non-finite coordinates ({x!r}, {y!r})")
    moved = ConstructionStep(
        id=target.id, kind=target.kind, inputs=target.inputs,
        params=(float(x), float(y)),
    )
    return Construction(steps=tuple(moved if s.id == step_id else s for s in c.steps))


# ---------------------------------------------------------------------------
# evaluation


def _normalize_line(a: float, b: float, c: float) -> Union[Line, _Undefined]:
    norm = math.hypot(a, b)
    if norm < COINCIDENT_EPS:
        return UNDEFINED
    a, b, c = a / norm, b / norm, c / norm
    # first nonzero of (a, b) positive
    if a < 0.0 or (a == 0.0 and b < 0.0):
        a, b, c = -a, -b, -c
    return Line(a, b, c)


def _line_through(p: Point, q: Point) -> Union[Line, _Undefined]:
    dx, dy = q.x - p.x, q.y - p.y
    if math.hypot(dx, dy) < COINCIDENT_EPS:
        return UNDEFINED
    a, b = -dy, dx
    return _normalize_line(a, b, -(a * p.x + b * p.y))


def _intersect_lines(l1: Line, l2: Line) -> Union[Point, _Undefined]:
    det = l1.a * l2.b - l2.a * l1.b
    if abs(det) < PARALLEL_EPS:
        return UNDEFINED
    x = (l1.b * l2.c - l2.b * l1.c) / det
    y = (l2.a * l1.c - l1.a * l2.c) / det
    return Point(x, y)


def _pick_branch(p0: Point, p1: Point, branch: int) -> Point:
    ordered = sorted((p0, p1), key=lambda p: (p.x, p.y))
    return ordered[branch]


def _intersect_line_circle(l: Line, circ: Circle, branch: int) -> Union[Point, _Undefined]:
    # signed distance from center to the (unit-normal) line
    s = l.a * circ.cx + l.b * circ.cy + l.c
    h2 = circ.r * circ.r - s * s
    if h2 < 0.0:
        return UNDEFINED
    h = math.sqrt(h2)
    fx, fy = circ.cx - l.a * s, circ.cy - l.b * s  # foot of perpendicular
    dx, dy = -l.b, l.a  # direction along the line
    return _pick_branch(Point(fx + h * dx, fy + h * dy),
                        Point(fx - h * dx, fy - h * dy), branch)


def _intersect_circles(c1: Circle, c2: Circle, branch: int) -> Union[Point, _Undefined]:
    dx, dy = c2.cx - c1.cx, c2.cy - c1.cy
    d = math.hypot(dx, dy)
    if d < COINCIDENT_EPS:
        return UNDEFINED  # concentric (or coincident) circles
    a = (d * d + c1.r * c1.r - c2.r * c2.r) / (2.0 * d)
    h2 = c1.r * c1.r - a * a
    if h2 < 0.0:
        return UNDEFINED
    h = math.sqrt(h2)
    ux, uy = dx / d, dy / d
    mx, my = c1.cx + a * ux, c1.cy + a * uy
    return _pick_branch(Point(mx + h * -uy, my + h * ux),
                        Point(mx - h * -uy, my - h * ux), branch)


def _eval_step(step: ConstructionStep, args: List[GeometryValue]) -> GeometryValue:
    if any(v is UNDEFINED for v in args):
        return UNDEFINED
    kind = step.kind
    if kind is StepKind.FREE_POINT:
        return Point(step.params[0], step.params[1])
    if kind is StepKind.LINE_THROUGH_POINTS:
        return _line_through(args[0], args[1])
    if kind is StepKind.SEGMENT_THROUGH_POINTS:
        p, q = args
        if math.hypot(q.x - p.x, q.y - p.y) < COINCIDENT_EPS:
            return UNDEFINED
        return Segment(p.x, p.y, q.x, q.y)
    if kind is StepKind.CIRCLE_CENTER_THROUGH_POINT:
        center, through = args
        return Circle(center.x, center.y, math.hypot(through.x - center.x, through.y - center.y))
    if kind is StepKind.MIDPOINT:
        p, q = args
        return Point((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)
    if kind is StepKind.INTERSECT_LINE_LINE:
        return _intersect_lines(args[0], args[1])
    if kind is StepKind.INTERSECT_LINE_CIRCLE:
        return _intersect_line_circle(args[0], args[1], step.branch)
    if kind is StepKind.INTERSECT_CIRCLE_CIRCLE:
        return _intersect_circles(args[0], args[1], step.branch)
    if kind is StepKind.PERPENDICULAR_THROUGH_POINT:
        l, p = args
        return _normalize_line(l.b, -l.a, -(l.b * p.x - l.a * p.y))
    if kind is StepKind.PARALLEL_THROUGH_POINT:
        l, p = args
        return _normalize_line(l.a, l.b, -(l.a * p.x + l.b * p.y))
    raise AssertionError(f"unhandled kind {kind}")


def evaluate(c: Construction) -> Evaluation:
    """Evaluate every step; total on valid constructions, never raises."""
    values: Evaluation = {}
    for step in c.steps:
        values[step.id] = _eval_step(step, [values[i] for i in step.inputs])
    return values


# ---------------------------------------------------------------------------
# canonical serialization


def serialize_construction(c: Construction) -> bytes:
    steps = []
    for s in c.steps:
        obj: Dict[str, object] = {"id": s.id, "kind": s.kind.value}
        if s.branch is not None:
            obj["branch"] = s.branch
        obj["inputs"] = list(s.inputs)
        obj["params"] = [float(p) for p in s.params]
        steps.append(obj)
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "steps": steps}
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def parse_construction(data: Union[bytes, str]) -> Construction:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedConstruction("not UTF-8") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedConstruction(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise MalformedConstruction("missing or wrong format marker")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionUnsupported(f"unsupported version {doc.get('version')!r}")
    raw_steps = doc.get("steps")
    if not isinstance(raw_steps, list):
        raise MalformedConstruction("steps must be a list")

    steps: List[ConstructionStep] = []
    kinds_by_id: Dict[int, StepKind] = {}
    last_id = 0
    for raw in raw_steps:
        if not isinstance(raw, dict):
            raise MalformedConstruction("step must be an object")
        step_id = raw.get("id")
        if not isinstance(step_id, int) or isinstance(step_id, bool) or step_id < 1:
            raise MalformedConstruction(f"bad step id {step_id!r}")
        kind_name = raw.get("kind")
        if kind_name not in _KIND_BY_NAME:
            raise MalformedConstruction(f"unknown kind {kind_name!r}")
        kind = _KIND_BY_NAME[kind_name]
        inputs = raw.get("inputs")
        params = raw.get("params")
        branch = raw.get("branch")
        if not isinstance(inputs, list) or not all(
            isinstance(i, int) and not isinstance(i, bool) for i in inputs
        ):
            raise MalformedConstruction("inputs must be a list of integers")
        if not isinstance(params, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in params
        ):
            raise MalformedConstruction("params must be a list of numbers")
        if branch is not None and (not isinstance(branch, int) or isinstance(branch, bool)):
            raise MalformedConstruction("branch must be an integer")

        if step_id in kinds_by_id:
            raise InvariantViolation(f"duplicate id {step_id}")
        if step_id <= last_id:
            raise InvariantViolation("step ids must be strictly ascending")
        try:
            _validate_step_shape(kind, inputs, params, branch, kinds_by_id)
        except (UnknownInput,) as exc:
            raise InvariantViolation(f"forward or dangling reference: {exc}") from exc
        except (ArityMismatch, KindMismatch, NonFiniteParam) as exc:
            raise InvariantViolation(str(exc)) from exc
        steps.append(ConstructionStep(
            id=step_id, kind=kind, inputs=tuple(inputs),
            params=tuple(float(p) for p in params), branch=branch,
        ))
        kinds_by_id[step_id] = kind
        last_id = step_id
    return Construction(steps=tuple(steps))
