"""Shared test helpers: random construction generation and an independent
numeric oracle for point coordinates.

The oracle deliberately avoids the kernel's representations: lines are kept
as point pairs, intersections are solved by polynomial root finding
(numpy.roots) on the raw defining equations, never via normalized line
coefficients.  Only the branch *ordering* rule (lexicographic by (x, y)) is
shared, since it is part of the contract under test.
"""

from __future__ import annotations

import math
import random
from typing import Dict, List, Optional, Tuple

import numpy as np

from geolab import kernel
from geolab.kernel import Construction, StepKind

# oracle value encodings
OPoint = Tuple[float, float]
OLine = Tuple[OPoint, OPoint]          # two distinct points on the line
OCircle = Tuple[OPoint, float]         # center, radius


def _roots_real(coeffs) -> Optional[List[float]]:
    """Real roots of a polynomial; near-real roots (tangency noise) accepted."""
    if abs(coeffs[0]) < 1e-300:
        return None
    out = []
    for r in np.roots(coeffs):
        if abs(r.imag) <= 1e-6:
            out.append(float(r.real))
    return out or None


def _line_circle_points(line: OLine, circ: OCircle) -> Optional[List[OPoint]]:
    (px, py), (qx, qy) = line
    (cx, cy), r = circ
    dx, dy = qx - px, qy - py
    # |p + t d - c|^2 = r^2
    a = dx * dx + dy * dy
    b = 2.0 * (dx * (px - cx) + dy * (py - cy))
    c = (px - cx) ** 2 + (py - cy) ** 2 - r * r
    ts = _roots_real([a, b, c])
    if ts is None:
        return None
    return [(px + t * dx, py + t * dy) for t in ts]


def _branch_pick(points: List[OPoint], branch: int) -> OPoint:
    pts = sorted(points)
    if len(pts) == 1:
        return pts[0]
    return pts[branch]


def oracle_evaluate(c: Construction) -> Dict[int, Optional[tuple]]:
    """Independent evaluation; values tagged ('point'|'line'|'circle'|'segment', data),
    None for undefined."""
    vals: Dict[int, Optional[tuple]] = {}
    for step in c.steps:
        args = [vals[i] for i in step.inputs]
        if any(a is None for a in args):
            vals[step.id] = None
            continue
        k = step.kind
        if k is StepKind.FREE_POINT:
            vals[step.id] = ("point", (step.params[0], step.params[1]))
        elif k is StepKind.LINE_THROUGH_POINTS:
            p, q = args[0][1], args[1][1]
            vals[step.id] = None if math.dist(p, q) < 1e-12 else ("line", (p, q))
        elif k is StepKind.SEGMENT_THROUGH_POINTS:
            p, q = args[0][1], args[1][1]
            vals[step.id] = None if math.dist(p, q) < 1e-12 else ("segment", (p, q))
        elif k is StepKind.CIRCLE_CENTER_THROUGH_POINT:
            ctr, thr = args[0][1], args[1][1]
            vals[step.id] = ("circle", (ctr, math.dist(ctr, thr)))
        elif k is StepKind.MIDPOINT:
            p, q = args[0][1], args[1][1]
            vals[step.id] = ("point", ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0))
        elif k is StepKind.INTERSECT_LINE_LINE:
            (p1, q1), (p2, q2) = args[0][1], args[1][1]
            d1 = (q1[0] - p1[0], q1[1] - p1[1])
            d2 = (q2[0] - p2[0], q2[1] - p2[1])
            n1, n2 = math.hypot(*d1), math.hypot(*d2)
            cross = (d1[0] * d2[1] - d1[1] * d2[0]) / (n1 * n2)
            if abs(cross) < 1e-12:
                vals[step.id] = None
            else:
                A = np.array([[d1[1], -d1[0]], [d2[1], -d2[0]]], dtype=float)
                b = np.array([d1[1] * p1[0] - d1[0] * p1[1],
                              d2[1] * p2[0] - d2[0] * p2[1]], dtype=float)
                x, y = np.linalg.solve(A, b)
                vals[step.id] = ("point", (float(x), float(y)))
        elif k is StepKind.INTERSECT_LINE_CIRCLE:
            pts = _line_circle_points(args[0][1], args[1][1])
            vals[step.id] = None if pts is None else ("point", _branch_pick(pts, step.branch))
        elif k is StepKind.INTERSECT_CIRCLE_CIRCLE:
            (c1, r1), (c2, r2) = args[0][1], args[1][1]
            d = math.dist(c1, c2)
            if d < 1e-12:
                vals[step.id] = None
                continue
            # radical line: subtract the two circle equations
            lx = 2.0 * (c2[0] - c1[0])
            ly = 2.0 * (c2[1] - c1[1])
            rhs = (r1 * r1 - r2 * r2) - (c1[0] ** 2 - c2[0] ** 2) - (c1[1] ** 2 - c2[1] ** 2)
            # two points on the radical line
            if abs(lx) >= abs(ly):
                pa = (rhs / lx, 0.0)
                pb = ((rhs - ly) / lx, 1.0)
            else:
                pa = (0.0, rhs / ly)
                pb = (1.0, (rhs - lx) / ly)
            pts = _line_circle_points((pa, pb), (c1, r1))
            vals[step.id] = None if pts is None else ("point", _branch_pick(pts, step.branch))
        elif k is StepKind.PERPENDICULAR_THROUGH_POINT:
            (p, q), t = args[0][1], args[1][1]
            d = (q[0] - p[0], q[1] - p[1])
            vals[step.id] = ("line", (t, (t[0] - d[1], t[1] + d[0])))
        elif k is StepKind.PARALLEL_THROUGH_POINT:
            (p, q), t = args[0][1], args[1][1]
            d = (q[0] - p[0], q[1] - p[1])
            vals[step.id] = ("line", (t, (t[0] + d[0], t[1] + d[1])))
        else:
            raise AssertionError(k)
    return vals


# ---------------------------------------------------------------------------
# random construction generation

_POINT2 = [
    StepKind.LINE_THROUGH_POINTS, StepKind.SEGMENT_THROUGH_POINTS,
    StepKind.CIRCLE_CENTER_THROUGH_POINT, StepKind.MIDPOINT,
]


def _well_conditioned(c: Construction, new_id: int) -> bool:
    """Reject steps whose value sits near a degeneracy boundary, where the
    kernel and the oracle could legitimately disagree about definedness."""
    values = kernel.evaluate(c)
    step = c.step(new_id)
    v = values[new_id]
    if v is kernel.UNDEFINED:
        # clearly undefined is fine; near-boundary cases are filtered below
        return _margin(step, values) is None or _margin(step, values) < -1e-6
    if isinstance(v, kernel.Point) and (abs(v.x) > 1e5 or abs(v.y) > 1e5):
        return False
    m = _margin(step, values)
    return m is None or m > 1e-6


def _margin(step, values) -> Optional[float]:
    """Signed distance to the defined/undefined boundary, or None when the
    step kind has no such boundary."""
    args = [values[i] for i in step.inputs]
    if any(a is kernel.UNDEFINED for a in args):
        return None
    if step.kind is StepKind.INTERSECT_LINE_LINE:
        l1, l2 = args
        return abs(l1.a * l2.b - l2.a * l1.b)
    if step.kind is StepKind.INTERSECT_LINE_CIRCLE:
        l, circ = args
        s = l.a * circ.cx + l.b * circ.cy + l.c
        return circ.r * circ.r - s * s
    if step.kind is StepKind.INTERSECT_CIRCLE_CIRCLE:
        c1, c2 = args
        d = math.hypot(c2.cx - c1.cx, c2.cy - c1.cy)
        if d < 1e-9:
            return -1.0
        a = (d * d + c1.r * c1.r - c2.r * c2.r) / (2.0 * d)
        return c1.r * c1.r - a * a
    return None


def rand_construction(rng: random.Random, max_steps: int = 12) -> Construction:
    c = kernel.EMPTY
    by_kind: Dict[kernel.ValueKind, List[int]] = {
        kernel.ValueKind.POINT: [], kernel.ValueKind.LINE: [],
        kernel.ValueKind.CIRCLE: [], kernel.ValueKind.SEGMENT: [],
    }
    n = rng.randint(1, max_steps)
    for _ in range(n):
        placed = False
        for _attempt in range(6):
            kind, inputs, params, branch = _propose(rng, by_kind)
            cand, new_id = kernel.add_step(c, kind, inputs, params, branch=branch)
            if _well_conditioned(cand, new_id):
                c = cand
                by_kind[kernel.output_kind(kind)].append(new_id)
                placed = True
                break
        if not placed:
            x = round(rng.uniform(-10, 10), 3)
            y = round(rng.uniform(-10, 10), 3)
            c, new_id = kernel.add_step(c, StepKind.FREE_POINT, (), (x, y))
            by_kind[kernel.ValueKind.POINT].append(new_id)
    return c


def _propose(rng, by_kind):
    points = by_kind[kernel.ValueKind.POINT]
    lines = by_kind[kernel.ValueKind.LINE]
    circles = by_kind[kernel.ValueKind.CIRCLE]
    choices: List[tuple] = [(StepKind.FREE_POINT, (), None)]
    if len(points) >= 2:
        for k in _POINT2:
            choices.append((k, "pp", None))
    if len(lines) >= 2:
        choices.append((StepKind.INTERSECT_LINE_LINE, "ll", None))
    if lines and circles:
        choices.append((StepKind.INTERSECT_LINE_CIRCLE, "lc", rng.randint(0, 1)))
    if len(circles) >= 2:
        choices.append((StepKind.INTERSECT_CIRCLE_CIRCLE, "cc", rng.randint(0, 1)))
    if lines and points:
        choices.append((StepKind.PERPENDICULAR_THROUGH_POINT, "lp", None))
        choices.append((StepKind.PARALLEL_THROUGH_POINT, "lp", None))
    kind, shape, branch = rng.choice(choices)
    if shape == ():
        x = round(rng.uniform(-10, 10), 3)
        y = round(rng.uniform(-10, 10), 3)
        return kind, (), (x, y), None
    if shape == "pp":
        return kind, tuple(rng.sample(points, 2)), (), None
    if shape == "ll":
        return kind, tuple(rng.sample(lines, 2)), (), None
    if shape == "lc":
        return kind, (rng.choice(lines), rng.choice(circles)), (), branch
    if shape == "cc":
        return kind, tuple(rng.sample(circles, 2)), (), branch
    if shape == "lp":
        return kind, (rng.choice(lines), rng.choice(points)), (), None
    raise AssertionError(shape)


# ---------------------------------------------------------------------------
# random recorded sessions

def rand_event_sequence(rng: random.Random, max_events: int = 200):
    """Random stand-alone session: interleaved navigation and geometry
    events with non-decreasing timestamps.  Returns (events, final
    construction built through the live kernel path)."""
    from geolab import recording

    c = kernel.EMPTY
    by_kind = {
        kernel.ValueKind.POINT: [], kernel.ValueKind.LINE: [],
        kernel.ValueKind.CIRCLE: [], kernel.ValueKind.SEGMENT: [],
    }
    events = []
    ts = rng.randint(0, 1000)
    n = rng.randint(1, max_events)
    for _ in range(n):
        ts += rng.randint(0, 800)
        roll = rng.random()
        if roll < 0.15:
            events.append(recording.NavigationEvent(
                page_id=rng.choice(["home", "tasks", "workspace", "help"]),
                enter_ts=ts, exit_ts=ts + rng.randint(0, 500) if rng.random() < 0.8 else None,
            ))
            continue
        free = [s.id for s in c.steps if s.kind is StepKind.FREE_POINT]
        if roll < 0.30 and free:
            sid = rng.choice(free)
            x = round(rng.uniform(-10, 10), 3)
            y = round(rng.uniform(-10, 10), 3)
            action = recording.MoveFreePointAction(sid, x, y)
            c = recording.apply_geometry_event(c, action)
            events.append(recording.GeometryEvent(ts, action))
            continue
        if roll < 0.38 and c.steps:
            sid = rng.choice(c.steps).id
            action = recording.RemoveStepAction(sid)
            c = recording.apply_geometry_event(c, action)
            present = {s.id for s in c.steps}
            for k in by_kind:
                by_kind[k] = [i for i in by_kind[k] if i in present]
            events.append(recording.GeometryEvent(ts, action))
            continue
        kind, inputs, params, branch = _propose(rng, by_kind)
        action = recording.AddStepAction(kind, tuple(inputs), tuple(params), branch)
        c = recording.apply_geometry_event(c, action)
        by_kind[kernel.output_kind(kind)].append(c.steps[-1].id)
        events.append(recording.GeometryEvent(ts, action))
    return events, c
