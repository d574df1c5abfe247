/**
 * Client-side mirror of the server's construction format and evaluation
 * rules, used to draw snapshots and to echo local edits before the server
 * acknowledges them.  The math matches the server bit-for-bit: unit-normal
 * lines with the first nonzero of (a, b) positive, 1e-12 degeneracy
 * thresholds, branch 0 = lexicographically smaller intersection point.
 */

export const FORMAT_NAME = "geolab-construction";
export const FORMAT_VERSION = 1;

const PARALLEL_EPS = 1e-12;
const COINCIDENT_EPS = 1e-12;

export type StepKind =
  | "FreePoint"
  | "LineThroughPoints"
  | "SegmentThroughPoints"
  | "CircleCenterThroughPoint"
  | "Midpoint"
  | "IntersectLineLine"
  | "IntersectLineCircle"
  | "IntersectCircleCircle"
  | "PerpendicularThroughPoint"
  | "ParallelThroughPoint";

export interface Step {
  id: number;
  kind: StepKind;
  inputs: number[];
  params: number[];
  branch?: 0 | 1;
}

export interface Construction {
  steps: Step[];
}

export type PointValue = { type: "point"; x: number; y: number };
export type LineValue = { type: "line"; a: number; b: number; c: number };
export type SegmentValue = {
  type: "segment"; x1: number; y1: number; x2: number; y2: number;
};
export type CircleValue = { type: "circle"; cx: number; cy: number; r: number };
export type Value =
  | PointValue
  | LineValue
  | SegmentValue
  | CircleValue
  | { type: "undefined" };

export type Evaluation = Map<number, Value>;

export class MalformedConstruction extends Error {}

const OUTPUT_KIND: Record<StepKind, Value["type"]> = {
  FreePoint: "point",
  LineThroughPoints: "line",
  SegmentThroughPoints: "segment",
  CircleCenterThroughPoint: "circle",
  Midpoint: "point",
  IntersectLineLine: "point",
  IntersectLineCircle: "point",
  IntersectCircleCircle: "point",
  PerpendicularThroughPoint: "line",
  ParallelThroughPoint: "line",
};

const BRANCHED: ReadonlySet<StepKind> = new Set([
  "IntersectLineCircle",
  "IntersectCircleCircle",
]);

export function parseConstruction(text: string): Construction {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new MalformedConstruction("not valid JSON");
  }
  const obj = doc as { format?: unknown; version?: unknown; steps?: unknown };
  if (obj.format !== FORMAT_NAME || obj.version !== FORMAT_VERSION) {
    throw new MalformedConstruction("unrecognized document header");
  }
  if (!Array.isArray(obj.steps)) {
    throw new MalformedConstruction("steps must be an array");
  }
  const steps: Step[] = [];
  const seen = new Set<number>();
  let lastId = 0;
  for (const raw of obj.steps) {
    const s = raw as Partial<Step>;
    if (
      typeof s.id !== "number" ||
      typeof s.kind !== "string" ||
      !(s.kind in OUTPUT_KIND) ||
      !Array.isArray(s.inputs) ||
      !Array.isArray(s.params)
    ) {
      throw new MalformedConstruction(`bad step ${JSON.stringify(raw)}`);
    }
    if (s.id <= lastId) {
      throw new MalformedConstruction("step ids must be increasing");
    }
    for (const ref of s.inputs) {
      if (!seen.has(ref)) {
        throw new MalformedConstruction(`step ${s.id} references missing ${ref}`);
      }
    }
    if (BRANCHED.has(s.kind as StepKind)) {
      if (s.branch !== 0 && s.branch !== 1) {
        throw new MalformedConstruction(`step ${s.id} needs branch 0 or 1`);
      }
    } else if (s.branch !== undefined) {
      throw new MalformedConstruction(`step ${s.id} takes no branch`);
    }
    steps.push({
      id: s.id,
      kind: s.kind as StepKind,
      inputs: s.inputs.map(Number),
      params: s.params.map(Number),
      branch: s.branch,
    });
    seen.add(s.id);
    lastId = s.id;
  }
  return { steps };
}

export function serializeConstruction(c: Construction): string {
  const steps = c.steps.map((s) => {
    const obj: Record<string, unknown> = { id: s.id, kind: s.kind };
    if (s.branch !== undefined) obj.branch = s.branch;
    obj.inputs = s.inputs;
    obj.params = s.params;
    return obj;
  });
  return JSON.stringify({ format: FORMAT_NAME, version: FORMAT_VERSION, steps });
}

export function nextId(c: Construction): number {
  return c.steps.length ? c.steps[c.steps.length - 1].id + 1 : 1;
}

/** Ids removed if `id` is deleted: the step plus every transitive dependent. */
export function cascadeOf(c: Construction, id: number): number[] {
  const removed = new Set<number>([id]);
  for (const s of c.steps) {
    if (!removed.has(s.id) && s.inputs.some((r) => removed.has(r))) {
      removed.add(s.id);
    }
  }
  return [...removed].sort((a, b) => a - b);
}

export function removeCascade(c: Construction, id: number): Construction {
  const gone = new Set(cascadeOf(c, id));
  return { steps: c.steps.filter((s) => !gone.has(s.id)) };
}

export function addStep(
  c: Construction,
  kind: StepKind,
  inputs: number[],
  params: number[],
  branch?: 0 | 1,
): Construction {
  const step: Step = { id: nextId(c), kind, inputs, params };
  if (branch !== undefined) step.branch = branch;
  return { steps: [...c.steps, step] };
}

export function moveFreePoint(
  c: Construction,
  id: number,
  x: number,
  y: number,
): Construction {
  return {
    steps: c.steps.map((s) =>
      s.id === id && s.kind === "FreePoint" ? { ...s, params: [x, y] } : s,
    ),
  };
}

const UNDEF: Value = { type: "undefined" };

function normalizeLine(a: number, b: number, c: number): Value {
  const norm = Math.hypot(a, b);
  if (norm < COINCIDENT_EPS) return UNDEF;
  a /= norm; b /= norm; c /= norm;
  if (a < 0 || (a === 0 && b < 0)) { a = -a; b = -b; c = -c; }
  return { type: "line", a, b, c };
}

function lineThrough(p: PointValue, q: PointValue): Value {
  const dx = q.x - p.x, dy = q.y - p.y;
  if (Math.hypot(dx, dy) < COINCIDENT_EPS) return UNDEF;
  const a = -dy, b = dx;
  return normalizeLine(a, b, -(a * p.x + b * p.y));
}

function pickBranch(p0: PointValue, p1: PointValue, branch: 0 | 1): Value {
  const smallerFirst =
    p0.x < p1.x || (p0.x === p1.x && p0.y <= p1.y) ? [p0, p1] : [p1, p0];
  return smallerFirst[branch];
}

function intersectLines(l1: LineValue, l2: LineValue): Value {
  const det = l1.a * l2.b - l2.a * l1.b;
  if (Math.abs(det) < PARALLEL_EPS) return UNDEF;
  return {
    type: "point",
    x: (l1.b * l2.c - l2.b * l1.c) / det,
    y: (l2.a * l1.c - l1.a * l2.c) / det,
  };
}

function intersectLineCircle(l: LineValue, c: CircleValue, branch: 0 | 1): Value {
  const s = l.a * c.cx + l.b * c.cy + l.c;
  const h2 = c.r * c.r - s * s;
  if (h2 < 0) return UNDEF;
  const h = Math.sqrt(h2);
  const fx = c.cx - l.a * s, fy = c.cy - l.b * s;
  const dx = -l.b, dy = l.a;
  return pickBranch(
    { type: "point", x: fx + h * dx, y: fy + h * dy },
    { type: "point", x: fx - h * dx, y: fy - h * dy },
    branch,
  );
}

function intersectCircles(c1: CircleValue, c2: CircleValue, branch: 0 | 1): Value {
  const dx = c2.cx - c1.cx, dy = c2.cy - c1.cy;
  const d = Math.hypot(dx, dy);
  if (d < COINCIDENT_EPS) return UNDEF;
  const a = (d * d + c1.r * c1.r - c2.r * c2.r) / (2 * d);
  const h2 = c1.r * c1.r - a * a;
  if (h2 < 0) return UNDEF;
  const h = Math.sqrt(h2);
  const ux = dx / d, uy = dy / d;
  const mx = c1.cx + a * ux, my = c1.cy + a * uy;
  return pickBranch(
    { type: "point", x: mx + h * -uy, y: my + h * ux },
    { type: "point", x: mx - h * -uy, y: my - h * ux },
    branch,
  );
}

function evalStep(step: Step, args: Value[]): Value {
  if (args.some((v) => v.type === "undefined")) return UNDEF;
  switch (step.kind) {
    case "FreePoint":
      return { type: "point", x: step.params[0], y: step.params[1] };
    case "LineThroughPoints":
      return lineThrough(args[0] as PointValue, args[1] as PointValue);
    case "SegmentThroughPoints": {
      const p = args[0] as PointValue, q = args[1] as PointValue;
      if (Math.hypot(q.x - p.x, q.y - p.y) < COINCIDENT_EPS) return UNDEF;
      return { type: "segment", x1: p.x, y1: p.y, x2: q.x, y2: q.y };
    }
    case "CircleCenterThroughPoint": {
      const center = args[0] as PointValue, through = args[1] as PointValue;
      return {
        type: "circle", cx: center.x, cy: center.y,
        r: Math.hypot(through.x - center.x, through.y - center.y),
      };
    }
    case "Midpoint": {
      const p = args[0] as PointValue, q = args[1] as PointValue;
      return { type: "point", x: (p.x + q.x) / 2, y: (p.y + q.y) / 2 };
    }
    case "IntersectLineLine":
      return intersectLines(args[0] as LineValue, args[1] as LineValue);
    case "IntersectLineCircle":
      return intersectLineCircle(
        args[0] as LineValue, args[1] as CircleValue, step.branch!);
    case "IntersectCircleCircle":
      return intersectCircles(
        args[0] as CircleValue, args[1] as CircleValue, step.branch!);
    case "PerpendicularThroughPoint": {
      const l = args[0] as LineValue, p = args[1] as PointValue;
      return normalizeLine(l.b, -l.a, -(l.b * p.x - l.a * p.y));
    }
    case "ParallelThroughPoint": {
      const l = args[0] as LineValue, p = args[1] as PointValue;
      return normalizeLine(l.a, l.b, -(l.a * p.x + l.b * p.y));
    }
  }
}

/** Total evaluation; degeneracies yield undefined values, never throw. */
export function evaluate(c: Construction): Evaluation {
  const values: Evaluation = new Map();
  for (const step of c.steps) {
    values.set(step.id, evalStep(step, step.inputs.map((i) => values.get(i)!)));
  }
  return values;
}

export const EMPTY: Construction = { steps: [] };
