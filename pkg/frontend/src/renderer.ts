/**
 * Canvas scene drawing.  Rendering is a pure function of
 * (evaluation, viewport): the same snapshot and viewport always produce the
 * same sequence of draw calls, which the tests exploit by recording them.
 */

import { Evaluation, Value } from "./geometry.js";

/** The subset of CanvasRenderingContext2D the renderer needs. */
export interface DrawContext {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
}

export interface Viewport {
  /** World coordinates of the viewport center. */
  centerX: number;
  centerY: number;
  /** Device pixels per world unit. */
  scale: number;
  width: number;
  height: number;
}

export function defaultViewport(width = 800, height = 600): Viewport {
  return { centerX: 0, centerY: 0, scale: 40, width, height };
}

export function worldToScreen(v: Viewport, x: number, y: number): [number, number] {
  // y grows upward in world space, downward on the canvas
  return [
    v.width / 2 + (x - v.centerX) * v.scale,
    v.height / 2 - (y - v.centerY) * v.scale,
  ];
}

export function screenToWorld(v: Viewport, px: number, py: number): [number, number] {
  return [
    v.centerX + (px - v.width / 2) / v.scale,
    v.centerY - (py - v.height / 2) / v.scale,
  ];
}

export function pan(v: Viewport, dxPx: number, dyPx: number): Viewport {
  return { ...v, centerX: v.centerX - dxPx / v.scale, centerY: v.centerY + dyPx / v.scale };
}

export function zoom(v: Viewport, factor: number): Viewport {
  return { ...v, scale: Math.min(2000, Math.max(0.5, v.scale * factor)) };
}

const POINT_RADIUS_PX = 4;

function drawAxes(ctx: DrawContext, v: Viewport): void {
  const [ox, oy] = worldToScreen(v, 0, 0);
  ctx.strokeStyle = "#ccc";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, oy);
  ctx.lineTo(v.width, oy);
  ctx.moveTo(ox, 0);
  ctx.lineTo(ox, v.height);
  ctx.stroke();
}

function drawValue(ctx: DrawContext, v: Viewport, value: Value): void {
  switch (value.type) {
    case "point": {
      const [px, py] = worldToScreen(v, value.x, value.y);
      ctx.fillStyle = "#1f77b4";
      ctx.beginPath();
      ctx.arc(px, py, POINT_RADIUS_PX, 0, 2 * Math.PI);
      ctx.fill();
      break;
    }
    case "segment": {
      const [x1, y1] = worldToScreen(v, value.x1, value.y1);
      const [x2, y2] = worldToScreen(v, value.x2, value.y2);
      ctx.strokeStyle = "#2ca02c";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
      break;
    }
    case "circle": {
      const [cx, cy] = worldToScreen(v, value.cx, value.cy);
      ctx.strokeStyle = "#ff7f0e";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(cx, cy, value.r * v.scale, 0, 2 * Math.PI);
      ctx.stroke();
      break;
    }
    case "line": {
      // clip ax + by + c = 0 against the viewport by extending far past it
      const px = -value.a * value.c, py = -value.b * value.c;
      const dx = -value.b, dy = value.a;
      const span = (v.width + v.height) / v.scale + Math.hypot(px - v.centerX, py - v.centerY);
      const [x1, y1] = worldToScreen(v, px - span * dx, py - span * dy);
      const [x2, y2] = worldToScreen(v, px + span * dx, py + span * dy);
      ctx.strokeStyle = "#7f7f7f";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
      break;
    }
    case "undefined":
      break; // callers surface these in the status bar instead
  }
}

export interface RenderResult {
  drawn: number;
  /** Ids whose value is undefined; shown as a status-bar note, not drawn. */
  omitted: number[];
}

export function renderScene(
  ctx: DrawContext,
  viewport: Viewport,
  evaluation: Evaluation,
): RenderResult {
  ctx.clearRect(0, 0, viewport.width, viewport.height);
  drawAxes(ctx, viewport);
  const omitted: number[] = [];
  let drawn = 0;
  for (const [id, value] of evaluation) {
    if (value.type === "undefined") {
      omitted.push(id);
    } else {
      drawValue(ctx, viewport, value);
      drawn += 1;
    }
  }
  return { drawn, omitted };
}
