/** Canvas rendering of the BEV overlay: boxes, lanes, occupancy slice,
 * chunk outlines. All overlays share the one viewport transform. */

import type { Viewport } from "./transform.js";
import type { LayoutDoc, SceneSummary } from "./types.js";

/** Minimal 2D-context surface the renderer needs (testable with a fake). */
export interface Ctx2d {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  drawImage?(img: unknown, x: number, y: number, w: number, h: number): void;
  strokeStyle: string | unknown;
  fillStyle: string | unknown;
  lineWidth: number;
  globalAlpha: number;
}

export interface BevOverlay {
  layout: LayoutDoc;
  summary: SceneSummary;
  occupancySlice?: unknown; // decoded ImageBitmap of the BEV slice
  worldExtent: number; // meters per chunk side
}

const CLASS_COLORS: Record<number, string> = {
  3: "#ff9e00",
  6: "#2d5cff",
};

export function boxCorners(
  cx: number,
  cy: number,
  length: number,
  width: number,
  yaw: number,
): [number, number][] {
  const c = Math.cos(yaw);
  const s = Math.sin(yaw);
  const corners: [number, number][] = [];
  for (const [lx, ly] of [
    [-length / 2, -width / 2],
    [length / 2, -width / 2],
    [length / 2, width / 2],
    [-length / 2, width / 2],
  ] as [number, number][]) {
    corners.push([cx + lx * c - ly * s, cy + lx * s + ly * c]);
  }
  return corners;
}

export interface RenderCounts {
  boxes: number;
  lanes: number;
  chunks: number;
}

export function renderBev(
  ctx: Ctx2d,
  overlay: BevOverlay,
  viewport: Viewport,
  selectedNode: string | null = null,
  nodeIdForBox: (index: number) => string = () => "",
): RenderCounts {
  const { widthPx, heightPx } = viewport.state;
  ctx.clearRect(0, 0, widthPx, heightPx);

  // Occupancy BEV slice under everything else.
  const half = overlay.worldExtent / 2;
  const [ox, oy] = overlay.summary.chunk_origin;
  if (overlay.occupancySlice && ctx.drawImage) {
    const [sx, sy] = viewport.worldToScreen(ox - half, oy + half);
    const sizePx = overlay.worldExtent * viewport.state.pxPerMeter;
    ctx.globalAlpha = 0.7;
    ctx.drawImage(overlay.occupancySlice, sx, sy, sizePx, sizePx);
    ctx.globalAlpha = 1.0;
  }

  // Chunk outline for the active chunk plus one per neighbor.
  let chunks = 0;
  const outline = (cx: number, cy: number) => {
    const [sx, sy] = viewport.worldToScreen(cx - half, cy + half);
    const sizePx = overlay.worldExtent * viewport.state.pxPerMeter;
    ctx.strokeStyle = "#888";
    ctx.lineWidth = 1;
    ctx.strokeRect(sx, sy, sizePx, sizePx);
    chunks += 1;
  };
  outline(ox, oy);
  const offsets: Record<string, [number, number]> = {
    "+x": [overlay.worldExtent / 2, 0],
    "-x": [-overlay.worldExtent / 2, 0],
    "+y": [0, overlay.worldExtent / 2],
    "-y": [0, -overlay.worldExtent / 2],
  };
  for (const dir of Object.keys(overlay.summary.neighbors)) {
    const off = offsets[dir];
    if (off) outline(ox + off[0], oy + off[1]);
  }

  // Lanes.
  let lanes = 0;
  for (const lane of overlay.layout.lanes) {
    ctx.beginPath();
    lane.points.forEach(([wx, wy], i) => {
      const [sx, sy] = viewport.worldToScreen(wx + ox, wy + oy);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.strokeStyle = "#d9d9d9";
    ctx.lineWidth = 2;
    ctx.stroke();
    lanes += 1;
  }

  // Boxes as rotated rectangles.
  let boxes = 0;
  overlay.layout.boxes.forEach((box, index) => {
    const corners = boxCorners(
      box.center[0] + ox,
      box.center[1] + oy,
      box.dims[0],
      box.dims[1],
      box.yaw,
    );
    ctx.beginPath();
    corners.forEach(([wx, wy], i) => {
      const [sx, sy] = viewport.worldToScreen(wx, wy);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.closePath();
    const selected = nodeIdForBox(index) === selectedNode;
    ctx.strokeStyle = selected ? "#ff2d2d" : CLASS_COLORS[box.class_id] ?? "#444";
    ctx.lineWidth = selected ? 3 : 2;
    ctx.stroke();
    boxes += 1;
  });
  return { boxes, lanes, chunks };
}

/** Hit-test: topmost box whose footprint contains the world point. */
export function pickBox(
  layout: LayoutDoc,
  wx: number,
  wy: number,
): number | null {
  for (let i = layout.boxes.length - 1; i >= 0; i -= 1) {
    const box = layout.boxes[i];
    const c = Math.cos(-box.yaw);
    const s = Math.sin(-box.yaw);
    const dx = wx - box.center[0];
    const dy = wy - box.center[1];
    const lx = dx * c - dy * s;
    const ly = dx * s + dy * c;
    if (Math.abs(lx) <= box.dims[0] / 2 && Math.abs(ly) <= box.dims[1] / 2) {
      return i;
    }
  }
  return null;
}
