import { describe, expect, it } from "vitest";

import { boxCorners, pickBox, renderBev, type Ctx2d } from "../src/bev.js";
import { Viewport } from "../src/transform.js";
import type { LayoutDoc, SceneSummary } from "../src/types.js";

function fakeContext() {
  const ops: string[] = [];
  const ctx: Ctx2d = {
    clearRect: () => ops.push("clear"),
    beginPath: () => ops.push("begin"),
    moveTo: () => ops.push("move"),
    lineTo: () => ops.push("line"),
    closePath: () => ops.push("close"),
    stroke: () => ops.push("stroke"),
    fill: () => ops.push("fill"),
    strokeRect: () => ops.push("strokeRect"),
    strokeStyle: "#000",
    fillStyle: "#000",
    lineWidth: 1,
    globalAlpha: 1,
  };
  return { ctx, ops };
}

function layoutWith(n: number, lanes = 1): LayoutDoc {
  return {
    schema: "layout/1",
    boxes: Array.from({ length: n }, (_, i) => ({
      center: [i * 4 - 10, 0, 2] as [number, number, number],
      dims: [4, 2, 2] as [number, number, number],
      yaw: 0.2 * i,
      class_id: 3,
      instance_id: i + 1,
    })),
    lanes: Array.from({ length: lanes }, () => ({
      points: Array.from({ length: 16 }, (_, i) => [i * 4 - 30, 5] as [number, number]),
      lane_type: "lane",
    })),
  };
}

const summary: SceneSummary = {
  id: "s", chunk_origin: [0, 0], neighbors: { "+x": "other" }, artifacts: {},
};

function viewport(): Viewport {
  return new Viewport({
    centerX: 0, centerY: 0, pxPerMeter: 4, widthPx: 512, heightPx: 512,
  });
}

describe("bev rendering", () => {
  it("renders exactly as many boxes as the layout holds", () => {
    for (const n of [0, 1, 3, 7]) {
      const { ctx } = fakeContext();
      const counts = renderBev(
        ctx,
        { layout: layoutWith(n), summary, worldExtent: 64 },
        viewport(),
      );
      expect(counts.boxes).toBe(n);
      expect(counts.lanes).toBe(1);
    }
  });

  it("draws one chunk outline per neighbor plus the active chunk", () => {
    const { ctx } = fakeContext();
    const counts = renderBev(
      ctx,
      { layout: layoutWith(2), summary, worldExtent: 64 },
      viewport(),
    );
    expect(counts.chunks).toBe(2);
  });

  it("repeated renders issue identical command streams", () => {
    const a = fakeContext();
    const b = fakeContext();
    const overlay = { layout: layoutWith(4), summary, worldExtent: 64 };
    renderBev(a.ctx, overlay, viewport());
    renderBev(b.ctx, overlay, viewport());
    expect(a.ops).toEqual(b.ops);
  });
});

describe("box geometry", () => {
  it("corners of an axis-aligned box bound the footprint", () => {
    const corners = boxCorners(2, 3, 4, 2, 0);
    const xs = corners.map((c) => c[0]);
    const ys = corners.map((c) => c[1]);
    expect(Math.min(...xs)).toBeCloseTo(0);
    expect(Math.max(...xs)).toBeCloseTo(4);
    expect(Math.min(...ys)).toBeCloseTo(2);
    expect(Math.max(...ys)).toBeCloseTo(4);
  });

  it("pickBox honors rotation and prefers the topmost box", () => {
    const layout = layoutWith(1);
    layout.boxes[0] = {
      center: [0, 0, 2], dims: [4, 2, 2], yaw: Math.PI / 2, class_id: 3, instance_id: 1,
    };
    // Rotated 90 degrees: the long axis now runs along y.
    expect(pickBox(layout, 0, 1.8)).toBe(0);
    expect(pickBox(layout, 1.8, 0)).toBeNull();

    const stacked = layoutWith(2);
    stacked.boxes[1] = { ...stacked.boxes[0], instance_id: 2 };
    expect(pickBox(stacked, stacked.boxes[0].center[0], 0)).toBe(1);
  });
});
