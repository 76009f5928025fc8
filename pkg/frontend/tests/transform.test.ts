import { describe, expect, it } from "vitest";

import { Viewport } from "../src/transform.js";

function randomViewport(rand: () => number): Viewport {
  return new Viewport({
    centerX: (rand() - 0.5) * 200,
    centerY: (rand() - 0.5) * 200,
    pxPerMeter: 0.5 + rand() * 40,
    widthPx: 200 + Math.floor(rand() * 1400),
    heightPx: 200 + Math.floor(rand() * 1000),
  });
}

// Deterministic LCG so the 100 viewports are reproducible.
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

describe("viewport transform", () => {
  it("round-trips screen->world->screen within 0.5 px over 100 viewports", () => {
    const rand = lcg(7);
    for (let i = 0; i < 100; i += 1) {
      const vp = randomViewport(rand);
      for (let j = 0; j < 20; j += 1) {
        const px = rand() * vp.state.widthPx;
        const py = rand() * vp.state.heightPx;
        const [wx, wy] = vp.screenToWorld(px, py);
        const [bx, by] = vp.worldToScreen(wx, wy);
        expect(Math.hypot(bx - px, by - py)).toBeLessThan(0.5);
      }
    }
  });

  it("round-trips world->screen->world exactly enough for sub-pixel edits", () => {
    const rand = lcg(21);
    for (let i = 0; i < 100; i += 1) {
      const vp = randomViewport(rand);
      const wx = (rand() - 0.5) * 100;
      const wy = (rand() - 0.5) * 100;
      const [px, py] = vp.worldToScreen(wx, wy);
      const [bx, by] = vp.screenToWorld(px, py);
      const pxError = Math.hypot(bx - wx, by - wy) * vp.state.pxPerMeter;
      expect(pxError).toBeLessThan(0.5);
    }
  });

  it("pan moves the view center by the world delta of the pixel drag", () => {
    const vp = new Viewport({
      centerX: 0, centerY: 0, pxPerMeter: 2, widthPx: 400, heightPx: 400,
    });
    vp.panByPixels(10, -6);
    expect(vp.state.centerX).toBeCloseTo(-5, 9); // drag right: world moves left
    expect(vp.state.centerY).toBeCloseTo(-3, 9);
  });

  it("zoomAt keeps the anchor point fixed", () => {
    const rand = lcg(5);
    for (let i = 0; i < 20; i += 1) {
      const vp = randomViewport(rand);
      const px = rand() * vp.state.widthPx;
      const py = rand() * vp.state.heightPx;
      const [wx, wy] = vp.screenToWorld(px, py);
      vp.zoomAt(px, py, 1.6);
      const [nx, ny] = vp.worldToScreen(wx, wy);
      expect(Math.hypot(nx - px, ny - py)).toBeLessThan(0.5);
    }
  });

  it("rejects non-positive zoom", () => {
    const vp = new Viewport({
      centerX: 0, centerY: 0, pxPerMeter: 2, widthPx: 100, heightPx: 100,
    });
    expect(() => vp.zoomAt(0, 0, 0)).toThrow();
  });
});
