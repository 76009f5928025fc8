/**
 * World <-> screen mapping for the BEV canvas.
 *
 * World: meters, +x right, +y up. Screen: CSS pixels, +x right, +y down.
 * The viewport stores the world point at the canvas center plus a zoom in
 * pixels per meter; both directions are exact inverses of each other.
 */

export interface ViewportState {
  centerX: number; // world meters at the canvas center
  centerY: number;
  pxPerMeter: number;
  widthPx: number;
  heightPx: number;
}

export class Viewport {
  state: ViewportState;

  constructor(state: ViewportState) {
    if (state.pxPerMeter <= 0) throw new Error("pxPerMeter must be positive");
    this.state = { ...state };
  }

  worldToScreen(wx: number, wy: number): [number, number] {
    const s = this.state;
    return [
      s.widthPx / 2 + (wx - s.centerX) * s.pxPerMeter,
      s.heightPx / 2 - (wy - s.centerY) * s.pxPerMeter,
    ];
  }

  screenToWorld(px: number, py: number): [number, number] {
    const s = this.state;
    return [
      s.centerX + (px - s.widthPx / 2) / s.pxPerMeter,
      s.centerY - (py - s.heightPx / 2) / s.pxPerMeter,
    ];
  }

  /** Screen-space pixel delta expressed as a world delta. */
  screenDeltaToWorld(dxPx: number, dyPx: number): [number, number] {
    const s = this.state;
    return [dxPx / s.pxPerMeter, -dyPx / s.pxPerMeter];
  }

  panByPixels(dxPx: number, dyPx: number): void {
    const [dwx, dwy] = this.screenDeltaToWorld(dxPx, dyPx);
    this.state.centerX -= dwx;
    this.state.centerY -= dwy;
  }

  /** Zoom keeping the world point under (px, py) fixed on screen. */
  zoomAt(px: number, py: number, factor: number): void {
    if (factor <= 0) throw new Error("zoom factor must be positive");
    const [wx, wy] = this.screenToWorld(px, py);
    this.state.pxPerMeter *= factor;
    const [nx, ny] = this.worldToScreen(wx, wy);
    this.state.centerX += (nx - px) / this.state.pxPerMeter;
    this.state.centerY -= (ny - py) / this.state.pxPerMeter;
  }
}
