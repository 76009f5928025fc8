/** Edit actions -> buffered structured ops, via the viewport transform. */

import type { StudioState } from "./state.js";
import type { Viewport } from "./transform.js";
import type { Box7, EditAction, EditOp } from "./types.js";

export interface WorldBounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

export function clampToBounds(
  x: number,
  y: number,
  bounds: WorldBounds,
): [number, number, boolean] {
  const cx = Math.min(Math.max(x, bounds.minX), bounds.maxX);
  const cy = Math.min(Math.max(y, bounds.minY), bounds.maxY);
  return [cx, cy, cx !== x || cy !== y];
}

/**
 * Applies one canvas action to the edit buffer. Geometric actions express
 * their screen-space deltas in world units through the viewport inverse;
 * dragging outside the world clamps to its bounds.
 */
export function applyEdit(
  state: StudioState,
  viewport: Viewport,
  bounds: WorldBounds,
  action: EditAction,
): EditOp | null {
  switch (action.kind) {
    case "drag-box": {
      const box = state.boxForNode(action.nodeId);
      if (!box) throw new Error(`unknown node ${action.nodeId}`);
      const [dwx, dwy] = viewport.screenDeltaToWorld(action.dxPx, action.dyPx);
      const [nx, ny] = clampToBounds(
        box.center[0] + dwx,
        box.center[1] + dwy,
        bounds,
      );
      const op: EditOp = {
        op: "move",
        node: action.nodeId,
        box: { center: [nx, ny, box.center[2]], yaw: box.yaw },
      };
      state.bufferEdit(op);
      return op;
    }
    case "rotate-box": {
      const box = state.boxForNode(action.nodeId);
      if (!box) throw new Error(`unknown node ${action.nodeId}`);
      const buffered = state.editBuffer.find(
        (o) => o.op === "move" && o.node === action.nodeId,
      ) as Extract<EditOp, { op: "move" }> | undefined;
      const base = buffered ? buffered.box : { center: box.center, yaw: box.yaw };
      let yaw = base.yaw + action.dYaw;
      // wrap to [-pi, pi)
      yaw = ((yaw + Math.PI) % (2 * Math.PI) + 2 * Math.PI) % (2 * Math.PI) - Math.PI;
      const op: EditOp = {
        op: "move",
        node: action.nodeId,
        box: { center: base.center as [number, number, number], yaw },
      };
      state.bufferEdit(op);
      return op;
    }
    case "delete-entity": {
      if (!state.boxForNode(action.nodeId)) {
        throw new Error(`unknown node ${action.nodeId}`);
      }
      const op: EditOp = { op: "remove", node: action.nodeId };
      state.bufferEdit(op);
      return op;
    }
    case "add-entity": {
      // The click position only seeds the provisional marker; the server
      // places the new entity by sampling, optionally constrained later.
      const op: EditOp = { op: "add", node: action.nodeId, category: action.category };
      state.bufferEdit(op);
      return op;
    }
    case "free-text": {
      if (!action.text.trim()) return null;
      const op: EditOp = { op: "free_text", text: action.text };
      state.bufferEdit(op);
      return op;
    }
  }
}
