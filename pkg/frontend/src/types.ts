/** Shared types mirroring the service's JSON documents. */

export interface Box7 {
  center: [number, number, number];
  dims: [number, number, number];
  yaw: number;
  class_id: number;
  instance_id: number;
}

export interface Lane {
  points: [number, number][];
  lane_type: string;
}

export interface LayoutDoc {
  schema: string;
  boxes: Box7[];
  lanes: Lane[];
}

export interface SceneSummary {
  id: string;
  chunk_origin: [number, number];
  neighbors: Record<string, string>;
  artifacts: Record<string, string | null>;
}

export interface JobStatus {
  id: string;
  kind: string;
  state: string;
  error: string | null;
  failed_stage: string | null;
  scene_ids: string[];
}

export type EditAction =
  | { kind: "drag-box"; nodeId: string; dxPx: number; dyPx: number }
  | { kind: "rotate-box"; nodeId: string; dYaw: number }
  | { kind: "delete-entity"; nodeId: string }
  | {
      kind: "add-entity";
      nodeId: string;
      category: string;
      worldX: number;
      worldY: number;
    }
  | { kind: "free-text"; text: string };

export type EditOp =
  | { op: "move"; node: string; box: { center: [number, number, number]; yaw: number } }
  | { op: "remove"; node: string }
  | {
      op: "add";
      node: string;
      category: string;
      relation?: [string, string, string];
    }
  | { op: "free_text"; text: string };
