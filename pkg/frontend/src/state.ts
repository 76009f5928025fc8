/** Studio state: active scene, selection, pending edit buffer, job watchlist. */

import type { Box7, EditOp, LayoutDoc, SceneSummary } from "./types.js";

export interface WatchedJob {
  id: string;
  state: string;
}

export class StudioState {
  activeSceneId: string | null = null;
  summary: SceneSummary | null = null;
  layout: LayoutDoc | null = null;
  history: string[] = [];
  selectedNode: string | null = null;
  editBuffer: EditOp[] = [];
  jobs: WatchedJob[] = [];

  loadScene(id: string, summary: SceneSummary, layout: LayoutDoc): void {
    if (this.activeSceneId && this.activeSceneId !== id) {
      this.history.push(this.activeSceneId);
    }
    this.activeSceneId = id;
    this.summary = summary;
    this.layout = layout;
    this.selectedNode = null;
    this.editBuffer = [];
  }

  /** Node ids follow the category+index naming used by the layout graph. */
  nodeIdForBox(index: number): string {
    const box = this.layout?.boxes[index];
    if (!box) throw new Error(`no box at index ${index}`);
    const category = box.class_id === 6 ? "pedestrian" : "vehicle";
    let nth = 0;
    for (let i = 0; i <= index; i += 1) {
      const b = this.layout!.boxes[i];
      const cat = b.class_id === 6 ? "pedestrian" : "vehicle";
      if (cat === category) nth += 1;
    }
    return `${category}${nth}`;
  }

  boxForNode(nodeId: string): Box7 | null {
    if (!this.layout) return null;
    for (let i = 0; i < this.layout.boxes.length; i += 1) {
      if (this.nodeIdForBox(i) === nodeId) return this.layout.boxes[i];
    }
    return null;
  }

  bufferEdit(op: EditOp): void {
    // A later op on the same node replaces the buffered one.
    const key = (o: EditOp) => ("node" in o ? `${o.op}:${o.node}` : `${o.op}`);
    this.editBuffer = this.editBuffer.filter((o) => key(o) !== key(op));
    this.editBuffer.push(op);
  }

  get canSubmit(): boolean {
    return this.editBuffer.length > 0;
  }

  watchJob(id: string): void {
    this.jobs.push({ id, state: "queued" });
  }

  updateJob(id: string, state: string): void {
    const job = this.jobs.find((j) => j.id === id);
    if (job) job.state = state;
  }
}
