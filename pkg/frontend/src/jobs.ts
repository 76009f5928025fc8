/** Submit the buffered edit and poll the job until a terminal state. */

import type { ApiClient } from "./api.js";
import type { StudioState } from "./state.js";
import type { EditOp, JobStatus } from "./types.js";

export const POLL_INTERVAL_MS = 1000;

export interface SubmitResult {
  job: JobStatus;
  newSceneId: string | null;
}

function toServerEdit(ops: EditOp[]): unknown {
  if (ops.length === 1 && ops[0].op === "free_text") {
    return { text: (ops[0] as { text: string }).text };
  }
  if (ops.length === 1) return ops[0];
  return { op: "batch", edits: ops };
}

/**
 * POSTs the edit buffer, then polls at the fixed interval until the job
 * finishes; on success the caller-provided swap runs with the new scene.
 */
export async function submitAndWatch(
  api: ApiClient,
  state: StudioState,
  onUpdate: (job: JobStatus) => void,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  maxPolls = 600,
): Promise<SubmitResult> {
  if (!state.canSubmit) throw new Error("edit buffer is empty");
  if (!state.activeSceneId) throw new Error("no active scene");
  const { id } = await api.submitEdit(state.activeSceneId, toServerEdit(state.editBuffer));
  state.watchJob(id);
  let job = await api.job(id);
  let polls = 0;
  while (job.state !== "done" && job.state !== "failed") {
    if (polls >= maxPolls) throw new Error(`job ${id} timed out`);
    await sleep(POLL_INTERVAL_MS);
    job = await api.job(id);
    state.updateJob(id, job.state);
    onUpdate(job);
    polls += 1;
  }
  state.updateJob(id, job.state);
  onUpdate(job);
  if (job.state === "failed") {
    const stage = job.failed_stage ? ` at ${job.failed_stage}` : "";
    throw new Error(`job failed${stage}: ${job.error ?? "unknown"}`);
  }
  const newSceneId = job.scene_ids[0] ?? null;
  if (newSceneId) {
    const [summary, layout] = await Promise.all([
      api.scene(newSceneId),
      api.layout(newSceneId),
    ]);
    state.loadScene(newSceneId, summary, layout);
  }
  return { job, newSceneId };
}
