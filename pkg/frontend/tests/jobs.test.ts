import { describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { submitAndWatch } from "../src/jobs.js";
import { StudioState } from "../src/state.js";
import type { LayoutDoc, SceneSummary } from "../src/types.js";

function fixtureState(): StudioState {
  const state = new StudioState();
  const layout: LayoutDoc = {
    schema: "layout/1",
    boxes: [{ center: [1, 1, 2], dims: [4, 2, 2], yaw: 0, class_id: 3, instance_id: 1 }],
    lanes: [],
  };
  const summary: SceneSummary = {
    id: "old", chunk_origin: [0, 0], neighbors: {}, artifacts: {},
  };
  state.loadScene("old", summary, layout);
  state.bufferEdit({ op: "remove", node: "vehicle1" });
  return state;
}

interface StubCall {
  url: string;
  method: string;
  body?: unknown;
}

/** Scripted service: edit accepted, then queued -> running -> done. */
function stubService(states: string[], sceneIds: string[] = ["new-scene"]) {
  const calls: StubCall[] = [];
  let pollIndex = 0;
  const fetchImpl: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    calls.push({ url, method, body: init?.body ? JSON.parse(init.body as string) : undefined });
    const json = (data: unknown, status = 200) =>
      new Response(JSON.stringify(data), {
        status,
        headers: { "content-type": "application/json" },
      });
    if (url.endsWith("/edits") && method === "POST") {
      return json({ id: "job-1" }, 202);
    }
    if (url.includes("/jobs/")) {
      const state = states[Math.min(pollIndex, states.length - 1)];
      pollIndex += 1;
      const done = state === "done" || state === "failed";
      return json({
        id: "job-1",
        kind: "edit",
        state,
        error: state === "failed" ? "boom" : null,
        failed_stage: state === "failed" ? "generating_occ" : null,
        scene_ids: done && state === "done" ? sceneIds : [],
      });
    }
    if (url.endsWith("/scenes/new-scene")) {
      return json({ id: "new-scene", chunk_origin: [0, 0], neighbors: {}, artifacts: {} });
    }
    if (url.endsWith("/scenes/new-scene/layout.json")) {
      return json({ schema: "layout/1", boxes: [], lanes: [] });
    }
    return json({ detail: "not found" }, 404);
  };
  return { fetchImpl, calls };
}

const instantSleep = async () => {};

describe("submit -> poll -> swap", () => {
  it("completes against a stubbed service and swaps in the new version", async () => {
    const { fetchImpl, calls } = stubService(["queued", "laying_out", "done"]);
    const api = new ApiClient("", fetchImpl);
    const state = fixtureState();
    const updates: string[] = [];
    const result = await submitAndWatch(api, state, (job) => updates.push(job.state), instantSleep);
    expect(result.newSceneId).toBe("new-scene");
    expect(state.activeSceneId).toBe("new-scene");
    expect(state.history).toContain("old");
    expect(updates[updates.length - 1]).toBe("done");
    // Server state only ever mutated through POSTs.
    for (const call of calls) {
      if (call.method !== "GET") {
        expect(call.url.endsWith("/edits")).toBe(true);
      }
    }
  });

  it("failed jobs surface the stage tag", async () => {
    const { fetchImpl } = stubService(["queued", "failed"]);
    const api = new ApiClient("", fetchImpl);
    const state = fixtureState();
    await expect(
      submitAndWatch(api, state, () => {}, instantSleep),
    ).rejects.toThrow(/generating_occ/);
  });

  it("empty buffer refuses to submit", async () => {
    const { fetchImpl } = stubService(["done"]);
    const api = new ApiClient("", fetchImpl);
    const state = new StudioState();
    await expect(submitAndWatch(api, state, () => {}, instantSleep)).rejects.toThrow(
      /empty/,
    );
  });

  it("two rapid submissions both appear in the watchlist", async () => {
    const { fetchImpl } = stubService(["done"]);
    const api = new ApiClient("", fetchImpl);
    const state = fixtureState();
    await submitAndWatch(api, state, () => {}, instantSleep);
    state.bufferEdit({ op: "remove", node: "vehicle1" });
    await submitAndWatch(api, state, () => {}, instantSleep).catch(() => {});
    expect(state.jobs.length).toBe(2);
  });
});
