/** Typed client for the scene service; all server access goes through here. */

import type { JobStatus, LayoutDoc, SceneSummary } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new Error(`GET ${path} -> ${resp.status}`);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new Error(`POST ${path} -> ${resp.status}`);
    return (await resp.json()) as T;
  }

  listScenes(): Promise<{ scenes: string[] }> {
    return this.getJson("/scenes");
  }

  scene(id: string): Promise<SceneSummary> {
    return this.getJson(`/scenes/${id}`);
  }

  layout(id: string): Promise<LayoutDoc> {
    return this.getJson(`/scenes/${id}/layout.json`);
  }

  job(id: string): Promise<JobStatus> {
    return this.getJson(`/jobs/${id}`);
  }

  submitJob(kind: string, payload: unknown): Promise<{ id: string }> {
    return this.postJson("/jobs", { kind, payload });
  }

  submitEdit(sceneId: string, edit: unknown, seed = 0): Promise<{ id: string }> {
    return this.postJson(`/scenes/${sceneId}/edits`, { edit, seed });
  }

  artifactUrl(sceneId: string, artifact: string): string {
    return `${this.baseUrl}/scenes/${sceneId}/${artifact}`;
  }
}
