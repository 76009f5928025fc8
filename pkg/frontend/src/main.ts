/** Studio wiring: canvas interaction, prompt bar, job list. */

import { ApiClient } from "./api.js";
import { pickBox, renderBev, type BevOverlay } from "./bev.js";
import { applyEdit, type WorldBounds } from "./edits.js";
import { submitAndWatch } from "./jobs.js";
import { StudioState } from "./state.js";
import { Viewport } from "./transform.js";

const WORLD_EXTENT = 64;
const BOUNDS: WorldBounds = { minX: -32, minY: -32, maxX: 32, maxY: 32 };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot() {
  const api = new ApiClient("");
  const state = new StudioState();
  const canvas = el<HTMLCanvasElement>("bev");
  const ctx = canvas.getContext("2d")!;
  const viewport = new Viewport({
    centerX: 0,
    centerY: 0,
    pxPerMeter: canvas.width / (WORLD_EXTENT * 1.2),
    widthPx: canvas.width,
    heightPx: canvas.height,
  });

  const status = el<HTMLDivElement>("status");
  const sceneSelect = el<HTMLSelectElement>("scene-select");
  const thumbs = el<HTMLDivElement>("thumbs");

  function draw() {
    if (!state.layout || !state.summary) {
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      return;
    }
    const overlay: BevOverlay = {
      layout: state.layout,
      summary: state.summary,
      worldExtent: WORLD_EXTENT,
    };
    renderBev(ctx as never, overlay, viewport, state.selectedNode, (i) =>
      state.nodeIdForBox(i),
    );
  }

  async function refreshScenes() {
    const { scenes } = await api.listScenes();
    sceneSelect.innerHTML = "";
    for (const id of scenes) {
      const opt = document.createElement("option");
      opt.value = id;
      opt.textContent = id;
      sceneSelect.appendChild(opt);
    }
  }

  async function loadScene(id: string) {
    try {
      const [summary, layout] = await Promise.all([api.scene(id), api.layout(id)]);
      state.loadScene(id, summary, layout);
      status.textContent = `scene ${id} (${layout.boxes.length} boxes)`;
      thumbs.innerHTML = "";
      for (let v = 0; v < 6; v += 1) {
        const img = document.createElement("img");
        img.src = api.artifactUrl(id, `views/view_${v}.png`);
        img.width = 112;
        thumbs.appendChild(img);
      }
      draw();
    } catch (err) {
      status.textContent = `failed to load ${id}: ${(err as Error).message}`;
    }
  }

  sceneSelect.addEventListener("change", () => loadScene(sceneSelect.value));
  el<HTMLButtonElement>("reload").addEventListener("click", refreshScenes);

  // Canvas interaction: click selects, drag moves, wheel zooms, shift-drag pans.
  let dragging = false;
  let panning = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (ev) => {
    lastX = ev.offsetX;
    lastY = ev.offsetY;
    if (ev.shiftKey) {
      panning = true;
      return;
    }
    const [wx, wy] = viewport.screenToWorld(ev.offsetX, ev.offsetY);
    const hit = state.layout ? pickBox(state.layout, wx, wy) : null;
    state.selectedNode = hit === null ? null : state.nodeIdForBox(hit);
    dragging = hit !== null;
    draw();
  });
  canvas.addEventListener("mousemove", (ev) => {
    const dx = ev.offsetX - lastX;
    const dy = ev.offsetY - lastY;
    if (panning) {
      viewport.panByPixels(dx, dy);
      lastX = ev.offsetX;
      lastY = ev.offsetY;
      draw();
      return;
    }
    if (!dragging || !state.selectedNode) return;
    applyEdit(state, viewport, BOUNDS, {
      kind: "drag-box",
      nodeId: state.selectedNode,
      dxPx: dx,
      dyPx: dy,
    });
    lastX = ev.offsetX;
    lastY = ev.offsetY;
    // Optimistic-free: show the buffered target as a ghost via status only.
    status.textContent = `buffered ${state.editBuffer.length} edit(s)`;
  });
  canvas.addEventListener("mouseup", () => {
    dragging = false;
    panning = false;
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    viewport.zoomAt(ev.offsetX, ev.offsetY, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
    draw();
  });

  el<HTMLButtonElement>("delete").addEventListener("click", () => {
    if (!state.selectedNode) return;
    applyEdit(state, viewport, BOUNDS, {
      kind: "delete-entity",
      nodeId: state.selectedNode,
    });
    status.textContent = `buffered ${state.editBuffer.length} edit(s)`;
  });

  const submitButton = el<HTMLButtonElement>("submit");
  submitButton.addEventListener("click", async () => {
    if (!state.canSubmit) return; // disabled path: empty buffer sends nothing
    submitButton.disabled = true;
    status.textContent = "submitting edit...";
    try {
      const result = await submitAndWatch(api, state, (job) => {
        status.textContent = `job ${job.id}: ${job.state}`;
      });
      status.textContent = `done -> ${result.newSceneId}`;
      await refreshScenes();
      if (result.newSceneId) await loadScene(result.newSceneId);
    } catch (err) {
      status.textContent = (err as Error).message;
    } finally {
      submitButton.disabled = false;
    }
  });

  el<HTMLButtonElement>("generate").addEventListener("click", async () => {
    const prompt = el<HTMLInputElement>("prompt").value.trim();
    if (!prompt) return;
    const { id } = await api.submitJob("generate", { prompt, seed: Date.now() % 100000 });
    state.watchJob(id);
    status.textContent = `job ${id}: queued`;
    const poll = setInterval(async () => {
      const job = await api.job(id);
      status.textContent = `job ${id}: ${job.state}`;
      if (job.state === "done" || job.state === "failed") {
        clearInterval(poll);
        await refreshScenes();
        if (job.scene_ids[0]) await loadScene(job.scene_ids[0]);
      }
    }, 1000);
  });

  el<HTMLButtonElement>("freetext").addEventListener("click", () => {
    const text = el<HTMLInputElement>("intent").value;
    applyEdit(state, viewport, BOUNDS, { kind: "free-text", text });
    status.textContent = `buffered ${state.editBuffer.length} edit(s)`;
  });

  await refreshScenes();
  if (sceneSelect.value) await loadScene(sceneSelect.value);
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `startup failed: ${err.message}`;
});
