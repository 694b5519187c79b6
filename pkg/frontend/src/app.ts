// Sandbox UI: build a scene, pick a subject, type an instruction, inspect
// the heatmap overlay, place, rate, repeat. The server owns all state; every
// mutation waits for its response before re-rendering.

import { ApiError, RelplaceClient } from "./api.js";
import { buildOverlay, type OverlayImage } from "./overlay.js";
import { Store, type Tool } from "./state.js";
import { canvasToScene, makeTransform, sceneToCanvas, type ViewTransform } from "./transform.js";
import { RELATIONS, type ObjectSpec, type ReportPayload } from "./types.js";

const CANVAS_SIZE = 480;

export class SandboxApp {
  readonly store = new Store();
  private client: RelplaceClient;
  private root: HTMLElement;
  private canvas!: HTMLCanvasElement;
  private sceneImage: HTMLImageElement | null = null;
  private overlayImage: OverlayImage | null = null;
  private transform: ViewTransform = { scale: 5, offsetX: 0, offsetY: 0 };
  private dragObject: ObjectSpec | null = null;
  private reportEl!: HTMLElement;

  constructor(root: HTMLElement, baseUrl: string) {
    this.root = root;
    this.client = new RelplaceClient(baseUrl);
  }

  async start(): Promise<void> {
    this.buildDom();
    const existing = window.location.hash.slice(1);
    let sid = existing || null;
    if (sid) {
      try {
        await this.client.getScene(sid);
      } catch {
        sid = null;
      }
    }
    if (!sid) {
      sid = await this.client.createSession();
      window.location.hash = sid;
    }
    this.store.update({ sessionId: sid });
    await this.refreshScene();
    await this.refreshCatalog();
    this.store.subscribe(() => this.draw());
    this.draw();
  }

  // -- server round-trips ---------------------------------------------------
  private async refreshScene(): Promise<void> {
    const sid = this.store.get().sessionId!;
    const payload = await this.client.getScene(sid);
    this.sceneImage = await loadImage(payload.render_png);
    this.transform = makeTransform(
      payload.scene.width, payload.scene.height, CANVAS_SIZE, CANVAS_SIZE);
    this.store.update({ scene: payload });
  }

  private async refreshCatalog(): Promise<void> {
    const sid = this.store.get().sessionId!;
    const catalog = await this.client.getCatalog(sid);
    const addSelect = this.root.querySelector<HTMLSelectElement>("#add-name")!;
    addSelect.innerHTML = catalog.references
      .map((n) => `<option value="${n}">${n}</option>`)
      .join("");
    addSelect.value = this.store.get().addName;
    const subjSelect = this.root.querySelector<HTMLSelectElement>("#subject-name")!;
    subjSelect.innerHTML = catalog.subjects
      .map((n) => `<option value="${n}">${n}</option>`)
      .join("");
  }

  private async guard<T>(action: () => Promise<T>): Promise<T | null> {
    try {
      const result = await action();
      this.store.update({ banner: null });
      return result;
    } catch (err) {
      const message = err instanceof ApiError
        ? `${err.status}: ${err.message}`
        : String(err);
      this.store.update({ banner: message });
      return null;
    }
  }

  async submitInstruction(text: string): Promise<void> {
    const sid = this.store.get().sessionId!;
    const payload = await this.guard(() => this.client.instruct(sid, text));
    if (!payload) return;
    const relation = payload.parsed.relation;
    this.overlayImage = await buildOverlay(
      payload.channels[relation].png_b64,
      payload.channels[relation].normalization,
    );
    this.store.update({
      instruct: payload,
      overlay: { relation, opacity: 0.65 },
      placement: null,
      ratingEnabled: false,
      pendingSubject: payload.parsed.subject_name,
    });
    await this.refreshScene();
  }

  async switchOverlayChannel(relation: string): Promise<void> {
    const state = this.store.get();
    if (!state.instruct) return;
    const channel = state.instruct.channels[relation];
    this.overlayImage = await buildOverlay(channel.png_b64, channel.normalization);
    // overlay change only; scene state untouched
    this.store.update({ overlay: { relation, opacity: state.overlay?.opacity ?? 0.65 } });
  }

  setOverlayOpacity(opacity: number): void {
    const overlay = this.store.get().overlay;
    if (overlay) this.store.update({ overlay: { ...overlay, opacity } });
  }

  async pickSubject(name: string): Promise<void> {
    const sid = this.store.get().sessionId!;
    const ok = await this.guard(() => this.client.setSubject(sid, name));
    if (ok) this.store.update({ pendingSubject: name });
  }

  async placeSubject(strategy: "argmax" | "sample"): Promise<void> {
    const sid = this.store.get().sessionId!;
    const payload = await this.guard(() => this.client.place(sid, strategy));
    if (!payload) return;
    this.sceneImage = await loadImage(payload.render_png);
    this.store.update({
      scene: payload,
      placement: payload.placement,
      ratingEnabled: true,
      pendingSubject: null,
    });
  }

  async submitRating(likert: number, success: boolean): Promise<void> {
    const sid = this.store.get().sessionId!;
    const ok = await this.guard(() => this.client.rate(sid, likert, success));
    if (ok) {
      this.store.update({ ratingEnabled: false, placement: null, overlay: null, instruct: null });
      this.overlayImage = null;
      await this.refreshReport();
    }
  }

  async refreshReport(): Promise<ReportPayload | null> {
    const sid = this.store.get().sessionId!;
    const report = await this.guard(() => this.client.report(sid));
    if (report) this.renderReport(report);
    return report;
  }

  // -- canvas ----------------------------------------------------------------
  private async onCanvasDown(ev: MouseEvent): Promise<void> {
    const state = this.store.get();
    if (!state.scene) return;
    const rect = this.canvas.getBoundingClientRect();
    const pos = canvasToScene(this.transform, ev.clientX - rect.left, ev.clientY - rect.top);
    if (state.tool === "add") {
      await this.guard(() =>
        this.client.addObject(state.sessionId!, state.addName, [pos.x, pos.y]));
      await this.refreshScene();
      return;
    }
    if (state.tool === "move") {
      this.dragObject = hitTest(state.scene.scene.objects, pos.x, pos.y);
    }
  }

  private async onCanvasUp(ev: MouseEvent): Promise<void> {
    if (!this.dragObject) return;
    const obj = this.dragObject;
    this.dragObject = null;
    const rect = this.canvas.getBoundingClientRect();
    const pos = canvasToScene(this.transform, ev.clientX - rect.left, ev.clientY - rect.top);
    const sid = this.store.get().sessionId!;
    await this.guard(() => this.client.moveObject(sid, obj.id, [pos.x, pos.y]));
    await this.refreshScene();
  }

  private draw(): void {
    const state = this.store.get();
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.imageSmoothingEnabled = false;
    ctx.fillStyle = "#14141c";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.sceneImage && state.scene) {
      const { scale, offsetX, offsetY } = this.transform;
      ctx.drawImage(
        this.sceneImage,
        offsetX, offsetY,
        state.scene.scene.width * scale, state.scene.scene.height * scale);
      if (state.overlay && this.overlayImage) {
        ctx.globalAlpha = state.overlay.opacity;
        ctx.drawImage(
          this.overlayImage.canvas,
          offsetX, offsetY,
          state.scene.scene.width * scale, state.scene.scene.height * scale);
        ctx.globalAlpha = 1;
      }
      if (state.placement) {
        const p = sceneToCanvas(this.transform, state.placement[0], state.placement[1]);
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.arc(p.x, p.y, 9, 0, Math.PI * 2);
        ctx.stroke();
      }
    }
    this.syncWidgets(state);
  }

  private syncWidgets(state: ReturnType<Store["get"]>): void {
    const banner = this.root.querySelector<HTMLElement>("#banner")!;
    banner.textContent = state.banner ?? "";
    banner.style.display = state.banner ? "block" : "none";
    const rating = this.root.querySelector<HTMLElement>("#rating")!;
    rating.style.display = state.ratingEnabled ? "block" : "none";
    const legend = this.root.querySelector<HTMLElement>("#legend")!;
    if (state.overlay && this.overlayImage) {
      legend.textContent =
        `${state.overlay.relation} · peak ${this.overlayImage.normalization.toFixed(4)}`;
    } else {
      legend.textContent = "";
    }
    const subject = this.root.querySelector<HTMLElement>("#pending-subject")!;
    subject.textContent = state.pendingSubject ? `on gripper: ${state.pendingSubject}` : "";
    for (const btn of this.root.querySelectorAll<HTMLButtonElement>("[data-relation]")) {
      btn.disabled = !state.instruct;
      btn.classList.toggle("active", state.overlay?.relation === btn.dataset.relation);
    }
  }

  private renderReport(report: ReportPayload): void {
    const rows = Object.entries(report.per_relation);
    if (!rows.length) {
      this.reportEl.innerHTML = "<em>no rated placements yet</em>";
      return;
    }
    this.reportEl.innerHTML = rows
      .map(([relation, row]) => {
        const likertPct = (row.mean_likert / 10) * 100;
        const successPct = row.success_rate * 100;
        return `
          <div class="report-row" data-report-relation="${relation}">
            <span class="report-label">${relation} (n=${row.count})</span>
            <div class="bar"><div class="bar-fill likert" style="width:${likertPct}%"></div></div>
            <span class="report-val">likert ${row.mean_likert.toFixed(1)}</span>
            <div class="bar"><div class="bar-fill success" style="width:${successPct}%"></div></div>
            <span class="report-val">success ${successPct.toFixed(0)}%</span>
          </div>`;
      })
      .join("");
  }

  // -- dom -------------------------------------------------------------------
  private buildDom(): void {
    this.root.innerHTML = `
      <div id="banner" class="banner"></div>
      <div class="layout">
        <div class="panel">
          <canvas id="scene" width="${CANVAS_SIZE}" height="${CANVAS_SIZE}"></canvas>
          <div id="legend" class="legend"></div>
          <div class="channel-row">
            ${RELATIONS.map((r) => `<button data-relation="${r}" disabled>${r}</button>`).join("")}
            <label>opacity <input id="opacity" type="range" min="0" max="100" value="65"></label>
          </div>
        </div>
        <div class="panel controls">
          <h3>scene</h3>
          <div class="tool-row">
            <button data-tool="move" class="active">move</button>
            <button data-tool="add">add</button>
            <select id="add-name"></select>
          </div>
          <h3>subject</h3>
          <div class="tool-row">
            <select id="subject-name"></select>
            <button id="pick-subject">put on gripper</button>
            <span id="pending-subject"></span>
          </div>
          <h3>instruction</h3>
          <form id="instruct-form">
            <input id="instruction" type="text"
                   placeholder="place the mug on the right of the box" size="36">
            <button type="submit">interpret</button>
          </form>
          <div class="tool-row">
            <button id="place-sample">place (sample)</button>
            <button id="place-argmax">place (argmax)</button>
          </div>
          <div id="rating" class="rating">
            <h3>rate the placement</h3>
            <div id="likert-row">
              ${Array.from({ length: 10 }, (_, i) =>
                `<button data-likert="${i + 1}">${i + 1}</button>`).join("")}
            </div>
            <label><input id="success-toggle" type="checkbox" checked> success</label>
          </div>
          <h3>session report</h3>
          <div id="report"></div>
        </div>
      </div>`;
    this.canvas = this.root.querySelector("#scene")!;
    this.reportEl = this.root.querySelector("#report")!;
    this.canvas.addEventListener("mousedown", (ev) => void this.onCanvasDown(ev));
    this.canvas.addEventListener("mouseup", (ev) => void this.onCanvasUp(ev));
    for (const btn of this.root.querySelectorAll<HTMLButtonElement>("[data-tool]")) {
      btn.addEventListener("click", () => {
        for (const other of this.root.querySelectorAll("[data-tool]")) {
          other.classList.remove("active");
        }
        btn.classList.add("active");
        this.store.update({ tool: btn.dataset.tool as Tool });
      });
    }
    this.root.querySelector<HTMLSelectElement>("#add-name")!
      .addEventListener("change", (ev) =>
        this.store.update({ addName: (ev.target as HTMLSelectElement).value }));
    this.root.querySelector<HTMLButtonElement>("#pick-subject")!
      .addEventListener("click", () => {
        const name = this.root.querySelector<HTMLSelectElement>("#subject-name")!.value;
        void this.pickSubject(name);
      });
    this.root.querySelector<HTMLFormElement>("#instruct-form")!
      .addEventListener("submit", (ev) => {
        ev.preventDefault();
        const input = this.root.querySelector<HTMLInputElement>("#instruction")!;
        void this.submitInstruction(input.value);
      });
    for (const btn of this.root.querySelectorAll<HTMLButtonElement>("[data-relation]")) {
      btn.addEventListener("click", () => void this.switchOverlayChannel(btn.dataset.relation!));
    }
    this.root.querySelector<HTMLInputElement>("#opacity")!
      .addEventListener("input", (ev) =>
        this.setOverlayOpacity(Number((ev.target as HTMLInputElement).value) / 100));
    this.root.querySelector<HTMLButtonElement>("#place-sample")!
      .addEventListener("click", () => void this.placeSubject("sample"));
    this.root.querySelector<HTMLButtonElement>("#place-argmax")!
      .addEventListener("click", () => void this.placeSubject("argmax"));
    for (const btn of this.root.querySelectorAll<HTMLButtonElement>("[data-likert]")) {
      btn.addEventListener("click", () => {
        const success =
          this.root.querySelector<HTMLInputElement>("#success-toggle")!.checked;
        void this.submitRating(Number(btn.dataset.likert), success);
      });
    }
  }
}

function hitTest(objects: ObjectSpec[], x: number, y: number): ObjectSpec | null {
  const sorted = [...objects].sort((a, b) => a.depth_rank - b.depth_rank);
  for (const obj of sorted) {
    const [w, h] = obj.size;
    const left = obj.center[0] - Math.floor(w / 2);
    const top = obj.center[1] - Math.floor(h / 2);
    if (x >= left && x < left + w && y >= top && y < top + h) return obj;
  }
  return null;
}

function loadImage(pngB64: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error("failed to decode scene render"));
    img.src = `data:image/png;base64,${pngB64}`;
  });
}
