import { ApiError, ConnectionError, SceneClient } from './api.js';
import {
  canvasIntrinsics,
  clampViewport,
  defaultViewport,
  orbitBy,
  viewportPose,
  zoomBy,
  type ViewportState,
} from './camera.js';
import { datasetFrusta, groundGrid, primitiveWireframe, type Segment } from './frusta.js';
import { AXIS_COLORS, dragDelta, gizmoHandles, pickAxis, type Axis } from './gizmo.js';
import { applyGizmoDrag, placeAtGround, uniqueName } from './placement.js';
import { RunMonitor, stageLabel } from './polling.js';
import { projectPoint } from './camera.js';
import { projectSegments, strokeLines } from './render2d.js';
import { parseReport } from './report.js';
import type {
  FramesPayload,
  JobStatus,
  ObjectSpecDoc,
  PrimitiveKind,
  SceneSnapshot,
  Strategy,
} from './types.js';
import { translationOf } from './types.js';

// Single-page scene editor. All state shown here is a cache of the server's:
// the object list re-renders from server echoes and snapshots, and polling
// invalidates it. The only geometry computed locally is for display and for
// turning pointer gestures into spec edits, using the same camera formulas
// the server applies.

interface DragState {
  kind: 'orbit' | 'gizmo';
  lastX: number;
  lastY: number;
  axis: Axis;
  startX: number;
  startY: number;
  original: ObjectSpecDoc;
  draft: ObjectSpecDoc;
}

export class SceneEditor {
  private readonly canvas: HTMLCanvasElement;
  private readonly ctx: CanvasRenderingContext2D;
  private readonly banner: HTMLDivElement;
  private readonly statusLine: HTMLDivElement;
  private readonly progressFill: HTMLDivElement;
  private readonly progressText: HTMLSpanElement;
  private readonly objectList: HTMLDivElement;
  private readonly reportBox: HTMLDivElement;
  private readonly beforeImg: HTMLImageElement;
  private readonly afterImg: HTMLImageElement;
  private readonly viewInput: HTMLInputElement;
  private readonly promptInput: HTMLInputElement;
  private readonly kindSelect: HTMLSelectElement;
  private readonly strategySelect: HTMLSelectElement;
  private readonly placeButton: HTMLButtonElement;
  private readonly deleteButton: HTMLButtonElement;
  private readonly runButton: HTMLButtonElement;
  private readonly gizmoButtons: Record<'translate' | 'scale', HTMLButtonElement>;

  private viewport: ViewportState = defaultViewport();
  private snapshot: SceneSnapshot | null = null;
  private frames: FramesPayload | null = null;
  private frustaSegments: Segment[] = [];
  private drag: DragState | null = null;
  private placeArmed = false;
  private running = false;

  constructor(
    private readonly client: SceneClient,
    root: HTMLElement,
  ) {
    root.innerHTML = '';
    root.style.cssText =
      'display:flex;gap:12px;font-family:system-ui,sans-serif;color:#ddd;background:#1b1d22;padding:12px;min-height:100vh;box-sizing:border-box';

    const left = document.createElement('div');
    const right = document.createElement('div');
    right.style.cssText = 'flex:0 0 340px;display:flex;flex-direction:column;gap:10px';
    root.appendChild(left);
    root.appendChild(right);

    this.banner = document.createElement('div');
    this.banner.style.cssText =
      'display:none;background:#8a2d2d;color:#fff;padding:6px 10px;border-radius:4px;margin-bottom:8px';
    left.appendChild(this.banner);

    this.canvas = document.createElement('canvas');
    this.canvas.width = 960;
    this.canvas.height = 600;
    this.canvas.style.cssText = 'background:#101217;border-radius:6px;touch-action:none';
    left.appendChild(this.canvas);
    const ctx = this.canvas.getContext('2d');
    if (ctx === null) throw new Error('canvas 2d context unavailable');
    this.ctx = ctx;

    this.statusLine = document.createElement('div');
    this.statusLine.style.cssText = 'margin-top:6px;font-size:13px;color:#9aa';
    left.appendChild(this.statusLine);

    // --- placement controls -------------------------------------------
    const placeBox = panel(right, 'Place an object');
    this.kindSelect = document.createElement('select');
    for (const kind of ['box', 'sphere', 'cylinder']) {
      const opt = document.createElement('option');
      opt.value = kind;
      opt.textContent = kind;
      this.kindSelect.appendChild(opt);
    }
    this.promptInput = document.createElement('input');
    this.promptInput.placeholder = 'style prompt, e.g. "a mid-century leather armchair"';
    this.promptInput.style.width = '100%';
    this.strategySelect = document.createElement('select');
    for (const s of ['AddNewImages', 'ModifyExisting']) {
      const opt = document.createElement('option');
      opt.value = s;
      opt.textContent = s;
      this.strategySelect.appendChild(opt);
    }
    this.placeButton = document.createElement('button');
    this.placeButton.textContent = 'Click in viewport to place';
    this.placeButton.onclick = () => {
      this.placeArmed = !this.placeArmed;
      this.placeButton.style.background = this.placeArmed ? '#3a6' : '';
    };
    placeBox.append(this.kindSelect, this.strategySelect, this.promptInput, this.placeButton);

    // --- selection + gizmo --------------------------------------------
    const editBox = panel(right, 'Selected object');
    this.gizmoButtons = {
      translate: document.createElement('button'),
      scale: document.createElement('button'),
    };
    for (const mode of ['translate', 'scale'] as const) {
      this.gizmoButtons[mode].textContent = mode;
      this.gizmoButtons[mode].onclick = () => {
        this.viewport = { ...this.viewport, gizmo: mode };
        this.refreshGizmoButtons();
        this.draw();
      };
    }
    this.deleteButton = document.createElement('button');
    this.deleteButton.textContent = 'Remove from queue';
    this.deleteButton.onclick = () => void this.deleteSelected();
    this.objectList = document.createElement('div');
    this.objectList.style.cssText = 'font-size:13px;line-height:1.7';
    editBox.append(this.gizmoButtons.translate, this.gizmoButtons.scale, this.deleteButton);
    editBox.appendChild(this.objectList);

    // --- run + progress -------------------------------------------------
    const runBox = panel(right, 'Stylization run');
    this.runButton = document.createElement('button');
    this.runButton.textContent = 'Run pipeline';
    this.runButton.onclick = () => void this.launchRun();
    const bar = document.createElement('div');
    bar.style.cssText = 'background:#2a2d35;border-radius:4px;height:14px;overflow:hidden';
    this.progressFill = document.createElement('div');
    this.progressFill.style.cssText = 'background:#4a8;height:100%;width:0%';
    bar.appendChild(this.progressFill);
    this.progressText = document.createElement('span');
    this.progressText.style.cssText = 'font-size:12px;color:#9aa';
    runBox.append(this.runButton, bar, this.progressText);

    // --- previews + report ----------------------------------------------
    const previewBox = panel(right, 'Before / after');
    this.viewInput = document.createElement('input');
    this.viewInput.type = 'number';
    this.viewInput.value = '0';
    this.viewInput.min = '0';
    this.viewInput.style.width = '70px';
    this.viewInput.onchange = () => this.refreshPreviews();
    this.beforeImg = document.createElement('img');
    this.afterImg = document.createElement('img');
    for (const img of [this.beforeImg, this.afterImg]) {
      img.style.cssText = 'width:100%;border-radius:4px;background:#000;min-height:40px';
    }
    previewBox.append(this.viewInput, label('before'), this.beforeImg, label('after'), this.afterImg);

    this.reportBox = panel(right, 'Timing report');

    // --- viewport gestures ----------------------------------------------
    this.canvas.addEventListener('pointerdown', (e) => this.onPointerDown(e));
    this.canvas.addEventListener('pointermove', (e) => this.onPointerMove(e));
    this.canvas.addEventListener('pointerup', (e) => void this.onPointerUp(e));
    this.canvas.addEventListener('wheel', (e) => {
      e.preventDefault();
      this.viewport = zoomBy(this.viewport, e.deltaY > 0 ? 1.1 : 1 / 1.1);
      this.draw();
    });

    this.refreshGizmoButtons();
  }

  async boot(): Promise<void> {
    console.log('loading scene', this.client.sceneId);
    try {
      this.snapshot = await this.client.snapshot();
      this.frames = await this.client.frames();
    } catch (err) {
      this.fail(err);
      return;
    }
    this.frustaSegments = datasetFrusta(this.frames);
    this.viewport = clampViewport({ ...this.viewport, distance: this.sceneSpread() * 1.6 });
    this.setConnection(true);
    this.renderObjectList();
    this.refreshPreviews();
    this.draw();
    void this.refreshReport();
    if (this.snapshot.status === 'running') {
      // page was reloaded mid-run: resume watching without POSTing again
      this.setRunning(true);
      void this.watchRun(new RunMonitor(this.client, this.monitorOptions()));
    }
  }

  // ---- server state ----------------------------------------------------

  private async refetchSnapshot(): Promise<void> {
    try {
      this.snapshot = await this.client.snapshot();
      this.setConnection(true);
    } catch (err) {
      this.fail(err);
      return;
    }
    this.setRunning(this.snapshot.status === 'running');
    this.renderObjectList();
    this.draw();
  }

  private queuedSpecs(): ObjectSpecDoc[] {
    return this.snapshot ? this.snapshot.queued : [];
  }

  private selectedSpec(): ObjectSpecDoc | null {
    const name = this.viewport.selected;
    if (name === null) return null;
    return this.queuedSpecs().find((s) => s.name === name) ?? null;
  }

  private sceneSpread(): number {
    if (!this.frames || this.frames.frames.length === 0) return 8;
    let r = 1;
    for (const f of this.frames.frames) {
      const t = translationOf(f.transform_matrix);
      r = Math.max(r, Math.hypot(t[0], t[1], t[2]));
    }
    return r;
  }

  // ---- pointer handling --------------------------------------------------

  private pointerPos(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - rect.left) * this.canvas.width) / rect.width,
      ((e.clientY - rect.top) * this.canvas.height) / rect.height,
    ];
  }

  private onPointerDown(e: PointerEvent): void {
    const [u, v] = this.pointerPos(e);
    this.canvas.setPointerCapture(e.pointerId);
    const pose = viewportPose(this.viewport);
    const k = canvasIntrinsics(this.canvas.width, this.canvas.height);

    const selected = this.selectedSpec();
    if (selected && !this.running) {
      const axis = pickAxis(pose, k, selected, u, v, this.gizmoLength());
      if (axis !== null) {
        this.drag = {
          kind: 'gizmo',
          lastX: u,
          lastY: v,
          axis,
          startX: u,
          startY: v,
          original: selected,
          draft: selected,
        };
        return;
      }
    }
    this.drag = {
      kind: 'orbit',
      lastX: u,
      lastY: v,
      axis: 0,
      startX: u,
      startY: v,
      original: emptySpec(),
      draft: emptySpec(),
    };
  }

  private onPointerMove(e: PointerEvent): void {
    if (this.drag === null) return;
    const [u, v] = this.pointerPos(e);
    if (this.drag.kind === 'orbit') {
      this.viewport = orbitBy(
        this.viewport,
        (u - this.drag.lastX) * 0.4,
        (v - this.drag.lastY) * 0.4,
      );
      this.drag.lastX = u;
      this.drag.lastY = v;
      this.draw();
      return;
    }
    const pose = viewportPose(this.viewport);
    const k = canvasIntrinsics(this.canvas.width, this.canvas.height);
    const delta = dragDelta(pose, k, this.drag.original, this.drag.axis, this.drag.startX, this.drag.startY, u, v);
    this.drag.draft = applyGizmoDrag(this.drag.original, this.viewport.gizmo, this.drag.axis, delta);
    this.draw();
  }

  private async onPointerUp(e: PointerEvent): Promise<void> {
    const drag = this.drag;
    this.drag = null;
    if (drag === null) return;
    const [u, v] = this.pointerPos(e);
    const moved = Math.hypot(u - drag.startX, v - drag.startY) > 3;

    if (drag.kind === 'gizmo' && moved) {
      await this.commitEdit(drag.original, drag.draft);
      return;
    }
    if (!moved) {
      this.onClick(u, v);
    }
    this.draw();
  }

  private onClick(u: number, v: number): void {
    const pose = viewportPose(this.viewport);
    const k = canvasIntrinsics(this.canvas.width, this.canvas.height);

    // nearest projected object center within reach picks the selection
    let best: string | null = null;
    let bestDist = 24;
    for (const spec of this.queuedSpecs()) {
      const p = projectPoint(pose, k, translationOf(spec.primitive.transform));
      if (p === null) continue;
      const d = Math.hypot(p[0] - u, p[1] - v);
      if (d < bestDist) {
        bestDist = d;
        best = spec.name;
      }
    }
    if (best !== null) {
      this.viewport = { ...this.viewport, selected: best };
      this.renderObjectList();
      this.draw();
      return;
    }

    if (this.placeArmed && !this.running) {
      void this.placeNew(pose, k, u, v);
    }
  }

  private async placeNew(
    pose: ReturnType<typeof viewportPose>,
    k: ReturnType<typeof canvasIntrinsics>,
    u: number,
    v: number,
  ): Promise<void> {
    if (!this.snapshot) return;
    const taken = [
      ...this.snapshot.queued.map((s) => s.name),
      ...this.snapshot.inserted.map((s) => s.name),
    ];
    const kind = this.kindSelect.value as PrimitiveKind;
    const spec = placeAtGround(pose, k, u, v, {
      name: uniqueName(kind, taken),
      prompt: this.promptInput.value || `a ${kind}`,
      kind,
      strategy: this.strategySelect.value as Strategy,
    });
    if (spec === null) {
      this.statusLine.textContent = 'click the ground plane to place an object';
      return;
    }
    try {
      const echoed = await this.client.placeObject(spec);
      this.snapshot.queued.push(echoed);
      this.viewport = { ...this.viewport, selected: echoed.name };
      this.setConnection(true);
    } catch (err) {
      this.fail(err);
    }
    this.renderObjectList();
    this.refreshPreviews();
    this.draw();
  }

  /** Replace a queued object's spec: remove the old name, POST the new doc. */
  private async commitEdit(original: ObjectSpecDoc, draft: ObjectSpecDoc): Promise<void> {
    if (!this.snapshot) return;
    try {
      await this.client.removeObject(original.name);
      const echoed = await this.client.placeObject(draft);
      const queued = this.snapshot.queued;
      const i = queued.findIndex((s) => s.name === original.name);
      if (i >= 0) queued[i] = echoed;
      this.setConnection(true);
    } catch (err) {
      this.fail(err);
      await this.refetchSnapshot();
    }
    this.renderObjectList();
    this.refreshPreviews();
    this.draw();
  }

  private async deleteSelected(): Promise<void> {
    const spec = this.selectedSpec();
    if (!spec || !this.snapshot) return;
    try {
      await this.client.removeObject(spec.name);
      this.snapshot.queued = this.snapshot.queued.filter((s) => s.name !== spec.name);
      this.viewport = { ...this.viewport, selected: null };
      this.setConnection(true);
    } catch (err) {
      this.fail(err);
      await this.refetchSnapshot();
    }
    this.renderObjectList();
    this.refreshPreviews();
    this.draw();
  }

  // ---- run + monitor -----------------------------------------------------

  private monitorOptions() {
    return {
      onStatus: (s: JobStatus) => this.showProgress(s),
      onConnection: (up: boolean) => this.setConnection(up),
    };
  }

  private async launchRun(): Promise<void> {
    const monitor = new RunMonitor(this.client, this.monitorOptions());
    try {
      await monitor.start();
    } catch (err) {
      this.fail(err);
      if (err instanceof ApiError && err.status === 409) {
        await this.refetchSnapshot(); // someone else started a run; catch up
        void this.watchRun(monitor);
      }
      return;
    }
    this.setRunning(true);
    void this.watchRun(monitor);
  }

  private async watchRun(monitor: RunMonitor): Promise<void> {
    let final: JobStatus;
    try {
      final = await monitor.watch();
    } catch (err) {
      this.fail(err);
      this.setRunning(false);
      return;
    }
    this.setRunning(false);
    await this.refetchSnapshot();
    this.refreshPreviews();
    await this.refreshReport();
    if (final.status === 'failed') {
      this.banner.style.display = 'block';
      this.banner.textContent = `run failed: ${final.error ?? 'unknown error'} — fix the issue and press Run again to resume`;
      this.runButton.textContent = 'Resume run';
    } else {
      this.runButton.textContent = 'Run pipeline';
    }
  }

  private showProgress(status: JobStatus): void {
    this.progressFill.style.width = `${Math.round(status.fraction * 100)}%`;
    this.progressText.textContent =
      status.status === 'running'
        ? `${status.object_name} (${status.object_index + 1}/${status.total}): ${stageLabel(status)}`
        : status.status;
  }

  private setRunning(running: boolean): void {
    this.running = running;
    for (const el of [
      this.placeButton,
      this.deleteButton,
      this.runButton,
      this.kindSelect,
      this.strategySelect,
    ]) {
      el.disabled = running;
    }
    if (running) this.placeArmed = false;
  }

  private async refreshReport(): Promise<void> {
    let csv: string;
    try {
      csv = await this.client.report();
    } catch (err) {
      this.fail(err);
      return;
    }
    const rows = parseReport(csv);
    this.reportBox.querySelector('table')?.remove();
    if (rows.length === 0) return;
    const table = document.createElement('table');
    table.style.cssText = 'font-size:12px;border-collapse:collapse;width:100%';
    const head = table.insertRow();
    for (const name of ['Object', 'Stylize (s)', 'Mesh (s)', 'Scene (min)', 'Total (min)']) {
      const th = document.createElement('th');
      th.textContent = name;
      th.style.cssText = 'text-align:left;border-bottom:1px solid #444;padding:2px 6px';
      head.appendChild(th);
    }
    for (const row of rows) {
      const tr = table.insertRow();
      for (const val of [
        row.object,
        row.stylizeSeconds.toFixed(3),
        row.meshSeconds.toFixed(3),
        row.nerfMinutes.toFixed(3),
        row.totalMinutes.toFixed(3),
      ]) {
        const td = tr.insertCell();
        td.textContent = val;
        td.style.padding = '2px 6px';
      }
    }
    this.reportBox.appendChild(table);
  }

  private refreshPreviews(): void {
    const view = Math.max(0, Number(this.viewInput.value) | 0);
    const bust = `&t=${Date.now()}`;
    this.beforeImg.src = this.client.previewUrl(view, 'raw') + bust;
    this.afterImg.src = this.client.previewUrl(view, 'composite') + bust;
  }

  // ---- drawing -------------------------------------------------------------

  private gizmoLength(): number {
    return Math.max(0.5, this.viewport.distance * 0.12);
  }

  private draw(): void {
    const { ctx, canvas } = this;
    const pose = viewportPose(this.viewport);
    const k = canvasIntrinsics(canvas.width, canvas.height);
    ctx.clearRect(0, 0, canvas.width, canvas.height);

    strokeLines(ctx, projectSegments(pose, k, groundGrid()), '#262a33');
    strokeLines(ctx, projectSegments(pose, k, this.frustaSegments), '#4a5568');

    for (const spec of this.snapshot?.inserted ?? []) {
      strokeLines(ctx, projectSegments(pose, k, primitiveWireframe(spec)), '#7a6');
    }
    for (const spec of this.queuedSpecs()) {
      const isSelected = spec.name === this.viewport.selected;
      const shown = this.drag?.kind === 'gizmo' && isSelected ? this.drag.draft : spec;
      strokeLines(
        ctx,
        projectSegments(pose, k, primitiveWireframe(shown)),
        isSelected ? '#ffd166' : '#8ab4ff',
        isSelected ? 2 : 1,
      );
      if (isSelected) {
        for (const handle of gizmoHandles(shown, this.gizmoLength())) {
          strokeLines(ctx, projectSegments(pose, k, [handle.segment]), AXIS_COLORS[handle.axis], 2);
        }
      }
    }
  }

  private renderObjectList(): void {
    if (!this.snapshot) return;
    const lines: string[] = [];
    for (const s of this.snapshot.inserted) {
      lines.push(`✓ ${s.name} — inserted`);
    }
    for (const s of this.snapshot.queued) {
      const mark = s.name === this.viewport.selected ? '▶' : '•';
      lines.push(`${mark} ${s.name} (${s.primitive.kind}, ${s.strategy}) — "${s.prompt}"`);
    }
    this.objectList.textContent = lines.length ? lines.join('\n') : 'nothing placed yet';
    this.objectList.style.whiteSpace = 'pre-line';
    this.statusLine.textContent = this.snapshot
      ? `scene "${this.snapshot.scene_id}": ${this.snapshot.frames} frames, ` +
        `${this.snapshot.inserted.length} inserted, ${this.snapshot.queued.length} queued`
      : '';
  }

  private refreshGizmoButtons(): void {
    for (const mode of ['translate', 'scale'] as const) {
      this.gizmoButtons[mode].style.background =
        this.viewport.gizmo === mode ? '#3a6' : '';
    }
  }

  // ---- errors ---------------------------------------------------------------

  private setConnection(up: boolean): void {
    if (up) {
      if (this.banner.textContent?.startsWith('connection lost')) {
        this.banner.style.display = 'none';
      }
    } else {
      this.banner.style.display = 'block';
      this.banner.textContent = 'connection lost — retrying…';
    }
  }

  private fail(err: unknown): void {
    if (err instanceof ConnectionError) {
      this.setConnection(false);
      return;
    }
    this.banner.style.display = 'block';
    this.banner.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    console.error(err);
  }
}

function panel(parent: HTMLElement, title: string): HTMLDivElement {
  const box = document.createElement('div');
  box.style.cssText =
    'background:#23262e;border-radius:6px;padding:10px;display:flex;flex-direction:column;gap:6px';
  const h = document.createElement('div');
  h.textContent = title;
  h.style.cssText = 'font-weight:600;font-size:13px;color:#bcd';
  box.appendChild(h);
  parent.appendChild(box);
  return box;
}

function label(text: string): HTMLSpanElement {
  const span = document.createElement('span');
  span.textContent = text;
  span.style.cssText = 'font-size:11px;color:#778';
  return span;
}

function emptySpec(): ObjectSpecDoc {
  return {
    name: '',
    prompt: '',
    strategy: 'AddNewImages',
    primitive: {
      kind: 'box',
      transform: [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
      ],
      scale: [1, 1, 1],
    },
  };
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get('api') ?? 'http://127.0.0.1:8000';
  const scene = params.get('scene') ?? 'default';
  const root = document.getElementById('app');
  if (root === null) throw new Error('missing #app element');
  const editor = new SceneEditor(new SceneClient(base, scene), root);
  void editor.boot();
}

if (typeof window !== 'undefined' && typeof document !== 'undefined') {
  if (document.readyState === 'loading') {
    document.addEventListener('DOMContentLoaded', () => boot());
  } else {
    boot();
  }
}
