/** App assembly: four-panel layout against the session API.
 *
 * Left: the data space (scatter or heat map) with rectangle brushing.
 * Right: two linked model-space panels with selectable metric axes.
 * Bottom: performance panel with the always-visible auto-selected baseline,
 * the CV button, the errors filter and the raw-data table of the selection.
 */

import { ApiClient, apiBaseFromLocation } from "./api.js";
import type { FrameResponse, LibraryInfo, ModelSpaceResponse, SessionInfo } from "./api.js";
import { classColor } from "./colormap.js";
import { drawHeatmap } from "./heatmap.js";
import { drawModelSpace, drawUnavailable, hitTest, modelScales } from "./modelspace.js";
import type { ModelScales } from "./modelspace.js";
import { brushToDataRect } from "./scales.js";
import { drawBrush, drawDataSpace, frameScales } from "./scatter.js";
import type { DataScales } from "./scatter.js";
import { MutationQueue, RevisionGate } from "./state.js";
import { renderSelectionTable } from "./table.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

interface PanelState {
  axisX: string;
  axisY: string;
  response: ModelSpaceResponse | null;
  scales: ModelScales | null;
  hovered: number | null;
}

class App {
  private api = new ApiClient(apiBaseFromLocation(window.location.search));
  private gate = new RevisionGate();
  private mutations = new MutationQueue();
  private library!: LibraryInfo;
  private session!: SessionInfo;
  private frameResponse: FrameResponse | null = null;
  private dataScales: DataScales | null = null;
  private heatmapOn = false;
  private errorsFilterOn = false;
  private selectionIds: number[] = [];
  private panels: PanelState[] = [
    { axisX: "auc_w", axisY: "div_q", response: null, scales: null, hovered: null },
    { axisX: "acc_local", axisY: "acc", response: null, scales: null, hovered: null },
  ];
  private brush: { x0: number; y0: number; x1: number; y1: number } | null = null;

  async boot(): Promise<void> {
    this.library = await this.api.libraryInfo();
    this.session = await this.api.createSession({});
    this.populateControls();
    this.wireEvents();
    await this.refreshAll();
    this.status(`session ${this.session.session_id}: ${this.library.n_models} models, ` +
      `${this.library.n_test} test points`);
  }

  private populateControls(): void {
    const attrSel = $<HTMLSelectElement>("attribute-select");
    for (const a of this.library.attributes) {
      const opt = document.createElement("option");
      opt.value = `attribute:${a.name}`;
      opt.textContent = a.name;
      attrSel.appendChild(opt);
    }
    const modeSel = $<HTMLSelectElement>("mode-select");
    for (const mode of ["attribute", "pca", "mds", "tsne"]) {
      const opt = document.createElement("option");
      opt.value = mode;
      opt.textContent = mode;
      modeSel.appendChild(opt);
    }
    for (const [i, panel] of this.panels.entries()) {
      for (const axis of ["x", "y"] as const) {
        const sel = $<HTMLSelectElement>(`panel${i}-${axis}`);
        for (const metric of this.library.metric_names) {
          const opt = document.createElement("option");
          opt.value = metric;
          opt.textContent = metric;
          sel.appendChild(opt);
        }
        sel.value = axis === "x" ? panel.axisX : panel.axisY;
      }
    }
  }

  private currentMode(): string {
    const mode = $<HTMLSelectElement>("mode-select").value;
    return mode === "attribute" ? $<HTMLSelectElement>("attribute-select").value : mode;
  }

  private wireEvents(): void {
    $<HTMLSelectElement>("mode-select").onchange = () => void this.changeMode();
    $<HTMLSelectElement>("attribute-select").onchange = () => void this.changeMode();
    $<HTMLInputElement>("heatmap-toggle").onchange = (e) => {
      this.heatmapOn = (e.target as HTMLInputElement).checked;
      this.renderDataPanel();
    };
    $<HTMLInputElement>("errors-toggle").onchange = (e) => {
      const on = (e.target as HTMLInputElement).checked;
      void this.mutate(async () => {
        const resp = await this.api.errorsFilter(this.session.session_id, on);
        this.errorsFilterOn = resp.errors_filter;
        return resp.revision;
      });
    };
    $<HTMLButtonElement>("cv-button").onclick = () => {
      void this.api.cv(this.session.session_id).then((resp) => {
        $("cv-value").textContent =
          `${(resp.accuracy_cv * 100).toFixed(2)}% (${resp.folds}-fold)`;
      });
    };
    $<HTMLButtonElement>("reset-button").onclick = () => {
      void this.mutate(async () => (await this.api.reset(this.session.session_id)).revision);
    };
    this.wireBrush();
    this.panels.forEach((_, i) => this.wireModelPanel(i));
  }

  private async changeMode(): Promise<void> {
    await this.mutate(async () => {
      const resp = await this.api.frame(this.session.session_id, this.currentMode());
      this.applyFrame(resp);
      return resp.revision;
    });
  }

  /** Run one mutation at a time; converge every panel to the new revision. */
  private mutate(job: () => Promise<number>): Promise<void> {
    return this.mutations.enqueue(async () => {
      try {
        await job();
        await this.refreshAll();
      } catch (err) {
        this.status(`error: ${(err as Error).message} (state unchanged, retry the action)`);
      }
    });
  }

  private async refreshAll(): Promise<void> {
    const frame = await this.api.frame(this.session.session_id);
    this.applyFrame(frame);
    await Promise.all(this.panels.map((_, i) => this.refreshModelPanel(i)));
    await this.refreshTable();
    this.renderPerf();
  }

  private applyFrame(resp: FrameResponse): void {
    if (!this.gate.accept(resp.revision)) return; // stale
    this.frameResponse = resp;
    this.renderDataPanel();
    this.renderPerf();
    $("revision-value").textContent = String(this.gate.current());
  }

  private renderDataPanel(): void {
    if (!this.frameResponse) return;
    const canvas = $<HTMLCanvasElement>("data-canvas");
    const ctx = canvas.getContext("2d")!;
    const { width, height } = canvas;
    this.dataScales = frameScales(this.frameResponse.frame, width, height);
    if (this.heatmapOn) {
      const grid = this.errorsFilterOn
        ? this.frameResponse.density_errors
        : this.frameResponse.density;
      drawHeatmap(ctx, grid, this.dataScales, width, height);
    } else {
      drawDataSpace(ctx, this.frameResponse.frame, this.library.classes,
                    this.dataScales, width, height);
    }
    const legend = $("class-legend");
    legend.innerHTML = "";
    this.library.classes.forEach((name, i) => {
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.style.background = classColor(i);
      chip.textContent = name;
      legend.appendChild(chip);
    });
  }

  private wireBrush(): void {
    const overlay = $<HTMLCanvasElement>("brush-canvas");
    const ctx = overlay.getContext("2d")!;
    let dragging = false;
    const pos = (ev: MouseEvent) => {
      const r = overlay.getBoundingClientRect();
      return { x: ev.clientX - r.left, y: ev.clientY - r.top };
    };
    overlay.onmousedown = (ev) => {
      const p = pos(ev);
      dragging = true;
      this.brush = { x0: p.x, y0: p.y, x1: p.x, y1: p.y };
    };
    overlay.onmousemove = (ev) => {
      if (!dragging || !this.brush) return;
      const p = pos(ev);
      this.brush.x1 = p.x;
      this.brush.y1 = p.y;
      ctx.clearRect(0, 0, overlay.width, overlay.height);
      drawBrush(ctx, this.brush.x0, this.brush.y0, this.brush.x1, this.brush.y1);
    };
    overlay.onmouseup = () => {
      if (!dragging || !this.brush || !this.dataScales) return;
      dragging = false;
      const b = this.brush;
      this.brush = null;
      ctx.clearRect(0, 0, overlay.width, overlay.height);
      const rect = brushToDataRect(b.x0, b.y0, b.x1, b.y1,
                                   this.dataScales.x, this.dataScales.y);
      void this.mutate(async () => {
        const resp = await this.api.selectRect(this.session.session_id, rect);
        this.selectionIds = resp.selected_ids;
        this.status(`selected ${resp.selection_size} points ` +
          `(${resp.effective_size} after filter)`);
        return resp.revision;
      });
    };
  }

  private wireModelPanel(i: number): void {
    const canvas = $<HTMLCanvasElement>(`panel${i}-canvas`);
    const tooltip = $(`panel${i}-tooltip`);
    for (const axis of ["x", "y"] as const) {
      $<HTMLSelectElement>(`panel${i}-${axis}`).onchange = () => {
        const panel = this.panels[i];
        panel.axisX = $<HTMLSelectElement>(`panel${i}-x`).value;
        panel.axisY = $<HTMLSelectElement>(`panel${i}-y`).value;
        void this.mutate(async () => {
          await this.refreshModelPanel(i);
          return this.gate.current();
        });
      };
    }
    canvas.onmousemove = (ev) => {
      const panel = this.panels[i];
      if (!panel.response?.available || !panel.scales) return;
      const r = canvas.getBoundingClientRect();
      const hit = hitTest(panel.response.points, panel.scales,
                          ev.clientX - r.left, ev.clientY - r.top);
      if (hit !== panel.hovered) {
        panel.hovered = hit;
        this.renderModelPanel(i);
        if (hit !== null) {
          const point = panel.response.points.find((p) => p.model_id === hit)!;
          tooltip.textContent =
            `#${point.model_id} ${point.spec_id} ` +
            `(${panel.response.axis_x}=${point.x.toFixed(3)}, ` +
            `${panel.response.axis_y}=${point.y.toFixed(3)})` +
            `${point.is_member ? " — in ensemble" : ""}`;
        } else {
          tooltip.textContent = "";
        }
      }
    };
    canvas.onclick = (ev) => {
      const panel = this.panels[i];
      if (!panel.response?.available || !panel.scales) return;
      const r = canvas.getBoundingClientRect();
      const hit = hitTest(panel.response.points, panel.scales,
                          ev.clientX - r.left, ev.clientY - r.top);
      if (hit === null) return;
      void this.mutate(async () => {
        const resp = await this.api.toggle(this.session.session_id, hit);
        const verdict = resp.guard.ok ? "" :
          resp.applied
            ? ` — warning: test accuracy dropped ${(resp.guard.delta * 100).toFixed(2)}%`
            : ` — rejected by strict guard (Δ ${(resp.guard.delta * 100).toFixed(2)}%)`;
        this.status(`${resp.action} model #${hit}${verdict}`);
        return resp.revision;
      });
    };
  }

  private async refreshModelPanel(i: number): Promise<void> {
    const panel = this.panels[i];
    const canvas = $<HTMLCanvasElement>(`panel${i}-canvas`);
    const ctx = canvas.getContext("2d")!;
    try {
      const resp = await this.api.modelSpace(this.session.session_id,
                                             panel.axisX, panel.axisY);
      if (!this.gate.accept(resp.revision)) return;
      panel.response = resp;
      this.renderModelPanel(i);
    } catch (err) {
      drawUnavailable(ctx, canvas.width, canvas.height, (err as Error).message);
    }
  }

  private renderModelPanel(i: number): void {
    const panel = this.panels[i];
    const canvas = $<HTMLCanvasElement>(`panel${i}-canvas`);
    const ctx = canvas.getContext("2d")!;
    if (!panel.response) return;
    if (!panel.response.available) {
      drawUnavailable(ctx, canvas.width, canvas.height, panel.response.reason);
      return;
    }
    panel.scales = modelScales(panel.response.points, canvas.width, canvas.height);
    drawModelSpace(ctx, panel.response.points, panel.scales, canvas.width, canvas.height,
                   panel.response.axis_x, panel.response.axis_y, panel.hovered);
  }

  private renderPerf(): void {
    if (!this.frameResponse) return;
    const p = this.frameResponse.perf_panel;
    const fmt = (v: number) => `${(v * 100).toFixed(2)}%`;
    $("perf-current").textContent =
      `${fmt(p.current.accuracy_test)} test acc · ` +
      `${fmt(p.current.auc_weighted_test)} AUC · ${fmt(p.current.accuracy_cv)} CV`;
    $("perf-baseline").textContent =
      `${fmt(p.initial_auto.accuracy_test)} test acc · ` +
      `${fmt(p.initial_auto.auc_weighted_test)} AUC · ` +
      `${fmt(p.initial_auto.accuracy_cv)} CV ` +
      `(members ${p.initial_members.join(", ")})`;
    $("perf-members").textContent = p.members
      .map((m, idx) => `#${m} ${p.member_specs[idx]}`)
      .join("  |  ");
  }

  private async refreshTable(): Promise<void> {
    const host = $("selection-table");
    if (!this.selectionIds.length) {
      renderSelectionTable(host, [], []);
      return;
    }
    const resp = await this.api.libraryRows(this.selectionIds.slice(0, 200));
    renderSelectionTable(host, resp.rows,
                         this.library.attributes.map((a) => a.name).slice(0, 6));
  }

  private status(text: string): void {
    $("status-line").textContent = text;
  }
}

new App().boot().catch((err) => {
  document.body.innerHTML =
    `<pre style="color:#e66">failed to start: ${(err as Error).message}\n` +
    `Is the session server running? Pass ?api=http://host:port if it is elsewhere.</pre>`;
});
