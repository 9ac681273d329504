/** Model-space scatter: one dot per library model, members color-distinguished,
 * hover reveals the model's family and parameters, click toggles membership. */

import type { ModelPoint } from "./api.js";
import { MEMBER_COLOR, NON_MEMBER_COLOR } from "./colormap.js";
import { LinearScale, padExtent } from "./scales.js";

export interface ModelScales {
  x: LinearScale;
  y: LinearScale;
}

export function modelScales(points: ModelPoint[], width: number, height: number): ModelScales {
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xd = padExtent(Math.min(...xs), Math.max(...xs), 0.08);
  const yd = padExtent(Math.min(...ys), Math.max(...ys), 0.08);
  return {
    x: new LinearScale(xd, { lo: 34, hi: width - 10 }),
    y: new LinearScale(yd, { lo: height - 24, hi: 10 }),
  };
}

export function drawModelSpace(
  ctx: CanvasRenderingContext2D,
  points: ModelPoint[],
  scales: ModelScales,
  width: number,
  height: number,
  axisX: string,
  axisY: string,
  hovered: number | null,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#161b24";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#8b97a9";
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(axisX, width / 2, height - 8);
  ctx.save();
  ctx.translate(12, height / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(axisY, 0, 0);
  ctx.restore();

  for (const p of points) {
    const px = scales.x.apply(p.x);
    const py = scales.y.apply(p.y);
    ctx.beginPath();
    ctx.arc(px, py, p.model_id === hovered ? 6 : 4, 0, Math.PI * 2);
    ctx.fillStyle = p.is_member ? MEMBER_COLOR : NON_MEMBER_COLOR;
    ctx.fill();
    if (p.is_member) {
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1;
      ctx.stroke();
    }
  }
}

export function drawUnavailable(
  ctx: CanvasRenderingContext2D, width: number, height: number, reason: string,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#161b24";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#c7a24a";
  ctx.font = "13px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText("no selection", width / 2, height / 2 - 8);
  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#8b97a9";
  ctx.fillText(reason, width / 2, height / 2 + 10);
}

/** Nearest model within `radius` pixels of the cursor, or null. */
export function hitTest(
  points: ModelPoint[], scales: ModelScales, px: number, py: number, radius = 7,
): number | null {
  let best: number | null = null;
  let bestDist = radius * radius;
  for (const p of points) {
    const dx = scales.x.apply(p.x) - px;
    const dy = scales.y.apply(p.y) - py;
    const d = dx * dx + dy * dy;
    if (d <= bestDist) {
      bestDist = d;
      best = p.model_id;
    }
  }
  return best;
}
