/** Canvas rendering of the data space: class-colored points, white-outlined
 * errors, side-by-side class bins with labeled dividers in attribute mode. */

import type { Frame } from "./api.js";
import { classColor } from "./colormap.js";
import { LinearScale, padExtent } from "./scales.js";

export interface DataScales {
  x: LinearScale;
  y: LinearScale;
}

export function frameScales(frame: Frame, width: number, height: number,
                            margin = 28): DataScales {
  const attributeMode = frame.mode.startsWith("attribute:");
  const xDomain = attributeMode
    ? { lo: frame.x_extent[0], hi: frame.x_extent[1] }
    : padExtent(frame.x_extent[0], frame.x_extent[1]);
  const yDomain = attributeMode
    ? { lo: frame.y_extent[0], hi: frame.y_extent[1] }
    : padExtent(frame.y_extent[0], frame.y_extent[1]);
  return {
    x: new LinearScale(xDomain, { lo: margin, hi: width - 8 }),
    y: new LinearScale(yDomain, { lo: height - 22, hi: 10 }), // canvas y grows downward
  };
}

export function drawDataSpace(
  ctx: CanvasRenderingContext2D,
  frame: Frame,
  classes: string[],
  scales: DataScales,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11151c";
  ctx.fillRect(0, 0, width, height);

  if (frame.mode.startsWith("attribute:")) {
    drawClassBins(ctx, classes, scales, height);
  }

  const r = frame.points.length > 2000 ? 1.6 : 2.4;
  for (const p of frame.points) {
    const px = scales.x.apply(p.x);
    const py = scales.y.apply(p.y);
    ctx.beginPath();
    ctx.arc(px, py, r, 0, Math.PI * 2);
    ctx.fillStyle = classColor(p.predicted_class);
    ctx.fill();
    if (!p.correct) {
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1.1;
      ctx.stroke();
    }
  }
}

function drawClassBins(ctx: CanvasRenderingContext2D, classes: string[],
                       scales: DataScales, height: number): void {
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  for (let c = 0; c < classes.length; c++) {
    const left = scales.x.apply(c);
    const right = scales.x.apply(c + 1);
    if (c > 0) {
      ctx.strokeStyle = "#3c4454";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(left, 6);
      ctx.lineTo(left, height - 20);
      ctx.stroke();
    }
    ctx.fillStyle = "#aab4c4";
    ctx.fillText(classes[c], (left + right) / 2, height - 6);
  }
}

export function drawBrush(
  ctx: CanvasRenderingContext2D,
  px0: number, py0: number, px1: number, py1: number,
): void {
  ctx.strokeStyle = "#6fb3ff";
  ctx.fillStyle = "rgba(111,179,255,0.15)";
  ctx.lineWidth = 1;
  const x = Math.min(px0, px1);
  const y = Math.min(py0, py1);
  const w = Math.abs(px1 - px0);
  const h = Math.abs(py1 - py0);
  ctx.fillRect(x, y, w, h);
  ctx.strokeRect(x, y, w, h);
}
