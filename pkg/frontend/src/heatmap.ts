/** Heat-map overlay: density grid cells mapped through the black-red-yellow-
 * white ramp. Counts of zero stay black, the densest cell is white. */

import type { Density } from "./api.js";
import { cssHeatColor } from "./colormap.js";
import type { DataScales } from "./scatter.js";

export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  density: Density,
  scales: DataScales,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#000000";
  ctx.fillRect(0, 0, width, height);
  const [xLo, xHi] = density.x_extent;
  const [yLo, yHi] = density.y_extent;
  const cellW = (xHi - xLo) / density.cols || 1;
  const cellH = (yHi - yLo) / density.rows || 1;
  let max = 0;
  for (const col of density.counts) for (const v of col) max = Math.max(max, v);
  for (let c = 0; c < density.cols; c++) {
    for (let r = 0; r < density.rows; r++) {
      const t = max > 0 ? density.counts[c][r] / max : 0;
      ctx.fillStyle = cssHeatColor(t);
      const px0 = scales.x.apply(xLo + c * cellW);
      const px1 = scales.x.apply(xLo + (c + 1) * cellW);
      const py0 = scales.y.apply(yLo + r * cellH);
      const py1 = scales.y.apply(yLo + (r + 1) * cellH);
      ctx.fillRect(
        Math.min(px0, px1), Math.min(py0, py1),
        Math.abs(px1 - px0) + 0.5, Math.abs(py1 - py0) + 0.5,
      );
    }
  }
}
