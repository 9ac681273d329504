/**
 * Density color ramp: black over red and yellow to white, interpolated
 * linearly between the four stops. Class colors for the scatter points live
 * here too so every panel shares one palette.
 */

export type Rgb = [number, number, number];

const STOPS: Array<[number, Rgb]> = [
  [0, [0, 0, 0]],
  [1 / 3, [255, 0, 0]],
  [2 / 3, [255, 255, 0]],
  [1, [255, 255, 255]],
];

export function heatColor(t: number): Rgb {
  const x = Math.min(1, Math.max(0, t));
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    if (x <= t1) {
      const [t0, c0] = STOPS[i - 1];
      const f = t1 === t0 ? 0 : (x - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
      ];
    }
  }
  return STOPS[STOPS.length - 1][1];
}

export function cssHeatColor(t: number): string {
  const [r, g, b] = heatColor(t);
  return `rgb(${r},${g},${b})`;
}

const CLASS_PALETTE = [
  "#2ca02c", // green
  "#ff7f0e", // orange
  "#1f77b4",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#17becf",
  "#bcbd22",
];

export function classColor(index: number): string {
  return CLASS_PALETTE[index % CLASS_PALETTE.length];
}

export const MEMBER_COLOR = "#d62728";
export const NON_MEMBER_COLOR = "#7f8ea3";
