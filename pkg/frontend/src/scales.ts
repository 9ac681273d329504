/** Linear data<->pixel mapping and brush-rectangle conversion. */

export interface Extent {
  lo: number;
  hi: number;
}

export class LinearScale {
  constructor(readonly domain: Extent, readonly range: Extent) {}

  apply(v: number): number {
    const { domain, range } = this;
    const span = domain.hi - domain.lo;
    if (span === 0) return (range.lo + range.hi) / 2;
    return range.lo + ((v - domain.lo) / span) * (range.hi - range.lo);
  }

  invert(p: number): number {
    const { domain, range } = this;
    const span = range.hi - range.lo;
    if (span === 0) return (domain.lo + domain.hi) / 2;
    return domain.lo + ((p - range.lo) / span) * (domain.hi - domain.lo);
  }
}

export interface DataRect {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

/** Pixel brush corners -> sorted half-open data rectangle. */
export function brushToDataRect(
  px0: number, py0: number, px1: number, py1: number,
  xScale: LinearScale, yScale: LinearScale,
): DataRect {
  const xa = xScale.invert(px0);
  const xb = xScale.invert(px1);
  const ya = yScale.invert(py0);
  const yb = yScale.invert(py1);
  return {
    x0: Math.min(xa, xb),
    x1: Math.max(xa, xb),
    y0: Math.min(ya, yb),
    y1: Math.max(ya, yb),
  };
}

/** Pad a degenerate extent so scales stay invertible. */
export function padExtent(lo: number, hi: number, fraction = 0.04): Extent {
  if (hi === lo) return { lo: lo - 0.5, hi: hi + 0.5 };
  const pad = (hi - lo) * fraction;
  return { lo: lo - pad, hi: hi + pad };
}
