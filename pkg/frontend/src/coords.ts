// Screen <-> image coordinate mapping for the annotation canvas.
//
// The view is a uniform scale plus a pan offset; the inverse mapping is
// exact, so a screen->image->screen round trip is the identity to floating
// point precision (well inside the 0.5 px contract) at any zoom.

import type { Box, Point } from "./types.js";

export interface ViewTransform {
  scale: number;
  panX: number;
  panY: number;
}

export function imageToScreen(t: ViewTransform, p: Point): Point {
  return { x: t.panX + p.x * t.scale, y: t.panY + p.y * t.scale };
}

export function screenToImage(t: ViewTransform, p: Point): Point {
  return { x: (p.x - t.panX) / t.scale, y: (p.y - t.panY) / t.scale };
}

/** Letterbox an image into a viewport: largest uniform scale that fits,
 * centered on both axes. Never upscales above 1 unless `allowUpscale`. */
export function fitTransform(
  imageW: number,
  imageH: number,
  viewW: number,
  viewH: number,
  allowUpscale = true,
): ViewTransform {
  let scale = Math.min(viewW / imageW, viewH / imageH);
  if (!allowUpscale) scale = Math.min(scale, 1);
  return {
    scale,
    panX: (viewW - imageW * scale) / 2,
    panY: (viewH - imageH * scale) / 2,
  };
}

/** Zoom by `factor` keeping the given screen point fixed. */
export function zoomAt(t: ViewTransform, factor: number, anchor: Point): ViewTransform {
  const scale = t.scale * factor;
  return {
    scale,
    panX: anchor.x - (anchor.x - t.panX) * factor,
    panY: anchor.y - (anchor.y - t.panY) * factor,
  };
}

export function panBy(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { scale: t.scale, panX: t.panX + dx, panY: t.panY + dy };
}

export function clampPointToImage(p: Point, width: number, height: number): Point {
  return {
    x: Math.min(Math.max(p.x, 0), width),
    y: Math.min(Math.max(p.y, 0), height),
  };
}

/** Normalize two drag corners into a box snapped to the image bounds;
 * null if the snapped box would be degenerate. */
export function dragToBox(a: Point, b: Point, width: number, height: number): Box | null {
  const p1 = clampPointToImage(a, width, height);
  const p2 = clampPointToImage(b, width, height);
  const box = {
    x_min: Math.min(p1.x, p2.x),
    y_min: Math.min(p1.y, p2.y),
    x_max: Math.max(p1.x, p2.x),
    y_max: Math.max(p1.y, p2.y),
  };
  if (box.x_min >= box.x_max || box.y_min >= box.y_max) return null;
  return box;
}

export function boxInsideImage(box: Box, width: number, height: number): boolean {
  return (
    box.x_min >= 0 &&
    box.y_min >= 0 &&
    box.x_max <= width &&
    box.y_max <= height &&
    box.x_min < box.x_max &&
    box.y_min < box.y_max
  );
}
