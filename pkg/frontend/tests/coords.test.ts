import { describe, expect, it } from "vitest";

import {
  boxInsideImage,
  dragToBox,
  fitTransform,
  imageToScreen,
  panBy,
  screenToImage,
  zoomAt,
  type ViewTransform,
} from "../src/coords.js";

// Small deterministic PRNG so the round-trip sweep is reproducible.
function mulberry32(seed: number) {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("coordinate round trip", () => {
  it("screen->image->screen is identity within 0.5 px at every zoom level", () => {
    const rand = mulberry32(42);
    const zooms = [0.1, 0.25, 0.5, 1, 1.7, 3, 8, 16];
    for (const scale of zooms) {
      for (let i = 0; i < 500; i++) {
        const t: ViewTransform = {
          scale,
          panX: (rand() - 0.5) * 2000,
          panY: (rand() - 0.5) * 2000,
        };
        const screen = { x: rand() * 1920, y: rand() * 1080 };
        const back = imageToScreen(t, screenToImage(t, screen));
        expect(Math.abs(back.x - screen.x)).toBeLessThanOrEqual(0.5);
        expect(Math.abs(back.y - screen.y)).toBeLessThanOrEqual(0.5);
        // Far tighter in practice: exact up to float error.
        expect(Math.abs(back.x - screen.x)).toBeLessThan(1e-9 * Math.max(1, Math.abs(screen.x)) + 1e-6);
      }
    }
  });

  it("image->screen->image round trips too", () => {
    const rand = mulberry32(7);
    for (let i = 0; i < 1000; i++) {
      const t: ViewTransform = { scale: 0.05 + rand() * 10, panX: rand() * 500, panY: rand() * 500 };
      const p = { x: rand() * 4000, y: rand() * 4000 };
      const back = screenToImage(t, imageToScreen(t, p));
      expect(Math.abs(back.x - p.x)).toBeLessThanOrEqual(0.5);
      expect(Math.abs(back.y - p.y)).toBeLessThanOrEqual(0.5);
    }
  });
});

describe("fitTransform", () => {
  it("letterboxes and centers", () => {
    const t = fitTransform(1000, 500, 500, 500);
    expect(t.scale).toBe(0.5);
    expect(t.panX).toBe(0);
    expect(t.panY).toBe(125);
    const corner = imageToScreen(t, { x: 1000, y: 500 });
    expect(corner.x).toBe(500);
    expect(corner.y).toBe(375);
  });

  it("respects the no-upscale flag", () => {
    expect(fitTransform(100, 100, 500, 500).scale).toBe(5);
    expect(fitTransform(100, 100, 500, 500, false).scale).toBe(1);
  });
});

describe("zoomAt", () => {
  it("keeps the anchor point fixed", () => {
    const t: ViewTransform = { scale: 1, panX: 13, panY: -8 };
    const anchor = { x: 320, y: 200 };
    const before = screenToImage(t, anchor);
    const after = screenToImage(zoomAt(t, 2.5, anchor), anchor);
    expect(Math.abs(after.x - before.x)).toBeLessThan(1e-9);
    expect(Math.abs(after.y - before.y)).toBeLessThan(1e-9);
  });

  it("composes with pan", () => {
    const t = panBy(zoomAt({ scale: 2, panX: 0, panY: 0 }, 0.5, { x: 0, y: 0 }), 10, 20);
    expect(t.scale).toBe(1);
    expect(t.panX).toBe(10);
    expect(t.panY).toBe(20);
  });
});

describe("dragToBox", () => {
  it("normalizes corners and snaps to image bounds", () => {
    const box = dragToBox({ x: 120, y: -30 }, { x: -10, y: 40 }, 100, 100);
    expect(box).toEqual({ x_min: 0, y_min: 0, x_max: 100, y_max: 40 });
    expect(boxInsideImage(box!, 100, 100)).toBe(true);
  });

  it("rejects degenerate drags", () => {
    expect(dragToBox({ x: 5, y: 5 }, { x: 5, y: 80 }, 100, 100)).toBeNull();
    expect(dragToBox({ x: -50, y: 10 }, { x: -20, y: 60 }, 100, 100)).toBeNull();
  });
});
