import { describe, expect, it } from 'vitest';

import { squarify, type Rect, type TreemapItem, type TreemapRect } from '../src/treemap';

// Small deterministic generator so every run sees the same "random" shapes.
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

function randomItems(rand: () => number, n: number): TreemapItem[] {
  return Array.from({ length: n }, (_, i) => ({ id: `n${i}`, value: 0.05 + rand() }));
}

function area(r: Rect): number {
  return r.width * r.height;
}

function overlap(a: TreemapRect, b: TreemapRect): number {
  const w = Math.min(a.x + a.width, b.x + b.width) - Math.max(a.x, b.x);
  const h = Math.min(a.y + a.height, b.y + b.height) - Math.max(a.y, b.y);
  return Math.max(0, w) * Math.max(0, h);
}

describe('squarify', () => {
  const bounds: Rect = { x: 0, y: 0, width: 1000, height: 620 };

  it('returns one rectangle per item with area proportional to value', () => {
    for (let seed = 1; seed <= 20; seed++) {
      const rand = lcg(seed);
      const items = randomItems(rand, 1 + Math.floor(rand() * 24));
      const rects = squarify(items, bounds);
      expect(rects.map((r) => r.id).sort()).toEqual(items.map((i) => i.id).sort());

      const total = items.reduce((s, i) => s + i.value, 0);
      const byId = new Map(items.map((i) => [i.id, i.value]));
      for (const rect of rects) {
        const expected = (byId.get(rect.id)! / total) * area(bounds);
        expect(Math.abs(area(rect) - expected)).toBeLessThan(1e-6 * area(bounds));
      }
    }
  });

  it('keeps every rectangle inside the bounds', () => {
    for (let seed = 21; seed <= 40; seed++) {
      const rand = lcg(seed);
      const rects = squarify(randomItems(rand, 1 + Math.floor(rand() * 24)), bounds);
      for (const r of rects) {
        expect(r.x).toBeGreaterThanOrEqual(bounds.x - 1e-9);
        expect(r.y).toBeGreaterThanOrEqual(bounds.y - 1e-9);
        expect(r.x + r.width).toBeLessThanOrEqual(bounds.x + bounds.width + 1e-6);
        expect(r.y + r.height).toBeLessThanOrEqual(bounds.y + bounds.height + 1e-6);
      }
    }
  });

  it('never overlaps two rectangles', () => {
    for (let seed = 41; seed <= 60; seed++) {
      const rand = lcg(seed);
      const rects = squarify(randomItems(rand, 2 + Math.floor(rand() * 20)), bounds);
      for (let i = 0; i < rects.length; i++) {
        for (let j = i + 1; j < rects.length; j++) {
          expect(overlap(rects[i], rects[j])).toBeLessThan(1e-6);
        }
      }
    }
  });

  it('tiles the bounds completely', () => {
    const rand = lcg(7);
    const rects = squarify(randomItems(rand, 13), bounds);
    const covered = rects.reduce((s, r) => s + area(r), 0);
    expect(Math.abs(covered - area(bounds))).toBeLessThan(1e-6 * area(bounds));
  });

  it('is deterministic', () => {
    const items = randomItems(lcg(99), 17);
    expect(squarify(items, bounds)).toEqual(squarify(items, bounds));
  });

  it('handles empty and zero-weight input', () => {
    expect(squarify([], bounds)).toEqual([]);
    expect(squarify([{ id: 'a', value: 0 }], bounds)).toEqual([]);
  });
});
