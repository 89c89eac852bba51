// ── Squarified treemap layout ────────────────────────────────────────────────
// Area-proportional rectangle packing with optimized aspect ratios
// (Bruls, Huizing & van Wijk).  Deterministic: same items, same rectangles.

export interface TreemapItem {
  id: string;
  value: number;
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface TreemapRect extends Rect {
  id: string;
  value: number;
}

/**
 * Compute squarified treemap rectangles for the items within bounds.
 * Items are laid out in the order given (callers sort by weight first when
 * they want the classic largest-cell-in-the-corner look); zero-total input
 * yields no rectangles.
 */
export function squarify(items: TreemapItem[], bounds: Rect): TreemapRect[] {
  if (items.length === 0) return [];

  const totalValue = items.reduce((sum, item) => sum + item.value, 0);
  if (totalValue <= 0) return [];

  const totalArea = bounds.width * bounds.height;
  const areas = items.map((item) => (item.value / totalValue) * totalArea);
  const rects: TreemapRect[] = [];
  layoutStrip(items, areas, { ...bounds }, rects);
  return rects;
}

function layoutStrip(
  items: TreemapItem[],
  areas: number[],
  remaining: Rect,
  output: TreemapRect[],
): void {
  if (items.length === 0) return;

  if (items.length === 1) {
    output.push({
      id: items[0].id,
      value: items[0].value,
      x: remaining.x,
      y: remaining.y,
      width: remaining.width,
      height: remaining.height,
    });
    return;
  }

  // Lay the current row along the shorter side of the remaining area.
  const isWide = remaining.width >= remaining.height;
  const sideLength = isWide ? remaining.height : remaining.width;

  // Greedily extend the row while the worst aspect ratio improves.
  const rowAreas: number[] = [];
  let bestWorst = Infinity;
  let splitIndex = 0;
  for (let i = 0; i < items.length; i++) {
    const worst = worstAspectRatio([...rowAreas, areas[i]], sideLength);
    if (worst <= bestWorst) {
      rowAreas.push(areas[i]);
      bestWorst = worst;
      splitIndex = i + 1;
    } else {
      break;
    }
  }

  const rowTotalArea = rowAreas.reduce((s, a) => s + a, 0);
  const rowThickness = sideLength > 0 ? rowTotalArea / sideLength : 0;

  let offset = 0;
  for (let i = 0; i < splitIndex; i++) {
    const itemLength = rowThickness > 0 ? rowAreas[i] / rowThickness : 0;
    output.push(
      isWide
        ? {
            id: items[i].id,
            value: items[i].value,
            x: remaining.x,
            y: remaining.y + offset,
            width: rowThickness,
            height: itemLength,
          }
        : {
            id: items[i].id,
            value: items[i].value,
            x: remaining.x + offset,
            y: remaining.y,
            width: itemLength,
            height: rowThickness,
          },
    );
    offset += itemLength;
  }

  const newRemaining = isWide
    ? {
        x: remaining.x + rowThickness,
        y: remaining.y,
        width: remaining.width - rowThickness,
        height: remaining.height,
      }
    : {
        x: remaining.x,
        y: remaining.y + rowThickness,
        width: remaining.width,
        height: remaining.height - rowThickness,
      };

  layoutStrip(items.slice(splitIndex), areas.slice(splitIndex), newRemaining, output);
}

/** Worst (largest) aspect ratio in a row laid out along sideLength. */
function worstAspectRatio(areas: number[], sideLength: number): number {
  if (areas.length === 0 || sideLength <= 0) return Infinity;

  const totalArea = areas.reduce((s, a) => s + a, 0);
  const rowThickness = totalArea / sideLength;

  let worst = 0;
  for (const area of areas) {
    const length = area / rowThickness;
    const ratio = Math.max(rowThickness / length, length / rowThickness);
    worst = Math.max(worst, ratio);
  }
  return worst;
}
