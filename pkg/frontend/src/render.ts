// ── Pure view ────────────────────────────────────────────────────────────────
// renderApp(state) rebuilds the whole DOM subtree from scratch.  No reads of
// anything but the state, so identical states render identical structures.

import { detailLevel, focusedNode, type AppState } from './state';
import { squarify, type TreemapItem, type TreemapRect } from './treemap';
import type { MapNode } from './types';

export const VIEW_WIDTH = 1000;
export const VIEW_HEIGHT = 620;
const FRAME_INSET = 24;
const FRAME_LABEL_HEIGHT = 26;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

interface Cell extends TreemapItem {
  kind: string;
  label: string;
  sublabel?: string;
  highlight?: boolean;
}

function placeCells(cells: Cell[], width: number, height: number): HTMLElement {
  const area = el('div', 'cells');
  area.style.position = 'relative';
  area.style.width = `${width}px`;
  area.style.height = `${height}px`;
  const ordered = [...cells].sort((a, b) => b.value - a.value || (a.id < b.id ? -1 : 1));
  const rects = squarify(ordered, { x: 0, y: 0, width, height });
  const byId = new Map(ordered.map((c) => [c.id, c]));
  for (const rect of rects) {
    area.appendChild(renderCell(byId.get(rect.id)!, rect));
  }
  return area;
}

function renderCell(cell: Cell, rect: TreemapRect): HTMLElement {
  const node = el('div', `cell cell--${cell.kind}${cell.highlight ? ' cell--highlight' : ''}`);
  node.dataset.kind = cell.kind;
  node.dataset.nodeId = cell.id;
  node.style.position = 'absolute';
  node.style.left = `${rect.x.toFixed(2)}px`;
  node.style.top = `${rect.y.toFixed(2)}px`;
  node.style.width = `${rect.width.toFixed(2)}px`;
  node.style.height = `${rect.height.toFixed(2)}px`;
  node.appendChild(el('span', 'cell-label', cell.label));
  if (cell.sublabel !== undefined) {
    node.appendChild(el('span', 'cell-sublabel', cell.sublabel));
  }
  return node;
}

function topicCells(map: MapNode): Cell[] {
  return map.children
    .filter((c) => c.kind === 'topic')
    .map((c) => ({
      id: c.id,
      kind: c.kind,
      value: c.weight,
      label: c.label,
      sublabel: `${(c.weight * 100).toFixed(1)}%`,
    }));
}

function subtopicCells(topic: MapNode): Cell[] {
  return topic.children
    .filter((c) => c.kind === 'subtopic')
    .map((c) => ({
      id: c.id,
      kind: c.kind,
      value: c.weight,
      label: c.label,
      sublabel: `${(c.weight * 100).toFixed(1)}%`,
    }));
}

function documentCells(state: AppState, subtopic: MapNode): Cell[] {
  const cells: Cell[] = [];
  const seen = new Set<string>();
  for (const child of subtopic.children) {
    if (child.kind !== 'document') continue;
    cells.push({
      id: child.id,
      kind: 'document',
      value: child.weight,
      label: child.label,
      highlight: state.highlightDoc !== null && child.id === `d-${state.highlightDoc}`,
    });
    seen.add(child.id);
  }
  const pages = state.pages[subtopic.id] ?? [];
  for (const page of pages) {
    for (const row of page.documents) {
      const id = `d-${row.doc_id}`;
      if (seen.has(id)) continue;
      seen.add(id);
      cells.push({
        id,
        kind: 'document',
        value: row.weight,
        label: row.title_snippet,
        highlight: state.highlightDoc === row.doc_id,
      });
    }
  }

  const shown = cells.length;
  const moreRemains =
    pages.length > 0
      ? shown < pages[pages.length - 1].total
      : subtopic.children.some((c) => c.kind === 'more');
  if (moreRemains) {
    const mean = shown > 0 ? cells.reduce((s, c) => s + c.value, 0) / shown : 1;
    cells.push({ id: `${subtopic.id}-more`, kind: 'more', value: mean, label: '(...)' });
  }
  return cells;
}

function renderFrame(label: string, inner: HTMLElement, focusId: string): HTMLElement {
  const wrap = el('div', 'focus-wrap');
  wrap.style.position = 'relative';
  wrap.style.width = `${VIEW_WIDTH}px`;
  wrap.style.height = `${VIEW_HEIGHT}px`;

  // The band around the focused cell: clicking outside pops one level.
  const backdrop = el('div', 'backdrop');
  backdrop.dataset.action = 'pop';
  backdrop.style.position = 'absolute';
  backdrop.style.inset = '0';
  wrap.appendChild(backdrop);

  const frame = el('div', 'focus-frame');
  frame.dataset.nodeId = focusId;
  frame.style.position = 'absolute';
  frame.style.left = `${FRAME_INSET}px`;
  frame.style.top = `${FRAME_INSET}px`;
  frame.appendChild(el('span', 'frame-label', label));
  frame.appendChild(inner);
  wrap.appendChild(frame);
  return wrap;
}

function renderMapView(state: AppState): HTMLElement {
  const level = detailLevel(state);
  const map = state.map!;
  if (level === 'topics') {
    return placeCells(topicCells(map), VIEW_WIDTH, VIEW_HEIGHT);
  }
  const focus = focusedNode(state);
  if (!focus) return el('div', 'error-panel', 'focused node disappeared from the map');
  const innerWidth = VIEW_WIDTH - 2 * FRAME_INSET;
  const innerHeight = VIEW_HEIGHT - 2 * FRAME_INSET - FRAME_LABEL_HEIGHT;
  const cells =
    level === 'subtopics' ? subtopicCells(focus) : documentCells(state, focus);
  return renderFrame(focus.label, placeCells(cells, innerWidth, innerHeight), focus.id);
}

function renderBreadcrumb(state: AppState): HTMLElement {
  const nav = el('nav', 'breadcrumb');
  const entries: { label: string; depth: number }[] = [{ label: 'All topics', depth: 0 }];
  if (state.map) {
    let node: MapNode | undefined = state.map;
    state.focusPath.forEach((id, i) => {
      node = node?.children.find((c) => c.id === id);
      if (node) entries.push({ label: node.label, depth: i + 1 });
    });
  }
  entries.forEach((entry, i) => {
    if (i > 0) nav.appendChild(el('span', 'crumb-sep', '›'));
    const crumb = el('button', 'crumb', entry.label);
    crumb.type = 'button';
    crumb.dataset.depth = String(entry.depth);
    nav.appendChild(crumb);
  });
  return nav;
}

function renderResults(state: AppState): HTMLElement {
  const aside = el('aside', 'results-panel');
  aside.appendChild(el('h2', undefined, 'Results'));
  if (state.lastResults!.length === 0) {
    aside.appendChild(el('p', 'results-empty', 'no matching documents'));
    return aside;
  }
  const list = el('ul', 'hits');
  for (const hit of state.lastResults!) {
    const item = el('li');
    const button = el('button', 'hit');
    button.type = 'button';
    button.dataset.docId = hit.doc_id;
    button.dataset.subtopic = String(hit.matched_topics[0] ?? '');
    button.appendChild(el('span', 'hit-rank', `${hit.rank}.`));
    button.appendChild(el('span', 'hit-doc', hit.doc_id));
    button.appendChild(el('span', 'hit-score', hit.score.toFixed(3)));
    button.appendChild(
      el('span', 'hit-topics', `topics ${hit.matched_topics.join(', ')}`),
    );
    item.appendChild(button);
    list.appendChild(item);
  }
  aside.appendChild(list);
  return aside;
}

function renderDocDetail(state: AppState): HTMLElement {
  const detail = state.docDetail!;
  const panel = el('section', 'doc-detail');
  const close = el('button', 'doc-detail-close', '×');
  close.type = 'button';
  close.dataset.action = 'close-detail';
  panel.appendChild(close);
  panel.appendChild(el('h2', undefined, detail.doc_id));
  panel.appendChild(el('p', 'doc-source', `source: ${detail.source}`));
  panel.appendChild(el('p', 'doc-snippet', detail.title_snippet));
  const top1 = detail.level1_dist.indexOf(Math.max(...detail.level1_dist));
  const top2 = detail.level2_dist.indexOf(Math.max(...detail.level2_dist));
  panel.appendChild(
    el('p', 'doc-topics', `strongest topic ${top1}, strongest subtopic ${top2}`),
  );
  return panel;
}

export function renderApp(state: AppState): HTMLElement {
  const app = el('div', 'app');

  const header = el('header', 'header');
  header.appendChild(el('h1', undefined, 'Topic Atlas'));
  const form = el('form', 'search-form');
  const input = el('input', 'search-input');
  input.type = 'text';
  input.placeholder = 'search the collection…';
  input.value = state.pendingQuery;
  input.setAttribute('value', state.pendingQuery);
  const submit = el('button', 'search-submit', 'Search');
  submit.type = 'submit';
  form.appendChild(input);
  form.appendChild(submit);
  header.appendChild(form);
  app.appendChild(header);

  if (state.searchError) {
    const alert = el('p', 'search-error', state.searchError);
    alert.setAttribute('role', 'alert');
    app.appendChild(alert);
  }

  const layout = el('div', 'layout');
  if (state.lastResults !== null) layout.appendChild(renderResults(state));

  const mapPanel = el('main', 'map-panel');
  mapPanel.dataset.detail = detailLevel(state);
  mapPanel.appendChild(renderBreadcrumb(state));
  if (state.mapError) {
    const panel = el('div', 'error-panel');
    panel.appendChild(el('strong', undefined, 'map unavailable'));
    panel.appendChild(el('p', undefined, state.mapError));
    mapPanel.appendChild(panel);
  } else if (state.map) {
    mapPanel.appendChild(renderMapView(state));
  } else {
    mapPanel.appendChild(el('p', 'map-loading', 'loading map…'));
  }
  layout.appendChild(mapPanel);
  app.appendChild(layout);

  if (state.docDetail) app.appendChild(renderDocDetail(state));
  return app;
}
