// ── View state and reducer ───────────────────────────────────────────────────
// The whole UI is a pure function of this state; the reducer is the only
// place state changes, so replaying one event sequence always rebuilds the
// same DOM.

import type {
  DetailLevel,
  DocumentDetail,
  DocumentsPage,
  MapNode,
  SearchHit,
} from './types';

export interface AppState {
  map: MapNode | null;
  mapError: string | null;
  /** Node ids from the root down, excluding the root itself. */
  focusPath: string[];
  pendingQuery: string;
  lastResults: SearchHit[] | null;
  searchError: string | null;
  /** Set by the reducer when a submitted query is worth sending. */
  searching: boolean;
  /** Extra document pages fetched through "(...)" cells, per subtopic id. */
  pages: Record<string, DocumentsPage[]>;
  highlightDoc: string | null;
  docDetail: DocumentDetail | null;
}

export type AppEvent =
  | { kind: 'map_loaded'; map: MapNode }
  | { kind: 'map_failed'; message: string }
  | { kind: 'drill'; nodeId: string }
  | { kind: 'pop' }
  | { kind: 'focus'; path: string[] }
  | { kind: 'query_input'; text: string }
  | { kind: 'search_submitted' }
  | { kind: 'search_succeeded'; hits: SearchHit[] }
  | { kind: 'search_failed'; code: string; message: string }
  | { kind: 'more_loaded'; subtopicId: string; page: DocumentsPage }
  | { kind: 'hit_selected'; hit: SearchHit }
  | { kind: 'doc_loaded'; detail: DocumentDetail }
  | { kind: 'detail_closed' };

export function initialState(): AppState {
  return {
    map: null,
    mapError: null,
    focusPath: [],
    pendingQuery: '',
    lastResults: null,
    searchError: null,
    searching: false,
    pages: {},
    highlightDoc: null,
    docDetail: null,
  };
}

export function detailLevel(state: AppState): DetailLevel {
  if (state.focusPath.length >= 2) return 'documents';
  if (state.focusPath.length === 1) return 'subtopics';
  return 'topics';
}

/** The node the focus path points at (the root when the path is empty). */
export function focusedNode(state: AppState): MapNode | null {
  if (!state.map) return null;
  let node = state.map;
  for (const id of state.focusPath) {
    const child = node.children.find((c) => c.id === id);
    if (!child) return null;
    node = child;
  }
  return node;
}

/** True when path is a valid root-descendant chain of the map. */
export function isValidPath(map: MapNode, path: string[]): boolean {
  let node = map;
  for (const id of path) {
    const child = node.children.find((c) => c.id === id);
    if (!child || (child.kind !== 'topic' && child.kind !== 'subtopic')) return false;
    node = child;
  }
  return true;
}

/** First (topic id, subtopic id) pair whose subtopic has this child index. */
export function locateSubtopic(map: MapNode, childIndex: number): [string, string] | null {
  for (const topic of map.children) {
    for (const sub of topic.children) {
      if (sub.kind !== 'subtopic') continue;
      const match = sub.id.match(/-s(\d+)$/);
      if (match && Number(match[1]) === childIndex) return [topic.id, sub.id];
    }
  }
  return null;
}

const EMPTY_QUERY_MESSAGE = 'empty_query: type at least one search term';

export function reduce(state: AppState, event: AppEvent): AppState {
  switch (event.kind) {
    case 'map_loaded': {
      const valid = isValidPath(event.map, state.focusPath);
      return {
        ...state,
        map: event.map,
        mapError: null,
        focusPath: valid ? state.focusPath : [],
        pages: {},
      };
    }
    case 'map_failed':
      return { ...state, map: null, mapError: event.message };
    case 'drill': {
      const focus = focusedNode(state);
      const child = focus?.children.find((c) => c.id === event.nodeId);
      if (!child || (child.kind !== 'topic' && child.kind !== 'subtopic')) return state;
      return {
        ...state,
        focusPath: [...state.focusPath, child.id],
        highlightDoc: null,
        docDetail: null,
      };
    }
    case 'pop':
      if (state.focusPath.length === 0) return state; // pop from overview: no-op
      return {
        ...state,
        focusPath: state.focusPath.slice(0, -1),
        highlightDoc: null,
        docDetail: null,
      };
    case 'focus': {
      if (!state.map || !isValidPath(state.map, event.path)) return state;
      return { ...state, focusPath: [...event.path], docDetail: null };
    }
    case 'query_input':
      return { ...state, pendingQuery: event.text };
    case 'search_submitted': {
      if (state.pendingQuery.trim() === '') {
        return { ...state, searching: false, searchError: EMPTY_QUERY_MESSAGE };
      }
      return { ...state, searching: true, searchError: null };
    }
    case 'search_succeeded':
      return { ...state, searching: false, searchError: null, lastResults: event.hits };
    case 'search_failed':
      return {
        ...state,
        searching: false,
        lastResults: null,
        searchError: `${event.code}: ${event.message}`,
      };
    case 'more_loaded': {
      const existing = state.pages[event.subtopicId] ?? [];
      return {
        ...state,
        pages: { ...state.pages, [event.subtopicId]: [...existing, event.page] },
      };
    }
    case 'hit_selected': {
      if (!state.map || event.hit.matched_topics.length === 0) return state;
      const located = locateSubtopic(state.map, event.hit.matched_topics[0]);
      if (!located) {
        return { ...state, searchError: 'result subtopic is not on the map' };
      }
      return {
        ...state,
        focusPath: [located[0], located[1]],
        highlightDoc: event.hit.doc_id,
        docDetail: null,
      };
    }
    case 'doc_loaded':
      return { ...state, docDetail: event.detail };
    case 'detail_closed':
      return { ...state, docDetail: null };
  }
}
