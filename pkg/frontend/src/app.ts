// ── Application controller ───────────────────────────────────────────────────
// Wires the transport, the pure reducer, and the pure renderer together.
// Event handlers live on the stable outer element (delegation), so the view
// can be thrown away and rebuilt on every state change.

import { renderApp } from './render';
import {
  detailLevel,
  focusedNode,
  initialState,
  isValidPath,
  reduce,
  type AppEvent,
  type AppState,
} from './state';
import { ApiError, type Transport } from './transport';

const SEARCH_TOP_N = 10;
const FALLBACK_PAGE_SIZE = 8;

export interface AppOptions {
  /** Pass the browser window to sync the focus path with the URL fragment. */
  window?: Window | null;
}

export interface App {
  element: HTMLElement;
  state(): AppState;
  dispatch(event: AppEvent): void;
  start(): Promise<void>;
}

export function createApp(transport: Transport, options: AppOptions = {}): App {
  const windowRef = options.window ?? null;
  let state = initialState();
  const element = document.createElement('div');
  element.className = 'topic-atlas';

  // One in-flight request per endpoint kind; stale responses are discarded.
  const seq = { search: 0, more: 0, doc: 0 };

  function redraw(): void {
    element.replaceChildren(renderApp(state));
    syncHash();
  }

  function dispatch(event: AppEvent): void {
    state = reduce(state, event);
    redraw();
  }

  function syncHash(): void {
    if (!windowRef) return;
    const wanted = state.focusPath.length ? `#/${state.focusPath.join('/')}` : '';
    if (windowRef.location.hash !== wanted) {
      windowRef.location.hash = wanted;
    }
  }

  function applyHash(): void {
    if (!windowRef || !state.map) return;
    const raw = windowRef.location.hash.replace(/^#\/?/, '');
    if (!raw) return;
    const path = raw.split('/').filter(Boolean).map(decodeURIComponent);
    if (isValidPath(state.map, path)) dispatch({ kind: 'focus', path });
  }

  async function start(): Promise<void> {
    try {
      const map = await transport.fetchMap();
      if (!map || map.kind !== 'root' || !Array.isArray(map.children)) {
        dispatch({ kind: 'map_failed', message: 'malformed map payload' });
        return;
      }
      dispatch({ kind: 'map_loaded', map });
      applyHash();
    } catch (err) {
      dispatch({ kind: 'map_failed', message: describe(err) });
    }
  }

  async function submitSearch(text: string): Promise<void> {
    dispatch({ kind: 'query_input', text });
    dispatch({ kind: 'search_submitted' });
    if (!state.searching) return; // rejected by validation, no request
    const ticket = ++seq.search;
    try {
      const hits = await transport.search(state.pendingQuery.trim(), SEARCH_TOP_N);
      if (ticket !== seq.search) return;
      dispatch({ kind: 'search_succeeded', hits });
    } catch (err) {
      if (ticket !== seq.search) return;
      dispatch({ kind: 'search_failed', code: codeOf(err), message: describe(err) });
    }
  }

  async function loadMore(): Promise<void> {
    const focus = focusedNode(state);
    if (!focus || detailLevel(state) !== 'documents') return;
    const baseDocs = focus.children.filter((c) => c.kind === 'document').length;
    const extra = (state.pages[focus.id] ?? []).reduce(
      (count, page) => count + page.documents.length,
      0,
    );
    const ticket = ++seq.more;
    try {
      const page = await transport.fetchDocuments(
        focus.id,
        baseDocs + extra,
        baseDocs > 0 ? baseDocs : FALLBACK_PAGE_SIZE,
      );
      if (ticket !== seq.more) return;
      dispatch({ kind: 'more_loaded', subtopicId: focus.id, page });
    } catch (err) {
      if (ticket !== seq.more) return;
      dispatch({ kind: 'search_failed', code: codeOf(err), message: describe(err) });
    }
  }

  async function openDocument(docId: string): Promise<void> {
    const ticket = ++seq.doc;
    try {
      const detail = await transport.fetchDocument(docId);
      if (ticket !== seq.doc) return;
      dispatch({ kind: 'doc_loaded', detail });
    } catch (err) {
      if (ticket !== seq.doc) return;
      dispatch({ kind: 'search_failed', code: codeOf(err), message: describe(err) });
    }
  }

  element.addEventListener('click', (event) => {
    const target = event.target as HTMLElement | null;
    if (!target) return;

    const hit = target.closest<HTMLElement>('.hit');
    if (hit && element.contains(hit)) {
      const docId = hit.dataset.docId ?? '';
      const fromResults = state.lastResults?.find((h) => h.doc_id === docId);
      if (fromResults) dispatch({ kind: 'hit_selected', hit: fromResults });
      return;
    }

    const crumb = target.closest<HTMLElement>('.crumb');
    if (crumb && element.contains(crumb)) {
      const depth = Number(crumb.dataset.depth ?? '0');
      dispatch({ kind: 'focus', path: state.focusPath.slice(0, depth) });
      return;
    }

    const closeDetail = target.closest<HTMLElement>('[data-action="close-detail"]');
    if (closeDetail && element.contains(closeDetail)) {
      dispatch({ kind: 'detail_closed' });
      return;
    }

    const cell = target.closest<HTMLElement>('.cell');
    if (cell && element.contains(cell)) {
      const kind = cell.dataset.kind;
      const nodeId = cell.dataset.nodeId ?? '';
      if (kind === 'topic' || kind === 'subtopic') {
        dispatch({ kind: 'drill', nodeId });
      } else if (kind === 'more') {
        void loadMore();
      } else if (kind === 'document') {
        void openDocument(nodeId.replace(/^d-/, ''));
      }
      return;
    }

    const backdrop = target.closest<HTMLElement>('[data-action="pop"]');
    if (backdrop && element.contains(backdrop)) {
      dispatch({ kind: 'pop' });
    }
  });

  element.addEventListener('submit', (event) => {
    const form = (event.target as HTMLElement | null)?.closest?.('.search-form');
    if (!form) return;
    event.preventDefault();
    const input = form.querySelector<HTMLInputElement>('.search-input');
    void submitSearch(input?.value ?? '');
  });

  if (windowRef) {
    windowRef.addEventListener('hashchange', () => applyHash());
  }

  redraw();
  return { element, state: () => state, dispatch, start };
}

function codeOf(err: unknown): string {
  return err instanceof ApiError ? err.code : 'network_error';
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

// ── Replay harness ───────────────────────────────────────────────────────────
// The UI contract requires that replaying one user-event sequence yields one
// DOM structure.  This drives a fresh app through the sequence with real DOM
// events and returns the resulting markup.

export type UserAction =
  | { click: string }
  | { type: string }
  | { submit: true };

async function settle(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

export async function replayScript(
  transport: Transport,
  actions: UserAction[],
): Promise<string> {
  const app = createApp(transport);
  await app.start();
  await settle();
  for (const action of actions) {
    if ('click' in action) {
      const target = app.element.querySelector<HTMLElement>(action.click);
      target?.dispatchEvent(new MouseEvent('click', { bubbles: true }));
    } else if ('type' in action) {
      const input = app.element.querySelector<HTMLInputElement>('.search-input');
      if (input) input.value = action.type;
    } else {
      const form = app.element.querySelector<HTMLFormElement>('.search-form');
      form?.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }));
    }
    await settle();
  }
  return app.element.innerHTML;
}
