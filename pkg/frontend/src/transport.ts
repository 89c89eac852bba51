// ── HTTP transport ───────────────────────────────────────────────────────────
// A thin typed wrapper over fetch.  Tests substitute their own Transport, so
// everything above this layer is exercised without a network.

import type { DocumentDetail, DocumentsPage, MapNode, SearchHit } from './types';

export interface Transport {
  fetchMap(): Promise<MapNode>;
  fetchDocuments(subtopicId: string, offset: number, limit: number): Promise<DocumentsPage>;
  search(text: string, topN: number): Promise<SearchHit[]>;
  fetchDocument(docId: string): Promise<DocumentDetail>;
}

/** Service-reported failure: the structured {error: {code, message}} envelope. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError('network_error', err instanceof Error ? err.message : String(err));
  }
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const envelope = body as { error?: { code?: string; message?: string } } | null;
    throw new ApiError(
      envelope?.error?.code ?? `http_${response.status}`,
      envelope?.error?.message ?? response.statusText,
    );
  }
  return body as T;
}

export function httpTransport(base = ''): Transport {
  return {
    fetchMap: () => request<MapNode>(`${base}/api/map`),
    fetchDocuments: (subtopicId, offset, limit) =>
      request<DocumentsPage>(
        `${base}/api/subtopic/${encodeURIComponent(subtopicId)}/documents?offset=${offset}&limit=${limit}`,
      ),
    search: (text, topN) =>
      request<SearchHit[]>(`${base}/api/search`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ text, top_n: topN }),
      }),
    fetchDocument: (docId) =>
      request<DocumentDetail>(`${base}/api/document/${encodeURIComponent(docId)}`),
  };
}
