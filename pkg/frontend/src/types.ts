// ── Service payload types ────────────────────────────────────────────────────
// These mirror the explorer service JSON schemas field for field; the UI has
// no backend of its own.

export type NodeKind = 'root' | 'topic' | 'subtopic' | 'document' | 'more';

export interface MapNode {
  kind: NodeKind;
  id: string;
  label: string;
  weight: number;
  children: MapNode[];
}

export interface SearchHit {
  doc_id: string;
  score: number;
  rank: number;
  matched_topics: number[];
}

export interface DocumentRow {
  doc_id: string;
  source: string;
  title_snippet: string;
  weight: number;
}

export interface DocumentsPage {
  id: string;
  parent: number;
  child: number;
  total: number;
  offset: number;
  limit: number;
  documents: DocumentRow[];
}

export interface DocumentDetail {
  doc_id: string;
  source: string;
  title_snippet: string;
  level1_dist: number[];
  level2_dist: number[];
}

export type DetailLevel = 'topics' | 'subtopics' | 'documents';
