"""Request/response bodies of the HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

NodeKind = Literal["root", "topic", "subtopic", "document", "more"]


class ErrorBody(BaseModel):
    code: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody


class MapNodeModel(BaseModel):
    kind: NodeKind
    id: str
    label: str
    weight: float
    children: list["MapNodeModel"] = Field(default_factory=list)


class WordWeight(BaseModel):
    word: str
    probability: float


class TopicEdge(BaseModel):
    topic: int                      # index at the other level
    weight: float


class TopicDetail(BaseModel):
    level: int
    id: int
    role: str
    label: str
    top_words: list[WordWeight]
    edges: list[TopicEdge]


class DocumentSummary(BaseModel):
    doc_id: str
    source: str
    title_snippet: str
    weight: float


class SubtopicDocuments(BaseModel):
    id: str
    parent: int
    child: int
    total: int
    offset: int
    limit: int
    documents: list[DocumentSummary]


class TopicWeight(BaseModel):
    topic: int
    weight: float


class DocumentDetail(BaseModel):
    doc_id: str
    source: str
    title_snippet: str
    level1_dist: list[float]
    level2_dist: list[float]
    level1_top: list[TopicWeight]
    level2_top: list[TopicWeight]


class SearchRequest(BaseModel):
    text: str
    top_n: int = Field(default=10, ge=1)


class SearchHitModel(BaseModel):
    doc_id: str
    score: float
    rank: int
    matched_topics: list[int]


class HealthResponse(BaseModel):
    version: str
    bundle_digest: str
    model_ref: str
    n_parent_topics: int
    n_child_topics: int
    n_documents: int


MapNodeModel.model_rebuild()
