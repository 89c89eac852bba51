"""HTTP facade over an immutable service bundle.

All endpoints are pure reads; the bundle is loaded once at startup and never
mutated, so handlers run concurrently without locking and repeated identical
requests return byte-identical bodies.
"""

from __future__ import annotations

import logging
import re
import time
from pathlib import Path

import numpy as np
import uvicorn
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import __version__
from .artm import top_words
from .errors import QueryEmptyError
from .explorer import (
    DEFAULT_FOLD_IN_ITERATIONS,
    MapNode,
    ServiceBundle,
    build_map,
    load_bundle,
    search,
    subtopic_members,
    topic_label,
)
from .schemas import (
    DocumentDetail,
    DocumentSummary,
    HealthResponse,
    MapNodeModel,
    SearchHitModel,
    SearchRequest,
    SubtopicDocuments,
    TopicDetail,
    TopicEdge,
    TopicWeight,
    WordWeight,
)

logger = logging.getLogger(__name__)

_SUBTOPIC_ID = re.compile(r"^t(\d+)-s(\d+)$")

DEFAULT_PAGE_LIMIT = 50
MAX_PAGE_LIMIT = 500


class ApiError(Exception):
    """Domain failure carried to the structured JSON error handler."""

    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(message)
        self.status_code = status_code
        self.code = code
        self.message = message


def _error_response(status_code: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"error": {"code": code, "message": message}})


def _node_model(node: MapNode) -> MapNodeModel:
    return MapNodeModel(
        kind=node.kind,
        id=node.id,
        label=node.label,
        weight=node.weight,
        children=[_node_model(child) for child in node.children],
    )


def _top_weights(dist: np.ndarray, k: int = 5) -> list[TopicWeight]:
    order = np.argsort(-dist, kind="stable")[:k]
    return [TopicWeight(topic=int(t), weight=float(dist[t])) for t in order]


def create_app(bundle: ServiceBundle, static_dir: str | Path | None = None) -> FastAPI:
    """Assemble the API over one loaded bundle (read-only thereafter)."""
    app = FastAPI(title="topicatlas explorer", version=__version__)
    model = bundle.model
    index = bundle.index
    default_tau = float(bundle.meta.get("edge_tau", 0.05))
    default_docs = int(bundle.meta.get("docs_per_cell", 10))
    iterations = int(bundle.meta.get("fold_in_iterations", DEFAULT_FOLD_IN_ITERATIONS))

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError) -> JSONResponse:
        return _error_response(exc.status_code, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error_response(422, "validation_error", str(exc.errors()))

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_error(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        return _error_response(exc.status_code, "http_error", str(exc.detail))

    @app.middleware("http")
    async def log_timing(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = 1000.0 * (time.perf_counter() - started)
        logger.info("%s %s -> %d in %.1fms", request.method, request.url.path, response.status_code, elapsed_ms)
        return response

    @app.get("/api/map", response_model=MapNodeModel)
    def get_map(
        tau: float | None = Query(default=None),
        docs_per_cell: int | None = Query(default=None, ge=1),
    ) -> MapNodeModel:
        root = build_map(
            model,
            index,
            edge_tau=default_tau if tau is None else tau,
            docs_per_cell=default_docs if docs_per_cell is None else docs_per_cell,
        )
        return _node_model(root)

    @app.get("/api/topic/{level}/{topic_id}", response_model=TopicDetail)
    def get_topic(level: int, topic_id: int, k: int = Query(default=10, ge=1)) -> TopicDetail:
        if level not in (1, 2):
            raise ApiError(404, "not_found", f"no topic level {level}; levels are 1 and 2")
        level_model = model.parent_level if level == 1 else model.child_level
        if not 0 <= topic_id < level_model.n_topics:
            raise ApiError(404, "not_found", f"level {level} has no topic {topic_id}")
        psi = model.child_given_parent
        if level == 1:
            others = model.child_level.subject_indices
            weights = psi[others, topic_id]
        else:
            others = model.parent_level.subject_indices
            weights = psi[topic_id, others]
        order = np.argsort(-weights, kind="stable")
        edges = [TopicEdge(topic=int(others[i]), weight=float(weights[i])) for i in order]
        return TopicDetail(
            level=level,
            id=topic_id,
            role=level_model.roles[topic_id],
            label=topic_label(level_model, topic_id),
            top_words=[WordWeight(word=w, probability=p) for w, p in top_words(level_model, topic_id, k)],
            edges=edges,
        )

    @app.get("/api/subtopic/{subtopic_id}/documents", response_model=SubtopicDocuments)
    def get_subtopic_documents(
        subtopic_id: str,
        offset: int = Query(default=0, ge=0),
        limit: int = Query(default=DEFAULT_PAGE_LIMIT, ge=1, le=MAX_PAGE_LIMIT),
        tau: float | None = Query(default=None),
    ) -> SubtopicDocuments:
        match = _SUBTOPIC_ID.match(subtopic_id)
        if not match:
            raise ApiError(404, "not_found", f"unknown subtopic id {subtopic_id!r}")
        parent, child = int(match.group(1)), int(match.group(2))
        if not (0 <= parent < model.n_parents and 0 <= child < model.n_children):
            raise ApiError(404, "not_found", f"unknown subtopic id {subtopic_id!r}")
        members = subtopic_members(
            model, index, parent, child, default_tau if tau is None else tau
        )
        page = members[offset : offset + limit]
        theta2 = index.level2_matrix
        return SubtopicDocuments(
            id=subtopic_id,
            parent=parent,
            child=child,
            total=len(members),
            offset=offset,
            limit=limit,
            documents=[
                DocumentSummary(
                    doc_id=index.profiles[pos].doc_id,
                    source=index.profiles[pos].source,
                    title_snippet=index.profiles[pos].title_snippet,
                    weight=float(theta2[child, pos]),
                )
                for pos in page
            ],
        )

    @app.get("/api/document/{doc_id}", response_model=DocumentDetail)
    def get_document(doc_id: str) -> DocumentDetail:
        pos = index.position(doc_id)
        if pos is None:
            raise ApiError(404, "not_found", f"unknown document {doc_id!r}")
        profile = index.profiles[pos]
        return DocumentDetail(
            doc_id=profile.doc_id,
            source=profile.source,
            title_snippet=profile.title_snippet,
            level1_dist=[float(x) for x in profile.level1_dist],
            level2_dist=[float(x) for x in profile.level2_dist],
            level1_top=_top_weights(profile.level1_dist),
            level2_top=_top_weights(profile.level2_dist),
        )

    @app.post("/api/search", response_model=list[SearchHitModel])
    def post_search(body: SearchRequest) -> list[SearchHitModel]:
        if not body.text.strip():
            raise ApiError(400, "empty_query", "query text is empty")
        try:
            hits = search(index, model, body.text, body.top_n, iterations)
        except QueryEmptyError as exc:
            raise ApiError(400, exc.code, str(exc)) from None
        return [
            SearchHitModel(
                doc_id=h.doc_id, score=h.score, rank=h.rank, matched_topics=list(h.matched_topics)
            )
            for h in hits
        ]

    @app.get("/api/health", response_model=HealthResponse)
    def get_health() -> HealthResponse:
        return HealthResponse(
            version=__version__,
            bundle_digest=bundle.digest,
            model_ref=index.model_ref,
            n_parent_topics=model.parent_level.n_topics,
            n_child_topics=model.child_level.n_topics,
            n_documents=index.n_documents,
        )

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve(
    bundle_path: str | Path,
    bind_address: str = "127.0.0.1:8080",
    static_dir: str | Path | None = None,
) -> None:
    """Load a bundle and serve it in the foreground until interrupted."""
    host, _, port_text = bind_address.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"bind address must look like host:port, got {bind_address!r}")
    bundle = load_bundle(bundle_path)
    app = create_app(bundle, static_dir)
    logger.info(
        "serving bundle %s (%d documents) on %s", bundle_path, bundle.index.n_documents, bind_address
    )
    uvicorn.run(app, host=host, port=int(port_text), log_level="info")
