"""HTTP API surface: routes, error envelope, paging, search endpoint."""

import warnings

import pytest

warnings.filterwarnings("ignore", message=".*httpx2.*")

from fastapi.testclient import TestClient

from generators import random_corpus
from topicatlas.artm import FitSchedule, RegularizerConfig, TopicConfig
from topicatlas.explorer import build_bundle
from topicatlas.hierarchy import HierarchyConfig, train_hierarchy
from topicatlas.service import create_app


@pytest.fixture(scope="module")
def corpus():
    return random_corpus(n_docs=40, vocab_size=60, seed=211, min_len=12, max_len=25)


@pytest.fixture(scope="module")
def bundle(corpus):
    config = HierarchyConfig(
        level1=TopicConfig(3, 1, seed=1),
        level2=TopicConfig(6, 1, seed=2),
        reg1=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
        reg2=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
        schedule=FitSchedule(max_passes=6, rel_tol=0.0),
    )
    model = train_hierarchy(corpus, config)
    return build_bundle(model, corpus, meta={"edge_tau": 0.05, "docs_per_cell": 4})


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle))


def _error(response):
    body = response.json()
    assert set(body) == {"error"}
    assert set(body["error"]) == {"code", "message"}
    return body["error"]


class TestHealth:
    def test_shape(self, client, bundle, corpus):
        r = client.get("/api/health")
        assert r.status_code == 200
        body = r.json()
        assert body["n_parent_topics"] == 4
        assert body["n_child_topics"] == 7
        assert body["n_documents"] == len(corpus)
        assert body["model_ref"] == bundle.index.model_ref
        assert body["version"]


class TestMap:
    def test_root_structure(self, client):
        r = client.get("/api/map")
        assert r.status_code == 200
        root = r.json()
        assert root["kind"] == "root"
        assert root["id"] == "root"
        assert len(root["children"]) == 3  # subject parents only
        for topic in root["children"]:
            assert topic["kind"] == "topic"
            assert topic["id"].startswith("t")
            assert topic["weight"] > 0
            for sub in topic["children"]:
                assert sub["kind"] == "subtopic"
                for leaf in sub["children"]:
                    assert leaf["kind"] in ("document", "more")

    def test_identical_requests_are_byte_identical(self, client):
        a = client.get("/api/map")
        b = client.get("/api/map")
        assert a.content == b.content

    def test_query_overrides_change_the_map(self, client):
        few = client.get("/api/map", params={"docs_per_cell": 1}).json()
        many = client.get("/api/map", params={"docs_per_cell": 100}).json()

        def doc_count(node):
            own = sum(1 for c in node.get("children", []) if c["kind"] == "document")
            return own + sum(doc_count(c) for c in node.get("children", []))

        assert doc_count(many) >= doc_count(few)

        def more_count(node):
            own = sum(1 for c in node.get("children", []) if c["kind"] == "more")
            return own + sum(more_count(c) for c in node.get("children", []))

        assert more_count(many) == 0

    def test_bad_docs_per_cell_is_a_validation_error(self, client):
        r = client.get("/api/map", params={"docs_per_cell": 0})
        assert r.status_code == 422
        assert _error(r)["code"] == "validation_error"


class TestTopic:
    def test_level1_topic(self, client):
        r = client.get("/api/topic/1/0")
        assert r.status_code == 200
        body = r.json()
        assert body["level"] == 1 and body["id"] == 0
        assert body["role"] in ("subject", "background")
        assert len(body["top_words"]) == 10
        assert body["label"]
        weights = [e["weight"] for e in body["edges"]]
        assert weights == sorted(weights, reverse=True)
        assert len(body["edges"]) == 6  # subject children

    def test_level2_topic_edges_point_to_parents(self, client):
        body = client.get("/api/topic/2/0").json()
        assert len(body["edges"]) == 3  # subject parents
        assert all(0 <= e["topic"] < 4 for e in body["edges"])

    def test_k_controls_word_count(self, client):
        body = client.get("/api/topic/1/0", params={"k": 3}).json()
        assert len(body["top_words"]) == 3

    @pytest.mark.parametrize("path", ["/api/topic/3/0", "/api/topic/0/0", "/api/topic/1/99", "/api/topic/2/99"])
    def test_unknown_topics_404(self, client, path):
        r = client.get(path)
        assert r.status_code == 404
        assert _error(r)["code"] == "not_found"


class TestSubtopicDocuments:
    def _first_subtopic(self, client):
        root = client.get("/api/map").json()
        for topic in root["children"]:
            for sub in topic["children"]:
                if sub["children"]:
                    return sub["id"]
        pytest.fail("map has no populated subtopic")

    def test_paging_covers_the_full_listing(self, client):
        sub_id = self._first_subtopic(client)
        full = client.get(f"/api/subtopic/{sub_id}/documents", params={"limit": 500}).json()
        assert full["id"] == sub_id
        assert full["total"] == len(full["documents"])
        paged = []
        offset = 0
        while offset < full["total"]:
            page = client.get(
                f"/api/subtopic/{sub_id}/documents", params={"offset": offset, "limit": 2}
            ).json()
            paged.extend(d["doc_id"] for d in page["documents"])
            offset += 2
        assert paged == [d["doc_id"] for d in full["documents"]]

    def test_weights_descend(self, client):
        sub_id = self._first_subtopic(client)
        docs = client.get(f"/api/subtopic/{sub_id}/documents").json()["documents"]
        weights = [d["weight"] for d in docs]
        assert weights == sorted(weights, reverse=True)

    @pytest.mark.parametrize("bad_id", ["t0s0", "x0-s0", "t0-s", "t99-s0", "t0-s99", "root"])
    def test_unknown_subtopic_404(self, client, bad_id):
        r = client.get(f"/api/subtopic/{bad_id}/documents")
        assert r.status_code == 404

    def test_limit_above_maximum_rejected(self, client):
        sub_id = self._first_subtopic(client)
        r = client.get(f"/api/subtopic/{sub_id}/documents", params={"limit": 501})
        assert r.status_code == 422


class TestDocument:
    def test_detail(self, client, corpus, bundle):
        doc = corpus.documents[0]
        r = client.get(f"/api/document/{doc.doc_id}")
        assert r.status_code == 200
        body = r.json()
        assert body["doc_id"] == doc.doc_id
        assert body["source"] == doc.source
        assert len(body["level1_dist"]) == 4
        assert len(body["level2_dist"]) == 7
        assert sum(body["level1_dist"]) == pytest.approx(1.0, abs=1e-6)
        assert len(body["level1_top"]) <= 5
        top = body["level1_top"][0]
        assert top["weight"] == pytest.approx(max(body["level1_dist"]))

    def test_unknown_document_404(self, client):
        r = client.get("/api/document/no-such-doc")
        assert r.status_code == 404
        assert _error(r)["code"] == "not_found"


class TestSearch:
    def test_results_ranked(self, client, corpus):
        text = " ".join(corpus.vocabulary.entries[w] for w in list(corpus.documents[0].counts)[:4])
        r = client.post("/api/search", json={"text": text, "top_n": 5})
        assert r.status_code == 200
        hits = r.json()
        assert len(hits) == 5
        assert [h["rank"] for h in hits] == [1, 2, 3, 4, 5]
        scores = [h["score"] for h in hits]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in scores)
        assert all(len(h["matched_topics"]) == 3 for h in hits)

    def test_empty_query_400(self, client):
        r = client.post("/api/search", json={"text": "   "})
        assert r.status_code == 400
        assert _error(r)["code"] == "empty_query"

    def test_unrecognizable_query_400(self, client):
        r = client.post("/api/search", json={"text": "qqqqxyzzy plughfoo"})
        assert r.status_code == 400
        assert _error(r)["code"] == "no_recognizable_terms"

    def test_repeated_searches_identical(self, client, corpus):
        text = corpus.vocabulary.entries[0]
        bodies = {client.post("/api/search", json={"text": text}).content for _ in range(25)}
        assert len(bodies) == 1

    def test_bad_top_n_rejected(self, client):
        r = client.post("/api/search", json={"text": "anything", "top_n": 0})
        assert r.status_code == 422
        assert _error(r)["code"] == "validation_error"

    def test_missing_body_field_rejected(self, client):
        r = client.post("/api/search", json={"nope": 1})
        assert r.status_code == 422


class TestErrorEnvelope:
    def test_unknown_route_uses_the_envelope(self, client):
        r = client.get("/api/nonexistent")
        assert r.status_code == 404
        assert _error(r)["code"] == "http_error"

    def test_method_not_allowed(self, client):
        r = client.delete("/api/map")
        assert r.status_code == 405
        assert _error(r)["code"] == "http_error"


class TestMapDocumentTotality:
    def test_every_document_exactly_once(self, client, corpus):
        root = client.get("/api/map").json()
        seen: list[str] = []
        for topic in root["children"]:
            for sub in topic["children"]:
                has_more = any(c["kind"] == "more" for c in sub["children"])
                if has_more:
                    listing = client.get(
                        f"/api/subtopic/{sub['id']}/documents", params={"limit": 500}
                    ).json()
                    seen.extend(d["doc_id"] for d in listing["documents"])
                else:
                    seen.extend(
                        c["id"][2:] for c in sub["children"] if c["kind"] == "document"
                    )
        assert sorted(seen) == sorted(d.doc_id for d in corpus.documents)


class TestStaticMount:
    def test_static_files_served_after_api(self, bundle, tmp_path):
        (tmp_path / "index.html").write_text("<!doctype html><title>ui</title>")
        client = TestClient(create_app(bundle, static_dir=tmp_path))
        assert client.get("/").status_code == 200
        assert "ui" in client.get("/").text
        assert client.get("/api/health").status_code == 200
