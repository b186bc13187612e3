import numpy as np
import pytest
from fastapi.testclient import TestClient

from qirat import synth
from qirat.embedders import HashEmbedder
from qirat.service import SearchEngine, ServiceConfig, create_app
from qirat.store import PassageRecord, ingest_corpus, save_index

from conftest import write_corpus_jsonl


@pytest.fixture(scope="module")
def service_index(tmp_path_factory):
    """A 300x16 clustered index on disk plus its corpus JSONL."""
    tmp_path = tmp_path_factory.mktemp("svc")
    matrix, idmap, _ = synth.clustered_corpus(300, 16, clusters=4, seed=30)
    index_path = tmp_path / "svc.emb"
    save_index(matrix, idmap, index_path)
    passages = [PassageRecord(idmap[i], f"passage number {i}") for i in range(300)]
    corpus_path = write_corpus_jsonl(tmp_path / "corpus.jsonl", passages)
    return index_path, corpus_path, matrix, idmap


@pytest.fixture(scope="module")
def client(service_index):
    index_path, corpus_path, _, _ = service_index
    # pq is omitted: 300 rows cannot train the default 256-centroid codebooks
    engine = SearchEngine(
        ServiceConfig(
            index_path=index_path,
            workers=2,
            backends=("exact", "sq", "hnsw"),
            corpus_path=corpus_path,
        )
    )
    app = create_app(engine)
    with TestClient(app, raise_server_exceptions=False) as tc:
        yield tc
    engine.close()


class TestConfig:
    def test_unknown_backend_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="backend"):
            ServiceConfig(index_path=tmp_path / "x.emb", backend="fuzzy")

    def test_default_backend_added_to_enabled_set(self, tmp_path):
        config = ServiceConfig(index_path=tmp_path / "x.emb", backend="sq", backends=("exact",))
        assert "sq" in config.backends

    def test_bad_port_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="port"):
            ServiceConfig(index_path=tmp_path / "x.emb", port=0)


class TestHealth:
    def test_health_shape(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["status"] == "ok"
        assert doc["count"] == 300
        assert doc["dim"] == 16
        assert set(doc["backends"]) == {"exact", "sq", "hnsw"}


class TestSearch:
    def test_text_query(self, client):
        resp = client.post("/search", json={"query": "passage number 5", "topk": 5})
        assert resp.status_code == 200
        doc = resp.json()
        assert len(doc["hits"]) == 5
        assert doc["backend"] == "exact"
        assert doc["workers"] == 2
        assert doc["latency_ms"] >= 0
        scores = [h["score"] for h in doc["hits"]]
        assert scores == sorted(scores, reverse=True)

    def test_vector_query_matches_pool(self, client, service_index):
        _, _, matrix, idmap = service_index
        vec = matrix.values[17].tolist()
        resp = client.post("/search", json={"query": vec, "topk": 1})
        assert resp.status_code == 200
        assert resp.json()["hits"][0]["id"] == idmap[17]

    def test_texts_attached_from_corpus(self, client):
        resp = client.post("/search", json={"query": "anything", "topk": 3})
        for hit in resp.json()["hits"]:
            assert hit["text"].startswith("passage number ")

    def test_backend_override(self, client, service_index):
        _, _, matrix, _ = service_index
        vec = matrix.values[3].tolist()
        for backend in ("sq", "hnsw"):
            resp = client.post("/search", json={"query": vec, "backend": backend, "topk": 4})
            assert resp.status_code == 200
            assert resp.json()["backend"] == backend
            assert len(resp.json()["hits"]) == 4

    def test_backends_agree_on_top_hit(self, client, service_index):
        _, _, matrix, idmap = service_index
        vec = matrix.values[42].tolist()
        tops = set()
        for backend in ("exact", "sq", "hnsw"):
            resp = client.post("/search", json={"query": vec, "backend": backend, "topk": 1})
            tops.add(resp.json()["hits"][0]["id"])
        assert tops == {idmap[42]}

    def test_disabled_backend_is_400(self, client):
        resp = client.post("/search", json={"query": "x", "backend": "pq"})
        assert resp.status_code == 400
        assert "pq" in resp.json()["detail"]

    def test_bad_vector_dim_is_400(self, client):
        resp = client.post("/search", json={"query": [1.0, 2.0]})
        assert resp.status_code == 400

    def test_invalid_topk_is_422(self, client):
        resp = client.post("/search", json={"query": "x", "topk": 0})
        assert resp.status_code == 422

    def test_missing_query_is_422(self, client):
        resp = client.post("/search", json={"topk": 3})
        assert resp.status_code == 422


class TestStats:
    def test_counts_accumulate(self, client):
        before = client.get("/stats").json()["backends"]["exact"]["queries"]
        client.post("/search", json={"query": "bump the counter"})
        client.post("/search", json={"query": "bump it again"})
        after = client.get("/stats").json()["backends"]["exact"]["queries"]
        assert after == before + 2

    def test_mean_latency_nonnegative(self, client):
        doc = client.get("/stats").json()
        for stats in doc["backends"].values():
            assert stats["mean_latency_ms"] >= 0.0


class TestEngine:
    def test_embedder_dim_mismatch_rejected(self, service_index):
        index_path, _, _, _ = service_index
        config = ServiceConfig(index_path=index_path)
        with pytest.raises(ValueError, match="dim"):
            SearchEngine(config, embedder=HashEmbedder(dim=4))

    def test_service_matches_direct_pool(self, service_index):
        index_path, _, matrix, idmap = service_index
        engine = SearchEngine(ServiceConfig(index_path=index_path, workers=1))
        try:
            q = np.random.default_rng(31).standard_normal(16)
            via_service = engine.search(q.tolist(), topk=10)
            direct = engine.pool.search(q, 10)
            assert [(h.id, h.score) for h in via_service.hits] == direct
        finally:
            engine.close()
