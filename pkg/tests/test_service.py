"""HTTP service surface; each route wraps the same handlers the CLI uses."""

import json

import pytest
from fastapi.testclient import TestClient

from precedent.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def workspace(client, tmp_path_factory):
    ws = tmp_path_factory.mktemp("svc-ws")
    r = client.post("/v1/synth", json={
        "out_dir": str(ws / "data"), "n_topics": 5, "min_docs_per_topic": 3,
        "max_docs_per_topic": 6, "n_noise_docs": 4, "seed": 3})
    assert r.status_code == 200, r.text
    corpus = {"corpus_file": str(ws / "data" / "corpus.jsonl"),
              "queries_file": str(ws / "data" / "query_ids.txt")}
    r = client.post("/v1/index", json={
        "corpus": corpus, "out": str(ws / "index.json")})
    assert r.status_code == 200, r.text
    r = client.post("/v1/reformulate", json={
        "corpus": corpus, "index_file": str(ws / "index.json"),
        "termex": {"method": "kli", "proportion": 0.3},
        "out": str(ws / "queries.jsonl")})
    assert r.status_code == 200, r.text
    return ws, corpus


class TestRoutes:
    def test_health(self, client):
        r = client.get("/v1/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_search_flow(self, client, workspace):
        ws, corpus = workspace
        r = client.post("/v1/search", json={
            "index_file": str(ws / "index.json"),
            "queries_file": str(ws / "queries.jsonl"),
            "ranker": {"name": "bm25", "k1": 1.2, "b": 0.75},
            "out": str(ws / "run.trec")})
        assert r.status_code == 200, r.text
        assert r.json()["n_queries"] == 5

        r = client.post("/v1/evaluate", json={
            "run_file": str(ws / "run.trec"),
            "qrels_file": str(ws / "data" / "qrels.txt"),
            "cutoff": 4})
        assert r.status_code == 200, r.text
        body = r.json()
        assert {"precision", "recall", "f1"} <= set(body)

    def test_rerank_and_fuse_routes(self, client, workspace):
        ws, corpus = workspace
        r = client.post("/v1/rerank", json={
            "run_file": str(ws / "run.trec"), "corpus": corpus,
            "provider": {"kind": "baseline", "dim": 48},
            "rerank": {"depth": 8, "k": 2},
            "out": str(ws / "run_rr.trec")})
        assert r.status_code == 200, r.text
        r = client.post("/v1/fuse", json={
            "lexical_run": str(ws / "run.trec"),
            "neural_run": str(ws / "run_rr.trec"),
            "alpha": 1.0, "beta": 1.0, "out": str(ws / "run_fused.trec")})
        assert r.status_code == 200, r.text

    def test_sweep_route(self, client, workspace):
        ws, _ = workspace
        r = client.post("/v1/sweep-cutoff", json={
            "run_file": str(ws / "run.trec"),
            "qrels_file": str(ws / "data" / "qrels.txt"),
            "k_min": 1, "k_max": 5})
        assert r.status_code == 200, r.text
        assert len(r.json()["curve"]) == 5

    def test_config_error_maps_422(self, client, workspace):
        ws, _ = workspace
        r = client.post("/v1/search", json={
            "index_file": str(ws / "index.json"),
            "queries_file": str(ws / "queries.jsonl"),
            "ranker": {"name": "bm25", "b": 3.0},
            "out": str(ws / "x.trec")})
        assert r.status_code == 422

    def test_unknown_request_field_maps_422(self, client, workspace):
        ws, _ = workspace
        r = client.post("/v1/evaluate", json={
            "run_file": str(ws / "run.trec"),
            "qrels_file": str(ws / "data" / "qrels.txt"),
            "surprise": True})
        assert r.status_code == 422

    def test_missing_artifact_maps_404(self, client):
        r = client.post("/v1/evaluate", json={
            "run_file": "/no/such/run.trec",
            "qrels_file": "/no/such/qrels.txt"})
        assert r.status_code == 404
        assert "error" in r.json()

    def test_domain_error_maps_400(self, client, workspace, tmp_path):
        ws, _ = workspace
        # disjoint run doc sets: a wiring bug, not a config problem
        lex = tmp_path / "lex.trec"
        neu = tmp_path / "neu.trec"
        lex.write_text("q1 Q0 a 1 2.0 t\n")
        neu.write_text("q1 Q0 b 1 1.0 t\n")
        r = client.post("/v1/fuse", json={
            "lexical_run": str(lex), "neural_run": str(neu),
            "alpha": 1.0, "beta": 1.0, "out": str(tmp_path / "f.trec")})
        assert r.status_code == 400
        assert "error" in r.json()

    def test_tune_route(self, client, workspace):
        ws, _ = workspace
        r = client.post("/v1/tune", json={
            "target": "bm25",
            "index_file": str(ws / "index.json"),
            "queries_file": str(ws / "queries.jsonl"),
            "qrels_file": str(ws / "data" / "qrels.txt"),
            "grid": {"k1": [1.0, 1.4], "b": [0.6]},
            "cutoff": 4})
        assert r.status_code == 200, r.text
        body = r.json()
        assert body["n_trials"] == 2
        assert set(body["best_assignment"]) == {"k1", "b"}

    def test_pipeline_route(self, client, workspace, tmp_path):
        ws, corpus = workspace
        out_dir = tmp_path / "pipe-out"
        cfg = {
            "corpus": dict(corpus, qrels_file=str(ws / "data" / "qrels.txt")),
            "termex": {"method": "kli", "proportion": 0.3},
            "provider": {"kind": "baseline", "dim": 48},
            "rerank": {"depth": 8, "k": 2},
            "aggregation": {"tune": False, "alpha": 1.0, "beta": 1.0},
            "eval": {"k_min": 1, "k_max": 5},
            "output": {"dir": str(out_dir)},
        }
        r = client.post("/v1/pipeline", json={"config": cfg})
        assert r.status_code == 200, r.text
        body = r.json()
        assert set(body["stages"]) == {"lexical", "rerank", "fused"}
        report = json.loads((out_dir / "report.json").read_text())
        assert report["output_dir"] == str(out_dir)
