#!/usr/bin/env python3
"""Deterministic stub speaking the line-JSON embedding protocol on stdio.

One JSON object per line in, one per line out. Unparsable input gets an
error reply with id -1. Vectors are seeded from (model, text) so repeat
requests are bit-identical without any state.
"""

import argparse
import hashlib
import json
import sys

import numpy as np

MAX_BATCH = 64


def text_vector(model: str, text: str, dim: int):
    key = f"{model}\x00{text}".encode("utf-8")
    seed = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")
    v = np.random.default_rng(seed).standard_normal(dim)
    n = float(np.linalg.norm(v))
    if n > 0:
        v = v / n
    return [float(x) for x in v]


def handle(req: dict, dim: int) -> dict:
    rid = req.get("id")
    if not isinstance(rid, int):
        return {"id": -1, "error": "missing or non-integer id"}
    op = req.get("op")
    model = req.get("model")
    if not isinstance(model, str) or not model:
        return {"id": rid, "error": "missing model"}
    if model == "broken-model":
        # hook for tests exercising the error path
        return {"id": rid, "error": "model failed to load"}
    if op == "embed":
        texts = req.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            return {"id": rid, "error": "texts must be a list of strings"}
        if len(texts) > MAX_BATCH:
            return {"id": rid, "error": f"batch too large (max {MAX_BATCH})"}
        return {"id": rid, "vectors": [text_vector(model, t, dim) for t in texts]}
    if op == "score_pairs":
        pairs = req.get("pairs")
        if not isinstance(pairs, list) or not all(
            isinstance(p, list) and len(p) == 2 for p in pairs
        ):
            return {"id": rid, "error": "pairs must be a list of [a, b] pairs"}
        if len(pairs) > MAX_BATCH:
            return {"id": rid, "error": f"batch too large (max {MAX_BATCH})"}
        scores = []
        for a, b in pairs:
            va = np.asarray(text_vector(model, a, dim))
            vb = np.asarray(text_vector(model, b, dim))
            scores.append(float((va @ vb + 1.0) / 2.0))
        return {"id": rid, "scores": scores}
    return {"id": rid, "error": f"unknown op: {op!r}"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dim", type=int, default=384)
    args = ap.parse_args()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("not an object")
        except (json.JSONDecodeError, ValueError) as exc:
            reply = {"id": -1, "error": f"unparsable request: {exc}"}
        else:
            reply = handle(req, args.dim)
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
