"""Shared helpers for the test suite: tiny corpus builders, independent
oracles, and a local mock chat-completions server."""

from __future__ import annotations

import datetime as dt
import http.server
import json
import math
import threading

import numpy as np

from budgetrank.corpus import Corpus, SectorTaxonomy, Segment


def make_taxonomy(names, companies_per=1) -> SectorTaxonomy:
    return SectorTaxonomy(
        tuple(names),
        {n: tuple(f"{n}-CO{i}" for i in range(companies_per)) for n in names})


def make_segment(seg_id, sectors, year=2018, day=None, text="text") -> Segment:
    return Segment(seg_id, year, day or dt.date(year, 2, 1), text,
                   frozenset(sectors))


def make_corpus(labelled: dict[str, set], year=2018) -> Corpus:
    return Corpus(tuple(make_segment(sid, secs, year=year)
                        for sid, secs in labelled.items()))


def naive_adapter_loss(model, batch, l2=0.0) -> float:
    """Scalar-loop re-derivation of the adapter objective."""
    total, pairs = 0.0, 0
    for v, gold in batch:
        z = model.W @ np.asarray(v, dtype=float)
        zn = math.sqrt(sum(x * x for x in z))
        sims = []
        for i in range(len(model.sectors)):
            p = model.prototypes[i]
            pn = math.sqrt(sum(x * x for x in p))
            sims.append(float(np.dot(z, p)) / (zn * pn) / model.temperature)
        mx = max(sims)
        lse = mx + math.log(sum(math.exp(s - mx) for s in sims))
        for name in sorted(gold):
            total += lse - sims[model.sectors.index(name)]
            pairs += 1
    diff = model.W - np.eye(model.W.shape[0])
    return total / pairs + l2 * float((diff * diff).sum())


def naive_f1(preds_by_id, gold_by_id, sectors):
    """Per-element counting oracle; returns (macro, micro, weighted, per)."""
    per = {}
    for s in sectors:
        tp = fp = fn = 0
        for sid, gold in gold_by_id.items():
            hit = s in preds_by_id[sid]
            want = s in gold
            tp += hit and want
            fp += hit and not want
            fn += want and not hit
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per[s] = (prec, rec, f1, tp + fn)
    macro = sum(v[2] for v in per.values()) / len(sectors) if sectors else 0.0
    tp_all = fp_all = fn_all = 0
    for sid, gold in gold_by_id.items():
        for s in sectors:
            hit = s in preds_by_id[sid]
            want = s in gold
            tp_all += hit and want
            fp_all += hit and not want
            fn_all += want and not hit
    denom = 2 * tp_all + fp_all + fn_all
    micro = 2 * tp_all / denom if denom else 0.0
    support = sum(v[3] for v in per.values())
    weighted = (sum(v[2] * v[3] for v in per.values()) / support) if support else 0.0
    return macro, micro, weighted, per


def naive_sector_return(taxonomy, opens, sector, d):
    """Linear-scan oracle for the per-sector mean return; None if unusable."""
    total, used = 0.0, 0
    for company in taxonomy.companies.get(sector, ()):
        days = sorted(day for (c, day) in opens if c == company)
        anchors = [day for day in days if day >= d]
        if not anchors:
            continue
        anchor = anchors[0]
        later = [day for day in days if day > anchor]
        if not later:
            continue
        base = opens[(company, anchor)]
        total += (opens[(company, later[0])] - base) / base
        used += 1
    if not used:
        return None, 0
    return total / used, used


class MockLLMServer:
    """Minimal chat-completions endpoint for exercising the HTTP client.

    `reply` is called with the parsed request body and returns either
    (status:int, payload) where payload may be a dict (JSON-encoded) or str,
    or a plain str shorthand for a well-formed 200 message response.
    """

    def __init__(self, reply):
        outer = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                outer.requests.append(
                    {"path": self.path, "body": body,
                     "auth": self.headers.get("Authorization")})
                result = reply(body)
                if isinstance(result, str):
                    status, payload = 200, {
                        "choices": [{"message": {"content": result}}]}
                else:
                    status, payload = result
                data = (json.dumps(payload) if isinstance(payload, dict)
                        else payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.requests: list[dict] = []
        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_address[1]}"

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
