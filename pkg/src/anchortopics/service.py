"""HTTP API for interactive anchor-refinement sessions.

A session holds one corpus (vocabulary + matrix built at creation), an
append-only anchor history, and the last completed fit. Fits run on a
background thread, at most one per session; every read endpoint serves the
previous completed fit until the new one lands, so readers never observe a
half-updated model. Warm starts reuse the previous fit's posteriors while
the connection structure re-competes under the new anchors.
"""

from __future__ import annotations

import dataclasses
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import corpus as corpus_mod
from . import evaluation
from .model import (
    AnchorSet,
    FitConfig,
    FitReport,
    LatentFactorModel,
    fit,
    parse_anchor_spec,
    resolve_anchor_spec,
    transform,
)
from .topics import posteriors_scores, topic_report


@dataclass
class ServiceSettings:
    session_cap: int = 16
    corpus_cap_bytes: int = 64 * 1024 * 1024
    fit_workers: int = 2


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: object = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details


@dataclass
class CompletedFit:
    generation: int
    model: LatentFactorModel
    report: FitReport
    scores: np.ndarray
    seed: int
    warm_start: bool
    final_q: np.ndarray


@dataclass
class Session:
    id: str
    docs: list[corpus_mod.Document]
    vocab: corpus_mod.Vocabulary
    matrix: corpus_mod.SparseBinaryMatrix
    base_config: FitConfig
    doc_index: dict[str, int]
    status: str = "idle"                   # idle | fitting | failed
    error: str | None = None
    current: CompletedFit | None = None
    history: list[dict] = field(default_factory=list)
    generation: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self.fit_slots = threading.Semaphore(settings.fit_workers)

    def get(self, session_id: str) -> Session:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id}")
        return session

    def add(self, session: Session) -> None:
        with self.lock:
            if len(self.sessions) >= self.settings.session_cap:
                raise ApiError(503, "session_cap", "session capacity reached")
            self.sessions[session.id] = session

    def remove(self, session_id: str) -> None:
        with self.lock:
            self.sessions.pop(session_id, None)


def _error_response(exc: ApiError) -> JSONResponse:
    return JSONResponse(
        status_code=exc.status,
        content={"error": {"code": exc.code, "message": exc.message,
                           "details": exc.details}},
    )


def _session_config(body: dict) -> tuple[FitConfig, corpus_mod.TokenizeOptions, dict]:
    cfg = body.get("config") or {}
    try:
        fit_config = FitConfig(
            n_factors=int(cfg.get("factors", 8)),
            max_iter=int(cfg.get("max_iter", 200)),
            tol=float(cfg.get("tol", 1e-5)),
            patience=int(cfg.get("patience", 10)),
            seed=int(cfg.get("seed", 0)),
            gamma=float(cfg.get("gamma", 0.5)),
            lam=float(cfg.get("lam", 0.5)),
        )
    except (TypeError, ValueError) as exc:
        raise ApiError(400, "bad_config", f"invalid config: {exc}")
    vocab_cfg = cfg.get("vocabulary") or {}
    opts = corpus_mod.TokenizeOptions(
        lowercase=bool(vocab_cfg.get("lowercase", True)),
        min_token_length=int(vocab_cfg.get("min_token_length", 2)),
        stopwords=frozenset(vocab_cfg.get("stopwords", [])),
        mark_negation=bool(vocab_cfg.get("negation", False)),
        strip_newsgroup=bool(vocab_cfg.get("strip_newsgroup", False)),
    )
    build_cfg = {
        "cap": int(vocab_cfg.get("cap", 20000)),
        "min_df": int(vocab_cfg.get("min_df", 1)),
    }
    return fit_config, opts, build_cfg


def _parse_fit_anchors(body: dict, session: Session) -> AnchorSet:
    entries: list[tuple[str, int, float | None]] = []
    if "anchor_spec" in body and body["anchor_spec"]:
        try:
            entries = parse_anchor_spec(str(body["anchor_spec"]))
        except ValueError as exc:
            raise ApiError(422, "bad_anchor", str(exc))
    elif body.get("anchors"):
        for a in body["anchors"]:
            try:
                entries.append(
                    (str(a["term"]), int(a["factor"]),
                     float(a["strength"]) if a.get("strength") is not None else None)
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(422, "bad_anchor", f"invalid anchor entry {a!r}: {exc}")
    default_strength = float(body.get("beta", 1.0))
    unknown = sorted({t for t, _, _ in entries if t not in session.vocab.index})
    if unknown:
        raise ApiError(
            422, "unknown_terms",
            "anchor terms not in vocabulary: " + ", ".join(unknown),
            details={"terms": unknown},
        )
    try:
        anchors = resolve_anchor_spec(entries, session.vocab.index, default_strength)
        anchors.validate_against(len(session.vocab), session.base_config.n_factors)
    except (KeyError, ValueError) as exc:
        raise ApiError(422, "bad_anchor", str(exc))
    return anchors


def _run_fit(store: SessionStore, session: Session, config: FitConfig,
             q_init: np.ndarray | None, generation: int, warm: bool) -> None:
    with store.fit_slots:
        try:
            model, report = fit(session.matrix, config, q_init=q_init)
            posteriors = transform(model, session.matrix)
            completed = CompletedFit(
                generation=generation,
                model=model,
                report=report,
                scores=posteriors_scores(posteriors),
                seed=config.seed,
                warm_start=warm,
                final_q=posteriors.q,
            )
            with session.lock:
                session.current = completed
                session.status = "idle"
                session.error = None
        except Exception as exc:  # fit failures surface via /status
            with session.lock:
                session.status = "failed"
                session.error = f"{type(exc).__name__}: {exc}"


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    store = SessionStore(settings)
    app = FastAPI(title="anchortopics service")
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error_handler(request: Request, exc: ApiError):
        return _error_response(exc)

    from fastapi.exceptions import RequestValidationError
    from starlette.exceptions import HTTPException as StarletteHTTPException

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return _error_response(ApiError(422, "invalid_request", "invalid request",
                                        details=exc.errors()))

    @app.exception_handler(StarletteHTTPException)
    async def _http_handler(request: Request, exc: StarletteHTTPException):
        return _error_response(ApiError(exc.status_code, "http_error", str(exc.detail)))

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        raw = await request.body()
        if len(raw) > settings.corpus_cap_bytes:
            raise ApiError(413, "corpus_too_large",
                           f"corpus exceeds {settings.corpus_cap_bytes} bytes")
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "bad_json", "request body is not valid JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "bad_json", "request body must be an object")

        if body.get("corpus_path"):
            try:
                docs = corpus_mod.read_corpus(str(body["corpus_path"]))
            except (OSError, corpus_mod.CorpusError) as exc:
                raise ApiError(400, "bad_corpus", str(exc))
        else:
            records = body.get("documents")
            if not isinstance(records, list) or not records:
                raise ApiError(400, "bad_corpus",
                               "provide a nonempty documents array or corpus_path")
            try:
                docs = corpus_mod.documents_from_records(records)
            except corpus_mod.CorpusError as exc:
                raise ApiError(400, "bad_corpus", str(exc))

        fit_config, opts, build_cfg = _session_config(body)
        try:
            vocab = corpus_mod.build_vocabulary(
                docs, cap=build_cfg["cap"], min_df=build_cfg["min_df"], opts=opts
            )
            matrix = corpus_mod.vectorize(docs, vocab, opts=opts)
        except corpus_mod.CorpusError as exc:
            raise ApiError(400, "bad_corpus", str(exc))

        session = Session(
            id=uuid.uuid4().hex,
            docs=docs,
            vocab=vocab,
            matrix=matrix,
            base_config=fit_config,
            doc_index={d.id: k for k, d in enumerate(docs)},
        )
        store.add(session)
        return {"session_id": session.id, "n_documents": len(docs),
                "vocabulary_size": len(vocab), "factors": fit_config.n_factors}

    @app.get("/sessions/{session_id}/vocabulary")
    async def get_vocabulary(session_id: str):
        session = store.get(session_id)
        return {"terms": session.vocab.terms}

    @app.post("/sessions/{session_id}/fit", status_code=202)
    async def start_fit(session_id: str, request: Request):
        session = store.get(session_id)
        try:
            body = await request.json()
        except Exception:
            body = {}
        if not isinstance(body, dict):
            raise ApiError(400, "bad_json", "request body must be an object")
        anchors = _parse_fit_anchors(body, session)
        warm = bool(body.get("warm_start", False))

        with session.lock:
            if session.status == "fitting":
                raise ApiError(409, "fit_in_flight", "a fit is already running")
            generation = session.generation + 1
            if "seed" in body and body["seed"] is not None:
                seed = int(body["seed"])
            else:
                seed = session.base_config.seed + generation
            q_init = None
            if warm and session.current is not None:
                q_init = session.current.final_q
            config = dataclasses.replace(session.base_config, anchors=anchors, seed=seed)
            session.generation = generation
            session.status = "fitting"
            session.error = None
            session.history.append({
                "generation": generation,
                "anchors": [
                    {"term": session.vocab.terms[a.word], "factor": a.factor,
                     "strength": a.strength}
                    for a in anchors.entries
                ],
                "beta": anchors.default_strength,
                "warm_start": warm and q_init is not None,
                "seed": seed,
                "timestamp": time.time(),
            })
        thread = threading.Thread(
            target=_run_fit, args=(store, session, config, q_init, generation, warm),
            daemon=True,
        )
        thread.start()
        return {"accepted": True, "generation": generation}

    @app.get("/sessions/{session_id}/status")
    async def get_status(session_id: str):
        session = store.get(session_id)
        with session.lock:
            current = session.current
            return {
                "status": session.status,
                "error": session.error,
                "generation_requested": session.generation,
                "generation_completed": current.generation if current else 0,
                "iterations_run": current.report.iterations_run if current else None,
                "converged": current.report.converged if current else None,
            }

    def _require_fit(session: Session) -> CompletedFit:
        current = session.current
        if current is None:
            raise ApiError(409, "no_completed_fit", "no fit has completed yet")
        return current

    @app.get("/sessions/{session_id}/topics")
    async def get_topics(session_id: str, top: int = 10):
        session = store.get(session_id)
        current = _require_fit(session)
        rep = topic_report(current.model, current.report.mi, session.vocab, top_t=top)
        return {
            "generation": current.generation,
            "tc_history": [float(v) for v in current.report.tc_history],
            "tc_per_factor": [float(v) for v in current.report.tc_per_factor],
            "converged": current.report.converged,
            "iterations_run": current.report.iterations_run,
            "factors": rep.to_json_obj(),
        }

    @app.get("/sessions/{session_id}/docs/{doc_id}/scores")
    async def get_doc_scores(session_id: str, doc_id: str):
        session = store.get(session_id)
        current = _require_fit(session)
        row = session.doc_index.get(doc_id)
        if row is None:
            raise ApiError(404, "unknown_document", f"no document {doc_id}")
        return {
            "generation": current.generation,
            "doc_id": doc_id,
            "scores": [float(v) for v in current.scores[row]],
        }

    @app.get("/sessions/{session_id}/history")
    async def get_history(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return {"snapshots": list(session.history)}

    @app.post("/sessions/{session_id}/metrics")
    async def post_metrics(session_id: str, request: Request):
        session = store.get(session_id)
        current = _require_fit(session)
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "bad_json", "request body is not valid JSON")
        pairs_raw = body.get("pairs")
        if not isinstance(pairs_raw, list) or not pairs_raw:
            raise ApiError(400, "bad_pairs", "provide a nonempty pairs array")
        pairs: list[tuple[str, int]] = []
        for p in pairs_raw:
            try:
                pairs.append((str(p["label"]), int(p["factor"])))
            except (KeyError, TypeError, ValueError):
                raise ApiError(400, "bad_pairs", f"invalid pair {p!r}")
        bad = [j for _, j in pairs if not 0 <= j < current.model.m]
        if bad:
            raise ApiError(400, "bad_pairs", f"factor index out of range: {bad}")
        threshold = float(body.get("threshold", 0.5))
        truth_by_label = {
            name: np.array([1 if name in d.labels else 0 for d in session.docs])
            for name, _ in pairs
        }
        report = evaluation.evaluate_factors(
            current.scores, pairs, truth_by_label, threshold=threshold
        )
        return Response(content=evaluation.metrics_report_bytes(report),
                        media_type="application/json")

    @app.delete("/sessions/{session_id}", status_code=204)
    async def delete_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.status == "fitting":
                raise ApiError(409, "fit_in_flight",
                               "cannot delete while a fit is running")
        store.remove(session_id)
        return Response(status_code=204)

    return app
