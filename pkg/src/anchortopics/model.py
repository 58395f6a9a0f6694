"""The anchored latent-factor optimizer.

Learns m binary latent factors over binary presence/absence data by
coordinate ascent on a tractable lower bound of the total correlation the
factors explain: iterate posterior inference, marginal re-estimation, and a
winner-take-all competition over word-factor connections. Anchors clamp
chosen connections to a fixed strength so the anchored factor keeps paying
attention to the anchored word no matter how the competition goes.

All probability arithmetic lives in the log domain; per-document scores are
computed as a constant full-absence term per factor plus a sparse correction
over present words, so an iteration costs O(nnz*m + n*m) rather than
O(N*n*m).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import SparseBinaryMatrix

MODEL_FORMAT_VERSION = 1
_MODEL_MAGIC = b"ANCHORTOPICS"


class DimensionError(ValueError):
    """Data width does not match the model's word count."""


@dataclass(frozen=True)
class Anchor:
    word: int
    factor: int
    strength: float


@dataclass
class AnchorSet:
    """Clamped (word, factor, strength) connections.

    The same word may anchor several factors and a factor may carry several
    anchor words; duplicate (word, factor) pairs are rejected.
    """

    entries: list[Anchor] = field(default_factory=list)
    default_strength: float = 1.0

    def __post_init__(self) -> None:
        seen = set()
        for a in self.entries:
            if a.strength <= 0:
                raise ValueError(f"anchor strength must be positive: {a}")
            key = (a.word, a.factor)
            if key in seen:
                raise ValueError(f"duplicate anchor pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, word: int, factor: int, strength: float | None = None) -> None:
        s = self.default_strength if strength is None else strength
        self.entries.append(Anchor(word, factor, s))
        self.__post_init__()

    def factors_of(self, word: int) -> list[int]:
        return [a.factor for a in self.entries if a.word == word]

    def words_of(self, factor: int) -> list[Anchor]:
        return [a for a in self.entries if a.factor == factor]

    def validate_against(self, n_words: int, n_factors: int) -> None:
        for a in self.entries:
            if not 0 <= a.word < n_words:
                raise ValueError(f"anchor word index {a.word} out of range")
            if not 0 <= a.factor < n_factors:
                raise ValueError(f"anchor factor index {a.factor} out of range")


@dataclass
class FitConfig:
    n_factors: int
    max_iter: int = 200
    tol: float = 1e-5
    patience: int = 10
    seed: int = 0
    gamma: float = 0.5
    lam: float = 0.5
    anchors: AnchorSet = field(default_factory=AnchorSet)
    anchored_words_compete: bool = False
    # Coordinate ascent lands in local optima; fit runs this many seeded
    # restarts and keeps the best final objective. Warm starts skip restarts.
    n_restarts: int = 10
    # Test hook for frozen-structure runs: from this iteration on the
    # connection update is skipped (gamma treated as 0).
    freeze_structure_after: int | None = None

    def __post_init__(self) -> None:
        if self.n_factors < 1:
            raise ValueError("n_factors must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.lam <= 0:
            raise ValueError("smoothing lam must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")


@dataclass
class Posteriors:
    q: np.ndarray       # (N, m, 2): q[l, j, y] = p(y_j = y | x^l)
    log_z: np.ndarray   # (N, m): per-document per-factor log normalizer


@dataclass
class LatentFactorModel:
    alpha: np.ndarray         # (n, m) connection weights
    log_prior: np.ndarray     # (m, 2) log p(y_j = y)
    log_cond: np.ndarray      # (n, m, 2, 2) log p(x_i = v | y_j = y), [i,j,v,y]
    log_marg: np.ndarray      # (n, 2) log p(x_i = v)
    anchor_mask: np.ndarray   # (n, m) bool, clamped entries
    orientation: np.ndarray   # (m,) int8, -1 where states were swapped
    anchors: AnchorSet
    config: FitConfig

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def m(self) -> int:
        return self.alpha.shape[1]

    def copy(self) -> "LatentFactorModel":
        return LatentFactorModel(
            alpha=self.alpha.copy(),
            log_prior=self.log_prior.copy(),
            log_cond=self.log_cond.copy(),
            log_marg=self.log_marg.copy(),
            anchor_mask=self.anchor_mask.copy(),
            orientation=self.orientation.copy(),
            anchors=self.anchors,
            config=self.config,
        )


@dataclass
class FitReport:
    tc_history: list[float]
    tc_per_factor: np.ndarray
    mi: np.ndarray
    iterations_run: int
    converged: bool

    def to_json_obj(self) -> dict:
        return {
            "tc_history": [float(v) for v in self.tc_history],
            "tc_per_factor": [float(v) for v in self.tc_per_factor],
            "iterations_run": self.iterations_run,
            "converged": self.converged,
        }


def _clamp_anchors(model: LatentFactorModel) -> None:
    for a in model.anchors.entries:
        model.alpha[a.word, a.factor] = a.strength


def init_model(
    data: SparseBinaryMatrix,
    config: FitConfig,
    q_init: np.ndarray | None = None,
) -> tuple[LatentFactorModel, Posteriors]:
    """Seeded initialization: soft random responsibilities, uniform
    connections (anchors clamped), marginals moment-matched once.

    ``q_init`` replaces the random responsibilities for warm starts.
    """
    n, m = data.n_cols, config.n_factors
    if n < 1:
        raise ValueError("data has no columns")
    config.anchors.validate_against(n, m)

    if q_init is None:
        rng = np.random.default_rng(config.seed)
        q1 = rng.uniform(0.3, 0.7, size=(data.n_rows, m))
        q = np.stack([1.0 - q1, q1], axis=2)
    else:
        if (
            q_init.ndim != 3
            or q_init.shape[0] != data.n_rows
            or q_init.shape[1] > m
            or q_init.shape[2] != 2
        ):
            raise DimensionError(
                f"q_init shape {q_init.shape} incompatible with {(data.n_rows, m, 2)}"
            )
        q = q_init.copy()
        if q_init.shape[1] < m:
            # Growing the factor count mid-session: keep the learned
            # responsibilities. A new factor that carries anchors starts
            # from its anchor words' presence pattern (softened into the
            # usual 0.3..0.7 envelope) so it can claim its intended words
            # instead of starving; unanchored new factors start random.
            rng = np.random.default_rng(config.seed)
            extra1 = rng.uniform(0.3, 0.7, size=(data.n_rows, m - q_init.shape[1]))
            X = data.to_csr()
            for j in range(q_init.shape[1], m):
                words = [a.word for a in config.anchors.entries if a.factor == j]
                if words:
                    presence = np.asarray(X[:, words].mean(axis=1)).ravel()
                    extra1[:, j - q_init.shape[1]] = 0.3 + 0.4 * presence
            extra = np.stack([1.0 - extra1, extra1], axis=2)
            q = np.concatenate([q, extra], axis=1)
    posteriors = Posteriors(q=q, log_z=np.zeros((data.n_rows, m)))

    alpha = np.full((n, m), 1.0 / m)
    anchor_mask = np.zeros((n, m), dtype=bool)
    for a in config.anchors.entries:
        anchor_mask[a.word, a.factor] = True

    model = LatentFactorModel(
        alpha=alpha,
        log_prior=np.full((m, 2), np.log(0.5)),
        log_cond=np.zeros((n, m, 2, 2)),
        log_marg=np.zeros((n, 2)),
        anchor_mask=anchor_mask,
        orientation=np.ones(m, dtype=np.int8),
        anchors=config.anchors,
        config=config,
    )
    if not config.anchored_words_compete:
        anchored_words = anchor_mask.any(axis=1)
        model.alpha[anchored_words] = 0.0
    _clamp_anchors(model)
    model = update_marginals(model, data, posteriors, config.lam)
    return model, posteriors


def compute_posteriors(model: LatentFactorModel, data: SparseBinaryMatrix) -> Posteriors:
    """Per-document per-factor posteriors under the current parameters.

    score_lj(y) = log p(y_j=y) + sum_i alpha_ij (log p(x_i|y_j=y) - log p(x_i))
    restructured as a full-absence constant per factor plus a sparse
    correction over the document's present words.
    """
    if data.n_cols != model.n:
        raise DimensionError(f"data has {data.n_cols} columns, model expects {model.n}")
    X = data.to_csr()
    n, m = model.n, model.m

    evid0 = model.log_cond[:, :, 0, :] - model.log_marg[:, None, 0, None]  # (n, m, 2)
    evid1 = model.log_cond[:, :, 1, :] - model.log_marg[:, None, 1, None]
    a = model.alpha[:, :, None]
    base = model.log_prior + np.sum(a * evid0, axis=0)                     # (m, 2)
    delta = (a * (evid1 - evid0)).reshape(n, 2 * m)

    scores = (X @ delta).reshape(-1, m, 2) + base
    mx = scores.max(axis=2, keepdims=True)
    log_z = (mx[:, :, 0] + np.log(np.exp(scores - mx).sum(axis=2)))
    q = np.exp(scores - log_z[:, :, None])
    return Posteriors(q=q, log_z=log_z)


def transform(model: LatentFactorModel, new_data: SparseBinaryMatrix) -> Posteriors:
    """compute_posteriors with frozen parameters, for held-out documents."""
    return compute_posteriors(model, new_data)


def update_marginals(
    model: LatentFactorModel,
    data: SparseBinaryMatrix,
    posteriors: Posteriors,
    lam: float,
) -> LatentFactorModel:
    """Moment-match factor priors and word conditionals to the current
    responsibilities, with lam pseudo-counts on the conditionals."""
    N = data.n_rows
    n, m = model.n, model.m
    q = posteriors.q
    if q.shape != (N, m, 2):
        raise DimensionError(f"posterior shape {q.shape} != {(N, m, 2)}")
    X = data.to_csr()

    qsum = q.sum(axis=0)                                   # (m, 2)
    with np.errstate(divide="ignore"):
        model.log_prior = np.log(qsum / N)

    present = (X.T @ q.reshape(N, 2 * m)).reshape(n, m, 2)  # sum_l x_i q[l,j,y]
    p1 = (present + lam) / (qsum[None, :, :] + 2.0 * lam)
    model.log_cond[:, :, 1, :] = np.log(p1)
    model.log_cond[:, :, 0, :] = np.log1p(-p1)

    df = data.doc_freq()
    pm1 = (df + lam) / (N + 2.0 * lam)
    model.log_marg = np.stack([np.log1p(-pm1), np.log(pm1)], axis=1)
    return model


def mutual_information(
    model: LatentFactorModel,
    data: SparseBinaryMatrix,
    posteriors: Posteriors,
) -> np.ndarray:
    """MI (nats) between every word and every factor, from the empirical
    joint p(x_i=v, y_j=y) = (1/N) sum_l q[l,j,y] 1[x_i^l = v]."""
    N = data.n_rows
    n, m = model.n, model.m
    q = posteriors.q
    X = data.to_csr()

    j1 = (X.T @ q.reshape(N, 2 * m)).reshape(n, m, 2) / N   # p(x=1, y)
    py = q.sum(axis=0) / N                                  # (m, 2)
    j0 = py[None, :, :] - j1                                # p(x=0, y)
    joint = np.stack([j0, j1], axis=2)                      # (n, m, 2, 2) [i,j,v,y]
    np.clip(joint, 0.0, None, out=joint)
    pv = joint.sum(axis=3)                                  # (n, m, 2)

    denom = pv[:, :, :, None] * py[None, :, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log(joint / denom)
    terms[joint <= 0.0] = 0.0
    mi = terms.sum(axis=(2, 3))
    np.clip(mi, 0.0, None, out=mi)
    return mi


def update_alpha(
    model: LatentFactorModel, mi: np.ndarray, gamma: float
) -> LatentFactorModel:
    """Winner-take-all competition, damped: each word moves weight toward its
    highest-MI factor (lowest index wins ties); anchors re-clamped after."""
    n, m = model.n, model.m
    jstar = np.argmax(mi, axis=1)
    target = np.zeros((n, m))
    target[np.arange(n), jstar] = 1.0
    model.alpha = (1.0 - gamma) * model.alpha + gamma * target
    if not model.config.anchored_words_compete:
        anchored_words = model.anchor_mask.any(axis=1)
        model.alpha[anchored_words] = 0.0
    _clamp_anchors(model)
    return model


def tc_bound(posteriors: Posteriors) -> tuple[np.ndarray, float]:
    """Per-factor objective contributions (mean log normalizer) and total."""
    per_factor = posteriors.log_z.mean(axis=0)
    return per_factor, float(per_factor.sum())


def fit(
    data: SparseBinaryMatrix,
    config: FitConfig,
    q_init: np.ndarray | None = None,
) -> tuple[LatentFactorModel, FitReport]:
    """Fit the model, restarting from config.n_restarts seeded inits and
    keeping the run with the best final objective.

    The anchored reward is embodied in the objective through the clamped
    connections, so restart selection also prefers solutions where anchored
    factors actually align with their anchors. A warm start (q_init given)
    runs once from the provided posteriors.
    """
    if data.n_rows < 1:
        raise ValueError("data has no rows")
    if q_init is not None or config.n_restarts == 1:
        return _fit_once(data, config, config.seed, q_init)
    best: tuple[LatentFactorModel, FitReport] | None = None
    for r in range(config.n_restarts):
        model, report = _fit_once(data, config, config.seed + r * 1000003, None)
        if best is None or report.tc_history[-1] > best[1].tc_history[-1]:
            best = (model, report)
    assert best is not None
    best[0].config = config
    return best


def _fit_once(
    data: SparseBinaryMatrix,
    config: FitConfig,
    seed: int,
    q_init: np.ndarray | None,
) -> tuple[LatentFactorModel, FitReport]:
    """One coordinate-ascent run until the objective stabilizes.

    Convergence means the objective moved less than config.tol for
    config.patience consecutive iterations; hitting max_iter instead is
    reported as converged=False, not an error. The returned model is
    oriented so state 1 of each factor means topic presence, and the
    report's final values are evaluated against exactly that model.
    """
    config = dataclasses.replace(config, seed=seed)
    model, posteriors = init_model(data, config, q_init=q_init)

    tc_history: list[float] = []
    prev_tc: float | None = None
    streak = 0
    converged = False
    iterations = 0

    for it in range(config.max_iter):
        posteriors = compute_posteriors(model, data)
        _, tc_total = tc_bound(posteriors)
        tc_history.append(tc_total)

        model = update_marginals(model, data, posteriors, config.lam)
        mi = mutual_information(model, data, posteriors)
        frozen = (
            config.freeze_structure_after is not None
            and it >= config.freeze_structure_after
        )
        if not frozen:
            model = update_alpha(model, mi, config.gamma)
        iterations = it + 1

        if prev_tc is not None and abs(tc_total - prev_tc) < config.tol:
            streak += 1
            if streak >= config.patience:
                converged = True
                break
        else:
            streak = 0
        prev_tc = tc_total

    from .topics import orient_factors

    model = orient_factors(model, data)
    posteriors = compute_posteriors(model, data)
    per_factor, tc_total = tc_bound(posteriors)
    tc_history.append(tc_total)
    mi = mutual_information(model, data, posteriors)

    report = FitReport(
        tc_history=tc_history,
        tc_per_factor=per_factor,
        mi=mi,
        iterations_run=iterations,
        converged=converged,
    )
    return model, report


# ---------------------------------------------------------------------------
# Persistence: a single self-describing binary file. Layout: magic, format
# version, a JSON header (config, anchors, array shapes in order), then the
# raw little-endian array bytes. Deterministic: identical models produce
# byte-identical files.

_ARRAY_FIELDS = ("alpha", "log_prior", "log_cond", "log_marg", "anchor_mask", "orientation")


def _config_to_obj(config: FitConfig) -> dict:
    return {
        "n_factors": config.n_factors,
        "max_iter": config.max_iter,
        "tol": config.tol,
        "patience": config.patience,
        "seed": config.seed,
        "gamma": config.gamma,
        "lam": config.lam,
        "anchored_words_compete": config.anchored_words_compete,
        "n_restarts": config.n_restarts,
        "freeze_structure_after": config.freeze_structure_after,
        "anchors": {
            "default_strength": config.anchors.default_strength,
            "entries": [[a.word, a.factor, a.strength] for a in config.anchors.entries],
        },
    }


def _config_from_obj(obj: dict) -> FitConfig:
    anchors = AnchorSet(
        entries=[Anchor(int(w), int(f), float(s)) for w, f, s in obj["anchors"]["entries"]],
        default_strength=float(obj["anchors"]["default_strength"]),
    )
    return FitConfig(
        n_factors=int(obj["n_factors"]),
        max_iter=int(obj["max_iter"]),
        tol=float(obj["tol"]),
        patience=int(obj["patience"]),
        seed=int(obj["seed"]),
        gamma=float(obj["gamma"]),
        lam=float(obj["lam"]),
        anchors=anchors,
        anchored_words_compete=bool(obj["anchored_words_compete"]),
        n_restarts=int(obj["n_restarts"]),
        freeze_structure_after=obj["freeze_structure_after"],
    )


def save_model(model: LatentFactorModel, path: str) -> None:
    arrays = {name: np.ascontiguousarray(getattr(model, name)) for name in _ARRAY_FIELDS}
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "n": model.n,
        "m": model.m,
        "config": _config_to_obj(model.config),
        "arrays": [
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)}
            for name, arr in arrays.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for arr in arrays.values():
            fh.write(arr.tobytes())


def load_model(path: str) -> LatentFactorModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MODEL_MAGIC))
        if magic != _MODEL_MAGIC:
            raise ValueError("not a model file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["format_version"] != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported format version {header['format_version']}")
        arrays = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            arrays[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    config = _config_from_obj(header["config"])
    return LatentFactorModel(
        alpha=arrays["alpha"],
        log_prior=arrays["log_prior"],
        log_cond=arrays["log_cond"],
        log_marg=arrays["log_marg"],
        anchor_mask=arrays["anchor_mask"],
        orientation=arrays["orientation"],
        anchors=config.anchors,
        config=config,
    )


def resolve_anchor_spec(
    spec_entries: list[tuple[str, int, float | None]],
    term_index: dict[str, int],
    default_strength: float = 1.0,
) -> AnchorSet:
    """Map (term, factor, strength) triples to word indices.

    Unknown terms are an error: a silently dropped anchor would destroy the
    experiment the caller thinks they ran.
    """
    unknown = sorted({t for t, _, _ in spec_entries if t not in term_index})
    if unknown:
        raise KeyError(f"anchor terms not in vocabulary: {', '.join(unknown)}")
    anchors = AnchorSet(default_strength=default_strength)
    for term, factor, strength in spec_entries:
        anchors.add(term_index[term], factor, strength)
    return anchors


def parse_anchor_spec(text: str) -> list[tuple[str, int, float | None]]:
    """Parse "term:factor[:strength]" entries from a comma list or lines."""
    entries: list[tuple[str, int, float | None]] = []
    for chunk in text.replace("\n", ",").split(","):
        chunk = chunk.strip()
        if not chunk or chunk.startswith("#"):
            continue
        parts = chunk.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad anchor entry {chunk!r}; expected term:factor[:strength]")
        term = parts[0].strip()
        factor = int(parts[1])
        strength = float(parts[2]) if len(parts) == 3 else None
        if not term:
            raise ValueError(f"bad anchor entry {chunk!r}; empty term")
        entries.append((term, factor, strength))
    return entries
