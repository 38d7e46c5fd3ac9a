"""LDA by collapsed Gibbs sampling, topic-count sweeps and topic assignment."""
from __future__ import annotations

import csv
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numba import njit

from .coherence import CoherenceResult, WindowStats, c_v
from .vectorize import SparseMatrix, Vocabulary

log = logging.getLogger(__name__)

UNDEFINED_TOPIC = 100
MODEL_FORMAT = "cascadescope.lda"
MODEL_VERSION = 1
DEFAULT_GRID = tuple(range(2, 31, 2))


@dataclass(frozen=True)
class LdaHyperparams:
    K: int
    alpha: float | None = None
    eta: float | None = None
    iterations: int = 100
    passes: int = 2
    chunk_size: int = 10_000
    gamma_threshold: float = 0.001
    seed: int = 0
    top_n: int = 20

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.iterations < 1 or self.passes < 1:
            raise ValueError("iterations and passes must be >= 1")
        for name in ("alpha", "eta"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def alpha_(self) -> float:
        return 1.0 / self.K if self.alpha is None else self.alpha

    @property
    def eta_(self) -> float:
        return 1.0 / self.K if self.eta is None else self.eta


# chunk sizes of the two published configurations; Gibbs ignores chunking
PRESETS = {"sweep": {"chunk_size": 10_000}, "final": {"chunk_size": 50_000}}


@dataclass
class PassDiagnostics:
    pass_no: int
    phi_sum_err: float
    theta_sum_err: float
    mean_dtheta: float


@dataclass
class TopicModel:
    params: LdaHyperparams
    phi: np.ndarray
    theta: np.ndarray
    terms: list[str] | None = None
    coherence: CoherenceResult | None = None
    history: list[PassDiagnostics] = field(default_factory=list)
    assignments: np.ndarray | None = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return self.phi.shape[0]

    def top_term_ids(self, n: int | None = None) -> np.ndarray:
        n = self.params.top_n if n is None else n
        # stable sort keeps column (lexicographic) order among equal weights
        return np.argsort(-self.phi, axis=1, kind="stable")[:, :n]

    def top_terms(self, n: int | None = None) -> list[list[str]]:
        if self.terms is None:
            raise ValueError("model has no vocabulary attached")
        return [[self.terms[i] for i in row] for row in self.top_term_ids(n)]

    def to_json(self, vocab_hash: str | None = None) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": asdict(self.params) | {"alpha_used": self.params.alpha_, "eta_used": self.params.eta_},
            "vocab_hash": vocab_hash,
            "shape": list(self.phi.shape),
            "phi": self.phi.ravel().tolist(),
            "top_terms": self.top_terms(20) if self.terms is not None else None,
            "coherence": None
            if self.coherence is None
            else {"per_topic": self.coherence.per_topic, "mean": self.coherence.mean},
        }

    def save(self, path: str | Path, vocab_hash: str | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_json(vocab_hash)), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary | None = None) -> "TopicModel":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("format") != MODEL_FORMAT or obj.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: not a version {MODEL_VERSION} model file")
        raw = {k: v for k, v in obj["params"].items() if k not in ("alpha_used", "eta_used")}
        params = LdaHyperparams(**raw)
        phi = np.array(obj["phi"], dtype=float).reshape(obj["shape"])
        if vocab is not None and obj.get("vocab_hash") not in (None, vocab.digest()):
            raise ValueError("model was trained on a different vocabulary")
        coh = obj.get("coherence")
        return cls(
            params,
            phi,
            np.zeros((0, phi.shape[0])),
            terms=None if vocab is None else list(vocab.terms),
            coherence=None if coh is None else CoherenceResult(coh["per_topic"]),
        )


@njit(cache=True)
def _gibbs_sweep(doc_of, word_of, z, ndk, nkw, nk, alpha, eta, v_eta, u):
    K = nk.shape[0]
    p = np.empty(K)
    for i in range(word_of.shape[0]):
        d = doc_of[i]
        w = word_of[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + eta) / (nk[t] + v_eta)
            p[t] = total
        r = u[i] * total
        k = 0
        while k < K - 1 and p[k] <= r:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


def _expand_tokens(counts: SparseMatrix) -> tuple[np.ndarray, np.ndarray]:
    m = counts.matrix.tocsr()
    m.sort_indices()
    reps = np.rint(m.data).astype(np.int64)
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    return np.repeat(rows, reps).astype(np.int64), np.repeat(m.indices.astype(np.int64), reps)


def _normalized(counts: np.ndarray, prior: float) -> np.ndarray:
    x = counts.astype(np.float64) + prior
    return x / x.sum(axis=1, keepdims=True)


def train_lda(
    counts: SparseMatrix,
    params: LdaHyperparams,
    vocab: Vocabulary | None = None,
    on_pass: Callable[[TopicModel], None] | None = None,
) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling; ``iterations`` sweeps per pass.

    Training stops early once the mean absolute change of theta between two
    passes falls below ``gamma_threshold``. ``on_pass`` sees the model
    after every pass, including the current token assignments.
    """
    n_docs, V = counts.shape
    if n_docs == 0 or V == 0 or counts.nnz == 0:
        raise ValueError("count matrix is empty")
    K = params.K
    if V < K:
        warnings.warn(f"vocabulary ({V}) smaller than K ({K})", stacklevel=2)
    alpha, eta = params.alpha_, params.eta_
    doc_of, word_of = _expand_tokens(counts)
    rng = np.random.default_rng(params.seed)
    z = rng.integers(0, K, size=len(word_of)).astype(np.int64)
    ndk = np.zeros((n_docs, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, word_of), 1)
    nk = nkw.sum(axis=1)

    theta_prev = _normalized(ndk, alpha)
    terms = None if vocab is None else list(vocab.terms)
    model = TopicModel(params, _normalized(nkw, eta), theta_prev, terms)
    model.assignments = z  # live view; on_pass callbacks see the current sample
    for pass_no in range(1, params.passes + 1):
        for _ in range(params.iterations):
            _gibbs_sweep(doc_of, word_of, z, ndk, nkw, nk, alpha, eta, V * eta, rng.random(len(word_of)))
        phi, theta = _normalized(nkw, eta), _normalized(ndk, alpha)
        dtheta = float(np.mean(np.abs(theta - theta_prev)))
        model.phi, model.theta = phi, theta
        model.history.append(
            PassDiagnostics(
                pass_no,
                float(np.max(np.abs(phi.sum(axis=1) - 1.0))),
                float(np.max(np.abs(theta.sum(axis=1) - 1.0))),
                dtheta,
            )
        )
        if on_pass is not None:
            on_pass(model)
        theta_prev = theta
        if dtheta < params.gamma_threshold:
            break
    return model


class Inference(NamedTuple):
    theta: np.ndarray
    undefined: bool


def infer_theta(model: TopicModel, doc: np.ndarray | dict[int, float], max_iter: int = 500, tol: float = 1e-12) -> Inference:
    """Posterior-mode topic proportions for one document with phi held fixed."""
    K = model.K
    if isinstance(doc, dict):
        ids = np.fromiter(doc.keys(), dtype=np.int64, count=len(doc))
        cnt = np.fromiter(doc.values(), dtype=float, count=len(doc))
    else:
        dense = np.asarray(doc, dtype=float).ravel()
        ids = np.flatnonzero(dense)
        cnt = dense[ids]
    n = cnt.sum()
    if n == 0:
        return Inference(np.full(K, 1.0 / K), True)
    alpha = model.params.alpha_
    phi_w = model.phi[:, ids]
    theta = np.full(K, 1.0 / K)
    for _ in range(max_iter):
        resp = theta[:, None] * phi_w
        resp /= resp.sum(axis=0, keepdims=True)
        new = (alpha + resp @ cnt) / (n + K * alpha)
        new /= new.sum()
        done = np.max(np.abs(new - theta)) < tol
        theta = new
        if done:
            break
    return Inference(theta, False)


def assign_topic(theta: Sequence[float], uniform_tol: float = 1e-9) -> int:
    theta = np.asarray(theta, dtype=float)
    if theta.max() - theta.min() <= uniform_tol:
        return UNDEFINED_TOPIC
    return int(np.argmax(theta))


@dataclass
class SweepResult:
    scores: list[tuple[int, float]]
    selected_K: int | None
    models: dict[int, TopicModel]
    failures: dict[int, str]


def _fit_scored(counts, params, vocab, stats):
    model = train_lda(counts, params, vocab)
    if stats is not None and vocab is not None:
        model.coherence = c_v(model.top_terms(), stats)
    return model


def sweep_topic_counts(
    counts: SparseMatrix,
    K_grid: Sequence[int] = DEFAULT_GRID,
    params: LdaHyperparams | None = None,
    vocab: Vocabulary | None = None,
    stats: WindowStats | None = None,
    workers: int = 1,
) -> SweepResult:
    """Train one model per K and select the K with the highest mean C_v.

    Failures are recorded per K and the sweep continues. Ties go to the
    first K in grid order.
    """
    if not K_grid:
        raise ValueError("K_grid is empty")
    if stats is None or vocab is None:
        raise ValueError("coherence selection needs both vocab and window stats")
    base = params or LdaHyperparams(K=K_grid[0])
    jobs = {K: replace(base, K=K) for K in K_grid}
    models: dict[int, TopicModel] = {}
    failures: dict[int, str] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {K: pool.submit(_fit_scored, counts, p, vocab, stats) for K, p in jobs.items()}
            for K, fut in futs.items():
                try:
                    models[K] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per K
                    failures[K] = repr(exc)
    else:
        for K, p in jobs.items():
            try:
                models[K] = _fit_scored(counts, p, vocab, stats)
            except Exception as exc:  # noqa: BLE001
                failures[K] = repr(exc)
            else:
                log.info("K=%d mean C_v=%.4f", K, models[K].coherence.mean)
    scores = [(K, models[K].coherence.mean) for K in K_grid if K in models]
    valid = [(K, s) for K, s in scores if np.isfinite(s)]
    selected = max(valid, key=lambda ks: ks[1])[0] if valid else None
    return SweepResult(scores, selected, models, failures)


def write_assignments(tweet_ids: Sequence[str], theta: np.ndarray, path: str | Path, uniform_tol: float = 1e-9) -> list[int]:
    labels = []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tweet_id", "topic", "theta_max"])
        for tid, row in zip(tweet_ids, theta):
            label = assign_topic(row, uniform_tol)
            labels.append(label)
            w.writerow([tid, label, f"{row.max():.6f}"])
    return labels


def read_assignments(path: str | Path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["tweet_id"]: int(row["topic"]) for row in csv.DictReader(fh)}
