"""Finite scenario spaces, scenario-indexed random variables, and a
deterministic geometric-Brownian-motion sampler.

Everything here is a plain value object: construction validates, after
that all operations are pure functions and safe to call concurrently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import (
    InvalidParams,
    NonFiniteInput,
    ParseError,
    ProbabilityError,
    SpaceMismatch,
)

PROB_TOL = 1e-12


def _as_float_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D array, got shape {arr.shape}")
    return arr


def validate_weights(weights: np.ndarray) -> np.ndarray:
    """Check a probability vector: nonnegative, sums to 1 within 1e-12."""
    w = _as_float_array(weights)
    if not np.all(np.isfinite(w)):
        raise ProbabilityError("probability weights must be finite")
    if np.any(w < 0.0):
        raise ProbabilityError(f"negative probability weight: min={w.min()}")
    total = float(w.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise ProbabilityError(f"probabilities sum to {total!r}, not 1")
    return w


@dataclass(frozen=True)
class ScenarioSpace:
    """A finite sample space, optionally carrying a probability vector.

    ``labels`` defaults to 0..n-1; an explicit list must be unique and of
    length ``n_scenarios``.
    """

    n_scenarios: int
    labels: tuple | None = None
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise InvalidParams("a scenario space needs at least one scenario")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.n_scenarios:
                raise InvalidParams("label count does not match n_scenarios")
            if len(set(labels)) != len(labels):
                raise InvalidParams("scenario labels must be unique")
            object.__setattr__(self, "labels", labels)
        if self.probabilities is not None:
            w = validate_weights(self.probabilities)
            if len(w) != self.n_scenarios:
                raise ProbabilityError("probability vector length mismatch")
            w.setflags(write=False)
            object.__setattr__(self, "probabilities", w)

    def label_list(self) -> list:
        if self.labels is not None:
            return list(self.labels)
        return list(range(self.n_scenarios))

    def __eq__(self, other):
        if not isinstance(other, ScenarioSpace):
            return NotImplemented
        if self.n_scenarios != other.n_scenarios:
            return False
        if (self.labels or other.labels) and self.labels != other.labels:
            return False
        a, b = self.probabilities, other.probabilities
        if (a is None) != (b is None):
            return False
        return a is None or bool(np.array_equal(a, b))


@dataclass(frozen=True)
class ScenarioVector:
    """A bounded random variable represented by one value per scenario."""

    values: np.ndarray
    space: ScenarioSpace

    def __post_init__(self):
        v = _as_float_array(self.values)
        if len(v) != self.space.n_scenarios:
            raise SpaceMismatch(
                f"vector length {len(v)} != {self.space.n_scenarios} scenarios"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("scenario values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ProbabilityVector:
    """A probability measure on a finite scenario space."""

    weights: np.ndarray
    space: ScenarioSpace | None = None

    def __post_init__(self):
        w = validate_weights(self.weights)
        if self.space is not None and len(w) != self.space.n_scenarios:
            raise SpaceMismatch("weight length does not match the space")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)


def as_weights(P) -> np.ndarray:
    """Accept a ProbabilityVector, ScenarioSpace, or raw array; return weights."""
    if isinstance(P, ProbabilityVector):
        return P.weights
    if isinstance(P, ScenarioSpace):
        if P.probabilities is None:
            raise ProbabilityError("scenario space carries no probabilities")
        return P.probabilities
    return validate_weights(np.asarray(P, dtype=float))


def as_values(Z) -> np.ndarray:
    if isinstance(Z, ScenarioVector):
        return Z.values
    v = _as_float_array(Z)
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("scenario values must be finite")
    return v


@dataclass(frozen=True)
class GbmParams:
    """Geometric Brownian motion: X_T = x0 * exp((mu - sigma^2/2) T + sigma sqrt(T) W)."""

    x0: float
    mu: float
    sigma: float
    horizon_T: float

    def __post_init__(self):
        if not (self.x0 > 0):
            raise InvalidParams(f"x0 must be positive, got {self.x0}")
        if not (self.sigma > 0):
            raise InvalidParams(f"sigma must be positive, got {self.sigma}")
        if not (self.horizon_T > 0):
            raise InvalidParams(f"horizon_T must be positive, got {self.horizon_T}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def expectation(Q, Z) -> float:
    """E_Q(Z) = sum_i q_i Z_i. Raises SpaceMismatch on incompatible lengths."""
    q = as_weights(Q)
    z = as_values(Z)
    if len(q) != len(z):
        raise SpaceMismatch(f"lengths differ: {len(q)} vs {len(z)}")
    if isinstance(Q, ProbabilityVector) and isinstance(Z, ScenarioVector):
        if Q.space is not None and Q.space != Z.space:
            raise SpaceMismatch("Q and Z live on different scenario spaces")
    return float(q @ z)


def sup_norm(Z) -> float:
    """max_w |Z(w)|."""
    z = as_values(Z)
    return float(np.max(np.abs(z)))


def _standard_normals(seed: int, n: int, dim: int | None = None) -> np.ndarray:
    """Deterministic standard normals: counter-based uniforms mapped through
    the inverse normal CDF. Identical (seed, n, dim) replays bit-identically
    on any platform; parallel callers must partition seeds, not share state.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    shape = (n,) if dim is None else (n, dim)
    u = gen.random(shape)
    # u == 0.0 has probability 2^-53 per draw but would map to -inf
    np.clip(u, np.finfo(float).tiny, None, out=u)
    return ndtri(u)


def sample_gbm(params: GbmParams, n_scenarios: int, seed: int) -> tuple[ScenarioSpace, ScenarioVector]:
    """Sample the unaffected horizon price under GBM on a uniform finite space."""
    if n_scenarios < 1:
        raise InvalidParams("n_scenarios must be >= 1")
    w = _standard_normals(seed, n_scenarios)
    p = params
    log_vals = np.log(p.x0) + (p.mu - 0.5 * p.sigma**2) * p.horizon_T
    log_vals = log_vals + p.sigma * np.sqrt(p.horizon_T) * w
    values = np.exp(log_vals)
    space = ScenarioSpace(
        n_scenarios=n_scenarios,
        probabilities=np.full(n_scenarios, 1.0 / n_scenarios),
    )
    return space, ScenarioVector(values=values, space=space)


def sample_gbm_correlated(
    params: Sequence[GbmParams],
    correlations: np.ndarray,
    n_scenarios: int,
    seed: int,
) -> tuple[ScenarioSpace, list[ScenarioVector]]:
    """Jointly sample several GBM prices with correlated Brownian drivers.

    ``correlations`` is the n x n correlation matrix of the terminal
    Brownian increments (unit diagonal, positive definite).
    """
    from .errors import NonPSDCovariance

    R = np.asarray(correlations, dtype=float)
    n_assets = len(params)
    if R.shape != (n_assets, n_assets):
        raise InvalidParams("correlation matrix shape does not match params")
    if not np.allclose(R, R.T, atol=1e-12):
        raise NonPSDCovariance("correlation matrix is not symmetric")
    if not np.allclose(np.diag(R), 1.0, atol=1e-12):
        raise NonPSDCovariance("correlation matrix diagonal must be 1")
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise NonPSDCovariance("correlation matrix is not positive definite") from exc
    z = _standard_normals(seed, n_scenarios, dim=n_assets)
    w = z @ L.T
    space = ScenarioSpace(
        n_scenarios=n_scenarios,
        probabilities=np.full(n_scenarios, 1.0 / n_scenarios),
    )
    out = []
    for i, p in enumerate(params):
        vals = p.x0 * np.exp(
            (p.mu - 0.5 * p.sigma**2) * p.horizon_T
            + p.sigma * np.sqrt(p.horizon_T) * w[:, i]
        )
        out.append(ScenarioVector(values=vals, space=space))
    return space, out


# ---------------------------------------------------------------------------
# file ingestion
# ---------------------------------------------------------------------------

def load_scenarios(path, fmt: str | None = None) -> tuple[ScenarioSpace, dict[str, ScenarioVector]]:
    """Load a scenario table from CSV or JSON.

    CSV header: ``scenario,prob,<asset1>,<asset2>,...`` with the ``prob``
    column optional. JSON mirror:
    ``{"labels": [...], "probabilities": [...], "assets": {"name": [...]}}``.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"scenario file not found: {path}")
    kind = (fmt or path.suffix.lstrip(".")).lower()
    if kind == "csv":
        return _load_csv(path)
    if kind == "json":
        return _load_json(path)
    raise ParseError(f"unsupported scenario format: {kind!r}")


def _load_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "scenario":
            raise ParseError(f"{path}: first column must be 'scenario'")
        has_prob = len(header) > 1 and header[1] == "prob"
        asset_names = header[2:] if has_prob else header[1:]
        if not asset_names:
            raise ParseError(f"{path}: no asset columns")
        labels, probs, columns = [], [], {a: [] for a in asset_names}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            labels.append(row[0].strip())
            body = row[1:]
            try:
                if has_prob:
                    probs.append(float(body[0]))
                    body = body[1:]
                for name, cell in zip(asset_names, body):
                    columns[name].append(float(cell))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return _assemble(labels, probs if has_prob else None, columns)


def _load_json(path: Path):
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, Mapping) or "assets" not in doc:
        raise ParseError(f"{path}: expected an object with an 'assets' map")
    assets = doc["assets"]
    if not isinstance(assets, Mapping) or not assets:
        raise ParseError(f"{path}: 'assets' must be a non-empty map")
    columns = {str(k): list(map(float, v)) for k, v in assets.items()}
    n = len(next(iter(columns.values())))
    labels = [str(x) for x in doc.get("labels", range(n))]
    probs = doc.get("probabilities")
    return _assemble(labels, probs, columns)


def _assemble(labels, probs, columns):
    n = len(labels)
    if n == 0:
        raise ParseError("scenario table has no data rows")
    for name, col in columns.items():
        if len(col) != n:
            raise ParseError(f"asset column {name!r} has {len(col)} rows, expected {n}")
    p = None
    if probs is not None:
        p = validate_weights(np.asarray(probs, dtype=float))
        if len(p) != n:
            raise ProbabilityError("probability column length mismatch")
    space = ScenarioSpace(n_scenarios=n, labels=tuple(labels), probabilities=p)
    vectors = {
        name: ScenarioVector(values=np.asarray(col, dtype=float), space=space)
        for name, col in columns.items()
    }
    return space, vectors
