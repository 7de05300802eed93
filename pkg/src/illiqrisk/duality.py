"""Numeric convex conjugation on grids, translation-invariant lifts, and
penalty-function duals on finite probability simplices.

Conjugates are taken over the stored grid, with the u-range sized from the
finite-difference slopes of f: the slopes of a finite convex grid function
exhaust the domain where the conjugate of its piecewise-linear extension is
finite. Outside that range the conjugate is +infinity; such entries carry a
large-finite sentinel and are excluded from biconjugation maxima. For
piecewise-linear f whose kinks are grid nodes this makes recovery exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AbsoluteContinuityViolation,
    EmptyGrid,
    InvalidParams,
    OutOfGridSpan,
)
from .illiq import block_risk_curve, portfolio_block_values, split_risk_curve, _weights_for
from .impact import CheckReport, ImpactModel
from .riskmeasure import (
    AverageValueAtRisk,
    Entropic,
    RiskFunctional,
    ValueAtRisk,
    WorstCase,
    rho,
)
from .scenario import ProbabilityVector, ScenarioVector, as_values, as_weights

INF_SENTINEL = float(np.finfo(np.float64).max)


# ---------------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """A real function sampled on a strictly increasing 1-D grid.

    ``domain_mask`` (set on conjugates) marks nodes where the extended
    conjugate is finite; masked-out nodes hold the raw grid maximum but are
    skipped in biconjugation.
    """

    grid: np.ndarray
    values: np.ndarray
    domain_mask: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.size == 0:
            raise EmptyGrid("grid function needs at least one node")
        if g.ndim != 1 or v.shape != g.shape:
            raise InvalidParams("grid and values must be matching 1-D arrays")
        if np.any(np.diff(g) <= 0):
            raise InvalidParams("grid must be strictly increasing")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
            raise InvalidParams("grid function must be finite")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def __call__(self, y: float) -> float:
        return interp_value(self, y)

    def slopes(self) -> np.ndarray:
        if len(self.grid) < 2:
            return np.zeros(0)
        return np.diff(self.values) / np.diff(self.grid)

    def is_midpoint_convex(self, tol: float = 1e-9) -> bool:
        s = self.slopes()
        if len(s) < 2:
            return True
        scale = max(1.0, float(np.max(np.abs(s))))
        return bool(np.all(np.diff(s) >= -tol * scale))

    def values_with_sentinel(self) -> np.ndarray:
        if self.domain_mask is None:
            return self.values
        return np.where(self.domain_mask, self.values, INF_SENTINEL)


def interp_value(f: GridFunction, y: float) -> float:
    g = f.grid
    span = g[-1] - g[0] if len(g) > 1 else 1.0
    if y < g[0] - 1e-12 * span or y > g[-1] + 1e-12 * span:
        raise OutOfGridSpan(f"{y} outside grid span [{g[0]}, {g[-1]}]")
    return float(np.interp(y, g, f.values))


@dataclass(frozen=True)
class TensorGridFunction:
    """A function on a tensor product of 1-D grids (n <= 3)."""

    axes: tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if not (1 <= len(axes) <= 3):
            raise InvalidParams("tensor grids support 1 to 3 axes")
        for a in axes:
            if a.ndim != 1 or len(a) < 2 or np.any(np.diff(a) <= 0):
                raise InvalidParams("each axis must be strictly increasing")
        v = np.asarray(self.values, dtype=float)
        if v.shape != tuple(len(a) for a in axes):
            raise InvalidParams("value shape does not match the axes")
        if not np.all(np.isfinite(v)):
            raise InvalidParams("tensor grid values must be finite")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", v)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def node_matrix(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def __call__(self, point) -> float:
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator(self.axes, self.values, method="linear",
                                         bounds_error=True)
        try:
            return float(interp(np.asarray(point, dtype=float)))
        except ValueError as exc:
            raise OutOfGridSpan(str(exc)) from None


# ---------------------------------------------------------------------------
# building f and g from measure configurations
# ---------------------------------------------------------------------------

def build_f(model: ImpactModel, x_tilde: ScenarioVector, functional: RiskFunctional,
            P=None, grid=None, family: str = "block",
            quadrature: str | None = None) -> GridFunction:
    """Sample y -> rho(Z_y) on a grid spanning both signs of y.

    family "block" uses per-share offsetting exposures; "split" the
    integrated (signed for y < 0) split exposures. The grid must contain 0,
    where the block branch equals rho(x_tilde) by convention.
    """
    g = np.asarray(grid, dtype=float)
    if not np.any(g == 0.0):
        raise InvalidParams("the f-grid must contain 0")
    if family == "block":
        vals = block_risk_curve(model, x_tilde, functional, P, g)
    elif family == "split":
        vals = split_risk_curve(model, x_tilde, functional, P, g, quadrature=quadrature)
    else:
        raise InvalidParams(f"unknown exposure family {family!r}")
    return GridFunction(grid=g, values=np.asarray(vals, dtype=float))


def build_g(model: ImpactModel, x_tilde: ScenarioVector, functional: RiskFunctional,
            P=None, grid=None) -> GridFunction:
    """Short-side companion: y -> rho(-Z_y) on a two-sided grid."""
    from .illiq import short_risk_curve
    g = np.asarray(grid, dtype=float)
    if not np.any(g == 0.0):
        raise InvalidParams("the g-grid must contain 0")
    vals = short_risk_curve(model, x_tilde, functional, P, g)
    return GridFunction(grid=g, values=np.asarray(vals, dtype=float))


def build_f_portfolio(models, x_tildes, functional: RiskFunctional, P=None,
                      axes: Sequence[np.ndarray] = (),
                      family: str = "block") -> TensorGridFunction:
    """Multivariate f on a tensor grid (n <= 3), one axis per asset."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if family != "block":
        raise InvalidParams("portfolio f supports the block family")
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    values = portfolio_block_values(models, x_tildes, points)
    weights = _weights_for(functional, x_tildes[0], P)
    flat = functional.compute(values, weights)
    return TensorGridFunction(axes=axes, values=flat.reshape([len(a) for a in axes]))


# ---------------------------------------------------------------------------
# conjugation
# ---------------------------------------------------------------------------

_CHUNK = 256


def _grid_max(u_nodes: np.ndarray, y_nodes: np.ndarray, f_vals: np.ndarray) -> np.ndarray:
    """max_y (u*y - f(y)) for each u, chunked to bound memory."""
    out = np.empty(len(u_nodes))
    for start in range(0, len(u_nodes), _CHUNK):
        block = u_nodes[start:start + _CHUNK, None] * y_nodes[None, :] - f_vals[None, :]
        out[start:start + _CHUNK] = block.max(axis=1)
    return out


def conjugate(f: GridFunction, u_grid=None, n_points: int = 4096) -> GridFunction:
    """Legendre transform on the grid: f*(u) = max_y (u*y - f(y)).

    The u-grid spans the finite-difference slope range of f plus a unit
    margin, with the exact slopes appended so piecewise-linear inputs
    conjugate exactly. ``domain_mask`` is False where the extension
    conjugate is +infinity.
    """
    if len(f.grid) < 2:
        raise InvalidParams("conjugation needs at least two grid nodes")
    s = f.slopes()
    s_min, s_max = float(s.min()), float(s.max())
    if u_grid is None:
        base = np.linspace(s_min - 1.0, s_max + 1.0, n_points)
        u = np.union1d(base, np.unique(s))
    else:
        u = np.unique(np.asarray(u_grid, dtype=float))
    if len(u) > 1:
        # union1d can leave nodes packed within float noise of each other;
        # degenerate spacing breaks downstream slope arithmetic
        spacing_floor = 1e-12 * max(1.0, float(u[-1] - u[0]))
        keep = np.concatenate([[True], np.diff(u) > spacing_floor])
        u = u[keep]
    star = _grid_max(u, f.grid, f.values)
    stol = 1e-9 * (1.0 + max(abs(s_min), abs(s_max)))
    mask = (u >= s_min - stol) & (u <= s_max + stol)
    return GridFunction(grid=u, values=star, domain_mask=mask)


def conjugate_value(f_star: GridFunction, y: float) -> float:
    """sup_u (y*u - f*(u)) over the finite part of the conjugate grid."""
    mask = f_star.domain_mask
    u = f_star.grid if mask is None else f_star.grid[mask]
    v = f_star.values if mask is None else f_star.values[mask]
    if len(u) == 0:
        raise EmptyGrid("conjugate has no finite nodes")
    return float(np.max(y * u - v))


@dataclass(frozen=True)
class ConjugatePair:
    """f together with its conjugate and biconjugate, and the recovery error
    max |f** - f| over interior grid nodes."""

    f: GridFunction
    f_star: GridFunction
    f_star_star: GridFunction
    max_recovery_error: float
    input_convex: bool

    def error_bound(self) -> float:
        """2*C*dy with C the largest finite |u| and dy the largest grid step."""
        mask = self.f_star.domain_mask
        u = self.f_star.grid if mask is None else self.f_star.grid[mask]
        c = float(np.max(np.abs(u))) if len(u) else 0.0
        dy = float(np.max(np.diff(self.f.grid)))
        return 2.0 * c * dy


def biconjugate_check(f: GridFunction, n_points: int = 4096) -> ConjugatePair:
    """Conjugate twice and measure recovery. Non-convex inputs are flagged;
    their biconjugate is the convex envelope, which sits below f somewhere."""
    f_star = conjugate(f, n_points=n_points)
    mask = f_star.domain_mask
    u = f_star.grid[mask]
    v = f_star.values[mask]
    fss = _grid_max(f.grid, u, v)
    f_star_star = GridFunction(grid=f.grid, values=fss)
    interior = slice(1, -1) if len(f.grid) > 2 else slice(None)
    err = float(np.max(np.abs(fss[interior] - f.values[interior])))
    return ConjugatePair(
        f=f, f_star=f_star, f_star_star=f_star_star,
        max_recovery_error=err, input_convex=f.is_midpoint_convex(),
    )


def conjugate_nd(f: TensorGridFunction, n_points_per_axis: int = 33) -> TensorGridFunction:
    """Tensor-grid Legendre transform, u-axes sized from per-axis slope
    ranges. Cost is |U|*|Y|; keep the grids desk-sized."""
    u_axes = []
    for axis in range(f.ndim):
        diffs = np.diff(f.values, axis=axis)
        steps = np.diff(f.axes[axis]).reshape([-1 if i == axis else 1 for i in range(f.ndim)])
        s = diffs / steps
        u_axes.append(np.linspace(float(s.min()) - 1.0, float(s.max()) + 1.0,
                                  n_points_per_axis))
    y_nodes = f.node_matrix()
    f_flat = f.values.ravel()
    grids = np.meshgrid(*u_axes, indexing="ij")
    u_nodes = np.stack([g.ravel() for g in grids], axis=1)
    out = np.empty(len(u_nodes))
    for start in range(0, len(u_nodes), _CHUNK):
        block = u_nodes[start:start + _CHUNK] @ y_nodes.T - f_flat[None, :]
        out[start:start + _CHUNK] = block.max(axis=1)
    return TensorGridFunction(axes=tuple(u_axes),
                              values=out.reshape([len(a) for a in u_axes]))


def biconjugate_nd(f: TensorGridFunction, n_points_per_axis: int = 33):
    """Tensor biconjugate; returns (f**, max interior recovery error)."""
    f_star = conjugate_nd(f, n_points_per_axis)
    u_nodes = f_star.node_matrix()
    star_flat = f_star.values.ravel()
    y_nodes = f.node_matrix()
    out = np.empty(len(y_nodes))
    for start in range(0, len(y_nodes), _CHUNK):
        block = y_nodes[start:start + _CHUNK] @ u_nodes.T - star_flat[None, :]
        out[start:start + _CHUNK] = block.max(axis=1)
    fss = out.reshape(f.values.shape)
    interior = tuple(slice(1, -1) for _ in range(f.ndim))
    err = float(np.max(np.abs(fss[interior] - f.values[interior])))
    return TensorGridFunction(axes=f.axes, values=fss), err


# ---------------------------------------------------------------------------
# translation-invariant lifts
# ---------------------------------------------------------------------------

def beta_hat(f: GridFunction, h: float, x: float, side: str = "long") -> float:
    """Lift of f to (position + cash, cash) coordinates.

    "long" (cash-sub-additive orientation):   f(h - x) + x
    "short" (cash-super-additive orientation, also used for split-trade
    measures): f(h - x) - x
    """
    base = interp_value(f, h - x)
    if side == "long":
        return base + x
    if side == "short":
        return base - x
    raise InvalidParams(f"unknown side {side!r}")


def beta_hat_nd(f: TensorGridFunction, h, x, side: str = "long") -> float:
    """Multivariate lift f(h_vec - x_vec) +/- mean(x_vec).

    The cash shift enters through its average so that adding m to every
    coordinate of (h, x) moves the value by exactly m; at n = 1 this is the
    univariate +x lift.
    """
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    base = f(h - x)
    shift = float(np.mean(x))
    if side == "long":
        return base + shift
    if side == "short":
        return base - shift
    raise InvalidParams(f"unknown side {side!r}")


def lipschitz_check(f: GridFunction | TensorGridFunction, trials: int = 10_000,
                    seed: int = 0, side: str = "long",
                    extra_pairs: Sequence[tuple] = ()) -> CheckReport:
    """Empirical Lipschitz ratio of the lift over random pairs in the grid
    span; the pass bound is sqrt(2 n) in the Euclidean norm on (h, x) pairs.
    """
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    univariate = isinstance(f, GridFunction)
    n = 1 if univariate else f.ndim
    axes = (f.grid,) if univariate else f.axes
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    span = hi - lo
    gen = np.random.Generator(np.random.Philox(key=int(seed)))

    ys = lo + span * gen.random((2 * trials, n))
    xs = (gen.random((2 * trials, n)) - 0.5) * span
    hs = ys + xs

    def value(h_vec, x_vec):
        if univariate:
            return beta_hat(f, float(h_vec[0]), float(x_vec[0]), side=side)
        return beta_hat_nd(f, h_vec, x_vec, side=side)

    vals = np.array([value(hs[i], xs[i]) for i in range(2 * trials)])
    points = np.concatenate([hs, xs], axis=1)
    d = np.linalg.norm(points[0::2] - points[1::2], axis=1)
    num = np.abs(vals[0::2] - vals[1::2])
    ok = d > 1e-12
    ratios = num[ok] / d[ok]

    best = float(ratios.max()) if len(ratios) else 0.0
    for hbar, vbar in extra_pairs:
        hbar = np.asarray(hbar, dtype=float)
        vbar = np.asarray(vbar, dtype=float)
        dd = float(np.linalg.norm(hbar - vbar))
        if dd <= 1e-12:
            continue
        va = value(hbar[:n], hbar[n:])
        vb = value(vbar[:n], vbar[n:])
        best = max(best, abs(va - vb) / dd)

    bound = math.sqrt(2.0 * n)
    report = CheckReport(name="lipschitz", pairs_tested=int(ok.sum()) + len(extra_pairs))
    report.details = {"max_ratio": best, "bound": bound, "dimension": n}
    if best > bound + 1e-9:
        report.violations.append({"max_ratio": best, "bound": bound})
    return report


# ---------------------------------------------------------------------------
# penalty functions and the simplex dual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyEvaluation:
    """alpha(Q) for one candidate measure; ``exact`` is False when only a
    probe-based lower bound is available."""

    Q: np.ndarray
    alpha: float
    exact: bool
    method: str


def _check_abs_continuity(q: np.ndarray, p: np.ndarray, kind: str) -> None:
    bad = (q > 1e-15) & (p == 0.0)
    if np.any(bad):
        raise AbsoluteContinuityViolation(
            f"{kind}: Q charges scenario(s) {np.nonzero(bad)[0].tolist()} "
            "that have zero probability under P"
        )


def penalty_alpha(functional: RiskFunctional, P, Q, probes=None) -> PenaltyEvaluation:
    """Minimal penalty alpha(Q) = sup_Z (E_Q(-Z) - rho(Z)).

    Closed forms: worst-case 0; AVaR 0/ +inf by the density cap 1/delta;
    entropic relative entropy. For VaR only a probe-based lower bound is
    reported (the sup over a finite probe set cannot certify the true
    penalty).
    """
    q = as_weights(Q)
    if isinstance(functional, WorstCase):
        return PenaltyEvaluation(Q=q, alpha=0.0, exact=True, method="closed-form")
    p = as_weights(P)
    if len(p) != len(q):
        from .errors import SpaceMismatch
        raise SpaceMismatch("P and Q lengths differ")
    if isinstance(functional, AverageValueAtRisk):
        _check_abs_continuity(q, p, "avar")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(q > 0, q / np.where(p > 0, p, 1.0), 0.0)
        alpha = 0.0 if float(ratio.max()) <= 1.0 / functional.delta + 1e-12 else math.inf
        return PenaltyEvaluation(Q=q, alpha=alpha, exact=True, method="closed-form")
    if isinstance(functional, Entropic):
        _check_abs_continuity(q, p, "entropic")
        pos = q > 0
        alpha = float(np.sum(q[pos] * np.log(q[pos] / p[pos]))) / functional.lam
        return PenaltyEvaluation(Q=q, alpha=alpha, exact=True, method="closed-form")
    if probes is None or not len(probes):
        raise InvalidParams(
            f"no closed-form penalty for {functional.kind}; provide probe vectors"
        )
    best = -math.inf
    for z in probes:
        zv = as_values(z)
        best = max(best, float(-(q @ zv)) - rho(functional, zv, p))
    return PenaltyEvaluation(Q=q, alpha=best, exact=False, method="probe-lower-bound")


def _dual_value(functional, q, p, z) -> float:
    """E_Q(-Z) - alpha(Q), -inf when the penalty is infinite."""
    if isinstance(functional, WorstCase):
        return float(-(q @ z))
    if isinstance(functional, AverageValueAtRisk):
        ok = np.all(q <= np.asarray(p) / functional.delta + 1e-12)
        return float(-(q @ z)) if ok else -math.inf
    if isinstance(functional, Entropic):
        pos = q > 0
        if np.any(pos & (np.asarray(p) == 0.0)):
            return -math.inf
        kl = float(np.sum(q[pos] * np.log(q[pos] / np.asarray(p)[pos])))
        return float(-(q @ z)) - kl / functional.lam
    raise InvalidParams(f"dual check needs a closed-form penalty, got {functional.kind}")


def dual_check(model: ImpactModel, x_tilde: ScenarioVector,
               functional: RiskFunctional, P, y: float,
               n_samples: int = 1000, seed: int = 0) -> CheckReport:
    """Verify the simplex dual at one position: the sup of E_Q(-Z_y) - alpha(Q)
    over simplex vertices, the known maximiser, and random simplex samples
    must meet rho(Z_y) within 1e-9, and no sample may exceed it (weak
    duality)."""
    from .impact import offsetting_exposure

    z = offsetting_exposure(model, x_tilde, y).z.values
    p = _weights_for(functional, x_tilde, P)
    if p is None:
        p = np.full(len(z), 1.0 / len(z))
    beta_val = float(functional.compute(z, None if isinstance(functional, WorstCase) else p))

    n = len(z)
    candidates: list[tuple[str, np.ndarray]] = []
    eye = np.eye(n)
    for i in range(n):
        candidates.append((f"vertex-{i}", eye[i]))
    if isinstance(functional, Entropic):
        candidates.append(("entropic-maximiser", functional.maximising_measure(z, p)))
    elif isinstance(functional, AverageValueAtRisk):
        candidates.append(("tail-measure", functional.tail_measure(z, p)))

    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    u = gen.random((n_samples, n))
    np.clip(u, np.finfo(float).tiny, None, out=u)
    e = -np.log(u)
    samples = e / e.sum(axis=1, keepdims=True)

    best_name, best_val = "", -math.inf
    for name, q in candidates:
        val = _dual_value(functional, q, p, z)
        if val > best_val:
            best_name, best_val = name, val

    weak_violations = 0
    for i in range(n_samples):
        val = _dual_value(functional, samples[i], p, z)
        if val > beta_val + 1e-9:
            weak_violations += 1
        if val > best_val:
            best_name, best_val = f"sample-{i}", val

    report = CheckReport(name="simplex-dual", pairs_tested=n_samples + len(candidates))
    gap = abs(best_val - beta_val)
    report.details = {
        "beta": beta_val, "dual_sup": best_val, "gap": gap,
        "maximiser": best_name, "weak_duality_violations": weak_violations,
    }
    if gap > 1e-9:
        report.violations.append({"check": "attainment", "gap": gap})
    if weak_violations:
        report.violations.append({"check": "weak-duality", "count": weak_violations})
    return report
