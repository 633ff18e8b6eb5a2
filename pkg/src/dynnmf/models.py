"""Likelihood families, theta-scores and trajectory simulators.

Four conditional models share the network matrix A:

- ``poisson_ar``:      y_t | y_{t-1} ~ prod_i Poisson(theta_i), theta = A y_{t-1}
- ``exponential_ar``:  y_t | y_{t-1} ~ prod_i Exp(rate theta_i), theta = A y_{t-1}
- ``multinomial_panel``: aggregated counts of L independent Markov chains with
  transition matrix A (rows on the simplex); the conditional law of y_t is the
  convolution over origin states of multinomial draws
- ``static_poisson``:  i.i.d. matrices with cellwise Poisson(a_ij) intensities

The two autoregressions optionally carry a KNOWN immigration intercept c,
theta = A y_{t-1} + c, used consistently by the simulator and all likelihood
evaluations; without it the Poisson autoregression is absorbed at zero and no
nondegenerate stationary trajectory exists. The intercept is never estimated.

Dynamic likelihoods condition on the first observation (terms t = 2..T).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.special import gammaln

import numpy as np

from . import _kernels
from .core import NormalizedNmf, check_nonneg_matrix
from .errors import DomainError, InputError, NonStationary, UnsupportedFamily

POISSON_AR = "poisson_ar"
EXPONENTIAL_AR = "exponential_ar"
MULTINOMIAL_PANEL = "multinomial_panel"
STATIC_POISSON = "static_poisson"

FAMILIES = (POISSON_AR, EXPONENTIAL_AR, MULTINOMIAL_PANEL, STATIC_POISSON)
# families whose conditional law is l(y; theta) with theta = A y_{t-1} (+c)
THETA_FAMILIES = (POISSON_AR, EXPONENTIAL_AR, STATIC_POISSON)


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus dimensions and family-specific options.

    intercept: known immigration vector c (length n) for the autoregressions.
    population: number L of individuals for the multinomial panel.
    """

    family: str
    n: int
    m: int
    intercept: np.ndarray | None = None
    population: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.n < 1 or self.m < 1:
            raise ValueError("dimensions must be positive")
        if self.family in (POISSON_AR, EXPONENTIAL_AR, MULTINOMIAL_PANEL) and self.n != self.m:
            raise ValueError(f"{self.family} requires a square matrix (n == m)")
        if self.intercept is not None:
            if self.family not in (POISSON_AR, EXPONENTIAL_AR):
                raise ValueError("intercept applies to the autoregressive families only")
            c = np.asarray(self.intercept, dtype=float)
            if c.shape != (self.n,) or c.min() < 0 or not np.all(np.isfinite(c)):
                raise ValueError("intercept must be a nonnegative length-n vector")
            c = c.copy()
            c.flags.writeable = False
            object.__setattr__(self, "intercept", c)
        if self.family == MULTINOMIAL_PANEL:
            if self.population is None or int(self.population) < 1:
                raise ValueError("multinomial_panel requires a positive population")
            object.__setattr__(self, "population", int(self.population))


@dataclass(frozen=True)
class Trajectory:
    """Observed path: (T, n) vectors, or (T, n, m) matrices for the static model."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim not in (2, 3) or y.shape[0] < 1:
            raise ValueError(f"trajectory must be (T, n) or (T, n, m), got {y.shape}")
        if not np.all(np.isfinite(y)) or y.min() < 0:
            raise ValueError("observations must be finite and nonnegative")
        y = y.copy()
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def t_len(self) -> int:
        return self.y.shape[0]


def _check_shapes(spec: ModelSpec, a: np.ndarray, traj: Trajectory) -> np.ndarray:
    a = check_nonneg_matrix(a)
    if a.shape != (spec.n, spec.m):
        raise ValueError(f"A has shape {a.shape}, spec says {(spec.n, spec.m)}")
    want = (spec.n, spec.m) if spec.family == STATIC_POISSON else (spec.n,)
    if traj.y.shape[1:] != want:
        raise ValueError(f"trajectory slices have shape {traj.y.shape[1:]}, expected {want}")
    return a


def _check_rows_simplex(a: np.ndarray, tol: float = 1e-8) -> None:
    gap = np.abs(a.sum(axis=1) - 1.0).max()
    if gap > tol:
        raise ValueError(f"multinomial transition rows must sum to one (gap {gap:.2e})")


def dynamic_theta(spec: ModelSpec, a: np.ndarray, ylag: np.ndarray) -> np.ndarray:
    """Conditional parameter theta_t = A y_{t-1} (+ intercept), stacked over t."""
    theta = ylag @ a.T
    if spec.intercept is not None:
        theta = theta + spec.intercept
    return theta


def loglik(spec: ModelSpec, a, traj: Trajectory) -> float:
    """Exact log-likelihood of the trajectory given the network matrix.

    Dynamic families sum the conditional terms t = 2..T; the static model
    sums over all T slices. Raises DomainError when an observation has zero
    probability (zero Poisson intensity with a positive count, or a
    nonpositive exponential rate).
    """
    a = _check_shapes(spec, a, traj)
    y = traj.y
    if spec.family == STATIC_POISSON:
        theta = np.broadcast_to(a, y.shape)
        ll, _, _ = _kernels.poisson_stats(theta.ravel(), y.ravel())
        if not np.isfinite(ll):
            raise DomainError("zero intensity with a positive count")
        return float(ll - gammaln(y + 1.0).sum())
    if y.shape[0] < 2:
        raise ValueError("dynamic families need at least two observations")
    ylag, yobs = y[:-1], y[1:]
    if spec.family == POISSON_AR:
        theta = dynamic_theta(spec, a, ylag)
        ll, _, _ = _kernels.poisson_stats(theta.ravel(), yobs.ravel())
        if not np.isfinite(ll):
            raise DomainError("zero intensity with a positive count")
        return float(ll - gammaln(yobs + 1.0).sum())
    if spec.family == EXPONENTIAL_AR:
        theta = dynamic_theta(spec, a, ylag)
        ll, _, _ = _kernels.exponential_stats(theta.ravel(), yobs.ravel())
        if not np.isfinite(ll):
            raise DomainError("exponential rate <= 0")
        return float(ll)
    # multinomial panel: exact convolution of row multinomials
    _check_rows_simplex(a)
    total = 0.0
    for t in range(1, y.shape[0]):
        total += _multinomial_step_logpmf(y[t - 1], y[t], a)
    return float(total)


def score_theta(spec: ModelSpec, theta, y) -> np.ndarray:
    """d log l / d theta for the theta-parametrized families.

    Poisson (and static Poisson cells): y/theta - 1; exponential: 1/theta - y.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.family in (POISSON_AR, STATIC_POISSON):
        pos = y > 0
        if np.any(theta < 0) or np.any(pos & (theta == 0)):
            raise DomainError("zero intensity with a positive count")
        safe = np.where(pos, theta, 1.0)
        return np.where(pos, y / safe, 0.0) - 1.0
    if spec.family == EXPONENTIAL_AR:
        if np.any(theta <= 0):
            raise DomainError("exponential rate <= 0")
        return 1.0 / theta - y
    raise UnsupportedFamily(f"theta-score undefined for {spec.family}")


def curvature_theta(spec: ModelSpec, theta, y) -> np.ndarray:
    """Diagonal of d^2 log l / d theta^2 (nonpositive: concavity)."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.family in (POISSON_AR, STATIC_POISSON):
        pos = y > 0
        if np.any(theta < 0) or np.any(pos & (theta == 0)):
            raise DomainError("zero intensity with a positive count")
        safe = np.where(pos, theta, 1.0)
        return -np.where(pos, y / safe**2, 0.0)
    if spec.family == EXPONENTIAL_AR:
        if np.any(theta <= 0):
            raise DomainError("exponential rate <= 0")
        return -1.0 / theta**2
    raise UnsupportedFamily(f"theta-curvature undefined for {spec.family}")


# ---------------------------------------------------------------------------
# simulation


def spectral_radius(a: np.ndarray, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Perron root of a nonnegative matrix by power iteration."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    x = np.ones(a.shape[0]) / math.sqrt(a.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        y = a @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x_new = y / norm
        if abs(norm - lam) < tol * max(1.0, norm):
            return float(norm)
        lam, x = norm, x_new
    return float(lam)


def simulate(spec: ModelSpec, a, t_len: int, burn_in: int = 200,
             rng_seed: int = 0) -> Trajectory:
    """Simulate a reproducible trajectory of length t_len after burn_in draws.

    The autoregressions require spectral radius < 1 (raises NonStationary);
    the multinomial panel requires transition rows on the simplex.
    """
    a = check_nonneg_matrix(a)
    if a.shape != (spec.n, spec.m):
        raise ValueError(f"A has shape {a.shape}, spec says {(spec.n, spec.m)}")
    if t_len < 1 or burn_in < 0:
        raise ValueError("t_len must be >= 1 and burn_in >= 0")
    rng = np.random.default_rng(rng_seed)

    if spec.family == STATIC_POISSON:
        y = rng.poisson(a, size=(t_len,) + a.shape).astype(float)
        return Trajectory(y=y)

    if spec.family == MULTINOMIAL_PANEL:
        _check_rows_simplex(a)
        state = rng.multinomial(spec.population, np.full(spec.n, 1.0 / spec.n)).astype(float)
        out = np.empty((t_len, spec.n))
        for t in range(burn_in + t_len):
            nxt = np.zeros(spec.n)
            for i in range(spec.n):
                cnt = int(state[i])
                if cnt:
                    nxt += rng.multinomial(cnt, a[i])
            state = nxt
            if t >= burn_in:
                out[t - burn_in] = state
        return Trajectory(y=out)

    rho = spectral_radius(a)
    if rho >= 1.0:
        raise NonStationary(f"spectral radius {rho:.4f} >= 1")
    c = spec.intercept if spec.intercept is not None else np.zeros(spec.n)

    if spec.family == POISSON_AR:
        mu = np.linalg.solve(np.eye(spec.n) - a, c)
        state = rng.poisson(np.maximum(mu, 0.0)).astype(float)
        out = np.empty((t_len, spec.n))
        for t in range(burn_in + t_len):
            state = rng.poisson(a @ state + c).astype(float)
            if t >= burn_in:
                out[t - burn_in] = state
        return Trajectory(y=out)

    # exponential autoregression; rates must stay positive along the path
    state = np.ones(spec.n)
    out = np.empty((t_len, spec.n))
    for t in range(burn_in + t_len):
        rate = a @ state + c
        if rate.min() <= 0.0:
            raise DomainError("exponential rate hit zero during simulation; "
                              "add a positive intercept or use a positive A")
        state = rng.exponential(1.0 / rate)
        if t >= burn_in:
            out[t - burn_in] = state
    return Trajectory(y=out)


# ---------------------------------------------------------------------------
# rankings


@dataclass(frozen=True)
class Ranking:
    """Segments ordered best-first with their profile values (1-based labels)."""

    order: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class RankingReport:
    """Per-component vulnerability (beta*) and viral-load (gamma*) rankings."""

    vulnerability: tuple[Ranking, ...]
    viral_load: tuple[Ranking, ...]


def _rank_one(values: np.ndarray) -> Ranking:
    order = np.argsort(-values, kind="stable")
    return Ranking(order=order + 1, values=values[order].copy())


def ranking_report(p: NormalizedNmf) -> RankingReport:
    """Rank segments by vulnerability and viral load for each component.

    Descending values; ties broken by the lower segment index first.
    """
    vul = tuple(_rank_one(p.beta_star[:, k]) for k in range(p.k))
    vir = tuple(_rank_one(p.gamma_star[:, k]) for k in range(p.k))
    return RankingReport(vulnerability=vul, viral_load=vir)


# ---------------------------------------------------------------------------
# multinomial panel: exact convolution pmf by dynamic programming


@lru_cache(maxsize=100000)
def _compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    if parts == 1:
        return ((total,),)
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return tuple(out)


def _multinomial_step_logpmf(y_prev: np.ndarray, y_next: np.ndarray, a: np.ndarray) -> float:
    """log P(Y_t = y_next | Y_{t-1} = y_prev) for the aggregated panel.

    Sums over all transition-count matrices with the given margins; the
    per-row factors are multinomial pmfs. Exact but exponential in n and
    the counts, intended for small panels.
    """
    n = a.shape[0]
    prev = np.rint(y_prev).astype(int)
    nxt = np.rint(y_next).astype(int)
    if prev.sum() != nxt.sum():
        raise DomainError("population not conserved between consecutive observations")
    log_a = np.full_like(a, -np.inf, dtype=float)
    np.log(a, out=log_a, where=a > 0)

    # states: remaining counts per destination still to be produced
    states: dict[tuple[int, ...], float] = {tuple(nxt.tolist()): 0.0}
    for i in range(n):
        cnt = int(prev[i])
        comps = _compositions(cnt, n)
        base = gammaln(cnt + 1.0)
        moves = []
        for comp in comps:
            comp_arr = np.asarray(comp)
            if np.any((comp_arr > 0) & (a[i] <= 0)):
                continue
            lp = base - gammaln(comp_arr + 1.0).sum() + float(comp_arr @ np.where(comp_arr > 0, log_a[i], 0.0))
            moves.append((comp, lp))
        new_states: dict[tuple[int, ...], float] = {}
        for rem, acc in states.items():
            for comp, lp in moves:
                ok = True
                for j in range(n):
                    if comp[j] > rem[j]:
                        ok = False
                        break
                if not ok:
                    continue
                key = tuple(rem[j] - comp[j] for j in range(n))
                val = acc + lp
                if key in new_states:
                    prev_val = new_states[key]
                    hi = max(prev_val, val)
                    new_states[key] = hi + math.log1p(math.exp(min(prev_val, val) - hi))
                else:
                    new_states[key] = val
        states = new_states
        if not states:
            return -math.inf
    zero = tuple([0] * n)
    return states.get(zero, -math.inf)


# ---------------------------------------------------------------------------
# trajectory files


def trajectory_to_csv(traj: Trajectory, path, meta: dict | None = None) -> None:
    """Write one row per t; static matrices are flattened row-major.

    The first line is a '#'-prefixed JSON metadata comment carrying the
    dimensions, followed by a y_i (or y_i_j) header row.
    """
    y = traj.y
    md = dict(meta or {})
    md.setdefault("t_len", int(y.shape[0]))
    if y.ndim == 2:
        md.setdefault("n", int(y.shape[1]))
        header = [f"y_{i + 1}" for i in range(y.shape[1])]
        flat = y
    else:
        md.setdefault("n", int(y.shape[1]))
        md.setdefault("m", int(y.shape[2]))
        header = [f"y_{i + 1}_{j + 1}" for i in range(y.shape[1]) for j in range(y.shape[2])]
        flat = y.reshape(y.shape[0], -1)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(md, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in flat:
            w.writerow([repr(float(v)) for v in row])


def trajectory_from_csv(path) -> tuple[Trajectory, dict]:
    """Read a trajectory file written by trajectory_to_csv.

    Raises InputError naming the offending line on malformed input.
    """
    meta: dict = {}
    rows = []
    header: list[str] | None = None
    with open(path, newline="") as fh:
        for ln, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if rec[0].lstrip().startswith("#"):
                blob = ",".join(rec).lstrip()[1:].strip()
                try:
                    meta = json.loads(blob) if blob else {}
                except json.JSONDecodeError:
                    raise InputError(f"{path}: bad metadata JSON on line {ln}") from None
                continue
            if header is None and any(not _is_float(v) for v in rec):
                header = rec
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                raise InputError(f"{path}: non-numeric value on line {ln}") from None
            if len(rows[-1]) != len(rows[0]):
                raise InputError(f"{path}: ragged row on line {ln}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    y = np.asarray(rows, dtype=float)
    n, m = meta.get("n"), meta.get("m")
    if n is not None and m is not None:
        if y.shape[1] != int(n) * int(m):
            raise InputError(f"{path}: {y.shape[1]} columns do not match n*m = {n}*{m}")
        y = y.reshape(y.shape[0], int(n), int(m))
    try:
        return Trajectory(y=y), meta
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
