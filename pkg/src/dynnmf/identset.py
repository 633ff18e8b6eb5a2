"""Algebra of the identified set of nonnegative factorizations.

All factorizations observationally equivalent to a seed (B, C) are
B Q diag(sigma), C (Q')^{-1} diag(1/sigma) for invertible unit-diagonal Q
with B Q >= 0 and C (Q')^{-1} >= 0. This module applies such transforms,
tests admissibility, derives the exact K=2 bounds box and the essential
uniqueness conditions, transforms the normalized parametrization, finds
feasible q points for K >= 3 and tabulates one-dimensional cuts of the set.

The q coordinates always refer to the raw factorization produced by
``denormalize`` (scale a*pi_k carried by B); a K=2 point on the box
boundary has some transformed factor entry exactly at zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import Nmf, NormalizedNmf, denormalize, normalize
from .errors import Infeasible, IterationLimit, NotAdmissible, SingularQ, WrongRank

# one-sided slack for admissibility; boundary points count as admissible
ADMISSIBILITY_TOL = 1e-9
# entries below this count as structural zeros in ratio infima
ZERO_TOL = 1e-12


def offdiag_indices(k: int) -> list[tuple[int, int]]:
    """Row-major scan of off-diagonal positions; K=2 gives [(0,1), (1,0)]."""
    return [(i, j) for i in range(k) for j in range(k) if i != j]


@dataclass(frozen=True)
class QTransform:
    """Invertible K x K matrix with unit diagonal indexing equivalent NMFs."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float, copy=True)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"Q must be square, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("Q has non-finite entries")
        if np.abs(np.diag(q) - 1.0).max() > 0.0:
            raise ValueError("Q must have unit diagonal exactly")
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    @property
    def k(self) -> int:
        return self.q.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.q))

    def offdiag(self) -> np.ndarray:
        """Stacked off-diagonal entries vec*Q, length K(K-1)."""
        return np.array([self.q[i, j] for i, j in offdiag_indices(self.k)])

    @classmethod
    def from_offdiag(cls, vec, k: int) -> "QTransform":
        vec = np.asarray(vec, dtype=float)
        idx = offdiag_indices(k)
        if vec.shape != (len(idx),):
            raise ValueError(f"expected {len(idx)} off-diagonal entries, got {vec.size}")
        q = np.eye(k)
        for val, (i, j) in zip(vec, idx):
            q[i, j] = val
        return cls(q)

    @classmethod
    def identity(cls, k: int) -> "QTransform":
        return cls(np.eye(k))


def _inv_qt(qt: QTransform, det_tol: float = 1e-12):
    det = qt.det
    if abs(det) < det_tol:
        raise SingularQ(f"|det Q| = {abs(det):.3e} below {det_tol:.1e}")
    return np.linalg.inv(qt.q.T)


def apply_q(seed: Nmf, qt: QTransform, tol: float = ADMISSIBILITY_TOL) -> Nmf:
    """Transform a seed into the equivalent factorization (B Q, C (Q')^{-1}).

    Raises NotAdmissible when a transformed entry is negative beyond tol
    and SingularQ when Q is not invertible. Round-off negatives within the
    slack are clipped so the result is a valid Nmf.
    """
    if qt.k != seed.k:
        raise WrongRank(f"Q is {qt.k}x{qt.k} but seed has K={seed.k}")
    bn = seed.b @ qt.q
    cn = seed.c @ _inv_qt(qt)
    worst = min(bn.min(), cn.min())
    if worst < -tol:
        raise NotAdmissible(f"transformed factor entry {worst:.3e} below -{tol:.1e}")
    return Nmf(b=np.maximum(bn, 0.0), c=np.maximum(cn, 0.0))


def admissible(seed: Nmf, qt: QTransform, tol: float = ADMISSIBILITY_TOL) -> bool:
    """True iff B Q and C (Q')^{-1} are entrywise >= -tol."""
    if qt.k != seed.k:
        raise WrongRank(f"Q is {qt.k}x{qt.k} but seed has K={seed.k}")
    bn = seed.b @ qt.q
    if bn.min() < -tol:
        return False
    cn = seed.c @ _inv_qt(qt)
    return bool(cn.min() >= -tol)


# ---------------------------------------------------------------------------
# K = 2


@dataclass(frozen=True)
class K2Bounds:
    """The four active bounds of the admissible (q12, q21) box at K=2.

    The seed itself (q = 0) always satisfies lo <= 0 <= hi in both
    coordinates. Infinite values encode an empty ratio index set.
    """

    q12_lo: float
    q12_hi: float
    q21_lo: float
    q21_hi: float

    def contains(self, q12: float, q21: float, tol: float = 0.0) -> bool:
        return (self.q12_lo - tol <= q12 <= self.q12_hi + tol
                and self.q21_lo - tol <= q21 <= self.q21_hi + tol)

    @property
    def is_origin(self) -> bool:
        return (self.q12_lo == 0.0 == self.q12_hi
                and self.q21_lo == 0.0 == self.q21_hi)

    def as_array(self) -> np.ndarray:
        return np.array([self.q12_lo, self.q12_hi, self.q21_lo, self.q21_hi])


def _inf_ratio(num: np.ndarray, den: np.ndarray, zero_tol: float) -> float:
    """inf over {j: den_j > 0} of num_j/den_j; +inf on an empty index set."""
    mask = den > zero_tol
    if not mask.any():
        return math.inf
    return float(np.min(num[mask] / den[mask]))


def k2_bounds(seed: Nmf, zero_tol: float = ZERO_TOL) -> K2Bounds:
    """Analytic bounds of the admissible box around the identity transform.

    q21 in [-inf_{b2j>0}(b1j/b2j), inf_{g1j>0}(g2j/g1j)] and
    q12 in [-inf_{b1j>0}(b2j/b1j), inf_{g2j>0}(g1j/g2j)]; within the
    det(Q) > 0 branch, membership in this box is exactly admissibility.
    """
    if seed.k != 2:
        raise WrongRank(f"k2_bounds requires K=2, got K={seed.k}")
    b1, b2 = seed.b[:, 0], seed.b[:, 1]
    g1, g2 = seed.c[:, 0], seed.c[:, 1]
    return K2Bounds(
        q12_lo=-_inf_ratio(b2, b1, zero_tol),
        q12_hi=_inf_ratio(g1, g2, zero_tol),
        q21_lo=-_inf_ratio(b1, b2, zero_tol),
        q21_hi=_inf_ratio(g2, g1, zero_tol),
    )


def essentially_unique_k2(seed: Nmf, zero_tol: float = ZERO_TOL) -> bool:
    """Exclusion test: the factorization is unique iff four witness indices exist.

    Needs one index each with b1=0<b2, b2=0<b1, g1=0<g2 and g2=0<g1;
    equivalent to the bounds box collapsing to the origin.
    """
    if seed.k != 2:
        raise WrongRank(f"essentially_unique_k2 requires K=2, got K={seed.k}")
    b1, b2 = seed.b[:, 0], seed.b[:, 1]
    g1, g2 = seed.c[:, 0], seed.c[:, 1]

    def has(excluded, positive):
        return bool(np.any((excluded <= zero_tol) & (positive > zero_tol)))

    return (has(b1, b2) and has(b2, b1) and has(g1, g2) and has(g2, g1))


def transform_normalized_k2(p: NormalizedNmf, q12: float, q21: float,
                            tol: float = ADMISSIBILITY_TOL) -> NormalizedNmf:
    """Apply a (q12, q21) transform directly in the normalized parametrization.

    q acts on the raw factorization denormalize(p), i.e. raw column sums are
    (a pi_1, a pi_2) for B and (1, 1) for C. The total mass a is invariant.
    """
    if p.k != 2:
        raise WrongRank(f"transform_normalized_k2 requires K=2, got K={p.k}")
    det = 1.0 - q12 * q21
    if det <= 0.0:
        raise NotAdmissible(f"1 - q12*q21 = {det:.3e} is not positive")
    pi1, pi2 = float(p.pi[0]), float(p.pi[1])
    b1, b2 = p.beta_star[:, 0] * pi1, p.beta_star[:, 1] * pi2  # raw/a
    g1, g2 = p.gamma_star[:, 0], p.gamma_star[:, 1]

    bt1 = b1 + q21 * b2
    bt2 = q12 * b1 + b2
    gt1 = g1 - q12 * g2
    gt2 = -q21 * g1 + g2
    d1, d2 = pi1 + q21 * pi2, q12 * pi1 + pi2
    e1, e2 = 1.0 - q12, 1.0 - q21

    worst = min(bt1.min(), bt2.min(), gt1.min(), gt2.min())
    if worst < -tol or min(d1, d2, e1, e2) <= 0.0:
        raise NotAdmissible(f"(q12, q21) = ({q12:.6g}, {q21:.6g}) leaves the cone")

    pi_new = np.array([d1 * e1, d2 * e2])
    pi_new = pi_new / pi_new.sum()
    bs = np.column_stack([np.maximum(bt1, 0.0) / d1, np.maximum(bt2, 0.0) / d2])
    gs = np.column_stack([np.maximum(gt1, 0.0) / e1, np.maximum(gt2, 0.0) / e2])
    bs /= bs.sum(axis=0)
    gs /= gs.sum(axis=0)
    return NormalizedNmf(a=p.a, pi=pi_new, beta_star=bs, gamma_star=gs)


def k2_transform_grid(p: NormalizedNmf, q12: np.ndarray, q21: np.ndarray):
    """Vectorized normalized transform over paired (q12, q21) arrays.

    Returns (valid, pi, bs, gs) with shapes (G,), (G, 2), (G, n, 2) and
    (G, m, 2); invalid points (outside the cone or the det(Q)>0 branch)
    carry NaNs. Used by the criterion optimizers and the bound simulator.
    """
    q12 = np.asarray(q12, dtype=float)
    q21 = np.asarray(q21, dtype=float)
    pi1, pi2 = float(p.pi[0]), float(p.pi[1])
    b1 = p.beta_star[:, 0] * pi1
    b2 = p.beta_star[:, 1] * pi2
    g1, g2 = p.gamma_star[:, 0], p.gamma_star[:, 1]

    bt1 = b1[None, :] + q21[:, None] * b2[None, :]
    bt2 = q12[:, None] * b1[None, :] + b2[None, :]
    gt1 = g1[None, :] - q12[:, None] * g2[None, :]
    gt2 = -q21[:, None] * g1[None, :] + g2[None, :]
    d1 = pi1 + q21 * pi2
    d2 = q12 * pi1 + pi2
    e1 = 1.0 - q12
    e2 = 1.0 - q21

    tol = ADMISSIBILITY_TOL
    valid = ((1.0 - q12 * q21) > 0.0) & (d1 > 0) & (d2 > 0) & (e1 > 0) & (e2 > 0)
    valid &= (bt1.min(axis=1) >= -tol) & (bt2.min(axis=1) >= -tol)
    valid &= (gt1.min(axis=1) >= -tol) & (gt2.min(axis=1) >= -tol)

    with np.errstate(divide="ignore", invalid="ignore"):
        pi_new = np.stack([d1 * e1, d2 * e2], axis=1)
        pi_new /= pi_new.sum(axis=1, keepdims=True)
        bs = np.stack([bt1 / d1[:, None], bt2 / d2[:, None]], axis=2)
        gs = np.stack([gt1 / e1[:, None], gt2 / e2[:, None]], axis=2)
    bad = ~valid
    pi_new[bad] = np.nan
    bs[bad] = np.nan
    gs[bad] = np.nan
    return valid, pi_new, bs, gs


# ---------------------------------------------------------------------------
# general K


def _constraint_values(seed: Nmf, qvec: np.ndarray, det_floor: float) -> np.ndarray:
    k = seed.k
    q = QTransform.from_offdiag(qvec, k).q
    det = np.linalg.det(q)
    vals = [np.full(1, det - det_floor)]
    if det > det_floor:
        cn = seed.c @ np.linalg.inv(q.T)
        vals.append(cn.ravel())
    else:
        vals.append(np.full(seed.m * k, det - det_floor))
    vals.append((seed.b @ q).ravel())
    return np.concatenate(vals)


def feasible_q_general(seed: Nmf, q0, max_iter: int = 200,
                       det_floor: float = 1e-8, feas_tol: float = 1e-8) -> np.ndarray:
    """Project q0 onto the admissible set of off-diagonal transforms.

    Minimizes ||q - q0||^2 subject to B Q(q) >= 0, C (Q(q)')^{-1} >= 0 and
    det Q >= det_floor (identity-connected branch), by sequential quadratic
    programming with finite-difference constraint Jacobians. Returns the
    feasible point; raises Infeasible when the solver ends infeasible and
    IterationLimit when it stops on the iteration cap while still moving.
    """
    if seed.k < 2:
        raise WrongRank("feasible_q_general requires K >= 2")
    q0 = np.asarray(q0, dtype=float)
    dim = seed.k * (seed.k - 1)
    if q0.shape != (dim,):
        raise ValueError(f"q0 must have length {dim}")
    if _constraint_values(seed, q0, det_floor).min() >= -feas_tol:
        return q0.copy()

    res = optimize.minimize(
        lambda q: float(np.sum((q - q0) ** 2)),
        x0=np.zeros(dim),
        jac=lambda q: 2.0 * (q - q0),
        method="SLSQP",
        constraints=[{"type": "ineq",
                      "fun": lambda q: _constraint_values(seed, q, det_floor)}],
        options={"maxiter": max_iter, "ftol": 1e-12},
    )
    feas = _constraint_values(seed, res.x, det_floor).min()
    if feas < -feas_tol:
        if res.status == 9:  # iteration cap
            raise IterationLimit(f"SQP hit {max_iter} iterations, infeasibility {-feas:.2e}")
        raise Infeasible(f"no admissible point found (residual {-feas:.2e})")
    return np.asarray(res.x, dtype=float)


# ---------------------------------------------------------------------------
# cuts


@dataclass(frozen=True)
class CutPoint:
    """One grid point of a one-dimensional cut of the identified set."""

    q_value: float
    admissible: bool
    point: NormalizedNmf | None
    pi: np.ndarray | None
    entropy: float
    det_b: float
    det_c: float


def set_cut(seed: Nmf, component_index: int, grid, tol: float = ADMISSIBILITY_TOL) -> list[CutPoint]:
    """Vary one q coordinate with the others at zero and tabulate the set.

    Inadmissible grid points are tagged (admissible=False, NaN summaries)
    rather than raised.
    """
    k = seed.k
    dim = k * (k - 1)
    if not (0 <= component_index < dim):
        raise ValueError(f"component_index must be in [0, {dim})")
    out = []
    for val in np.asarray(grid, dtype=float):
        qvec = np.zeros(dim)
        qvec[component_index] = val
        try:
            moved = apply_q(seed, QTransform.from_offdiag(qvec, k), tol=tol)
            p = normalize(moved)
        except (NotAdmissible, SingularQ):
            p = None
        if p is None:
            out.append(CutPoint(float(val), False, None, None,
                                math.nan, math.nan, math.nan))
            continue
        pi = p.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = float(np.sum(np.where(pi > 0, pi * np.log(pi), 0.0)))
        det_b = float(np.linalg.det(p.beta_star.T @ p.beta_star))
        det_c = float(np.linalg.det(p.gamma_star.T @ p.gamma_star))
        out.append(CutPoint(float(val), True, p, pi.copy(), ent, det_b, det_c))
    return out


def set_cut_to_csv(points: list[CutPoint], path, k: int, meta: str | None = None) -> None:
    """Write a cut table: q_value, admissible, pi_1..pi_K, entropy, detB, detC."""
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write(f"# {meta}\n")
        w = csv.writer(fh)
        w.writerow(["q_value", "admissible"] + [f"pi_{i + 1}" for i in range(k)]
                   + ["entropy", "detB", "detC"])
        for pt in points:
            pis = list(pt.pi) if pt.pi is not None else [math.nan] * k
            w.writerow([repr(pt.q_value), int(pt.admissible)]
                       + [repr(float(v)) for v in pis]
                       + [repr(pt.entropy), repr(pt.det_b), repr(pt.det_c)])
