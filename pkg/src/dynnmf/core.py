"""Nonnegative factorization types and parametrization maps.

A network matrix A (n x m, entrywise nonnegative) is represented by a raw
factorization ``Nmf`` holding B (n x K) and C (m x K) with A = B C', or by
the normalized form ``NormalizedNmf`` (a, pi, beta_star, gamma_star) with

    A = a * sum_k pi_k * beta_star_k @ gamma_star_k'

where a = sum of all entries of A, pi is a probability vector over the K
latent components, and each beta_star_k / gamma_star_k is a probability
vector (vulnerability / viral-load profiles). ``alpha_pack`` flattens the
normalized form into the parameter vector used by the inference routines,
in the fixed order (a, pi_1..pi_K, beta_star columns, gamma_star columns).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ZeroColumn

# default tolerance for structural invariant checks
DEFAULT_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


def check_nonneg_matrix(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Validate and return a dense nonnegative matrix as float ndarray."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.min() < -tol:
        raise ValueError(f"matrix has negative entries (min {a.min():.3e})")
    return np.maximum(a, 0.0)


@dataclass(frozen=True)
class Nmf:
    """Raw nonnegative factorization A = B C'.

    b: (n, K) nonnegative, columns are the unnormalized vulnerability
    directions; c: (m, K) nonnegative viral-load directions.
    """

    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        b = check_nonneg_matrix(self.b)
        c = check_nonneg_matrix(self.c)
        if b.shape[1] != c.shape[1]:
            raise ValueError(f"B has {b.shape[1]} columns but C has {c.shape[1]}")
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "c", _freeze(c))

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def k(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class NormalizedNmf:
    """Normalized factorization (a, pi, beta_star, gamma_star).

    a > 0 is the total mass of A; pi (K,) sums to one; beta_star (n, K) and
    gamma_star (m, K) hold one probability vector per column.
    """

    a: float
    pi: np.ndarray
    beta_star: np.ndarray
    gamma_star: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        bs = np.asarray(self.beta_star, dtype=float)
        gs = np.asarray(self.gamma_star, dtype=float)
        k = pi.shape[0]
        if bs.ndim != 2 or gs.ndim != 2 or bs.shape[1] != k or gs.shape[1] != k:
            raise ValueError("beta_star/gamma_star must be 2-D with one column per pi entry")
        if not (self.a > 0.0 and np.isfinite(self.a)):
            raise ValueError(f"scale a must be positive and finite, got {self.a}")
        tol = DEFAULT_TOL
        for name, arr in (("pi", pi), ("beta_star", bs), ("gamma_star", gs)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            if arr.min() < -tol:
                raise ValueError(f"{name} has negative entries (min {arr.min():.3e})")
        sums = np.concatenate(([pi.sum()], bs.sum(axis=0), gs.sum(axis=0)))
        if np.abs(sums - 1.0).max() > 1e-8:
            raise ValueError("unit-mass constraints violated beyond 1e-8")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "pi", _freeze(np.maximum(pi, 0.0)))
        object.__setattr__(self, "beta_star", _freeze(np.maximum(bs, 0.0)))
        object.__setattr__(self, "gamma_star", _freeze(np.maximum(gs, 0.0)))

    @property
    def n(self) -> int:
        return self.beta_star.shape[0]

    @property
    def m(self) -> int:
        return self.gamma_star.shape[0]

    @property
    def k(self) -> int:
        return self.pi.shape[0]


@dataclass(frozen=True)
class A3Report:
    """Diagnostic for the linear-independence assumption on factor columns."""

    smin_b: float
    smin_c: float
    tol: float
    passed: bool


def compose(nmf: Nmf) -> np.ndarray:
    """Return A = B C' (entrywise nonnegative by construction)."""
    return nmf.b @ nmf.c.T


def normalize(nmf: Nmf, zero_tol: float = 1e-12) -> NormalizedNmf:
    """Convert a raw factorization to the (a, pi, beta*, gamma*) form.

    Raises ZeroColumn when a factor column has (numerically) zero mass;
    such columns cannot carry a probability profile.
    """
    sb = nmf.b.sum(axis=0)
    sc = nmf.c.sum(axis=0)
    if sb.min() <= zero_tol or sc.min() <= zero_tol:
        k_bad = int(np.argmin(np.minimum(sb, sc)))
        raise ZeroColumn(f"factor column {k_bad} has zero mass")
    a = float(sb @ sc)
    pi = sb * sc / a
    pi = pi / pi.sum()  # renormalize after arithmetic
    bs = nmf.b / sb
    gs = nmf.c / sc
    bs = bs / bs.sum(axis=0)
    gs = gs / gs.sum(axis=0)
    return NormalizedNmf(a=a, pi=pi, beta_star=bs, gamma_star=gs)


def denormalize(p: NormalizedNmf) -> Nmf:
    """Return the raw factorization with the whole scale a*pi_k carried by B.

    Any split of the scale between the column pairs is observationally
    equivalent; this one convention is used throughout the package.
    """
    return Nmf(b=p.beta_star * (p.a * p.pi), c=p.gamma_star.copy())


def check_assumption_a3(nmf: Nmf, tol: float = DEFAULT_TOL) -> A3Report:
    """Smallest singular values of B and C; pass iff both exceed tol."""
    smin_b = float(np.linalg.svd(nmf.b, compute_uv=False).min())
    smin_c = float(np.linalg.svd(nmf.c, compute_uv=False).min())
    return A3Report(smin_b=smin_b, smin_c=smin_c, tol=tol,
                    passed=bool(smin_b > tol and smin_c > tol))


# ---------------------------------------------------------------------------
# alpha vector packing: (a, pi_1..pi_K, beta* columnwise, gamma* columnwise)


def alpha_dim(n: int, m: int, k: int) -> int:
    return 1 + k + k * n + k * m


def alpha_pack(p: NormalizedNmf) -> np.ndarray:
    """Flatten a NormalizedNmf into the fixed-order parameter vector."""
    return np.concatenate(
        ([p.a], p.pi, p.beta_star.ravel(order="F"), p.gamma_star.ravel(order="F"))
    )


def alpha_unpack(vec: np.ndarray, n: int, m: int, k: int,
                 validate: bool = True):
    """Inverse of alpha_pack.

    With validate=False the raw blocks (a, pi, beta_star, gamma_star) are
    returned as plain arrays without constraint checks, which is what the
    finite-difference machinery needs for off-manifold evaluations.
    """
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (alpha_dim(n, m, k),):
        raise ValueError(f"alpha vector has length {vec.size}, expected {alpha_dim(n, m, k)}")
    a = float(vec[0])
    pi = vec[1:1 + k].copy()
    off = 1 + k
    bs = vec[off:off + k * n].reshape((n, k), order="F").copy()
    off += k * n
    gs = vec[off:off + k * m].reshape((m, k), order="F").copy()
    if not validate:
        return a, pi, bs, gs
    return NormalizedNmf(a=a, pi=pi, beta_star=bs, gamma_star=gs)


# ---------------------------------------------------------------------------
# matrix serialization


def matrix_to_csv(a: np.ndarray, path, header: bool = True) -> None:
    """Write a matrix row-major as CSV, optionally with a c1..cm header."""
    a = np.asarray(a, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"c{j + 1}" for j in range(a.shape[1])])
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def matrix_from_csv(path) -> np.ndarray:
    """Read a matrix from CSV; a non-numeric first row is taken as header."""
    rows = []
    with open(path, newline="") as fh:
        for ln, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if ln == 1 or (ln == 2 and not rows):
                    continue  # header row
                raise InputError(f"{path}: non-numeric value on line {ln}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise InputError(f"{path}: ragged row on line {i + 1}")
    return np.asarray(rows, dtype=float)


def matrix_to_json(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]),
            "data": [float(v) for v in a.ravel()]}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        data = np.asarray(obj["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed matrix JSON object: {exc}") from None
    if data.size != rows * cols:
        raise InputError(f"matrix JSON: {data.size} values for {rows}x{cols}")
    return data.reshape((rows, cols))


def matrix_json_dumps(a: np.ndarray) -> str:
    return json.dumps(matrix_to_json(a))
