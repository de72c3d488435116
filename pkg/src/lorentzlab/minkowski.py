"""Lorentzian linear algebra on flat R^m with signature (-, +, ..., +).

Vectors are plain numpy arrays in canonical coordinates; the first
coordinate is the time direction. All operations broadcast over leading
axes, are pure, and are safe to call from concurrent workers. Sampling is
deterministic per seed; parallel callers should partition the sample index
range instead of sharing a generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateFrameError, DomainError, UsageError

TAU_UNIT = 1e-9
TAU_CAUSAL = 1e-9
TAU_SECTION = 1e-9
PIVOT_TOL = 1e-8

__all__ = [
    "TAU_UNIT",
    "TAU_CAUSAL",
    "TAU_SECTION",
    "metric_signs",
    "inner",
    "sq_norm",
    "CausalClass",
    "causal_classify",
    "is_unit_timelike",
    "require_unit_timelike",
    "project_onto_orthogonal",
    "SymBilinearForm",
    "lorentz_trace",
    "euclid_trace",
    "signature_orthonormalize",
    "spacelike_complement_basis",
    "sample_spherical_section",
    "unit_sphere_volume",
    "section_integral_exact",
    "sphere_integral_exact",
    "boost_direction",
    "sample_timelike_directions",
    "sample_causal_directions",
]


def metric_signs(m: int) -> np.ndarray:
    """Diagonal of the flat metric, (-1, 1, ..., 1)."""
    if m < 3:
        raise UsageError(f"ambient dimension must be at least 3, got {m}")
    signs = np.ones(m)
    signs[0] = -1.0
    return signs


def inner(u, v):
    """Indefinite inner product -u1*v1 + sum_{i>=2} ui*vi, broadcasting."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise UsageError(
            f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}"
        )
    prod = u * v
    return prod[..., 1:].sum(axis=-1) - prod[..., 0]


def sq_norm(v):
    """Causal square <v, v>; negative for timelike vectors."""
    return inner(v, v)


class CausalClass(Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"
    ZERO = "zero"


def causal_classify(v, tol: float = TAU_CAUSAL) -> CausalClass:
    v = np.asarray(v, dtype=float)
    if not v.any():
        return CausalClass.ZERO
    q = float(sq_norm(v))
    if abs(q) <= tol:
        return CausalClass.LIGHTLIKE
    return CausalClass.TIMELIKE if q < 0 else CausalClass.SPACELIKE


def is_unit_timelike(a, tol: float = TAU_UNIT) -> bool:
    a = np.asarray(a, dtype=float)
    return a.shape[-1] >= 3 and abs(float(sq_norm(a)) + 1.0) <= tol


def require_unit_timelike(a, tol: float = TAU_UNIT) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not is_unit_timelike(a, tol):
        raise DomainError(f"expected a unit timelike vector, got <a,a> = {float(sq_norm(a))}")
    return a


def project_onto_orthogonal(v, a):
    """Orthogonal projection of v onto the spacelike hyperplane a-perp.

    `a` must be unit timelike; the result satisfies <result, a> = 0.
    """
    a = require_unit_timelike(a)
    v = np.asarray(v, dtype=float)
    return v + inner(v, a)[..., None] * a


@dataclass(frozen=True)
class SymBilinearForm:
    """Symmetric bilinear form Q(u, v) = u^T Q v in canonical coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise UsageError(f"expected a square matrix, got shape {q.shape}")
        if q.shape[0] < 3:
            raise UsageError("forms live on R^m with m >= 3")
        scale = np.abs(q).max() or 1.0
        if np.abs(q - q.T).max() > 1e-12 * scale:
            raise UsageError("matrix is not symmetric to machine precision")
        object.__setattr__(self, "matrix", q)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, u, v):
        return np.einsum("...i,ij,...j->...", np.asarray(u, float), self.matrix, np.asarray(v, float))

    def quad(self, v):
        """Q(v, v) for a batch of vectors with shape (..., m)."""
        return self(v, v)

    def operator_lorentz(self) -> np.ndarray:
        """Matrix of the operator A with <A u, v> = Q(u, v)."""
        return metric_signs(self.m)[:, None] * self.matrix

    @staticmethod
    def random(m: int, rng: np.random.Generator) -> "SymBilinearForm":
        a = rng.standard_normal((m, m))
        return SymBilinearForm((a + a.T) / 2.0)


def _form_matrix(Q) -> np.ndarray:
    if isinstance(Q, SymBilinearForm):
        return Q.matrix
    return SymBilinearForm(np.asarray(Q, dtype=float)).matrix


def lorentz_trace(Q) -> float:
    """Metric-raised trace of the operator associated with Q."""
    q = _form_matrix(Q)
    return float((metric_signs(q.shape[0]) * np.diag(q)).sum())


def euclid_trace(Q) -> float:
    """Ordinary matrix trace (Euclidean index raising)."""
    return float(np.trace(_form_matrix(Q)))


def signature_orthonormalize(candidates, need=None, pivot_tol: float = PIVOT_TOL):
    """Modified Gram-Schmidt under the indefinite product.

    Candidates whose orthogonalized remainder is close to the light cone
    (|<w,w>| below pivot_tol relative to the Euclidean size) are skipped.
    Returns (rows, signs) with rows[i] satisfying <row_i, row_j> = signs[i] delta_ij.
    """
    basis: list[np.ndarray] = []
    signs: list[float] = []
    for cand in candidates:
        w = np.array(cand, dtype=float)
        size = float(w @ w)
        for _ in range(2):  # second pass controls cancellation near the cone
            for b, eps in zip(basis, signs):
                w = w - eps * float(inner(b, w)) * b
        e2 = float(w @ w)
        q = float(sq_norm(w))
        # candidate already spanned, or residue hugging the light cone
        if e2 <= pivot_tol**2 * max(size, 1.0) or abs(q) <= pivot_tol * e2:
            continue
        basis.append(w / math.sqrt(abs(q)))
        signs.append(1.0 if q > 0 else -1.0)
        if need is not None and len(basis) == need:
            break
    if need is not None and len(basis) < need:
        raise DegenerateFrameError(
            f"could only extract {len(basis)} of {need} frame vectors"
        )
    return np.array(basis), np.array(signs)


def spacelike_complement_basis(a) -> np.ndarray:
    """Orthonormal spacelike rows spanning the hyperplane orthogonal to a."""
    a = require_unit_timelike(a)
    m = a.shape[-1]
    candidates = [a] + list(np.eye(m))
    basis, signs = signature_orthonormalize(candidates, need=m)
    if signs[0] != -1.0 or (signs[1:] != 1.0).any():
        raise DegenerateFrameError("complement of a timelike direction must be spacelike")
    return basis[1:]


def sample_spherical_section(a, rng_seed: int, count: int) -> np.ndarray:
    """Uniform samples from the light-cone section {<v,v> = 0, <v,a> = -1}.

    Samples are v = a + u with u uniform on the unit sphere of a-perp,
    which realizes the section's round-sphere geometry. Deterministic per
    seed.
    """
    a = require_unit_timelike(a)
    if count < 1:
        raise UsageError("count must be positive")
    basis = spacelike_complement_basis(a)
    rng = np.random.default_rng(rng_seed)
    g = rng.standard_normal((count, a.shape[-1] - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return a + g @ basis


def unit_sphere_volume(k: int) -> float:
    """Volume of the unit k-sphere, 2 pi^{(k+1)/2} / Gamma((k+1)/2)."""
    if k < 0:
        raise UsageError("sphere dimension must be nonnegative")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def section_integral_exact(Q, a) -> float:
    """Closed form for the integral of Q(v,v) over the section relative to a."""
    a = require_unit_timelike(a)
    q = _form_matrix(Q)
    m = q.shape[0]
    if a.shape[-1] != m:
        raise UsageError("form and direction dimensions differ")
    qaa = float(np.einsum("i,ij,j->", a, q, a))
    return unit_sphere_volume(m - 2) / (m - 1) * (m * qaa + lorentz_trace(q))


def sphere_integral_exact(Q) -> float:
    """Closed form for the integral of Q(v,v) over the Euclidean unit sphere."""
    q = _form_matrix(Q)
    m = q.shape[0]
    return unit_sphere_volume(m - 1) / m * euclid_trace(q)


def boost_direction(s: float, u) -> np.ndarray:
    """Unit timelike direction (cosh s, sinh s * u) for a unit spatial u."""
    u = np.asarray(u, dtype=float)
    return np.concatenate(([math.cosh(s)], math.sinh(s) * u))


def sample_timelike_directions(
    m: int,
    count: int,
    seed: int,
    s_max: float = 2.0,
    include_axis: bool = True,
) -> np.ndarray:
    """Boost-sampled unit timelike directions, prefix-stable in count.

    Draws interleave per sample so the first k rows agree for any larger
    count with the same seed.
    """
    if m < 3:
        raise UsageError("need ambient dimension >= 3")
    rng = np.random.default_rng(seed)
    rows = []
    if include_axis:
        axis = np.zeros(m)
        axis[0] = 1.0
        rows.append(axis)
    for _ in range(count):
        g = rng.standard_normal(m - 1)
        u = g / np.linalg.norm(g)
        s = rng.uniform(0.0, s_max)
        rows.append(boost_direction(s, u))
    return np.array(rows)


def sample_causal_directions(m: int, count: int, seed: int, s_max: float = 2.0) -> np.ndarray:
    """Mixed timelike and lightlike causal directions for search loops."""
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(count):
        g = rng.standard_normal(m - 1)
        u = g / np.linalg.norm(g)
        s = rng.uniform(0.0, s_max)
        if k % 2 == 0:
            rows.append(boost_direction(s, u))
        else:
            rows.append(np.concatenate(([1.0], u)))  # lightlike
    return np.array(rows)
