"""P1 finite elements for the Laplace operator of the induced metric.

Element metrics are the Lorentz Gram matrices of immersed edge-chord
vectors, so assembly never touches a chart. The stiffness form equals the
summed per-element gradient energy exactly, and the consistent mass
integrates products of P1 interpolants exactly; these two facts make the
discrete minimum principle exact and are relied on by the bounds layer.

Assembly is vectorized with a fixed reduction order, so matrices are
reproducible bit for bit. The eigensolver is single-threaded by contract;
independent solves may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh as scipy_eigh
from scipy.sparse.linalg import splu

from .errors import EigenSolveError, NotSpacelikeError, UsageError
from .meshes import ParamMesh
from .minkowski import metric_signs

TAU_EIG = 1e-8
TAU_ASSEMBLY = 1e-10
EIG_MAX_ITER = 10000

__all__ = [
    "TAU_EIG",
    "MeshGeometry",
    "mesh_geometry",
    "FEMPencil",
    "assemble_pencil",
    "Spectrum",
    "solve_lambda1",
    "apply_discrete_laplacian",
    "gradient_squared_per_element",
    "gradient_inner_per_element",
]


@dataclass
class MeshGeometry:
    """Immersed positions plus per-element metric data."""

    mesh: ParamMesh
    positions: np.ndarray  # (k, m)
    chords: np.ndarray  # (E, n, m)
    gram: np.ndarray  # (E, n, n)
    gram_inv: np.ndarray
    volumes: np.ndarray  # (E,)
    lumped: np.ndarray  # (k,)
    total_volume: float


def mesh_geometry(mesh: ParamMesh, imm) -> MeshGeometry:
    positions = imm.eval(mesh.vertices)
    simplices = mesh.simplices
    n = mesh.n
    chords = positions[simplices[:, 1:]] - positions[simplices[:, :1]]
    signs = metric_signs(imm.m)
    gram = np.einsum("eam,m,ebm->eab", chords, signs, chords)

    if n == 1:
        g = gram[:, 0, 0]
        bad = np.nonzero(g <= 0)[0]
        if bad.size:
            raise NotSpacelikeError(
                f"element {bad[0]} is not spacelike; mesh too coarse"
            )
        volumes = np.sqrt(g)
        gram_inv = (1.0 / g)[:, None, None]
    elif n == 2:
        det = gram[:, 0, 0] * gram[:, 1, 1] - gram[:, 0, 1] * gram[:, 1, 0]
        bad = np.nonzero((gram[:, 0, 0] <= 0) | (det <= 0))[0]
        if bad.size:
            raise NotSpacelikeError(
                f"element {bad[0]} is not spacelike; mesh too coarse"
            )
        volumes = np.sqrt(det) / 2.0
        gram_inv = np.empty_like(gram)
        gram_inv[:, 0, 0] = gram[:, 1, 1] / det
        gram_inv[:, 1, 1] = gram[:, 0, 0] / det
        gram_inv[:, 0, 1] = -gram[:, 0, 1] / det
        gram_inv[:, 1, 0] = -gram[:, 1, 0] / det
    else:
        raise UsageError(f"unsupported intrinsic dimension {n}")

    lumped = np.zeros(mesh.num_vertices)
    np.add.at(lumped, simplices, (volumes / (n + 1))[:, None])
    return MeshGeometry(
        mesh=mesh,
        positions=positions,
        chords=chords,
        gram=gram,
        gram_inv=gram_inv,
        volumes=volumes,
        lumped=lumped,
        total_volume=float(volumes.sum()),
    )


def _difference_matrix(n: int) -> np.ndarray:
    d = np.zeros((n, n + 1))
    d[:, 0] = -1.0
    d[np.arange(n), np.arange(1, n + 1)] = 1.0
    return d


@dataclass
class FEMPencil:
    """Stiffness/mass pair for the generalized eigenproblem K f = lambda M f."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    lumped: np.ndarray
    geometry: MeshGeometry

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]


def assemble_pencil(mesh: ParamMesh, imm, geometry: MeshGeometry | None = None) -> FEMPencil:
    """Assemble P1 stiffness and consistent mass under the chord metric."""
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    n = mesh.n
    k = mesh.num_vertices
    diff = _difference_matrix(n)
    k_loc = np.einsum(
        "ak,eab,bl->ekl", diff, geom.gram_inv * geom.volumes[:, None, None], diff
    )
    m_loc = (np.ones((n + 1, n + 1)) + np.eye(n + 1)) / ((n + 1) * (n + 2))
    m_loc = geom.volumes[:, None, None] * m_loc

    rows = np.repeat(mesh.simplices, n + 1, axis=1).ravel()
    cols = np.tile(mesh.simplices, (1, n + 1)).ravel()
    stiffness = sp.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(k, k)).tocsr()
    mass = sp.coo_matrix((m_loc.ravel(), (rows, cols)), shape=(k, k)).tocsr()
    return FEMPencil(stiffness=stiffness, mass=mass, lumped=geom.lumped, geometry=geom)


@dataclass
class Spectrum:
    """Smallest nonzero eigenpair with solver diagnostics."""

    lambda1: float
    eigenfunction: np.ndarray
    iterations: int
    residual: float
    near_degenerate: bool


def solve_lambda1(
    pencil: FEMPencil,
    tol: float = TAU_EIG,
    max_iter: int = EIG_MAX_ITER,
    seed: int = 0,
    block_size: int = 4,
) -> Spectrum:
    """Smallest nonzero generalized eigenvalue of (K, Mass).

    Block inverse iteration on a factorized small shift of the pencil,
    with the constant vector projected out (in the mass inner product) at
    every step and a Rayleigh-Ritz rotation per sweep. The block resolves
    nearly degenerate clusters, which single-vector iteration cannot push
    below the cluster spread; extra Ritz values only feed the
    near-degenerate flag.
    """
    K = pencil.stiffness.tocsc()
    M = pencil.mass.tocsc()
    k = K.shape[0]
    ones = np.ones(k)
    m_ones = M @ ones
    vol = float(m_ones @ ones)

    diag_ratio = K.diagonal().sum() / max(M.diagonal().sum(), 1e-300)
    shift = 1e-8 * diag_ratio
    try:
        lu = splu(K + shift * M)
    except RuntimeError as exc:  # pragma: no cover - singular pencil
        raise EigenSolveError(f"factorization failed: {exc}") from exc

    rng = np.random.default_rng(seed)
    block = rng.standard_normal((k, block_size))

    def deflate(x):
        return x - np.outer(ones, (m_ones @ x) / vol)

    def m_orthonormalize(x):
        gram = x.T @ (M @ x)
        w, v = np.linalg.eigh(gram)
        keep = w > 1e-14 * w.max()
        if not keep.all():  # pragma: no cover - rank collapse
            raise EigenSolveError("iteration block lost rank")
        return x @ (v / np.sqrt(w))

    block = m_orthonormalize(deflate(block))
    lam = float("inf")
    ritz = None
    residual = float("inf")
    iterations = 0
    for iterations in range(1, max_iter + 1):
        block = lu.solve(M @ block)
        block = m_orthonormalize(deflate(block))
        k_small = block.T @ (K @ block)
        m_small = block.T @ (M @ block)
        ritz, rotation = scipy_eigh(k_small, m_small)
        block = block @ rotation
        lam = float(ritz[0])
        x = block[:, 0]
        kx = K @ x
        mx = M @ x
        r = kx - lam * mx
        scale = max(float(np.linalg.norm(kx)), lam * float(np.linalg.norm(mx)), 1e-300)
        residual = float(np.linalg.norm(r)) / scale
        if residual <= tol:
            break
    else:
        raise EigenSolveError(
            f"no convergence after {max_iter} iterations (residual {residual:.3e})"
        )

    x = block[:, 0]
    x = x / math.sqrt(max(float(x @ (M @ x)), 1e-300))
    # deterministic sign: largest-magnitude entry positive
    pivot = int(np.argmax(np.abs(x)))
    if x[pivot] < 0:
        x = -x
    near_degenerate = bool(abs(float(ritz[1]) - lam) <= 10.0 * tol * max(lam, 1.0))
    if lam <= 0:
        raise EigenSolveError(f"nonpositive eigenvalue {lam}")
    return Spectrum(
        lambda1=lam,
        eigenfunction=x,
        iterations=iterations,
        residual=residual,
        near_degenerate=near_degenerate,
    )


def apply_discrete_laplacian(pencil: FEMPencil, values) -> np.ndarray:
    """Lumped-mass Laplacian, signed so eigenfields satisfy L f = -lambda f.

    Vector-valued fields (k, c) are handled componentwise.
    """
    values = np.asarray(values, dtype=float)
    flat = values if values.ndim == 2 else values[:, None]
    if flat.shape[0] != pencil.size:
        raise UsageError("value count does not match vertex count")
    out = -(pencil.stiffness @ flat) / pencil.lumped[:, None]
    return out if values.ndim == 2 else out[:, 0]


def gradient_squared_per_element(mesh: ParamMesh, imm, values, geometry=None) -> np.ndarray:
    """Squared P1 gradient under the element metric; exact for affine data."""
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != mesh.num_vertices:
        raise UsageError("value count does not match vertex count")
    du = values[mesh.simplices[:, 1:]] - values[mesh.simplices[:, :1]]
    return np.einsum("ea,eab,eb->e", du, geom.gram_inv, du)


def gradient_inner_per_element(geom: MeshGeometry, u, v) -> np.ndarray:
    simplices = geom.mesh.simplices
    du = np.asarray(u, float)[simplices[:, 1:]] - np.asarray(u, float)[simplices[:, :1]]
    dv = np.asarray(v, float)[simplices[:, 1:]] - np.asarray(v, float)[simplices[:, :1]]
    return np.einsum("ea,eab,eb->e", du, geom.gram_inv, dv)
