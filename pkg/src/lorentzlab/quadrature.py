"""Integration over meshes, symmetry-reduced slices of round spheres, and
Monte Carlo integration over light-cone sections.

Mesh integrals use element-average quadrature matched to the P1 assembly
order; slice integrals use Gauss-Jacobi rules sized to be effectively
exact for every shipped integrand. All routines are pure; Monte Carlo
runs are deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .errors import NumericalError, UsageError
from .fem import FEMPencil, apply_discrete_laplacian, assemble_pencil, mesh_geometry
from .fem import gradient_squared_per_element
from .minkowski import (
    SymBilinearForm,
    inner,
    require_unit_timelike,
    sample_spherical_section,
    section_integral_exact,
    sphere_integral_exact,
    unit_sphere_volume,
)

SLICE_NODES = 64

__all__ = [
    "IntegralResult",
    "integrate_over_mesh",
    "sphere_slice_integral",
    "mean_curvature_vertices",
    "minkowski_residual",
    "minkowski_projected_identities",
    "beltrami_residual",
    "monte_carlo_section_integral",
    "monte_carlo_sphere_integral",
]


@dataclass
class IntegralResult:
    value: float | np.ndarray
    error: float = 0.0
    method: str = "mesh"
    params: dict = field(default_factory=dict)


def _as_result_value(v):
    arr = np.asarray(v)
    return float(arr) if arr.ndim == 0 else arr


def integrate_over_mesh(mesh, imm, density, geometry=None) -> IntegralResult:
    """Sum of element volume times element-average density.

    Accepts per-vertex or per-element data; vertex data is averaged onto
    elements, which coincides with the lumped-mass vertex rule.
    """
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    density = np.asarray(density, dtype=float)
    if density.shape[0] == mesh.num_vertices:
        value = geom.lumped @ density
    elif density.shape[0] == mesh.num_simplices:
        value = geom.volumes @ density
    else:
        raise UsageError(
            f"density length {density.shape[0]} matches neither vertices nor elements"
        )
    return IntegralResult(
        value=_as_result_value(value),
        error=0.0,
        method="mesh",
        params={"vertices": mesh.num_vertices, "elements": mesh.num_simplices},
    )


def sphere_slice_integral(n: int, phi, nodes: int = SLICE_NODES) -> IntegralResult:
    """Integral over the unit n-sphere of a function of the height t.

    Uses the slice reduction Vol(S^{n-1}) * int phi(t) (1-t^2)^{(n-2)/2} dt
    with a Gauss-Jacobi rule; exact to machine precision for polynomial
    phi up to the rule degree. The error estimate compares against a rule
    with half the nodes.
    """
    if n < 1:
        raise UsageError("sphere dimension must be at least 1")
    exponent = (n - 2) / 2.0
    ring = unit_sphere_volume(n - 1)

    def run(count):
        x, w = roots_jacobi(count, exponent, exponent)
        vals = np.asarray(phi(x), dtype=float)
        if not np.isfinite(vals).all():
            raise NumericalError("slice integrand produced non-finite values")
        return ring * float(w @ vals)

    value = run(nodes)
    coarse = run(max(nodes // 2, 2))
    return IntegralResult(
        value=value,
        error=abs(value - coarse),
        method="slice",
        params={"nodes": nodes, "n": n},
    )


def mean_curvature_vertices(mesh, imm, pencil: FEMPencil | None = None) -> np.ndarray:
    """Mean curvature vector at every vertex; closed form when available,
    otherwise the discrete Laplacian of the position field divided by n."""
    if imm.has_closed_mean_curvature:
        return imm.mean_curvature(mesh.vertices)
    if pencil is None:
        pencil = assemble_pencil(mesh, imm)
    return apply_discrete_laplacian(pencil, pencil.geometry.positions) / imm.n


def minkowski_residual(mesh, imm, pencil: FEMPencil | None = None, geometry=None) -> IntegralResult:
    """Residual of the volume identity: integral of 1 + <psi, H>.

    Vanishes on compact submanifolds; the discrete value measures
    quadrature plus discretization error.
    """
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    h = mean_curvature_vertices(mesh, imm, pencil)
    density = 1.0 + inner(geom.positions, h)
    out = integrate_over_mesh(mesh, imm, density, geometry=geom)
    out.params["identity"] = "minkowski"
    return out


def minkowski_projected_identities(mesh, imm, a, pencil=None, geometry=None):
    """Residuals of the two projected-field integral identities.

    First: integral of 1 + <psi_a, H_a> - <psi,a><H,a>. Second: integral
    of <psi_a, H_a> plus Vol plus (1/n) integral of the squared tangential
    part of a. Both vanish in the continuum once the gravity center sits
    at the origin (the caller recenters first).
    """
    a = require_unit_timelike(a)
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    h = mean_curvature_vertices(mesh, imm, pencil)
    pos = geom.positions
    s = inner(pos, a)
    ha = inner(h, a)
    pos_a = pos + s[:, None] * a
    h_a = h + ha[:, None] * a
    cross = inner(pos_a, h_a)

    first = integrate_over_mesh(mesh, imm, 1.0 + cross - s * ha, geometry=geom)
    first.params["identity"] = "minkowski-projected"

    grad_sq = gradient_squared_per_element(mesh, imm, s, geometry=geom)
    tangential = float(geom.volumes @ grad_sq)
    cross_int = float(geom.lumped @ cross)
    second = IntegralResult(
        value=cross_int + geom.total_volume + tangential / imm.n,
        error=0.0,
        method="mesh",
        params={"identity": "position-curvature-projected", "tangential": tangential},
    )
    return first, second


def beltrami_residual(mesh, imm, pencil: FEMPencil | None = None) -> IntegralResult:
    """L2 norm (componentwise Euclidean) of Delta_h psi - n H over the mesh.

    Requires a closed-form mean curvature; measures the consistency of the
    discrete Laplacian.
    """
    if not imm.has_closed_mean_curvature:
        raise UsageError("Beltrami residual needs a closed-form mean curvature")
    if pencil is None:
        pencil = assemble_pencil(mesh, imm)
    geom = pencil.geometry
    lap = apply_discrete_laplacian(pencil, geom.positions)
    target = imm.n * imm.mean_curvature(mesh.vertices)
    diff_sq = ((lap - target) ** 2).sum(axis=1)
    value = float(np.sqrt(geom.lumped @ diff_sq / geom.total_volume))
    return IntegralResult(
        value=value, error=0.0, method="mesh", params={"identity": "beltrami"}
    )


def monte_carlo_section_integral(Q, a, samples: int, seed: int) -> IntegralResult:
    """Monte Carlo estimate of the integral of Q(v,v) over the light-cone
    section relative to a, with its standard error."""
    a = require_unit_timelike(a)
    if not isinstance(Q, SymBilinearForm):
        Q = SymBilinearForm(np.asarray(Q, dtype=float))
    v = sample_spherical_section(a, seed, samples)
    vals = Q.quad(v)
    vol = unit_sphere_volume(Q.m - 2)
    value = vol * float(vals.mean())
    stderr = vol * float(vals.std(ddof=1)) / np.sqrt(samples)
    return IntegralResult(
        value=value,
        error=stderr,
        method="monte-carlo",
        params={"samples": samples, "seed": seed, "exact": section_integral_exact(Q, a)},
    )


def monte_carlo_sphere_integral(Q, samples: int, seed: int) -> IntegralResult:
    """Euclidean analogue: integral of Q(v,v) over the round unit sphere."""
    if not isinstance(Q, SymBilinearForm):
        Q = SymBilinearForm(np.asarray(Q, dtype=float))
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, Q.m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    vals = Q.quad(g)
    vol = unit_sphere_volume(Q.m - 1)
    value = vol * float(vals.mean())
    stderr = vol * float(vals.std(ddof=1)) / np.sqrt(samples)
    return IntegralResult(
        value=value,
        error=stderr,
        method="monte-carlo",
        params={"samples": samples, "seed": seed, "exact": sphere_integral_exact(Q)},
    )
