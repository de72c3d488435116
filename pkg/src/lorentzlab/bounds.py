"""Eigenvalue bound evaluations and equality-case diagnostics.

Every inequality here descends from one variational fact: a mesh field
with zero mass-weighted mean satisfies f'Kf >= lambda1 f'Mf for the
discrete eigenvalue. Bound evaluations are therefore phrased as stiffness
and consistent-mass quadratic forms of vertex data, which makes the
inequalities that are exact in the continuum exact for the discrete
pencil as well (up to the eigensolver residual). Reports that mix the
discrete eigenvalue with pointwise curvature integrals carry a
discretization-aware tolerance instead.

Vector-equation residuals are measured in an auxiliary Euclidean norm on
canonical components; the causal square can vanish on nonzero lightlike
residuals, so it is reported separately where it matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError
from .fem import (
    FEMPencil,
    Spectrum,
    apply_discrete_laplacian,
    assemble_pencil,
    mesh_geometry,
    solve_lambda1,
)
from .immersions import TAU_CENTER
from .minkowski import (
    CausalClass,
    causal_classify,
    inner,
    metric_signs,
    require_unit_timelike,
    sample_causal_directions,
    sample_timelike_directions,
)
from .quadrature import mean_curvature_vertices

TAU_BOUND = 1e-6
TAU_DISC = 2e-2
TAU_EQ = 2.5e-2
STRICT_FACTOR = 8.0
TAU_ELLE = 1e-6
S_MAX = 2.0
H_CENTER_TOL = 1e-2

__all__ = [
    "TestField",
    "BoundReport",
    "EqualityDiagnostic",
    "make_test_field_mean_curvature",
    "make_test_field_position",
    "make_test_field_projected",
    "signed_gradient_trace_density",
    "BoundEngine",
]


@dataclass
class TestField:
    """Vector field along the immersion used as eigenvalue test data."""

    values: np.ndarray  # (k, m)
    provenance: str
    centered: bool
    center_residual: np.ndarray  # componentwise integral / Vol


@dataclass
class BoundReport:
    """One inequality evaluation. For lambda1 <= RHS bounds, lhs is lambda1."""

    name: str
    anchor: str
    lhs: float
    rhs: float
    slack: float
    holds: bool
    tol: float
    direction: tuple | None = None
    status: str = "ok"
    meta: dict = field(default_factory=dict)


def _report(name, anchor, lhs, rhs, tol, direction=None, status="ok", **meta):
    lhs = float(lhs)
    rhs = float(rhs)
    slack = rhs - lhs
    holds = slack >= -tol * max(abs(lhs), abs(rhs))
    return BoundReport(
        name=name,
        anchor=anchor,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        holds=holds,
        tol=tol,
        direction=None if direction is None else tuple(float(x) for x in direction),
        status=status,
        meta=meta,
    )


@dataclass
class EqualityDiagnostic:
    """Residual analysis of Delta psi_hat + lambda1 psi_hat = mu * a."""

    direction: tuple
    residual_rel: float
    residual_rel_canonical: float
    causal_residual_sq: float
    a_component_integral: float
    tangential_ratio: float
    radius_from_curvature: float
    radius_from_lambda1: float
    verdict: str
    a_component: np.ndarray = field(repr=False, default=None)


def _center_residual(geom, values) -> np.ndarray:
    return (geom.lumped @ values) / geom.total_volume


def make_test_field_mean_curvature(
    mesh, imm, pencil: FEMPencil | None = None, center_tol: float = H_CENTER_TOL
) -> TestField:
    """Mean curvature as a test field.

    The continuum field always integrates to zero; discretely it does so
    only to quadrature accuracy, so the centered flag uses a
    discretization-aware tolerance.
    """
    if pencil is None:
        pencil = assemble_pencil(mesh, imm)
    geom = pencil.geometry
    h = mean_curvature_vertices(mesh, imm, pencil)
    residual = _center_residual(geom, h)
    centered = bool(np.abs(residual).max() <= center_tol)
    return TestField(
        values=h,
        provenance="mean-curvature",
        centered=centered,
        center_residual=residual,
    )


def make_test_field_position(mesh, imm, geometry=None) -> TestField:
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    residual = _center_residual(geom, geom.positions)
    scale = max(1.0, float(np.abs(geom.positions).max()))
    if np.abs(residual).max() > 10.0 * TAU_CENTER * scale:
        raise UsageError("position test field needs a recentered immersion")
    return TestField(
        values=geom.positions,
        provenance="position",
        centered=True,
        center_residual=residual,
    )


def make_test_field_projected(mesh, imm, a, geometry=None) -> TestField:
    a = require_unit_timelike(a)
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    base = make_test_field_position(mesh, imm, geometry=geom)
    s = inner(base.values, a)
    values = base.values + s[:, None] * a
    return TestField(
        values=values,
        provenance="projected-position",
        centered=True,
        center_residual=_center_residual(geom, values),
    )


def signed_gradient_trace_density(mesh, imm, W, geometry=None) -> np.ndarray:
    """Per-element signed sum of squared P1 gradients of <b_j, W>.

    The sum runs over the canonical pseudo-orthonormal basis with signs
    (-1, 1, ..., 1); signature weighting makes the value basis
    independent.
    """
    geom = geometry if geometry is not None else mesh_geometry(mesh, imm)
    values = W.values if isinstance(W, TestField) else np.asarray(W, dtype=float)
    if values.shape != (mesh.num_vertices, imm.m):
        raise UsageError("field shape does not match mesh and ambient dimension")
    simplices = mesh.simplices
    dw = values[simplices[:, 1:]] - values[simplices[:, :1]]  # (E, n, m)
    signs = metric_signs(imm.m)
    return np.einsum("eam,m,ebm,eba->e", dw, signs, dw, geom.gram_inv)


class BoundEngine:
    """Shared state for bound evaluations on one (mesh, immersion) pair.

    Assembles the pencil, solves for the smallest nonzero eigenvalue, and
    recenters the position field once; all evaluations are then pure reads
    and may run concurrently.
    """

    def __init__(
        self,
        mesh,
        imm,
        seed: int = 0,
        pencil=None,
        spectrum: Spectrum | None = None,
        tol_disc: float = TAU_DISC,
    ):
        self.mesh = mesh
        self.imm = imm
        self.tol_disc = float(tol_disc)
        self.pencil = pencil if pencil is not None else assemble_pencil(mesh, imm)
        self.geometry = self.pencil.geometry
        self.spectrum = spectrum if spectrum is not None else solve_lambda1(self.pencil, seed=seed)
        self.lambda1 = self.spectrum.lambda1
        self.volume = self.geometry.total_volume
        self.signs = metric_signs(imm.m)
        self.positions = self.geometry.positions
        center = (self.geometry.lumped @ self.positions) / self.volume
        self.gravity_shift = center
        self.positions_hat = self.positions - center
        self.recentered_immersion = imm.translated(-center)
        self.mean_curvature = mean_curvature_vertices(mesh, imm, self.pencil)
        self._K = self.pencil.stiffness
        self._M = self.pencil.mass

    def _finish(self, report: BoundReport) -> BoundReport:
        report.meta.setdefault("vertices", self.mesh.num_vertices)
        report.meta.setdefault("level", self.mesh.level)
        return report

    # quadratic-form quadrature -------------------------------------------------

    def k_form(self, x, y=None) -> float:
        y = x if y is None else y
        return float(x @ (self._K @ y))

    def m_form(self, x, y=None) -> float:
        y = x if y is None else y
        return float(x @ (self._M @ y))

    def field_k_trace(self, values) -> float:
        """Integral of the signed gradient trace; equals the stiffness form
        summed over components with metric signs."""
        return float(sum(s * self.k_form(values[:, j]) for j, s in enumerate(self.signs)))

    def field_m_trace(self, values) -> float:
        """Integral of <W, W> for the P1 interpolant of W."""
        return float(sum(s * self.m_form(values[:, j]) for j, s in enumerate(self.signs)))

    def f_direction(self, values, a) -> np.ndarray:
        """Vertex values of <a, W>."""
        return values @ (self.signs * a)

    def tangential_energy(self, a) -> float:
        """Integral of the squared tangential part of a (gradient of <a, psi>)."""
        return self.k_form(self.f_direction(self.positions, a))

    # test fields ---------------------------------------------------------------

    def test_field_mean_curvature(self) -> TestField:
        return make_test_field_mean_curvature(self.mesh, self.imm, self.pencil)

    def test_field_position(self) -> TestField:
        return TestField(
            values=self.positions_hat,
            provenance="position",
            centered=True,
            center_residual=_center_residual(self.geometry, self.positions_hat),
        )

    def test_field_projected(self, a) -> TestField:
        a = require_unit_timelike(a)
        s = inner(self.positions_hat, a)
        return TestField(
            values=self.positions_hat + s[:, None] * a,
            provenance="projected-position",
            centered=True,
            center_residual=_center_residual(self.geometry, self.positions_hat),
        )

    # bounds ----------------------------------------------------------------------

    def test_field_bound(self, W: TestField, a, label: str | None = None) -> BoundReport:
        """Master inequality: gradient side dominates the lambda1 side for
        any centered test field and any unit timelike direction."""
        a = require_unit_timelike(a)
        values = W.values
        m = self.imm.m
        fa = self.f_direction(values, a)
        weight = m * self.m_form(fa) + self.field_m_trace(values)
        if weight <= 1e-14 * max(1.0, float(np.abs(values).max()) ** 2):
            raise DomainError("test field vanishes identically")
        lhs = self.lambda1 * weight
        rhs = m * self.k_form(fa) + self.field_k_trace(values)
        return self._finish(_report(
            label or f"test-field[{W.provenance}]",
            "test-field",
            lhs,
            rhs,
            TAU_BOUND,
            direction=a,
            provenance=W.provenance,
            centered=W.centered,
        ))

    def reilly(self) -> BoundReport:
        """Classical bound lambda1 <= n * mean of the causal curvature square.

        Valid through spacelike or lightlike hyperplanes; fails in general,
        which is what the counterexample gallery item certifies.
        """
        h_sq_int = self.field_m_trace(self.mean_curvature)
        rhs = self.imm.n * h_sq_int / self.volume
        return self._finish(
            _report(
                "reilly", "reilly", self.lambda1, rhs, self.tol_disc, curvature_integral=h_sq_int
            )
        )

    def mean_curvature_field_bound(self, a) -> BoundReport:
        a = require_unit_timelike(a)
        h = self.mean_curvature
        m = self.imm.m
        fa = self.f_direction(h, a)
        denom = m * self.m_form(fa) + self.field_m_trace(h)
        if denom <= 0:
            raise DomainError("mean curvature field has vanishing weight")
        num = m * self.k_form(fa) + self.field_k_trace(h)
        return self._finish(
            _report(
                "mean-curvature-field",
                "mean-curvature-field",
                self.lambda1,
                num / denom,
                self.tol_disc,
                direction=a,
                numerator=num,
                denominator=denom,
            )
        )

    def position_field_bounds(self, a):
        """Bounds from the centered position field and its projection.

        Both right-hand sides use the exact elementwise identities for the
        signed gradient trace (n for the position field, n plus the
        squared tangential part for the projected one).
        """
        a = require_unit_timelike(a)
        n = self.imm.n
        m = self.imm.m
        s = inner(self.positions_hat, a)
        s_m = self.m_form(s)
        psi_m = self.field_m_trace(self.positions_hat)
        tangential = self.k_form(s)

        first = self._finish(_report(
            "position-field",
            "position-field",
            self.lambda1 * (m * s_m + psi_m),
            n * self.volume + m * tangential,
            TAU_BOUND,
            direction=a,
            tangential=tangential,
        ))
        second = self._finish(_report(
            "projected-position-field",
            "projected-position-field",
            self.lambda1 * (psi_m + s_m),
            n * self.volume + tangential,
            TAU_BOUND,
            direction=a,
            tangential=tangential,
        ))
        return first, second

    def projected_curvature_sq_integral(self, a) -> float:
        """Integral of the squared projection of H onto the hyperplane of a."""
        fa = self.f_direction(self.mean_curvature, a)
        return self.field_m_trace(self.mean_curvature) + self.m_form(fa)

    def projected_curvature_bound(self, a, sharp: bool = False) -> BoundReport:
        """lambda1 <= n * int |H_a|^2 / Vol, the headline bound.

        With sharp=True the denominator gains (1/n) int |a^T|^2, which can
        only lower the right-hand side. Every ingredient is translation
        invariant, so recentering is optional.
        """
        a = require_unit_timelike(a)
        n = self.imm.n
        h_a_int = self.projected_curvature_sq_integral(a)
        tangential = self.tangential_energy(a)
        denom = self.volume + (tangential / n if sharp else 0.0)
        name = "projected-curvature-sharp" if sharp else "projected-curvature"
        return self._finish(
            _report(
                name,
                name,
                self.lambda1,
                n * h_a_int / denom,
                self.tol_disc,
                direction=a,
                curvature_integral=h_a_int,
                tangential=tangential,
            )
        )

    def infimum_over_directions(self, count: int, seed: int, s_max: float = S_MAX) -> BoundReport:
        """Minimum of the sharp projected-curvature bound over boost-sampled
        unit timelike directions (the axis direction is sample zero)."""
        dirs = sample_timelike_directions(self.imm.m, count, seed, s_max=s_max)
        n = self.imm.n
        best_rhs = math.inf
        best_dir = dirs[0]
        for a in dirs:
            h_a_int = self.projected_curvature_sq_integral(a)
            denom = self.volume + self.tangential_energy(a) / n
            rhs = n * h_a_int / denom
            if rhs < best_rhs:
                best_rhs = rhs
                best_dir = a
        return self._finish(
            _report(
                "direction-infimum",
                "direction-infimum",
                self.lambda1,
                best_rhs,
                self.tol_disc,
                direction=best_dir,
                samples=len(dirs),
                seed=seed,
                boost=float(np.arccosh(max(best_dir[0], 1.0))),
            )
        )

    # defect form and causal certificate ------------------------------------------

    def rayleigh_defect(self, v, w=None) -> float:
        """Q(v, w) = int <grad F_v, grad F_w> - lambda1 int F_v F_w for the
        centered position field; positive semi-definite by construction."""
        v = np.asarray(v, dtype=float)
        w = v if w is None else np.asarray(w, dtype=float)
        fv = self.f_direction(self.positions_hat, v)
        fw = self.f_direction(self.positions_hat, w)
        return self.k_form(fv, fw) - self.lambda1 * self.m_form(fv, fw)

    def rayleigh_defect_matrix(self) -> np.ndarray:
        m = self.imm.m
        basis = np.eye(m)
        out = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                out[i, j] = out[j, i] = self.rayleigh_defect(basis[i], basis[j])
        return out

    def _defect_scale(self) -> float:
        psi_e = float(
            sum(self.m_form(self.positions_hat[:, j]) for j in range(self.imm.m))
        )
        return max(self.lambda1 * psi_e, 1e-300)

    def reilly_causal_certificate(self, ell, tol: float = TAU_ELLE) -> BoundReport:
        """Classical bound certified by a causal direction annihilating the
        defect form; carries equality sub-checks in its metadata.

        If the defect Q(ell, ell) is not numerically zero the certificate
        does not apply and the report is returned with status
        "precondition-failed" instead of a verdict.
        """
        ell = np.asarray(ell, dtype=float)
        cls = causal_classify(ell)
        if cls not in (CausalClass.TIMELIKE, CausalClass.LIGHTLIKE):
            raise DomainError(f"certificate direction must be causal, got {cls.value}")
        q = self.rayleigh_defect(ell)
        scale = self._defect_scale() * float(ell @ ell)
        precondition_ok = abs(q) <= tol * scale
        base = self.reilly()
        n = self.imm.n

        resid = apply_discrete_laplacian(self.pencil, self.positions_hat) + self.lambda1 * self.positions_hat
        causal_sq = float(
            sum(
                s * self.m_form(resid[:, j])
                for j, s in enumerate(self.signs)
            )
        )
        euclid_sq = float(sum(self.m_form(resid[:, j]) for j in range(self.imm.m)))
        psi_sq = self.field_m_trace(self.positions_hat)
        volume_ratio = self.lambda1 * psi_sq / (n * self.volume)
        meta = {
            "defect": q,
            "defect_rel": q / scale,
            "precondition_ok": precondition_ok,
            "causal_residual_sq": causal_sq / self._defect_scale() / self.lambda1,
            "euclid_residual_sq": euclid_sq / self._defect_scale() / self.lambda1,
            "volume_identity_ratio": volume_ratio,
            "equality": precondition_ok
            and abs(volume_ratio - 1.0) <= self.tol_disc
            and abs(causal_sq) / max(euclid_sq, 1e-300) <= 1.0
            and abs(causal_sq) / self._defect_scale() / self.lambda1 <= TAU_EQ,
        }
        return self._finish(BoundReport(
            name="reilly-causal-certificate",
            anchor="reilly-causal-certificate",
            lhs=base.lhs,
            rhs=base.rhs,
            slack=base.slack,
            holds=base.holds,
            tol=base.tol,
            direction=tuple(float(x) for x in ell),
            status="ok" if precondition_ok else "precondition-failed",
            meta=meta,
        ))

    def causal_defect_search(self, count: int, seed: int) -> dict:
        """Sampling search for a causal direction with vanishing defect."""
        dirs = sample_causal_directions(self.imm.m, count, seed, s_max=S_MAX)
        best = None
        for ell in dirs:
            q = self.rayleigh_defect(ell)
            rel = abs(q) / (self._defect_scale() * float(ell @ ell))
            if best is None or rel < best["defect_rel"]:
                best = {"direction": tuple(float(x) for x in ell), "defect_rel": rel}
        best["found"] = best["defect_rel"] <= TAU_ELLE
        best["samples"] = count
        return best

    # equality diagnostics ---------------------------------------------------------

    def equality_tolerance(self) -> float:
        """Equality-verdict threshold, calibrated at refinement level 4.

        The verdict separates discretization noise from a genuine residual;
        the noise halves per refinement level, so the threshold follows.
        Meshes without a level use the calibration value unchanged.
        """
        level = self.mesh.level if self.mesh.level is not None else 4
        return TAU_EQ * 2.0 ** (4 - level)

    def equality_diagnostic(
        self, a, tau_eq: float | None = None, strict_factor: float = STRICT_FACTOR
    ) -> EqualityDiagnostic:
        """Measure how far Delta psi_hat + lambda1 psi_hat is from a multiple
        of the direction a.

        The residual after removing the pointwise a-component lies in the
        hyperplane orthogonal to a, where the causal square is positive
        definite; both the residual and the position field are measured in
        the Euclidean norm of the frame adapted to a (this coincides with
        the canonical Euclidean norm when a is the time axis, and keeps
        verdicts boost equivariant). The canonical-frame number is
        reported alongside. Verdicts: equality-case below tau_eq, strict
        above strict_factor times tau_eq, inconclusive between.
        """
        a = require_unit_timelike(a)
        if tau_eq is None:
            tau_eq = self.equality_tolerance()
        geom = self.geometry
        resid = apply_discrete_laplacian(self.pencil, self.positions_hat) + self.lambda1 * self.positions_hat
        mu = -self.f_direction(resid, a)
        rho = resid - mu[:, None] * a
        rho_sq = inner(rho, rho)  # rho is orthogonal to a, so this is >= 0
        rho_l2 = math.sqrt(max(float(geom.lumped @ rho_sq), 0.0) / self.volume)
        s_hat = inner(self.positions_hat, a)
        psi_sq_adapted = inner(self.positions_hat, self.positions_hat) + 2.0 * s_hat**2
        psi_l2 = math.sqrt(float(geom.lumped @ psi_sq_adapted) / self.volume)
        residual_rel = rho_l2 / max(psi_l2, 1e-300)

        rho_l2_canon = math.sqrt(float(geom.lumped @ (rho * rho).sum(axis=1)) / self.volume)
        psi_l2_canon = math.sqrt(
            float(geom.lumped @ (self.positions_hat**2).sum(axis=1)) / self.volume
        )
        residual_rel_canonical = rho_l2_canon / max(psi_l2_canon, 1e-300)
        causal_sq = float(geom.lumped @ inner(resid, resid)) / self.volume

        if residual_rel <= tau_eq:
            verdict = "equality-case"
        elif residual_rel >= strict_factor * tau_eq:
            verdict = "strict"
        else:
            verdict = "inconclusive"

        h_a_mean = self.projected_curvature_sq_integral(a) / self.volume
        return EqualityDiagnostic(
            direction=tuple(float(x) for x in a),
            residual_rel=residual_rel,
            residual_rel_canonical=residual_rel_canonical,
            causal_residual_sq=causal_sq,
            a_component_integral=float(geom.lumped @ mu),
            tangential_ratio=self.tangential_energy(a) / self.volume,
            radius_from_curvature=1.0 / math.sqrt(max(h_a_mean, 1e-300)),
            radius_from_lambda1=math.sqrt(self.imm.n / self.lambda1),
            verdict=verdict,
            a_component=mu,
        )
