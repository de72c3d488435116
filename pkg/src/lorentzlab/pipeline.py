"""Named verification cases: full pipeline runs, suites, and reports.

A case run builds the mesh and immersion, solves the eigenproblem, then
evaluates the bound catalogue, integral identities and equality
diagnostics, and compares everything against the case's expectations.
Reports are plain dictionaries with a stable field order; with timings
disabled (the default) the JSON output is byte-identical across repeated
runs of the same configuration.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bounds import BoundEngine, BoundReport, TAU_DISC
from .errors import UsageError
from .immersions import (
    CounterexampleSphere,
    CylinderSphere,
    HyperbolicArc,
    HyperplaneSphere,
    NullHyperplaneSphere,
    load_immersion_spec,
)
from .meshes import build_circle_mesh, build_icosphere_mesh, circle_segments_for_level
from .minkowski import (
    SymBilinearForm,
    boost_direction,
    sample_timelike_directions,
    section_integral_exact,
    sphere_integral_exact,
)
from .quadrature import (
    beltrami_residual,
    minkowski_projected_identities,
    minkowski_residual,
    monte_carlo_section_integral,
    monte_carlo_sphere_integral,
    sphere_slice_integral,
)

SCHEMA_VERSION = "1"
CASE_NAMES = (
    "sphere-hyperplane",
    "counterexample",
    "cylinder-curve",
    "lightlike-hyperplane",
    "custom-spec-file",
)

__all__ = [
    "RunConfig",
    "RunReport",
    "run_case",
    "run_suite",
    "section_average_battery",
    "report_to_json",
    "report_to_csv",
    "write_report",
    "CASE_NAMES",
]


@dataclass
class RunConfig:
    case: str
    n: int = 2
    level: int = 4
    samples: int = 10
    seed: int = 7
    mc_samples: int = 200_000
    radius: float = 1.0
    scale: float = 2.0
    amplitude: float = 0.5
    tol_disc: float | None = None
    tol_eq: float | None = None
    out: str | None = None
    fmt: str = "json"
    include_timings: bool = False
    spec_file: str | None = None

    def __post_init__(self):
        if self.level < 0:
            raise UsageError("level must be nonnegative")
        if self.samples < 1:
            raise UsageError("need at least one direction sample")
        if self.mc_samples < 2:
            raise UsageError("need at least two Monte Carlo samples")
        if self.fmt not in ("json", "csv"):
            raise UsageError(f"unknown format {self.fmt!r}")
        for name in ("tol_disc", "tol_eq"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise UsageError(f"{name} must be positive")


def _axis(m: int) -> np.ndarray:
    a = np.zeros(m)
    a[0] = 1.0
    return a


def _build_case(config: RunConfig):
    """Immersion plus expectations for a named case."""
    n = config.n
    if config.case == "sphere-hyperplane":
        m = n + 2
        imm = HyperplaneSphere(n, config.radius, np.zeros(m), _axis(m))
        expect = {
            "reilly": "hold",
            "equality_direction": True,
            "certificate": _axis(m),
            "expect_certificate_equality": True,
        }
    elif config.case == "counterexample":
        imm = CounterexampleSphere(n)
        expect = {
            "reilly": "violate",
            "equality_direction": False,
            "certificate": "search",
        }
    elif config.case == "cylinder-curve":
        imm = CylinderSphere(n, HyperbolicArc(config.scale))
        expect = {
            "reilly": "violate" if config.scale > 0 else "hold",
            "equality_direction": None,
            "certificate": "search",
        }
    elif config.case == "lightlike-hyperplane":
        imm = NullHyperplaneSphere(n, config.amplitude)
        expect = {
            "reilly": "hold",
            "equality_direction": None,
            "certificate": imm.null_normal,
            "expect_certificate_equality": True,
        }
    elif config.case == "custom-spec-file":
        if not config.spec_file:
            raise UsageError("custom-spec-file case needs --spec-file")
        imm = load_immersion_spec(config.spec_file)
        expect = {"reilly": None, "equality_direction": None, "certificate": "search"}
    else:
        raise UsageError(
            f"unknown case {config.case!r}; choose from {', '.join(CASE_NAMES)}"
        )
    return imm, expect


def _build_mesh(imm, level: int):
    if imm.n == 1:
        return build_circle_mesh(circle_segments_for_level(level), level=level)
    if imm.n == 2:
        return build_icosphere_mesh(level)
    raise UsageError("meshes are available for n = 1 and n = 2 only")


def _bound_dict(report: BoundReport, expected: bool | None) -> dict:
    as_expected = None if expected is None else (report.holds == expected)
    return {
        "name": report.name,
        "anchor": report.anchor,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "slack": report.slack,
        "holds": report.holds,
        "tol": report.tol,
        "status": report.status,
        "direction": list(report.direction) if report.direction is not None else None,
        "expected_holds": expected,
        "as_expected": as_expected,
        "meta": _jsonable(report.meta),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return str(obj)


@dataclass
class RunReport:
    config: dict
    lambda1: dict
    volume: float
    bounds: list
    identities: dict
    equality: list
    verdict: str
    failures: list
    warnings: list = field(default_factory=list)
    timings: dict | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "lambda1": self.lambda1,
            "volume": self.volume,
            "bounds": self.bounds,
            "identities": self.identities,
            "equality": self.equality,
            "verdict": self.verdict,
            "failures": self.failures,
            "warnings": self.warnings,
            "timings": self.timings,
        }


def run_case(config: RunConfig) -> RunReport:
    """Execute the full pipeline for one case; deterministic per config."""
    stamps = {}
    t0 = time.perf_counter()
    imm, expect = _build_case(config)
    mesh = _build_mesh(imm, config.level)
    stamps["setup"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    engine = BoundEngine(
        mesh, imm, seed=config.seed, tol_disc=config.tol_disc if config.tol_disc else TAU_DISC
    )
    stamps["assemble_solve"] = time.perf_counter() - t1
    n = imm.n
    lambda_ref = n / config.radius**2 if config.case == "sphere-hyperplane" else float(n)

    axis = _axis(imm.m)
    sampled = sample_timelike_directions(
        imm.m, config.samples, seed=config.seed, include_axis=False
    )
    directions = [axis] + list(sampled)

    t2 = time.perf_counter()
    failures: list[str] = []
    warnings: list[str] = []
    bounds: list[dict] = []
    # below level 3 the discretization error is comparable to the
    # discretization-aware gate, so those expectations only warn
    resolved_level = config.level >= 3

    def add(report: BoundReport, expected: bool | None = True, tag: str = ""):
        entry = _bound_dict(report, expected)
        bounds.append(entry)
        if entry["as_expected"] is False:
            message = f"{report.name}{tag}: holds={report.holds}, expected {expected}"
            if report.tol >= engine.tol_disc and not resolved_level:
                warnings.append(message + " (unresolved at this refinement)")
            else:
                failures.append(message)

    reilly_expected = {"hold": True, "violate": False, None: None}[expect["reilly"]]
    add(engine.reilly(), reilly_expected)

    for j, a in enumerate(directions[: min(3, len(directions))]):
        add(engine.mean_curvature_field_bound(a), True, f" dir{j}")
        first, second = engine.position_field_bounds(a)
        add(first, True, f" dir{j}")
        add(second, True, f" dir{j}")

    field_h = engine.test_field_mean_curvature()
    field_pos = engine.test_field_position()
    for j, a in enumerate(directions[: min(4, len(directions))]):
        add(engine.test_field_bound(field_h, a), True, f" dir{j}")
        add(engine.test_field_bound(field_pos, a), True, f" dir{j}")
        add(engine.test_field_bound(engine.test_field_projected(a), a), True, f" dir{j}")

    equality_entries = []
    sharp_equality_found = False
    for j, a in enumerate(directions):
        sharp = engine.projected_curvature_bound(a, sharp=True)
        plain = engine.projected_curvature_bound(a)
        add(sharp, True, f" dir{j}")
        add(plain, True, f" dir{j}")
        diag = engine.equality_diagnostic(a, tau_eq=config.tol_eq)
        rel_slack = sharp.slack / max(abs(sharp.lhs), abs(sharp.rhs))
        if rel_slack <= TAU_DISC and diag.verdict == "equality-case":
            sharp_equality_found = True
        equality_entries.append(
            {
                "direction": list(diag.direction),
                "verdict": diag.verdict,
                "residual_rel": diag.residual_rel,
                "residual_rel_canonical": diag.residual_rel_canonical,
                "causal_residual_sq": diag.causal_residual_sq,
                "a_component_integral": diag.a_component_integral,
                "tangential_ratio": diag.tangential_ratio,
                "radius_from_curvature": diag.radius_from_curvature,
                "radius_from_lambda1": diag.radius_from_lambda1,
                "projection_bound_rel_slack": rel_slack,
            }
        )

    add(engine.infimum_over_directions(max(config.samples, 20), seed=config.seed + 1), True)

    cert = expect.get("certificate")
    if isinstance(cert, np.ndarray):
        report = engine.reilly_causal_certificate(cert)
        add(report, True, " certificate")
        if expect.get("expect_certificate_equality") and not report.meta.get("equality"):
            (failures if resolved_level else warnings).append(
                "certificate equality sub-checks failed"
            )
        certificate_search = None
    else:
        certificate_search = engine.causal_defect_search(
            max(4 * config.samples, 40), seed=config.seed + 2
        )
        if expect["reilly"] == "violate" and certificate_search["found"]:
            failures.append("found a causal defect direction on a case violating the classical bound")

    # equality expectations
    if expect["equality_direction"] is True and not sharp_equality_found:
        (failures if resolved_level else warnings).append(
            "expected an equality direction, none detected"
        )
    if expect["equality_direction"] is False:
        if any(e["verdict"] == "equality-case" for e in equality_entries):
            failures.append("detected an equality direction where none should exist")
    stamps["bounds"] = time.perf_counter() - t2

    # integral identities
    t3 = time.perf_counter()
    recentered = engine.recentered_immersion
    vol = engine.volume
    mink = minkowski_residual(mesh, imm, engine.pencil)
    proj1, proj2 = minkowski_projected_identities(
        mesh, recentered, axis, pencil=engine.pencil
    )
    boosted = directions[1] if len(directions) > 1 else axis
    proj1b, proj2b = minkowski_projected_identities(
        mesh, recentered, boosted, pencil=engine.pencil
    )
    identities = {
        "minkowski_residual_rel": abs(mink.value) / vol,
        "minkowski_projected_rel": [abs(proj1.value) / vol, abs(proj1b.value) / vol],
        "position_curvature_rel": [abs(proj2.value) / vol, abs(proj2b.value) / vol],
    }
    if imm.has_closed_mean_curvature:
        identities["beltrami_l2"] = beltrami_residual(mesh, imm, engine.pencil).value
        profile = getattr(imm, "mean_curvature_sq_of_height", None)
        if profile is not None:
            slice_int = sphere_slice_integral(n, profile)
            mesh_int = engine.field_m_trace(engine.mean_curvature)
            identities["reilly_rhs_slice"] = n * slice_int.value / (
                sphere_slice_integral(n, lambda t: np.ones_like(t)).value
            )
            identities["reilly_rhs_mesh"] = n * mesh_int / vol

    rng = np.random.default_rng(config.seed + 3)
    q = SymBilinearForm.random(imm.m, rng)
    mc = monte_carlo_section_integral(q, axis, config.mc_samples, seed=config.seed + 4)
    exact = section_integral_exact(q, axis)
    z_score = abs(mc.value - exact) / mc.error
    identities["section_average_mc"] = {
        "exact": exact,
        "estimate": mc.value,
        "stderr": mc.error,
        "z": z_score,
    }
    # wide deterministic alarm; a real defect lands far outside any gate
    if z_score > 4.0:
        failures.append("section averaging Monte Carlo check missed 4 standard errors")
    stamps["identities"] = time.perf_counter() - t3

    verdict = "pass" if not failures else "fail"
    lambda_block = {
        "value": engine.lambda1,
        "reference": lambda_ref,
        "rel_error": abs(engine.lambda1 - lambda_ref) / lambda_ref,
        "iterations": engine.spectrum.iterations,
        "residual": engine.spectrum.residual,
        "near_degenerate": engine.spectrum.near_degenerate,
    }
    config_echo = asdict(config)
    if certificate_search is not None:
        identities["causal_defect_search"] = certificate_search

    return RunReport(
        config=_jsonable(config_echo),
        lambda1=_jsonable(lambda_block),
        volume=vol,
        bounds=_jsonable(bounds),
        identities=_jsonable(identities),
        equality=_jsonable(equality_entries),
        verdict=verdict,
        failures=failures,
        warnings=warnings,
        timings=_jsonable(stamps) if config.include_timings else None,
    )


def run_suite(cases: list[str], levels: list[int], base: RunConfig):
    """Per-case refinement sweep with a convergence table."""
    if not cases or not levels:
        raise UsageError("suite needs nonempty case and level lists")
    reports = []
    table = []
    for case in cases:
        for level in levels:
            config = replace(base, case=case, level=level)
            report = run_case(config)
            reports.append(report)
            table.append(
                {
                    "case": case,
                    "level": level,
                    "lambda1": report.lambda1["value"],
                    "lambda1_rel_error": report.lambda1["rel_error"],
                    "minkowski_residual_rel": report.identities["minkowski_residual_rel"],
                    "beltrami_l2": report.identities.get("beltrami_l2"),
                    "verdict": report.verdict,
                }
            )
    overall = "pass" if all(r.verdict == "pass" for r in reports) else "fail"
    return reports, {"rows": table, "verdict": overall}


def section_average_battery(m: int, samples: int, seed: int) -> dict:
    """Monte Carlo vs closed form for the averaging identities.

    Five seeded random forms against three directions (axis plus two
    boosts) on the light-cone section, plus the round-sphere analogue.
    """
    rng = np.random.default_rng(seed)
    dirs = [
        _axis(m),
        boost_direction(0.5, _unit_spatial(m, 0)),
        boost_direction(1.0, _unit_spatial(m, 1)),
    ]
    cases = []
    ok = True
    for i in range(5):
        q = SymBilinearForm.random(m, rng)
        for j, a in enumerate(dirs):
            exact = section_integral_exact(q, a)
            mc = monte_carlo_section_integral(q, a, samples, seed=seed + 100 + 3 * i + j)
            z = abs(mc.value - exact) / mc.error
            entry = {
                "lemma": "section",
                "form": i,
                "direction": j,
                "exact": exact,
                "estimate": mc.value,
                "stderr": mc.error,
                "z": z,
                "pass": bool(z <= 4.0),
            }
            ok = ok and entry["pass"]
            cases.append(entry)
    for i in range(5):
        q = SymBilinearForm.random(m, rng)
        exact = sphere_integral_exact(q)
        mc = monte_carlo_sphere_integral(q, samples, seed=seed + 200 + i)
        z = abs(mc.value - exact) / mc.error
        entry = {
            "lemma": "sphere",
            "form": i,
            "direction": None,
            "exact": exact,
            "estimate": mc.value,
            "stderr": mc.error,
            "z": z,
            "pass": bool(z <= 4.0),
        }
        ok = ok and entry["pass"]
        cases.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "m": m,
        "samples": samples,
        "seed": seed,
        "cases": _jsonable(cases),
        "verdict": "pass" if ok else "fail",
    }


def _unit_spatial(m: int, k: int) -> np.ndarray:
    u = np.zeros(m - 1)
    if k == 0:
        u[0] = 1.0
    else:
        u[0] = 0.6
        u[1] = 0.8
    return u


def report_to_json(report: RunReport | dict) -> str:
    payload = report.to_dict() if isinstance(report, RunReport) else report
    return json.dumps(payload, indent=2) + "\n"


def report_to_csv(report: RunReport) -> str:
    """Flatten the bound reports only."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "case",
            "level",
            "name",
            "anchor",
            "lhs",
            "rhs",
            "slack",
            "holds",
            "tol",
            "status",
            "expected_holds",
            "as_expected",
            "direction",
        ]
    )
    case = report.config["case"]
    level = report.config["level"]
    for b in report.bounds:
        direction = "" if b["direction"] is None else " ".join(repr(x) for x in b["direction"])
        writer.writerow(
            [
                case,
                level,
                b["name"],
                b["anchor"],
                repr(b["lhs"]),
                repr(b["rhs"]),
                repr(b["slack"]),
                b["holds"],
                repr(b["tol"]),
                b["status"],
                b["expected_holds"],
                b["as_expected"],
                direction,
            ]
        )
    return buf.getvalue()


def write_report(report: RunReport, path: str, fmt: str = "json") -> None:
    text = report_to_json(report) if fmt == "json" else report_to_csv(report)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
