"""Rank conditions, non-controllability certificates, decision pipeline.

The pipeline is deliberately asymmetric: non-controllability is certified
(rank-drop witness or a one-signed norm derivative), while controllability
verdicts are always labelled empirical and rest on attainable-set coverage.
Rank drops live on thin algebraic sets that generic sampling misses, so the
search combines seeded sphere samples with multistart local minimization of
the smallest relevant singular value, and reports "undetermined" rather than
certifying a universal rank condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .matlie import DEFAULT_TOL, LieBasis, evaluate_at, lie_closure
from .model import MatrixFamily, SystemSpec, project_sphere
from .reach import CoverageGrid, CoverageReport, coverage, sample_attainable


@dataclass(frozen=True, eq=False)
class LarcFailure:
    """Witness point where the evaluated algebra has deficient rank.

    sigma_min is the n-th singular value of the stacked evaluation matrix at
    the witness; soundness means sigma_min <= tol * sigma_max there.
    """

    witness: np.ndarray
    dim: int
    sigma_min: float
    sigma_max: float


@dataclass(frozen=True, eq=False)
class MonotoneNorm:
    """All symmetric parts share a semidefinite sign, so |x(t)| is monotone.

    d/dt |x|^2 = 2 <x, Mx> = 2 <x, sym(M) x>, hence a one-signed family keeps
    the norm monotone along every trajectory and attainable sets cannot be
    dense.  The eigenvalues of each symmetric part are recorded so the
    certificate can be re-verified from a report alone.
    """

    direction: str  # "nondecreasing" | "nonincreasing" | "constant"
    sym_eigenvalues: tuple


@dataclass(frozen=True, eq=False)
class Verdict:
    """Outcome of the decision pipeline plus always-on diagnostics."""

    conclusion: str  # "controllable" | "not_controllable" | "undetermined"
    certificate: LarcFailure | MonotoneNorm | None
    evidence: CoverageReport | None
    lie_dim: int | None
    orbit_dims: tuple
    angular: str  # "accessible" | "inaccessible" | "unknown"
    diagnostics: dict


@dataclass(frozen=True)
class AnalysisBudgets:
    """Sampling and tolerance knobs for decide_controllability."""

    samples: int = 10000
    reach_budget: int = 100000
    coverage_threshold: float = 0.99
    tol: float = DEFAULT_TOL
    seed: int = 0
    restarts: int = 12
    profile_samples: int = 100
    angular_cells: int = 32
    radial_bins: int = 16
    r_min: float = 0.1
    r_max: float = 10.0
    projective: bool = False
    max_segments: int = 20
    duration_scale: float = 0.5
    x0: tuple | None = None
    closure_depth_cap: int | None = None


@dataclass(frozen=True, eq=False)
class LarcResult:
    holds: bool
    dim: int


@dataclass(frozen=True, eq=False)
class MinRankResult:
    min_sigma: float
    argmin: np.ndarray
    sigma_max: float
    is_witness: bool


@dataclass(frozen=True, eq=False)
class AngularReport:
    status: str  # "accessible" | "inaccessible"
    witness: np.ndarray | None
    min_sigma: float


def _require_bilinear(spec: SystemSpec):
    if not spec.is_bilinear:
        raise ValueError("this analysis requires a bilinear system")


def _closure(spec: SystemSpec, tol: float, basis: LieBasis | None) -> LieBasis:
    if basis is not None:
        return basis
    return lie_closure(spec.family.matrices, tol=tol)


def _stacked_batch(basis: LieBasis, points: np.ndarray) -> np.ndarray:
    """(P, n, d) array of evaluation columns b @ x for each point row."""
    mats = np.stack(basis.basis)  # (d, n, n)
    return np.einsum("dij,pj->pid", mats, points)


def _unit_samples(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 5])
    pts = rng.standard_normal((count, n))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def larc_at(spec: SystemSpec, x, tol: float = DEFAULT_TOL,
            basis: LieBasis | None = None) -> LarcResult:
    """Does the evaluated Lie closure span all of R^n at x?"""
    _require_bilinear(spec)
    basis = _closure(spec, tol, basis)
    report = evaluate_at(basis, x, tol=tol)
    return LarcResult(holds=report.dim == spec.n, dim=report.dim)


def transversality_at(spec: SystemSpec, x, tol: float = DEFAULT_TOL,
                      basis: LieBasis | None = None) -> bool:
    """Does the evaluated closure plus the radial line span R^n at x?"""
    _require_bilinear(spec)
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) == 0.0:
        raise ValueError("x must be nonzero")
    basis = _closure(spec, tol, basis)
    cols = np.column_stack([basis.stacked_at(x), x])
    s = np.linalg.svd(cols, compute_uv=False)
    return bool(s.size >= spec.n and s[spec.n - 1] > tol * s[0])


def projected_tangent_rank(spec: SystemSpec, x, tol: float = DEFAULT_TOL,
                           basis: LieBasis | None = None) -> int:
    """Rank of the closure pushed to the sphere tangent space at x/|x|.

    Independent route for the transversality check: transversality at x is
    equivalent to this rank being n - 1.
    """
    _require_bilinear(spec)
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise ValueError("x must be nonzero")
    u = x / nrm
    basis = _closure(spec, tol, basis)
    if basis.dim == 0:
        return 0
    cols = np.column_stack([project_sphere(b, u) for b in basis.basis])
    s = np.linalg.svd(cols, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _sigma_n_batch(cols: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-th singular value (0 when there are fewer columns) and the largest."""
    s = np.linalg.svd(cols, compute_uv=False)
    smax = s[:, 0] if s.shape[1] else np.zeros(cols.shape[0])
    if s.shape[1] >= n:
        sn = s[:, n - 1]
    else:
        sn = np.zeros(cols.shape[0])
    return sn, smax


def _min_sigma_search(point_cols, n: int, restarts: int, seed: int,
                      prescan: int = 512):
    """Multistart minimization of sigma_n(point_cols(x)) over the unit sphere.

    point_cols maps a batch of unit points (P, n) to column stacks (P, n, d).
    Returns (min_sigma, argmin, sigma_max at argmin).
    """
    pts = _unit_samples(n, prescan, seed)
    sn, smax = _sigma_n_batch(point_cols(pts), n)
    order = np.argsort(sn)

    def objective(v):
        nrm = np.linalg.norm(v)
        if nrm == 0.0 or not np.all(np.isfinite(v)):
            return np.inf
        u = (v / nrm)[None, :]
        return float(_sigma_n_batch(point_cols(u), n)[0][0])

    best_idx = int(order[0])
    best = (float(sn[best_idx]), pts[best_idx], float(smax[best_idx]))
    for k in range(min(restarts, prescan)):
        x0 = pts[order[k]]
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": 400, "xatol": 1e-12, "fatol": 1e-15})
        v = res.x / np.linalg.norm(res.x)
        sn_v, smax_v = _sigma_n_batch(point_cols(v[None, :]), n)
        if sn_v[0] < best[0]:
            best = (float(sn_v[0]), v, float(smax_v[0]))
    return best


def min_rank_search(spec: SystemSpec, restarts: int = 12, seed: int = 0,
                    tol: float = DEFAULT_TOL, basis: LieBasis | None = None,
                    prescan: int = 512) -> MinRankResult:
    """Search the unit sphere for the smallest n-th singular value of the
    stacked closure evaluation; a relative near-zero flags a rank-drop witness.
    """
    _require_bilinear(spec)
    basis = _closure(spec, tol, basis)
    n = spec.n
    if basis.dim < n:
        # Fewer directions than dimensions: rank < n everywhere.
        x = np.zeros(n)
        x[0] = 1.0
        smax = float(np.linalg.svd(basis.stacked_at(x), compute_uv=False)[0]) \
            if basis.dim else 0.0
        return MinRankResult(0.0, x, smax, True)

    def cols(pts):
        return _stacked_batch(basis, pts)

    sigma, argmin, smax = _min_sigma_search(cols, n, restarts, seed, prescan)
    return MinRankResult(sigma, argmin, smax,
                         is_witness=sigma <= tol * max(smax, 1e-300))


def monotone_norm_certificate(family: MatrixFamily,
                              tol: float = 1e-12) -> MonotoneNorm | None:
    """Certificate that |x(t)| is monotone along every trajectory, if any."""
    eigs = [np.linalg.eigvalsh((m + m.T) / 2.0) for m in family.matrices]
    if all(np.max(np.abs(e)) <= tol for e in eigs):
        direction = "constant"
    elif all(e.min() >= -tol for e in eigs):
        direction = "nondecreasing"
    elif all(e.max() <= tol for e in eigs):
        direction = "nonincreasing"
    else:
        return None
    return MonotoneNorm(direction, tuple(tuple(float(v) for v in e) for e in eigs))


def angular_accessibility(spec: SystemSpec, samples: int = 1000, seed: int = 0,
                          tol: float = DEFAULT_TOL,
                          basis: LieBasis | None = None,
                          restarts: int = 8) -> AngularReport:
    """Check whether closure directions plus the radial line span R^n
    everywhere, by sampling plus multistart minimization of the augmented
    smallest singular value.  A near-singular point is an inaccessibility
    witness.
    """
    _require_bilinear(spec)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    basis = _closure(spec, tol, basis)
    n = spec.n

    def cols(pts):
        if basis.dim == 0:
            return pts[:, :, None]
        return np.concatenate([_stacked_batch(basis, pts), pts[:, :, None]], axis=2)

    pts = _unit_samples(n, samples, seed)
    sn, smax = _sigma_n_batch(cols(pts), n)
    bad = sn <= tol * np.maximum(smax, 1e-300)
    if bad.any():
        k = int(np.argmin(sn))
        return AngularReport("inaccessible", pts[k], float(sn[k]))
    sigma, argmin, smax_pt = _min_sigma_search(cols, n, restarts, seed, prescan=256)
    if sigma <= tol * max(smax_pt, 1e-300):
        return AngularReport("inaccessible", argmin, float(sigma))
    return AngularReport("accessible", None, float(sigma))


def orbit_dimension_profile(spec: SystemSpec, samples: int = 100, seed: int = 0,
                            tol: float = DEFAULT_TOL,
                            basis: LieBasis | None = None) -> tuple:
    """Evaluated closure dimensions at seeded random unit points."""
    _require_bilinear(spec)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    basis = _closure(spec, tol, basis)
    pts = _unit_samples(spec.n, samples, seed)
    if basis.dim == 0:
        return (0,) * samples
    s = np.linalg.svd(_stacked_batch(basis, pts), compute_uv=False)
    smax = np.maximum(s[:, 0], 1e-300)
    return tuple(int(d) for d in np.sum(s > tol * smax[:, None], axis=1))


def _coverage_grid(spec: SystemSpec, budgets: AnalysisBudgets) -> CoverageGrid:
    return CoverageGrid(spec.n, angular_cells=budgets.angular_cells,
                        radial_bins=budgets.radial_bins, r_min=budgets.r_min,
                        r_max=budgets.r_max, antipodal=budgets.projective)


def _reach_evidence(spec: SystemSpec, budgets: AnalysisBudgets) -> CoverageReport:
    x0 = np.array(budgets.x0, dtype=float) if budgets.x0 is not None \
        else np.eye(spec.n)[0]
    cloud = sample_attainable(spec, x0, budgets.reach_budget, budgets.seed,
                              max_segments=budgets.max_segments,
                              duration_scale=budgets.duration_scale)
    return coverage(cloud, _coverage_grid(spec, budgets))


def decide_controllability(spec: SystemSpec,
                           budgets: AnalysisBudgets | None = None) -> Verdict:
    """Run the full decision pipeline on a system.

    Bilinear systems go through Lie closure, rank-drop search, the monotone
    norm certificate, and finally attainable-set coverage.  Smooth systems
    skip the certificate stages and can only come out controllable
    (empirical) or undetermined.
    """
    if budgets is None:
        budgets = AnalysisBudgets()
    diagnostics: dict = {}
    lie_dim: int | None = None
    orbit_dims: tuple = ()
    angular = "unknown"
    certificate = None

    if spec.is_bilinear:
        basis = lie_closure(spec.family.matrices, tol=budgets.tol,
                            depth_cap=budgets.closure_depth_cap)
        lie_dim = basis.dim
        diagnostics["closure_converged"] = basis.converged
        diagnostics["closure_depth"] = basis.depth
        orbit_dims = orbit_dimension_profile(
            spec, samples=budgets.profile_samples, seed=budgets.seed,
            tol=budgets.tol, basis=basis)
        ang = angular_accessibility(spec, samples=min(budgets.samples, 4096),
                                    seed=budgets.seed, tol=budgets.tol, basis=basis)
        angular = ang.status
        if basis.converged:
            mr = min_rank_search(spec, restarts=budgets.restarts,
                                 seed=budgets.seed, tol=budgets.tol, basis=basis)
            diagnostics["min_sigma"] = mr.min_sigma
            if mr.is_witness:
                dim = evaluate_at(basis, mr.argmin, tol=budgets.tol).dim
                certificate = LarcFailure(witness=mr.argmin, dim=dim,
                                          sigma_min=mr.min_sigma,
                                          sigma_max=mr.sigma_max)
                return Verdict("not_controllable", certificate, None, lie_dim,
                               orbit_dims, angular, diagnostics)
        certificate = monotone_norm_certificate(spec.family)
        if certificate is not None:
            return Verdict("not_controllable", certificate, None, lie_dim,
                           orbit_dims, angular, diagnostics)

    evidence = _reach_evidence(spec, budgets)
    diagnostics["coverage_fraction"] = evidence.fraction
    converged = diagnostics.get("closure_converged", True)
    if evidence.fraction >= budgets.coverage_threshold and converged:
        return Verdict("controllable", None, evidence, lie_dim, orbit_dims,
                       angular, diagnostics)
    if not converged:
        diagnostics["reason"] = "lie closure did not converge within the round cap"
    else:
        diagnostics["reason"] = (
            f"coverage {evidence.fraction:.4f} below threshold "
            f"{budgets.coverage_threshold}")
    return Verdict("undetermined", None, evidence, lie_dim, orbit_dims,
                   angular, diagnostics)
