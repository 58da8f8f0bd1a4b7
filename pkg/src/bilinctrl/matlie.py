"""Matrix Lie-algebra computations: brackets, closures, pointwise evaluation.

Square real matrices are treated as vectors in R^(n*n) under the Frobenius
inner product.  Spans are decided numerically with a relative singular-value
cutoff; the default tolerance is deliberately loose compared to machine
epsilon so that closures of well-scaled integer generators are exact in
practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-9


def _as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def bracket(a, b) -> np.ndarray:
    """Commutator [a, b] = ab - ba of two square matrices."""
    a = _as_square(a, "a")
    b = _as_square(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class LieBasis:
    """Frobenius-orthonormal basis of a bracket-closed matrix subspace.

    ``depth`` counts the breadth-first bracketing rounds that produced new
    directions (generators are depth 0).  ``converged`` is False when the
    round cap was hit before the closure stabilized; the basis is still
    returned but the closure invariant is unverified.
    """

    n: int
    basis: tuple
    dim: int
    tol: float
    depth: int
    converged: bool

    def stacked_at(self, x) -> np.ndarray:
        """n x dim matrix whose columns are b @ x for each basis element."""
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return np.zeros((self.n, 0))
        return np.column_stack([b @ x for b in self.basis])


@dataclass(frozen=True, eq=False)
class SubspaceReport:
    """Evaluation of a matrix subspace at a point: spanned vectors and rank."""

    vectors: np.ndarray
    dim: int
    singular_values: np.ndarray


def lie_closure(generators, tol: float = DEFAULT_TOL, depth_cap: int | None = None) -> LieBasis:
    """Orthonormal basis of the smallest bracket-closed span of the generators.

    Breadth-first bracketing of basis pairs; a candidate direction is admitted
    only when its residual after projection onto the current span exceeds
    ``tol`` times the largest matrix norm seen.  The ordering (generator
    index, then discovery order) is deterministic so results are reproducible.
    ``depth_cap`` bounds the number of bracketing rounds (default 2*n*n).
    """
    gens = list(generators)
    if not gens:
        raise ValueError("empty generator list")
    mats = [_as_square(g, f"generators[{i}]") for i, g in enumerate(gens)]
    n = mats[0].shape[0]
    for i, m in enumerate(mats):
        if m.shape[0] != n:
            raise ValueError(f"generators[{i}] has dimension {m.shape[0]}, expected {n}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if depth_cap is None:
        depth_cap = 2 * n * n

    basis_vecs: list[np.ndarray] = []
    scale = max(float(np.linalg.norm(m)) for m in mats)

    def admit(mat) -> bool:
        nonlocal scale
        v = np.asarray(mat, dtype=float).reshape(-1)
        scale = max(scale, float(np.linalg.norm(v)))
        r = v.copy()
        # Two modified Gram-Schmidt passes keep the basis orthonormal to
        # machine precision even after many admissions.
        for _ in range(2):
            for b in basis_vecs:
                r -= (b @ r) * b
        res = float(np.linalg.norm(r))
        if scale > 0 and res > tol * scale:
            basis_vecs.append(r / res)
            return True
        return False

    for m in mats:
        admit(m)

    depth = 0
    rounds = 0
    frontier = list(range(len(basis_vecs)))
    while frontier and len(basis_vecs) < n * n and rounds < depth_cap:
        new: list[int] = []
        for j in frontier:
            bj = basis_vecs[j].reshape(n, n)
            for i in range(j):
                bi = basis_vecs[i].reshape(n, n)
                if admit(bi @ bj - bj @ bi):
                    new.append(len(basis_vecs) - 1)
        rounds += 1
        if new:
            depth = rounds
        frontier = new

    converged = (not frontier) or len(basis_vecs) == n * n
    basis = tuple(v.reshape(n, n) for v in basis_vecs)
    for b in basis:
        b.setflags(write=False)
    return LieBasis(n=n, basis=basis, dim=len(basis), tol=tol, depth=depth,
                    converged=converged)


def evaluate_at(basis: LieBasis, x, tol: float | None = None) -> SubspaceReport:
    """Evaluate the subspace at a nonzero point x: span{b @ x} and its rank.

    Rank counts singular values above ``tol`` times the largest one; ``tol``
    defaults to the tolerance the basis was built with.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.n,):
        raise ValueError(f"x must be a vector of length {basis.n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.linalg.norm(x) == 0.0:
        raise ValueError("x must be a finite nonzero vector")
    if tol is None:
        tol = basis.tol
    cols = basis.stacked_at(x)
    if cols.shape[1] == 0:
        return SubspaceReport(cols, 0, np.zeros(0))
    s = np.linalg.svd(cols, compute_uv=False)
    dim = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    return SubspaceReport(cols, dim, s)


def matrix_exponential(a, t: float = 1.0) -> np.ndarray:
    """exp(t * a) by scaling and squaring.

    Raises OverflowError when the result has non-finite entries.
    """
    a = _as_square(a, "a")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    out = scipy.linalg.expm(t * a)
    if not np.all(np.isfinite(out)):
        raise OverflowError("matrix exponential overflowed to non-finite entries")
    return out
