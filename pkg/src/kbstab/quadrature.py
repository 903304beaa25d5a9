"""Unit sigma-point rules, Gauss-Hermite tensor rules, and matrix square roots.

A cubature rule here is a set of unit sigma-points and weights approximating
expectations against a standard Gaussian. The rules constructed by this
module integrate every polynomial of total degree at most two exactly, the
property the filter stability theory relies on.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import IndefiniteMatrixError

MAX_RULE_POINTS = 10**6


@dataclass(frozen=True)
class CubatureRule:
    """Unit sigma-points ``points`` (n, dim) with weights ``weights`` (n,)."""

    dim: int
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if points.shape != (weights.size, self.dim):
            raise ValueError("points must have shape (len(weights), dim)")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise ValueError("rule entries must be finite")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self):
        return self.weights.size

    @property
    def has_negative_weights(self):
        return bool(np.any(self.weights < 0.0))


def default_unscented_kappa(dim):
    """Classical fourth-moment matching clipped to keep weights nonnegative."""
    return max(0.0, 3.0 - dim)


def unscented_rule(dim, kappa=None):
    """Unscented transform points for a ``dim``-dimensional unit Gaussian.

    Produces ``2 dim + 1`` points: the origin with weight ``kappa/(dim+kappa)``
    and ``+-sqrt(dim+kappa) e_i`` with weight ``1/(2 (dim+kappa))``. Requires
    ``kappa >= 0`` so that every weight is nonnegative, a condition the
    stability constants depend on.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if kappa is None:
        kappa = default_unscented_kappa(dim)
    kappa = float(kappa)
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative (negative weights are not allowed)")
    scale = np.sqrt(dim + kappa)
    eye = np.eye(dim)
    points = np.vstack([np.zeros((1, dim)), scale * eye, -scale * eye])
    weights = np.concatenate([[kappa / (dim + kappa)], np.full(2 * dim, 0.5 / (dim + kappa))])
    return CubatureRule(dim=dim, points=points, weights=weights)


def gauss_hermite_rule(dim, order):
    """Tensor product of probabilists' Gauss-Hermite rules.

    ``order`` nodes per axis, hence ``order ** dim`` points with positive
    weights; exact for polynomials up to total degree ``2 order - 1``.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if order < 2:
        raise ValueError("order must be at least 2")
    if order**dim > MAX_RULE_POINTS:
        raise ValueError(f"rule would have {order**dim} points (limit {MAX_RULE_POINTS})")
    nodes, weights = hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    idx = np.array(list(itertools.product(range(order), repeat=dim)))
    points = nodes[idx]
    w = np.prod(weights[idx], axis=1)
    return CubatureRule(dim=dim, points=points.reshape(-1, dim), weights=w)


def _sqrt_psd_stack(P, floor=0.0):
    """Symmetric square root of stacked PSD matrices, clamping eigenvalues."""
    vals, vecs = np.linalg.eigh(P)
    root = np.sqrt(np.clip(vals, floor, None))
    S = (vecs * root[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def matrix_sqrt(P, sym_tol=1e-10, eig_floor=-1e-10):
    """Symmetric positive-semidefinite square root via eigendecomposition.

    Eigenvalues in ``[eig_floor, 0)`` are treated as rounding noise and
    clamped to zero; anything below ``eig_floor`` raises
    :class:`IndefiniteMatrixError`.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("expected a single square matrix")
    scale = max(1.0, float(np.abs(P).max()))
    if np.abs(P - P.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric to tolerance")
    vals = np.linalg.eigvalsh(0.5 * (P + P.T))
    if vals[0] < eig_floor * scale:
        raise IndefiniteMatrixError(f"matrix has eigenvalue {vals[0]:.3e}, not positive semidefinite")
    return _sqrt_psd_stack(0.5 * (P + P.T))


@dataclass(frozen=True)
class ExactnessReport:
    """Moment residuals of a rule against the standard Gaussian."""

    weight_sum_residual: float
    mean_residual: float
    covariance_residual: float
    negative_weight_count: int
    min_weight: float
    tol: float
    passed: bool

    def __bool__(self):
        return self.passed


def check_degree_two_exactness(rule, tol=1e-10):
    """Verify the three degree-two moment identities of a cubature rule.

    Checks that weights sum to one, the weighted mean of the points is zero
    and their weighted second moment is the identity. Negative weights are
    reported but do not fail the moment check on their own.
    """
    w, xi = rule.weights, rule.points
    wsum = abs(float(w.sum()) - 1.0)
    mean = float(np.abs(w @ xi).max())
    cov = float(np.abs(np.einsum("p,pi,pj->ij", w, xi, xi) - np.eye(rule.dim)).max())
    return ExactnessReport(
        weight_sum_residual=wsum,
        mean_residual=mean,
        covariance_residual=cov,
        negative_weight_count=int(np.sum(w < 0.0)),
        min_weight=float(w.min()),
        tol=tol,
        passed=bool(wsum <= tol and mean <= tol and cov <= tol),
    )
