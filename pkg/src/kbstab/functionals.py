"""Mean and covariance-propagation functionals of the generalized filter family.

Every filter in this library is defined by a pair of parametrized linear
functionals: a mean functional that produces the drift estimate and a
Riccati functional that produces the covariance propagation term. Three
families are provided:

* ``ekf``: point evaluation ``g(x)`` and Jacobian-based propagation.
* ``adf``: Gaussian expectations, realized numerically with a fixed
  high-order Gauss-Hermite reference rule (exact Gaussian integrals are
  rarely available in closed form).
* ``sigma``: user-supplied sigma-point rule; the covariance term uses the
  Gaussian integration-by-parts identity so only field values are needed.

All fields must be vectorized: ``g`` maps ``(..., d)`` to ``(..., d)`` and
``jac`` maps ``(..., d)`` to ``(..., d, d)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IndefiniteMatrixError
from .quadrature import CubatureRule, _sqrt_psd_stack, check_degree_two_exactness, gauss_hermite_rule

MEAN_KINDS = ("ekf", "adf", "sigma")
TIME_KINDS = ("cont", "disc")


def reference_rule(dim):
    """High-order Gauss-Hermite rule backing the assumed-density variants."""
    if dim <= 3:
        order = 10
    elif dim <= 5:
        order = 6
    else:
        order = 4
    return gauss_hermite_rule(dim, order)


def _validate_rule(rule):
    report = check_degree_two_exactness(rule, tol=1e-8)
    if not report.passed:
        raise ValueError("rule fails the degree-two exactness check")
    if rule.has_negative_weights:
        raise ValueError("rules with negative weights are not admissible here")
    return rule


@dataclass(frozen=True)
class MeanFunctional:
    """Drift-estimate functional; ``kind`` is one of ``ekf``, ``adf``, ``sigma``."""

    kind: str
    rule: Optional[CubatureRule] = None

    def __post_init__(self):
        if self.kind not in MEAN_KINDS:
            raise ValueError(f"unknown mean functional kind {self.kind!r}")
        if self.kind == "ekf":
            if self.rule is not None:
                raise ValueError("ekf functional takes no rule")
        else:
            if self.rule is None:
                raise ValueError(f"{self.kind} functional requires a rule")
            _validate_rule(self.rule)


@dataclass(frozen=True)
class RiccatiFunctional:
    """Covariance-propagation functional with a continuous or discrete form."""

    kind: str
    time: str
    rule: Optional[CubatureRule] = None

    def __post_init__(self):
        if self.kind not in MEAN_KINDS:
            raise ValueError(f"unknown riccati functional kind {self.kind!r}")
        if self.time not in TIME_KINDS:
            raise ValueError("time must be 'cont' or 'disc'")
        if self.kind == "ekf":
            if self.rule is not None:
                raise ValueError("ekf functional takes no rule")
        else:
            if self.rule is None:
                raise ValueError(f"{self.kind} functional requires a rule")
            _validate_rule(self.rule)


def mean_functional(kind, dim=None, rule=None):
    """Build a :class:`MeanFunctional`; ``adf`` resolves its reference rule from ``dim``."""
    if kind == "adf" and rule is None:
        if dim is None:
            raise ValueError("adf functional needs dim to build its reference rule")
        rule = reference_rule(dim)
    return MeanFunctional(kind=kind, rule=None if kind == "ekf" else rule)


def riccati_functional(kind, time, dim=None, rule=None):
    """Build a :class:`RiccatiFunctional` analogous to :func:`mean_functional`."""
    if kind == "adf" and rule is None:
        if dim is None:
            raise ValueError("adf functional needs dim to build its reference rule")
        rule = reference_rule(dim)
    return RiccatiFunctional(kind=kind, time=time, rule=None if kind == "ekf" else rule)


def _as_batch(x, P):
    x = np.asarray(x, dtype=float)
    P = np.asarray(P, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
        P = P[None, :, :]
    if P.shape != (x.shape[0], x.shape[1], x.shape[1]):
        raise ValueError("P must have shape (d, d) matching x")
    scale = max(1.0, float(np.abs(P).max()))
    if float(np.linalg.eigvalsh(0.5 * (P + np.swapaxes(P, -1, -2)))[..., 0].min()) < -1e-10 * scale:
        raise IndefiniteMatrixError("covariance must be positive semidefinite")
    return x, P, single


def _sigma_eval(rule, g, x, P):
    """Field values at the transformed sigma points; returns (values, sqrtP)."""
    sqrtP = _sqrt_psd_stack(0.5 * (P + np.swapaxes(P, -1, -2)))
    pts = x[:, None, :] + np.einsum("bij,pj->bpi", sqrtP, rule.points)
    vals = np.asarray(g(pts), dtype=float)
    if vals.shape != pts.shape:
        raise ValueError("field returned an unexpected shape (fields must be vectorized)")
    return vals, sqrtP


def eval_mean_batch(F, g, x, P):
    """Batched mean functional over states ``x`` (B, d) with covariances ``P`` (B, d, d)."""
    if F.kind == "ekf":
        return np.asarray(g(x), dtype=float)
    vals, _ = _sigma_eval(F.rule, g, x, P)
    return np.einsum("p,bpi->bi", F.rule.weights, vals)


def eval_mean(F, g, x, P):
    """Evaluate the mean functional at a single state / covariance pair.

    Point evaluation ``g(x)`` for ``ekf``; a weighted sigma-point sum
    ``sum_i w_i g(x + sqrt(P) xi_i)`` otherwise. Exactly reproduces ``g(x)``
    for affine fields regardless of ``P``.
    """
    x, P, single = _as_batch(x, P)
    out = eval_mean_batch(F, g, x, P)
    return out[0] if single else out


def eval_riccati_cont_batch(F, g, x, P, jac=None):
    if F.kind == "ekf":
        if jac is None:
            raise ValueError("ekf riccati functional requires the Jacobian")
        return np.asarray(jac(x), dtype=float) @ P
    if F.kind == "adf":
        if jac is None:
            raise ValueError("adf riccati functional requires the Jacobian")
        sqrtP = _sqrt_psd_stack(0.5 * (P + np.swapaxes(P, -1, -2)))
        pts = x[:, None, :] + np.einsum("bij,pj->bpi", sqrtP, F.rule.points)
        J = np.asarray(jac(pts), dtype=float)
        return np.einsum("p,bpij->bij", F.rule.weights, J) @ P
    vals, sqrtP = _sigma_eval(F.rule, g, x, P)
    cross = np.einsum("p,bpi,pj->bij", F.rule.weights, vals, F.rule.points)
    return cross @ sqrtP


def eval_riccati_cont(F, g, x, P, jac=None):
    """Continuous-time Riccati functional.

    ``ekf`` returns ``J_g(x) P``, ``adf`` the rule average of the Jacobian
    times ``P``, and ``sigma`` the integration-by-parts form
    ``sum_i w_i g(x + sqrt(P) xi_i) xi_i^T sqrt(P)``. All coincide with
    ``A P`` for affine ``g(z) = A z + b``.
    """
    if F.time != "cont":
        raise ValueError("functional is not a continuous-time variant")
    x, P, single = _as_batch(x, P)
    out = eval_riccati_cont_batch(F, g, x, P, jac=jac)
    return out[0] if single else out


def _clamp_psd(M, floor=-1e-12):
    sym = 0.5 * (M + np.swapaxes(M, -1, -2))
    vals, vecs = np.linalg.eigh(sym)
    vals = np.where(vals < floor, floor, vals)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def eval_riccati_disc_batch(F, g, x, P, jac=None):
    if F.kind == "ekf":
        if jac is None:
            raise ValueError("ekf riccati functional requires the Jacobian")
        J = np.asarray(jac(x), dtype=float)
        return _clamp_psd(J @ P @ np.swapaxes(J, -1, -2))
    vals, _ = _sigma_eval(F.rule, g, x, P)
    m = np.einsum("p,bpi->bi", F.rule.weights, vals)
    dev = vals - m[:, None, :]
    cov = np.einsum("p,bpi,bpj->bij", F.rule.weights, dev, dev)
    return _clamp_psd(cov)


def eval_riccati_disc(F, g, x, P, jac=None):
    """Discrete-time Riccati functional (propagated covariance, without noise).

    ``ekf`` returns ``J_g(x) P J_g(x)^T``; the quadrature variants return the
    weighted covariance of the propagated sigma points. The output is
    symmetrized and eigenvalue-clamped to be positive semidefinite.
    """
    if F.time != "disc":
        raise ValueError("functional is not a discrete-time variant")
    x, P, single = _as_batch(x, P)
    out = eval_riccati_disc_batch(F, g, x, P, jac=jac)
    return out[0] if single else out


@dataclass(frozen=True)
class AssumptionCheckReport:
    """Outcome of a sampled one-sided consistency check."""

    worst_violation: float
    sample_count: int
    c_g_used: float
    passed: bool
    worst_index: int = -1

    def __bool__(self):
        return self.passed


def _sample_inputs(dim, samples, seed, box):
    """Deterministic (x, x_alt, P) triples spanning small and large scales."""
    gen = np.random.Generator(np.random.Philox(key=[seed % 2**64, 0]))
    lo, hi = float(box[0]), float(box[1])
    width = hi - lo
    x_alt = gen.uniform(lo, hi, size=(samples, dim))
    far = gen.uniform(lo, hi, size=(samples, dim))
    near = x_alt + 0.1 * width * gen.standard_normal((samples, dim))
    use_near = gen.random(samples) < 0.5
    x = np.where(use_near[:, None], near, far)
    G = gen.standard_normal((samples, dim, dim))
    P = G @ np.swapaxes(G, 1, 2)
    target = np.exp(gen.uniform(np.log(1e-3), np.log(10.0), size=samples))
    tr = np.einsum("bii->b", P)
    P *= (target / np.maximum(tr, 1e-300))[:, None, None]
    return x, x_alt, P


def _report(lhs, rhs, samples, c_g):
    slack = 1e-8 * np.maximum(1.0, np.abs(rhs))
    violation = lhs - rhs
    worst = int(np.argmax(violation))
    return AssumptionCheckReport(
        worst_violation=float(violation[worst]),
        sample_count=samples,
        c_g_used=float(c_g),
        passed=bool(np.all(violation <= slack)),
        worst_index=worst,
    )


def _check_dim(F, dim):
    if dim is None:
        if F.rule is None:
            raise ValueError("pass dim explicitly for the point-evaluation functional")
        return F.rule.dim
    if F.rule is not None and F.rule.dim != dim:
        raise ValueError("dim disagrees with the functional's rule")
    return int(dim)


def check_assumption_continuous(F, g, m_g, n_g, samples=10000, seed=0, box=(-5.0, 5.0), c_g=None, dim=None):
    """Sampled check of the continuous one-sided consistency inequality.

    Verifies ``<x - x~, g(x) - L_{x~,P}(g)> <= m_g ||x - x~||^2 + C tr(P)``
    on random triples, with ``C = 0`` for the point-evaluation functional and
    ``C = m_g - n_g`` for the quadrature-based ones (override via ``c_g``).
    """
    if not (np.isfinite(m_g) and np.isfinite(n_g) and n_g <= m_g):
        raise ValueError("need finite m_g >= n_g")
    if c_g is None:
        c_g = 0.0 if F.kind == "ekf" else float(m_g - n_g)
    dim = _check_dim(F, dim)
    x, x_alt, P = _sample_inputs(dim, samples, seed, box)
    gx = np.asarray(g(x), dtype=float)
    L = eval_mean_batch(F, g, x_alt, P)
    lhs = np.einsum("bi,bi->b", x - x_alt, gx - L)
    rhs = m_g * np.sum((x - x_alt) ** 2, axis=1) + c_g * np.einsum("bii->b", P)
    return _report(lhs, rhs, samples, c_g)


def check_assumption_discrete(F, g, jf_norm, samples=10000, seed=0, box=(-5.0, 5.0), c_g=None, dim=None):
    """Sampled check of the discrete squared-deviation inequality.

    Verifies ``||g(x) - L_{x~,P}(g)||^2 <= jf_norm^2 ||x - x~||^2 + C tr(P)``
    with ``C = 0`` for point evaluation and ``C = jf_norm`` otherwise. The
    default constant follows the stated discrete convention; pass ``c_g`` to
    test alternatives (for example ``jf_norm ** 2``).
    """
    if not np.isfinite(jf_norm) or jf_norm < 0:
        raise ValueError("jf_norm must be finite and nonnegative")
    if c_g is None:
        c_g = 0.0 if F.kind == "ekf" else float(jf_norm)
    dim = _check_dim(F, dim)
    x, x_alt, P = _sample_inputs(dim, samples, seed, box)
    gx = np.asarray(g(x), dtype=float)
    L = eval_mean_batch(F, g, x_alt, P)
    lhs = np.sum((gx - L) ** 2, axis=1)
    rhs = jf_norm**2 * np.sum((x - x_alt) ** 2, axis=1) + c_g * np.einsum("bii->b", P)
    return _report(lhs, rhs, samples, c_g)
