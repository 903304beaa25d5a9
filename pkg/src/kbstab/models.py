"""State-space models, built-in benchmark systems, and seeded path simulation.

Continuous models are Ito diffusions with nonlinear drift and linear
measurements,

    dX = f(X) dt + Q^{1/2} dW,      dY = H X dt + R^{1/2} dV,

simulated by Euler-Maruyama. Discrete models follow the analogous recursion
``X_k = f(X_{k-1}) + Q^{1/2} W_k``, ``Y_k = H X_k + R^{1/2} V_k``.

All drift and Jacobian callables must be vectorized over leading batch
dimensions. Randomness comes from counter-based Philox streams keyed by
``(seed, path index, role)`` so that any subset of paths can be generated in
any order, or in parallel, with bit-identical results.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError
from .quadrature import matrix_sqrt

_ROLE_INIT, _ROLE_STATE, _ROLE_MEAS = 0, 1, 2


def _stream(seed, path_index, role):
    key = [int(seed) % 2**64, (int(path_index) * 4 + role) % 2**64]
    return np.random.Generator(np.random.Philox(key=key))


def _check_spsd(name, M, dim):
    M = np.asarray(M, dtype=float)
    if M.shape != (dim, dim):
        raise ValueError(f"{name} must have shape {(dim, dim)}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} must be finite")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M)[0] < -1e-10 * scale:
        raise ValueError(f"{name} must be positive semidefinite")
    return 0.5 * (M + M.T)


@dataclass
class ContinuousModel:
    """Continuous-time diffusion model with linear measurements.

    ``known_M_f`` / ``known_N_f`` hold externally supplied log-Lipschitz
    constants of the drift and ``known_jf_norm`` its Lipschitz constant;
    certificates use them with analytic provenance when present.
    """

    dim_x: int
    dim_y: int
    f: Callable
    jac_f: Callable
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray
    known_M_f: Optional[float] = None
    known_N_f: Optional[float] = None
    known_jf_norm: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = _check_spsd("Q", self.Q, self.dim_x)
        self.R = _check_spsd("R", self.R, self.dim_y)
        self.Sigma0 = _check_spsd("Sigma0", self.Sigma0, self.dim_x)
        self.H = np.asarray(self.H, dtype=float)
        if self.H.shape != (self.dim_y, self.dim_x):
            raise ValueError(f"H must have shape {(self.dim_y, self.dim_x)}")
        self.mu0 = np.asarray(self.mu0, dtype=float).reshape(self.dim_x)
        if self.known_M_f is not None and self.known_N_f is not None:
            if self.known_N_f > self.known_M_f:
                raise ValueError("known_N_f must not exceed known_M_f")
        self._S = None

    @property
    def S(self):
        """Information-rate matrix ``H^T R^{-1} H`` (cached)."""
        if self._S is None:
            if np.linalg.eigvalsh(self.R)[0] <= 0.0:
                raise ValueError("R must be positive definite to form H^T R^-1 H")
            HtRinv = np.linalg.solve(self.R, self.H).T
            S = HtRinv @ self.H
            self._S = 0.5 * (S + S.T)
        return self._S

    def s_scalar(self, tol=1e-10):
        """Return ``s`` if ``S = s I`` to tolerance, else ``None``."""
        S = self.S
        s = float(np.trace(S)) / self.dim_x
        if np.abs(S - s * np.eye(self.dim_x)).max() <= tol * max(1.0, abs(s)):
            return s
        return None


@dataclass
class DiscreteModel:
    """Discrete-time recursion with per-step Gaussian noise."""

    dim_x: int
    dim_y: int
    f: Callable
    jac_f: Callable
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray
    known_jf_norm: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = _check_spsd("Q", self.Q, self.dim_x)
        self.R = _check_spsd("R", self.R, self.dim_y)
        self.Sigma0 = _check_spsd("Sigma0", self.Sigma0, self.dim_x)
        self.H = np.asarray(self.H, dtype=float)
        if self.H.shape != (self.dim_y, self.dim_x):
            raise ValueError(f"H must have shape {(self.dim_y, self.dim_x)}")
        self.mu0 = np.asarray(self.mu0, dtype=float).reshape(self.dim_x)
        self._S = None

    S = ContinuousModel.S
    s_scalar = ContinuousModel.s_scalar


@dataclass(frozen=True)
class SimulatedPath:
    """One simulated trajectory with its measurement record.

    Row ``k`` of ``states`` is the state at ``times[k]``. Row ``k >= 1`` of
    ``measurement_increments`` holds the measurement increment accumulated
    over ``[times[k-1], times[k])`` for continuous models, or the direct
    measurement ``Y_k`` for discrete models; row 0 is zero (no information
    is available at the initial time) so that every array has equal length.
    """

    dt: float
    times: np.ndarray
    states: np.ndarray
    measurement_increments: np.ndarray
    seed: int
    path_index: int = 0
    kind: str = "continuous"

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.measurement_increments)):
            raise ValueError("times, states and measurements must have equal row counts")


def _path_noise(model, seed, path_index, n_steps, scale_state, scale_meas):
    """Initial state and pre-scaled noise arrays for one path."""
    sqrt_sigma0 = matrix_sqrt(model.Sigma0)
    sqrt_q = matrix_sqrt(model.Q)
    sqrt_r = matrix_sqrt(model.R)
    g0 = _stream(seed, path_index, _ROLE_INIT)
    g1 = _stream(seed, path_index, _ROLE_STATE)
    g2 = _stream(seed, path_index, _ROLE_MEAS)
    x0 = model.mu0 + sqrt_sigma0 @ g0.standard_normal(model.dim_x)
    wq = scale_state * g1.standard_normal((n_steps, model.dim_x)) @ sqrt_q
    vr = scale_meas * g2.standard_normal((n_steps, model.dim_y)) @ sqrt_r
    return x0, wq, vr


def _steps_for(dt, horizon):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if horizon < dt:
        raise ValueError("horizon must be at least one step")
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be an integer multiple of dt")
    return n


def simulate_paths(model, dt, horizon, seed, n_paths, first_path=0):
    """Simulate a batch of Euler-Maruyama paths.

    Returns ``(times, states, increments, diverged)`` where ``states`` has
    shape ``(n_paths, n_steps + 1, dim_x)``, ``increments`` the matching
    measurement layout (row 0 zero), and ``diverged[p]`` is the first step
    at which path ``p`` became non-finite, or -1. Diverged paths are frozen
    at NaN from that step on instead of raising, so ensemble callers can
    account for them explicitly.
    """
    n = _steps_for(dt, horizon)
    B, dx, dy = n_paths, model.dim_x, model.dim_y
    sdt = math.sqrt(dt)
    x0 = np.empty((B, dx))
    wq = np.empty((B, n, dx))
    vr = np.empty((B, n, dy))
    for p in range(B):
        x0[p], wq[p], vr[p] = _path_noise(model, seed, first_path + p, n, sdt, sdt)

    times = np.arange(n + 1) * dt
    states = np.full((B, n + 1, dx), np.nan)
    incr = np.zeros((B, n + 1, dy))
    diverged = np.full(B, -1, dtype=int)
    states[:, 0] = x0
    alive = np.all(np.isfinite(x0), axis=1)
    diverged[~alive] = 0
    Ht = model.H.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            xk = states[:, k]
            xn = xk + np.asarray(model.f(xk), dtype=float) * dt + wq[:, k]
            yk = xk @ Ht * dt + vr[:, k]
            ok = alive & np.all(np.isfinite(xn), axis=1) & np.all(np.isfinite(yk), axis=1)
            newly_dead = alive & ~ok
            diverged[newly_dead] = k + 1
            alive = ok
            states[alive, k + 1] = xn[alive]
            incr[alive, k + 1] = yk[alive]
    return times, states, incr, diverged


def simulate_path(model, dt, horizon, seed, path_index=0):
    """Simulate a single path; raises :class:`DivergenceError` on blow-up."""
    times, states, incr, diverged = simulate_paths(model, dt, horizon, seed, 1, first_path=path_index)
    if diverged[0] >= 0:
        raise DivergenceError(f"state became non-finite at step {diverged[0]}", step=int(diverged[0]))
    return SimulatedPath(
        dt=float(dt), times=times, states=states[0], measurement_increments=incr[0],
        seed=int(seed), path_index=int(path_index), kind="continuous",
    )


def simulate_discrete_paths(model, steps, seed, n_paths, first_path=0):
    """Discrete analogue of :func:`simulate_paths` (unit noise scaling)."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    B, dx, dy = n_paths, model.dim_x, model.dim_y
    x0 = np.empty((B, dx))
    wq = np.empty((B, steps, dx))
    vr = np.empty((B, steps, dy))
    for p in range(B):
        x0[p], wq[p], vr[p] = _path_noise(model, seed, first_path + p, steps, 1.0, 1.0)

    times = np.arange(steps + 1, dtype=float)
    states = np.full((B, steps + 1, dx), np.nan)
    meas = np.zeros((B, steps + 1, dy))
    diverged = np.full(B, -1, dtype=int)
    states[:, 0] = x0
    alive = np.all(np.isfinite(x0), axis=1)
    diverged[~alive] = 0
    Ht = model.H.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            xn = np.asarray(model.f(states[:, k]), dtype=float) + wq[:, k]
            yn = xn @ Ht + vr[:, k]
            ok = alive & np.all(np.isfinite(xn), axis=1) & np.all(np.isfinite(yn), axis=1)
            diverged[alive & ~ok] = k + 1
            alive = ok
            states[alive, k + 1] = xn[alive]
            meas[alive, k + 1] = yn[alive]
    return times, states, meas, diverged


def simulate_discrete_path(model, steps, seed, path_index=0):
    """Simulate one discrete path; raises :class:`DivergenceError` on blow-up."""
    times, states, meas, diverged = simulate_discrete_paths(model, steps, seed, 1, first_path=path_index)
    if diverged[0] >= 0:
        raise DivergenceError(f"state became non-finite at step {diverged[0]}", step=int(diverged[0]))
    return SimulatedPath(
        dt=1.0, times=times, states=states[0], measurement_increments=meas[0],
        seed=int(seed), path_index=int(path_index), kind="discrete",
    )


# ---------------------------------------------------------------------------
# Built-in models


def _contractive3d_f(x):
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    out = np.empty_like(x)
    out[..., 0] = -x3 * (1.0 + 1.0 / (1.0 + x3**2)) - 3.0 * x1
    out[..., 1] = -x1 - x2 - x3
    out[..., 2] = x1**2 * np.exp(-(x1**2) - x3**2) - x1 - 2.0 * x3
    return out


def _contractive3d_jac(x):
    x1, x3 = x[..., 0], x[..., 2]
    J = np.zeros(x.shape[:-1] + (3, 3))
    J[..., 0, 0] = -3.0
    J[..., 0, 2] = -1.0 - (1.0 - x3**2) / (1.0 + x3**2) ** 2
    J[..., 1, :] = -1.0
    e = np.exp(-(x1**2) - x3**2)
    J[..., 2, 0] = 2.0 * x1 * (1.0 - x1**2) * e - 1.0
    J[..., 2, 2] = -2.0 * x1**2 * x3 * e - 2.0
    return J


def builtin_contractive3d():
    """Three-dimensional fully observed benchmark with a contractive drift.

    Every state component is measured directly with noise covariance ``8 I``,
    the state noise is white with unit covariance, and the drift mixes linear
    damping with saturating nonlinear terms. The attached log-Lipschitz
    constants are sharp to the printed digits.
    """
    return ContinuousModel(
        dim_x=3,
        dim_y=3,
        f=_contractive3d_f,
        jac_f=_contractive3d_jac,
        Q=np.eye(3),
        H=np.eye(3),
        R=8.0 * np.eye(3),
        mu0=np.zeros(3),
        Sigma0=0.01 * np.eye(3),
        known_M_f=-0.5947,
        known_N_f=-4.5046,
        name="contractive3d",
    )


def velocity_g(z):
    """Monotone scalar nonlinearity of the integrated-velocity benchmark."""
    z = np.asarray(z, dtype=float)
    return z * (1.0 + np.sin(z) / (1.0 + z**2))


def velocity_g_prime(z):
    """Derivative of :func:`velocity_g`; bounded in ``[0.4188, 1.5812]``."""
    z = np.asarray(z, dtype=float)
    return 1.0 + ((z**3 + z) * np.cos(z) - (z**2 - 1.0) * np.sin(z)) / (1.0 + z**2) ** 2


# Extremes of velocity_g_prime over the real line (attained near |z| = 0.494).
VELOCITY_G_PRIME_MIN = 0.4187731864747842
VELOCITY_G_PRIME_MAX = 1.5812268135252158


def builtin_integrated_velocity(a1=0.0, a2=1.0, q1=0.05, q2=0.05, h=1.0, r=0.05):
    """Two-dimensional partially observed model: measured position, hidden velocity.

    The first component integrates the second (plus optional feedback
    ``a1 x1``); the hidden component relaxes through the strictly increasing
    nonlinearity :func:`velocity_g`, whose slope bounds are attached for
    certificate construction. Only ``h x1`` is measured.
    """
    if a2 <= 0 or q1 <= 0 or q2 <= 0 or r <= 0:
        raise ValueError("a2, q1, q2 and r must be positive")
    if h == 0:
        raise ValueError("h must be nonzero")

    def f(x):
        out = np.empty_like(x)
        out[..., 0] = a1 * x[..., 0] + a2 * x[..., 1]
        out[..., 1] = -velocity_g(x[..., 1])
        return out

    def jac(x):
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = a1
        J[..., 0, 1] = a2
        J[..., 1, 1] = -velocity_g_prime(x[..., 1])
        return J

    return ContinuousModel(
        dim_x=2,
        dim_y=1,
        f=f,
        jac_f=jac,
        Q=np.diag([q1, q2]),
        H=np.array([[h, 0.0]]),
        R=np.array([[r]]),
        mu0=np.zeros(2),
        Sigma0=0.01 * np.eye(2),
        name="integrated_velocity",
        params={"a1": a1, "a2": a2, "q1": q1, "q2": q2, "h": h, "r": r,
                "lg": VELOCITY_G_PRIME_MIN, "sup_gprime": VELOCITY_G_PRIME_MAX},
    )


def velocity_log_lipschitz(model):
    """Closed-form (M, N) of the integrated-velocity drift from its slope bounds."""
    p = model.params
    a1, a2 = p["a1"], p["a2"]
    lo, hi = p["lg"], p["sup_gprime"]

    def eig(gp, which):
        half = 0.5 * (a1 - gp)
        rad = np.sqrt((0.5 * (a1 + gp)) ** 2 + 0.25 * a2**2)
        return half + rad if which == "max" else half - rad

    M = max(eig(lo, "max"), eig(hi, "max"))
    N = min(eig(lo, "min"), eig(hi, "min"))
    return float(M), float(N)


def _linear_field(A):
    A = np.asarray(A, dtype=float)

    def f(x):
        return x @ A.T

    def jac(x):
        return np.broadcast_to(A, x.shape[:-1] + A.shape).copy()

    return f, jac


def builtin_linear(A, Q, H, R, mu0=None, Sigma0=None):
    """Linear diffusion ``dX = A X dt + Q^{1/2} dW`` with linear measurements.

    The log-Lipschitz constants are exact for linear drifts and attached
    automatically.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    H = np.asarray(H, dtype=float)
    f, jac = _linear_field(A)
    sym = 0.5 * (A + A.T)
    vals = np.linalg.eigvalsh(sym)
    return ContinuousModel(
        dim_x=d,
        dim_y=H.shape[0],
        f=f,
        jac_f=jac,
        Q=Q,
        H=H,
        R=R,
        mu0=np.zeros(d) if mu0 is None else mu0,
        Sigma0=np.eye(d) if Sigma0 is None else Sigma0,
        known_M_f=float(vals[-1]),
        known_N_f=float(vals[0]),
        known_jf_norm=float(np.linalg.norm(A, 2)),
        name="linear",
        params={"A": A},
    )


def builtin_discrete_linear(A, Q, H, R, mu0=None, Sigma0=None):
    """Discrete linear recursion ``X_k = A X_{k-1} + Q^{1/2} W_k``."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    H = np.asarray(H, dtype=float)
    f, jac = _linear_field(A)
    return DiscreteModel(
        dim_x=d,
        dim_y=H.shape[0],
        f=f,
        jac_f=jac,
        Q=Q,
        H=H,
        R=R,
        mu0=np.zeros(d) if mu0 is None else mu0,
        Sigma0=np.eye(d) if Sigma0 is None else Sigma0,
        known_jf_norm=float(np.linalg.norm(A, 2)),
        name="discrete_linear",
        params={"A": A},
    )
