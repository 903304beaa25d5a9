"""Seeded Monte Carlo experiments: ensemble simulation, empirical mean-square
error curves, bound domination and concentration validation, CSV export.

Experiments are deterministic functions of their spec. Paths are simulated
from counter-based streams keyed by path index, filters run vectorized over
contiguous path chunks (one per worker), and reductions happen on fully
assembled per-path arrays in path order, so the worker count changes only
the wall-clock time, never a single output byte.
"""

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._version import __version__
from .errors import CertificateError, ExperimentDivergenceError
from .filters import make_filter_config, run_continuous_ensemble
from .models import builtin_contractive3d, builtin_integrated_velocity, builtin_linear, simulate_paths
from .stability import (
    continuous_concentration_threshold,
    continuous_mse_bound,
    contractive_certificate,
    integrated_velocity_certificate,
)

DIVERGENCE_LIMIT = 0.01


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of a Monte Carlo experiment."""

    model: str = "contractive3d"
    model_params: dict = field(default_factory=dict)
    filters: tuple = ("ekf",)
    dt: float = 0.01
    horizon: float = 10.0
    trajectories: int = 100
    seed: int = 1
    deltas: tuple = (0.5, 1.0, 2.0, 3.0)
    checkpoint_every: float = 0.5
    workers: int = 1
    average_from: float = 2.0
    domination_from: float = 1.0
    certificate: str = "auto"
    preset: Optional[str] = None

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("trajectories must be at least 1")
        if self.dt <= 0 or self.horizon < self.dt:
            raise ValueError("need dt > 0 and horizon >= dt")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.certificate not in ("auto", "none"):
            raise ValueError("certificate must be 'auto' or 'none'")
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["filters"] = list(self.filters)
        out["deltas"] = list(self.deltas)
        return out


def preset_spec(name, **overrides):
    """Pinned benchmark presets; overrides replace individual fields.

    ``fig1``: the fully observed contractive 3-d model under the ekf and ukf,
    1000 paths at step 0.01 over 10 time units. ``fig2``: the integrated
    velocity model under the ekf with the same budget, with bound domination
    judged from t = 2 because its certificate is a limiting one.
    """
    presets = {
        "fig1": dict(model="contractive3d", filters=("ekf", "ukf"), dt=0.01, horizon=10.0,
                     trajectories=1000, seed=1, deltas=(0.5, 1.0, 2.0, 3.0),
                     checkpoint_every=0.5, average_from=2.0, domination_from=1.0),
        "fig2": dict(model="integrated_velocity", filters=("ekf",), dt=0.01, horizon=10.0,
                     trajectories=1000, seed=1, deltas=(0.5, 1.0, 2.0, 3.0),
                     checkpoint_every=0.5, average_from=2.0, domination_from=2.0),
    }
    if name not in presets:
        raise ValueError(f"unknown preset {name!r} (available: {sorted(presets)})")
    cfg = presets[name]
    cfg.update(overrides)
    return ExperimentSpec(preset=name, **cfg)


def build_model(spec):
    """Instantiate the spec's model by name."""
    params = dict(spec.model_params)
    if spec.model == "contractive3d":
        if params:
            raise ValueError("contractive3d takes no parameters")
        return builtin_contractive3d()
    if spec.model == "integrated_velocity":
        return builtin_integrated_velocity(**params)
    if spec.model == "linear":
        return builtin_linear(**params)
    raise ValueError(f"unknown model {spec.model!r}; custom models go through the library API")


@dataclass
class ExperimentResult:
    """Everything an experiment produced, in path-index-deterministic form."""

    spec: ExperimentSpec
    times: np.ndarray
    empirical_mse: dict
    mse_stderr: dict
    bound_curve: dict
    time_averaged_mse: dict
    max_trace_P: dict
    exceedance: list
    checkpoint_times: np.ndarray
    checkpoint_err_sq: dict
    certificates: dict
    divergence_counts: dict
    alive_counts: dict
    bound_dominates: dict
    warnings: list


def _auto_certificate(model, config, kind, warnings):
    try:
        if model.name == "integrated_velocity":
            return integrated_velocity_certificate(model, config, kind=kind)
        return contractive_certificate(model, config, kind)
    except (CertificateError, ValueError) as exc:
        warnings.append(f"no certificate for {kind}: {exc}")
        return None


def _bound_curve(cert, times):
    if cert is None:
        return None
    if cert.asymptotic:
        # Limiting certificate: the exported curve is the flat long-run bound.
        return np.full(times.shape, cert.mse_asymptote)
    return np.array([continuous_mse_bound(cert, t) for t in times])


def run_experiment(spec, model=None, certificates=None, configs=None):
    """Run the Monte Carlo experiment described by ``spec``.

    Per trajectory: simulate the model, run every requested filter on the
    same measurement record, and record squared estimation errors. Raises
    :class:`ExperimentDivergenceError` (with the result attached) when more
    than one percent of paths diverge for any filter.

    ``model``, ``certificates`` and ``configs`` override the spec-derived
    defaults for library callers; the CLI always goes through the spec.
    """
    model = build_model(spec) if model is None else model
    warnings = []
    n_steps = int(round(spec.horizon / spec.dt))
    times = np.arange(n_steps + 1) * spec.dt

    cp_stride = int(round(spec.checkpoint_every / spec.dt))
    if abs(cp_stride * spec.dt - spec.checkpoint_every) > 1e-9:
        raise ValueError("checkpoint_every must be a multiple of dt")
    cp_idx = np.arange(0, n_steps + 1, cp_stride)
    cp_times = times[cp_idx]

    if configs is None:
        configs = {kind: make_filter_config(kind, model) for kind in spec.filters}
    elif set(configs) != set(spec.filters):
        raise ValueError("configs must cover exactly the spec's filter kinds")
    certs = {}
    for kind in spec.filters:
        if certificates and kind in certificates:
            certs[kind] = certificates[kind]
        elif spec.certificate == "auto":
            certs[kind] = _auto_certificate(model, configs[kind], kind, warnings)
        else:
            certs[kind] = None

    chunks = np.array_split(np.arange(spec.trajectories), min(spec.workers, spec.trajectories))
    chunks = [c for c in chunks if c.size]

    def process(chunk):
        _, states, incr, sim_div = simulate_paths(
            model, spec.dt, spec.horizon, spec.seed, n_paths=chunk.size, first_path=int(chunk[0])
        )
        out = {}
        for kind in spec.filters:
            run = run_continuous_ensemble(model, configs[kind], states, incr, spec.dt, cp_idx)
            # A path that died in simulation counts as diverged for every filter.
            div = np.where(sim_div >= 0, sim_div, run.diverged)
            out[kind] = (run.err_sq, run.trace_max, run.checkpoint_err_sq, div)
        return out

    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            chunk_results = list(pool.map(process, chunks))
    else:
        chunk_results = [process(c) for c in chunks]

    empirical, stderr, bounds, averages, traces = {}, {}, {}, {}, {}
    cp_err, div_counts, alive_counts, dominates = {}, {}, {}, {}
    for kind in spec.filters:
        err = np.concatenate([r[kind][0] for r in chunk_results], axis=0)
        trmax = np.concatenate([r[kind][1] for r in chunk_results])
        cps = np.concatenate([r[kind][2] for r in chunk_results], axis=0)
        div = np.concatenate([r[kind][3] for r in chunk_results])
        alive = div < 0
        n_alive = int(alive.sum())
        cert = certs[kind]
        bounds[kind] = _bound_curve(cert, times)
        cp_err[kind] = cps
        div_counts[kind] = int((~alive).sum())
        alive_counts[kind] = n_alive
        if n_alive == 0:
            empirical[kind] = np.full(times.shape, np.nan)
            stderr[kind] = np.full(times.shape, np.nan)
            averages[kind] = float("nan")
            traces[kind] = float("nan")
            dominates[kind] = None
            continue
        mse = err[alive].mean(axis=0)
        second = (err[alive] ** 2).mean(axis=0)
        se = np.sqrt(np.maximum(second - mse**2, 0.0) / n_alive)
        empirical[kind] = mse
        stderr[kind] = se
        # short runs fall back to the full-horizon average
        avg_from = spec.average_from if spec.average_from <= times[-1] else 0.0
        window = times >= avg_from
        averages[kind] = float(mse[window].mean())
        traces[kind] = float(trmax[alive].max())
        if bounds[kind] is not None:
            start = max(spec.domination_from, cert.T if not cert.asymptotic else spec.domination_from)
            sel = times >= start
            dominates[kind] = bool(np.all(mse[sel] <= bounds[kind][sel] + 3.0 * se[sel]))
        else:
            dominates[kind] = None

    exceedance = []
    for kind in spec.filters:
        cert = certs[kind]
        if cert is None or alive_counts[kind] == 0:
            continue
        alive_mask = np.concatenate([r[kind][3] for r in chunk_results]) < 0
        cps = cp_err[kind][alive_mask]
        for i, t in enumerate(cp_times):
            if t < cert.T and not cert.asymptotic:
                continue
            for delta in spec.deltas:
                thr = continuous_concentration_threshold(cert, max(t, cert.T), delta)
                freq = float((cps[:, i] >= thr).mean())
                exceedance.append({
                    "filter": kind, "t": float(t), "delta": float(delta),
                    "threshold": float(thr), "frequency": freq,
                    "limit": math.exp(-delta),
                })

    result = ExperimentResult(
        spec=spec,
        times=times,
        empirical_mse=empirical,
        mse_stderr=stderr,
        bound_curve=bounds,
        time_averaged_mse=averages,
        max_trace_P=traces,
        exceedance=exceedance,
        checkpoint_times=cp_times,
        checkpoint_err_sq=cp_err,
        certificates=certs,
        divergence_counts=div_counts,
        alive_counts=alive_counts,
        bound_dominates=dominates,
        warnings=warnings,
    )
    worst = max(div_counts.values()) / spec.trajectories
    if worst > DIVERGENCE_LIMIT:
        raise ExperimentDivergenceError(
            f"{worst:.1%} of paths diverged (limit {DIVERGENCE_LIMIT:.0%})", result=result
        )
    return result


def concentration_check(result, certificate, t_list, delta_list, kind=None):
    """Exceedance frequencies against certificate thresholds at checkpoints.

    For each requested time (which must be a retained checkpoint) and delta,
    reports the fraction of paths whose squared error met the threshold and
    whether it stays within ``exp(-delta)`` plus three binomial standard
    errors. Returns a list of row dicts.
    """
    if kind is None:
        if len(result.spec.filters) != 1:
            raise ValueError("several filters were run: pass kind explicitly")
        kind = result.spec.filters[0]
    cps = result.checkpoint_err_sq[kind]
    alive = ~np.isnan(cps).any(axis=1)
    cps = cps[alive]
    n = cps.shape[0]
    rows = []
    for t in t_list:
        match = np.nonzero(np.abs(result.checkpoint_times - t) <= 1e-9)[0]
        if match.size == 0:
            raise ValueError(f"t = {t} is not a retained checkpoint")
        i = int(match[0])
        for delta in delta_list:
            thr = continuous_concentration_threshold(certificate, max(t, certificate.T), delta)
            freq = float((cps[:, i] >= thr).mean())
            limit = math.exp(-delta)
            slack = 3.0 * math.sqrt(limit * (1.0 - limit) / n)
            rows.append({
                "t": float(t), "delta": float(delta), "threshold": float(thr),
                "frequency": freq, "limit": limit,
                "passed": bool(freq <= limit + slack),
            })
    return rows


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


def export_result(result, directory):
    """Write ``mse.csv``, ``exceedance.csv`` and ``experiment.json``.

    The CSV layout is one empirical and one bound column per filter kind, in
    spec order: ``time,mse_<k1>,bound_<k1>,mse_<k2>,bound_<k2>,...``. Floats
    are written in shortest round-trip form, so re-exporting the same result
    is byte-identical.
    """
    if result.times.size == 0:
        raise ValueError("result has no time points to export")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    mse_path = directory / "mse.csv"
    header = ["time"]
    for kind in result.spec.filters:
        header += [f"mse_{kind}", f"bound_{kind}"]
    lines = [",".join(header)]
    for i, t in enumerate(result.times):
        row = [_fmt(t)]
        for kind in result.spec.filters:
            row.append(_fmt(result.empirical_mse[kind][i]))
            bc = result.bound_curve[kind]
            row.append("nan" if bc is None else _fmt(bc[i]))
        lines.append(",".join(row))
    mse_path.write_text("\n".join(lines) + "\n")
    written.append(mse_path)

    ex_path = directory / "exceedance.csv"
    lines = ["filter,t,delta,frequency,limit"]
    for row in result.exceedance:
        lines.append(",".join([
            row["filter"], _fmt(row["t"]), _fmt(row["delta"]),
            _fmt(row["frequency"]), _fmt(row["limit"]),
        ]))
    ex_path.write_text("\n".join(lines) + "\n")
    written.append(ex_path)

    meta = {
        "library_version": __version__,
        "spec": result.spec.to_dict(),
        "seed": result.spec.seed,
        "certificates": {
            kind: (None if cert is None else cert.to_dict())
            for kind, cert in result.certificates.items()
        },
        "time_averaged_mse": result.time_averaged_mse,
        "max_trace_P": result.max_trace_P,
        "divergence_counts": result.divergence_counts,
        "alive_counts": result.alive_counts,
        "bound_dominates": result.bound_dominates,
        "warnings": result.warnings,
    }
    meta_path = directory / "experiment.json"
    meta_path.write_text(json.dumps(_jsonable(meta), sort_keys=True, indent=2) + "\n")
    written.append(meta_path)
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
