"""Batch front-end: certificate reports, Monte Carlo runs, and a property suite.

Exit codes: 0 success, 1 malformed config or flags, 2 certificate or
validation failure, 3 runtime divergence. All stochastic output is fully
determined by ``--seed``; ``--workers`` never changes results.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import CertificateError, ConfigError, ExperimentDivergenceError
from .filters import make_filter_config
from .functionals import check_assumption_continuous, check_assumption_discrete, mean_functional
from .harness import ExperimentSpec, concentration_check, export_result, preset_spec, run_experiment
from .matrix_measures import log_norm_mu, log_norm_nu, spectral_norm
from .models import builtin_contractive3d, builtin_integrated_velocity, velocity_log_lipschitz
from .quadrature import check_degree_two_exactness, gauss_hermite_rule, unscented_rule
from .stability import (
    chi_square_moment_bound,
    contractive_certificate,
    gronwall_continuous,
    integrated_velocity_certificate,
)

_CONFIG_KEYS = {
    "model", "model_params", "filter", "filters", "preset", "trajectories",
    "dt", "horizon", "seed", "workers", "out", "deltas", "checkpoint_every",
    "average_from", "domination_from", "certificate",
}


def _load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return raw


def _merged_options(args):
    """Config file first, then command-line flags override field by field."""
    opts = _load_config(args.config) if args.config else {}
    if "filter" in opts:
        opts["filters"] = [opts.pop("filter")]
    flag_map = {
        "model": args.model,
        "preset": args.preset,
        "trajectories": args.trajectories,
        "dt": args.dt,
        "horizon": args.horizon,
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
    }
    if getattr(args, "filter", None):
        flag_map["filters"] = list(args.filter)
    for key, value in flag_map.items():
        if value is not None:
            opts[key] = value
    return opts


def _spec_from_options(opts):
    out = opts.pop("out", None)
    preset = opts.pop("preset", None)
    if "filters" in opts:
        opts["filters"] = tuple(opts["filters"])
    try:
        spec = preset_spec(preset, **opts) if preset else ExperimentSpec(**opts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec, out


def cmd_certify(args):
    opts = _merged_options(args)
    out = opts.pop("out", None)
    preset = opts.pop("preset", None)
    model_name = opts.pop("model", None)
    kinds = opts.pop("filters", ["ekf"])
    kind = kinds[0]
    params = opts.pop("model_params", {})
    if model_name is None:
        model_name = "integrated_velocity" if preset == "fig2" else "contractive3d"
    # --preset paper pins the benchmark parameters, which are the defaults.
    try:
        if model_name == "contractive3d":
            model = builtin_contractive3d()
        elif model_name == "integrated_velocity":
            model = builtin_integrated_velocity(**params)
        else:
            raise ConfigError(
                f"certify supports contractive3d and integrated_velocity, not {model_name!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    config = make_filter_config(kind, model)
    try:
        if model.name == "integrated_velocity":
            cert = integrated_velocity_certificate(model, config, kind=kind)
        else:
            cert = contractive_certificate(model, config, kind)
    except CertificateError as exc:
        print(f"certificate unavailable: failed hypothesis: {exc.hypothesis}")
        print(f"  {exc}")
        return 2
    print(f"certificate for model={model.name} filter={kind}")
    print(cert.format_text())
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "certificate.json").write_text(cert.to_json() + "\n")
        print(f"wrote {path / 'certificate.json'}")
    return 0


def cmd_simulate(args):
    opts = _merged_options(args)
    spec, out = _spec_from_options(opts)
    try:
        result = run_experiment(spec)
    except ExperimentDivergenceError as exc:
        print(f"divergence: {exc}")
        return 3
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    for kind in spec.filters:
        avg = result.time_averaged_mse[kind]
        dom = result.bound_dominates[kind]
        verdict = "no certificate" if dom is None else ("bound holds" if dom else "BOUND VIOLATED")
        print(f"{kind}: time-averaged MSE = {avg:.6g} ({verdict}, "
              f"diverged {result.divergence_counts[kind]}/{spec.trajectories})")
    for warning in result.warnings:
        print(f"warning: {warning}")
    if out:
        for path in export_result(result, out):
            print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# Validation suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _check(name, passed, detail=""):
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def _exactness_checks(rules):
    out = []
    for label, rule in rules:
        report = check_degree_two_exactness(rule, tol=1e-9)
        detail = (f"residuals: weights {report.weight_sum_residual:.2e}, "
                  f"mean {report.mean_residual:.2e}, cov {report.covariance_residual:.2e}")
        out.append(_check(f"exactness[{label}]", report.passed, detail))
    return out


def _matrix_inequality_checks(seed, count=10000, dim=4):
    gen = np.random.Generator(np.random.Philox(key=[seed, 10]))
    A = gen.standard_normal((count, dim, dim))
    B = gen.standard_normal((count, dim, dim))
    x = gen.standard_normal((count, dim))
    muA, muB, muAB = log_norm_mu(A), log_norm_mu(B), log_norm_mu(A + B)
    nuA, nuB, nuAB = log_norm_nu(A), log_norm_nu(B), log_norm_nu(A + B)
    tol = 1e-9
    sub = np.all(muAB <= muA + muB + tol) and np.all(nuAB >= nuA + nuB - tol)
    quad = np.einsum("bi,bij,bj->b", x, A, x)
    nrm2 = np.einsum("bi,bi->b", x, x)
    sandwich = np.all(quad <= muA * nrm2 + tol * np.maximum(1, nrm2)) and np.all(
        quad >= nuA * nrm2 - tol * np.maximum(1, nrm2))
    Bpsd = B @ np.swapaxes(B, 1, 2)
    trB = np.einsum("bii->b", Bpsd)
    trAB = np.einsum("bij,bji->b", A, Bpsd)
    trace_ok = np.all(trAB <= muA * trB + 1e-7 * np.maximum(1, np.abs(muA * trB))) and np.all(
        trAB >= nuA * trB - 1e-7 * np.maximum(1, np.abs(nuA * trB)))
    mu_vs_norm = np.all(muA <= np.linalg.svd(A, compute_uv=False)[:, 0] + tol)
    return [
        _check("lognorm.subadditivity", sub, f"{count} random pairs"),
        _check("lognorm.quadratic_sandwich", sandwich, f"{count} random (A, x)"),
        _check("lognorm.trace_inequality", trace_ok, f"{count} random (A, B>=0)"),
        _check("lognorm.mu_below_spectral", mu_vs_norm, f"{count} random matrices"),
    ]


def _assumption_checks(seed, samples):
    out = []
    c3 = builtin_contractive3d()
    iv = builtin_integrated_velocity()
    m_iv, n_iv = velocity_log_lipschitz(iv)
    drifts = [
        ("contractive3d", c3.f, c3.jac_f, 3, c3.known_M_f, c3.known_N_f),
        ("integrated_velocity", iv.f, iv.jac_f, 2, m_iv, n_iv),
    ]
    for name, f, jac, dim, m_g, n_g in drifts:
        variants = [
            ("ekf", mean_functional("ekf")),
            ("ut", mean_functional("sigma", rule=unscented_rule(dim))),
            ("gh3", mean_functional("sigma", rule=gauss_hermite_rule(dim, 3))),
        ]
        jf = float(np.max(spectral_norm(jac(np.random.Generator(
            np.random.Philox(key=[seed, 11])).uniform(-6, 6, size=(4096, dim))))))
        for label, F in variants:
            rep = check_assumption_continuous(F, f, m_g, n_g, samples=samples, seed=seed, dim=dim)
            out.append(_check(
                f"assumption.cont[{name},{label}]", rep.passed,
                f"worst violation {rep.worst_violation:.3e} with C_g={rep.c_g_used:.4g}"))
            repd = check_assumption_discrete(F, f, jf, samples=samples, seed=seed + 1, dim=dim)
            out.append(_check(
                f"assumption.disc[{name},{label}]", repd.passed,
                f"worst violation {repd.worst_violation:.3e} with C_g={repd.c_g_used:.4g}"))
    return out


def _gronwall_check(seed, count=100):
    gen = np.random.Generator(np.random.Philox(key=[seed, 12]))
    ok = True
    worst = -np.inf
    for _ in range(count):
        alpha = -gen.uniform(0.1, 3.0)
        beta_c = gen.uniform(0.0, 2.0)
        x0 = gen.uniform(0.0, 5.0)
        dt, n = 1e-3, 2000
        x = x0
        for k in range(1, n + 1):
            x = x + dt * (alpha * x + beta_c)
            env = gronwall_continuous(x0, alpha, beta_c, k * dt)
            gap = x - env
            worst = max(worst, gap)
            if gap > 10 * dt:
                ok = False
    return [_check("gronwall.euler_domination", ok, f"worst overshoot {worst:.2e}")]


def _moment_bound_check(seed, draws=10**6, dim=3):
    gen = np.random.Generator(np.random.Philox(key=[seed, 13]))
    m = np.array([0.5, -1.0, 0.25])[:dim]
    A = gen.standard_normal((dim, dim))
    P = A @ A.T / dim
    X = m + gen.standard_normal((draws, dim)) @ np.linalg.cholesky(P).T
    nrm2 = np.einsum("bi,bi->b", X, X)
    ok, details = True, []
    for n in (1, 2, 3):
        emp = float(np.mean(nrm2**n)) ** (1.0 / n)
        bnd = chi_square_moment_bound(m, P, n)
        ok &= emp <= bnd
        details.append(f"n={n}: {emp:.3g} <= {bnd:.3g}")
    X0 = gen.standard_normal((draws, dim))
    nrm2 = np.einsum("bi,bi->b", X0, X0)
    for n in (1, 2, 3):
        emp = float(np.mean(nrm2**n)) ** (1.0 / n)
        bnd = chi_square_moment_bound(0, np.eye(dim), n)
        ok &= emp <= bnd
        details.append(f"zero-mean n={n}: {emp:.3g} <= {bnd:.3g}")
    return [_check("gaussian.moment_bound", ok, "; ".join(details))]


def validation_suite(seed=0, samples=10000, rules=None, preset=None, moment_draws=10**6,
                     preset_overrides=None):
    """Assemble and run the full property suite; returns CheckResults.

    ``rules`` replaces the default exactness battery (used to inject
    deliberately corrupted rules). With ``preset`` set, the corresponding
    Monte Carlo experiment runs end-to-end and its concentration table
    (mid-horizon and final checkpoints over the experiment's delta grid) is
    appended to the checks; ``preset_overrides`` shrinks the run for smoke
    testing.
    """
    if rules is None:
        rules = [(f"ut_d{d}", unscented_rule(d)) for d in (1, 2, 3, 5)]
        rules += [("gh_1x5", gauss_hermite_rule(1, 5)), ("gh_2x4", gauss_hermite_rule(2, 4)),
                  ("gh_3x3", gauss_hermite_rule(3, 3))]
    checks = _exactness_checks(rules)
    checks += _matrix_inequality_checks(seed, count=10000)
    checks += _assumption_checks(seed, samples)
    checks += _gronwall_check(seed)
    checks += _moment_bound_check(seed, draws=moment_draws)
    if preset:
        spec = preset_spec(preset, **(preset_overrides or {}))
        result = run_experiment(spec)
        for kind in spec.filters:
            cert = result.certificates[kind]
            if cert is None:
                checks.append(_check(f"concentration[{preset},{kind}]", False, "no certificate"))
                continue
            cp = result.checkpoint_times
            t_list = sorted({float(cp[len(cp) // 2]), float(cp[-1])})
            rows = concentration_check(result, cert, t_list, list(spec.deltas), kind=kind)
            ok = all(r["passed"] for r in rows)
            worst = max(r["frequency"] - r["limit"] for r in rows)
            checks.append(_check(
                f"concentration[{preset},{kind}]", ok,
                f"worst frequency excess {worst:+.4f} over {len(rows)} cells"))
    return checks


def cmd_validate(args):
    opts = _merged_options(args)
    preset = opts.pop("preset", None)
    seed = opts.pop("seed", 0)
    checks = validation_suite(seed=seed, preset=preset)
    report = {"checks": [c.to_dict() for c in checks], "all_pass": all(c.passed for c in checks)}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["all_pass"] else 2


def build_parser():
    parser = argparse.ArgumentParser(prog="kbstab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kbstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--model", help="model name: contractive3d | integrated_velocity | linear")
        p.add_argument("--filter", action="append", choices=("ekf", "ukf", "adf", "gh"),
                       help="filter kind (repeatable)")
        p.add_argument("--preset", choices=("fig1", "fig2", "paper"),
                       help="pinned benchmark preset")
        p.add_argument("--trajectories", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="output directory")

    p_cert = sub.add_parser("certify", help="construct and print a stability certificate")
    add_common(p_cert)
    p_cert.set_defaults(func=cmd_certify)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo experiment and export results")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="run the property suite")
    add_common(p_val)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
