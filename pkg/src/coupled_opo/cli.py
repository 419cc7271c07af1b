"""Command-line interface: single evaluations, sweeps, presets, validation.

Configs are INI-style key=value documents parsed strictly (duplicate or
unknown keys are errors).  Sweeps emit a fixed-schema CSV plus a JSON
metadata sidecar; all floats are printed with a configurable number of
significant digits and every run is deterministic for a fixed seed.

Exit codes: 0 success, 1 validation-suite failure, 2 user/config error.
"""

from __future__ import annotations

import configparser
import io
import json
import math
import sys

import click
import numpy as np

from . import __version__
from .entanglement import (
    analytic_single_pump_I,
    classify_regime,
    inseparability,
    inseparability_batch,
)
from .explore import (
    PRESET_NAMES,
    Axis,
    SweepSpec,
    figure_preset,
    optimize_point,
    sweep,
)
from .model import (
    NearSingularError,
    ParameterError,
    SystemParams,
    derive_single_sided,
    validate_params,
)
from .moments import joint_quadrature_variances, simulate_langevin

CSV_COLUMNS = (
    "k", "R_x", "R_y", "dphi", "g", "eta", "delta", "theta", "tau",
    "I", "I_sum", "I_product", "n", "m", "c", "cprime", "nu_ppt",
    "regime", "physicality_margin", "error",
)

RUN_KEYS = {
    "k", "R_x", "R_y", "phi_x", "phi_y", "dphi", "g", "eta",
    "single_sided", "phase_convention", "delta", "theta", "tau",
    "seed", "precision", "out",
}
SWEEP_KEYS = {"axes", "optimize", "objective", "preset", "resolution"}


class ConfigError(Exception):
    pass


def _parse_axis_token(token: str) -> Axis:
    """Parse 'name=min:max:count' into an Axis."""
    try:
        name, rng = token.split("=", 1)
        lo, hi, count = rng.split(":")
        return Axis(name.strip(), float(lo), float(hi), int(count))
    except (ValueError, AttributeError):
        raise ConfigError(
            f"bad axis spec {token!r}; expected name=min:max:count"
        ) from None


def load_config(path: str) -> dict:
    """Strictly parse an INI config into {'run': {...}, 'sweep': {...}}."""
    cp = configparser.ConfigParser(strict=True, interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (R_x, not r_x)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    known_sections = {"run", "sweep"}
    for sec in cp.sections():
        if sec not in known_sections:
            raise ConfigError(f"unknown config section [{sec}]")
    out = {"run": {}, "sweep": {}}
    if cp.has_section("run"):
        for key, val in cp.items("run"):
            if key not in RUN_KEYS:
                raise ConfigError(f"unknown key {key!r} in [run]")
            out["run"][key] = val
    if cp.has_section("sweep"):
        for key, val in cp.items("sweep"):
            if key not in SWEEP_KEYS:
                raise ConfigError(f"unknown key {key!r} in [sweep]")
            out["sweep"][key] = val
    return out


def _auto_or_float(raw, default: float):
    if raw is None:
        return default, False
    if isinstance(raw, str) and raw.strip().lower() == "auto":
        return default, True
    return float(raw), False


def build_run(config_run: dict):
    """Build (SystemParams, detection dict, auto set) from a [run] mapping."""
    getf = lambda key, d: float(config_run.get(key, d))
    k = int(config_run.get("k", 1))
    phi_x = getf("phi_x", 0.0)
    if "dphi" in config_run and "phi_y" in config_run:
        raise ConfigError("give either dphi or phi_y, not both")
    phi_y = phi_x + getf("dphi", 0.0) if "dphi" in config_run else getf("phi_y", 0.0)
    p = SystemParams(
        k=k,
        r_x=getf("R_x", 0.0),
        r_y=getf("R_y", 0.0),
        phi_x=phi_x,
        phi_y=phi_y,
        g=getf("g", 0.0),
        eta=getf("eta", 1.0),
    )
    if str(config_run.get("single_sided", "")).strip().lower() in ("1", "true", "yes"):
        p = derive_single_sided(
            p, phase_convention=config_run.get("phase_convention", "amplitude")
        )
    p = validate_params(p)
    auto = set()
    detection = {}
    for key, default in (("delta", 0.0), ("theta", 0.0), ("tau", 0.0)):
        val, is_auto = _auto_or_float(config_run.get(key), default)
        detection[key] = val
        if is_auto:
            auto.add(key)
    return p, detection, auto


def _fmt(value, precision: int) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"%.{precision}g" % v


def rows_to_csv(rows, precision: int = 9) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c], precision) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def _result_row(p: SystemParams, res, regime: str = "") -> dict:
    return {
        "k": p.k,
        "R_x": p.r_x,
        "R_y": p.r_y,
        "dphi": p.dphi,
        "g": p.g,
        "eta": p.eta,
        "delta": res.delta,
        "theta": res.theta,
        "tau": res.tau,
        "I": res.I,
        "I_sum": res.I_sum,
        "I_product": res.I_product,
        "n": res.n,
        "m": res.m,
        "c": res.c,
        "cprime": res.cprime,
        "nu_ppt": res.nu_ppt,
        "regime": regime,
        "physicality_margin": res.physicality_margin,
        "error": "",
    }


def _write_output(text: str, metadata: dict, out: str):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        with open(out + ".meta.json", "w") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        click.echo(text, nl=False)


@click.group()
@click.version_option(__version__)
def main():
    """Entanglement of two coherently coupled below-threshold OPOs."""


_shared = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
    click.option("--out", default="", help="output file (default: stdout)"),
    click.option("--workers", default=1, show_default=True),
    click.option("--seed", default=1234, show_default=True),
    click.option("--precision", default=9, show_default=True,
                 help="significant digits for floats"),
    click.option("--axis", "axis_overrides", multiple=True,
                 help="axis override name=min:max:count"),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


def _load(config_path):
    if config_path is None:
        return {"run": {}, "sweep": {}}
    return load_config(config_path)


@main.command("eval")
@shared_options
def cmd_eval(config_path, out, workers, seed, precision, axis_overrides):
    """Evaluate the pipeline at a single parameter/detection point."""
    try:
        cfg = _load(config_path)
        p, detection, auto = build_run(cfg["run"])
        if auto - {"delta", "theta", "tau"}:
            raise ConfigError("auto is only allowed for delta, theta, tau")
        if auto:
            outcome = optimize_point(p, tuple(sorted(auto)), **detection)
            detection.update(outcome.argmin)
        res = inseparability(p, detection["delta"], detection["theta"], detection["tau"])
        regime = classify_regime(p, detection["delta"]).tag
    except (ConfigError, ParameterError, NearSingularError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    row = _result_row(p, res, regime)
    _write_output(rows_to_csv([row], precision), {"command": "eval"}, out)


@main.command("optimize")
@shared_options
@click.option("--over", default="theta,tau",
              help="comma list from delta,tau,theta", show_default=True)
def cmd_optimize(config_path, out, workers, seed, precision, axis_overrides, over):
    """Minimize I over detection/detuning coordinates at fixed parameters."""
    try:
        cfg = _load(config_path)
        p, detection, auto = build_run(cfg["run"])
        names = tuple(s.strip() for s in over.split(",") if s.strip())
        outcome = optimize_point(p, names, **detection)
        detection.update(outcome.argmin)
        res = inseparability(p, detection["delta"], detection["theta"], detection["tau"])
    except (ConfigError, ParameterError, NearSingularError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    row = _result_row(p, res)
    meta = {"command": "optimize", "on_bound": outcome.on_bound,
            "rounds": outcome.rounds}
    _write_output(rows_to_csv([row], precision), meta, out)
    if outcome.on_bound:
        click.echo("note: no interior minimum (argmin on a bound)", err=True)


def _apply_axis_overrides(spec: SweepSpec, overrides) -> SweepSpec:
    if not overrides:
        return spec
    new_axes = list(spec.axes)
    names = [ax.name for ax in new_axes]
    for token in overrides:
        ax = _parse_axis_token(token)
        if ax.name in names:
            new_axes[names.index(ax.name)] = ax
        else:
            new_axes.append(ax)
            names.append(ax.name)
    return SweepSpec(
        axes=tuple(new_axes),
        fixed=spec.fixed,
        delta=spec.delta,
        theta=spec.theta,
        tau=spec.tau,
        objective=spec.objective,
        optimize_over=spec.optimize_over,
        name=spec.name,
    )


def _sweep_from_config(cfg) -> SweepSpec:
    p, detection, auto = build_run(cfg["run"])
    sw = cfg["sweep"]
    if "preset" in sw:
        spec = figure_preset(sw["preset"], k=p.k,
                             resolution=int(sw.get("resolution", 101)))
    else:
        if "axes" not in sw:
            raise ConfigError("sweep config needs 'axes' or 'preset'")
        axes = tuple(
            _parse_axis_token(tok.strip())
            for tok in sw["axes"].split(",")
            if tok.strip()
        )
        optimize = tuple(
            s.strip() for s in sw.get("optimize", "").split(",") if s.strip()
        )
        objective = tuple(
            s.strip() for s in sw.get("objective", "I").split(",") if s.strip()
        ) or ("I",)
        spec = SweepSpec(
            axes=axes,
            fixed=p,
            delta=detection["delta"],
            theta=detection["theta"],
            tau=detection["tau"],
            objective=objective,
            optimize_over=optimize,
        )
    return spec


@main.command("sweep")
@shared_options
def cmd_sweep(config_path, out, workers, seed, precision, axis_overrides):
    """Run a grid sweep and emit CSV (+ JSON metadata sidecar)."""
    try:
        cfg = _load(config_path)
        spec = _apply_axis_overrides(_sweep_from_config(cfg), axis_overrides)
        result = sweep(spec, workers=workers)
    except (ConfigError, ParameterError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    _write_output(rows_to_csv(result.rows, precision), result.metadata, out)


@main.command("figure")
@click.argument("preset", type=click.Choice(PRESET_NAMES))
@shared_options
@click.option("-k", "order", default=2, show_default=True)
@click.option("--resolution", default=101, show_default=True)
def cmd_figure(preset, config_path, out, workers, seed, precision,
               axis_overrides, order, resolution):
    """Run a figure-reproduction preset sweep."""
    try:
        spec = figure_preset(preset, k=order, resolution=resolution)
        spec = _apply_axis_overrides(spec, axis_overrides)
        result = sweep(spec, workers=workers)
    except (ParameterError, ValueError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    _write_output(rows_to_csv(result.rows, precision), result.metadata, out)


def _suite_analytic(tol=1e-6):
    """Full pipeline vs the closed-form single-pump inseparability."""
    from .explore import _optimize_chunk

    rs = np.linspace(0.1, 0.9, 9)
    etas = np.array([0.8, 0.9, 0.99])
    deltas = np.linspace(0.2, 3.0, 15)
    r_g, eta_g, d_g = (a.ravel() for a in np.meshgrid(rs, etas, deltas, indexing="ij"))
    n = r_g.size
    values = {
        "delta": d_g,
        "theta": np.zeros(n),
        "tau": np.zeros(n),
        "R": r_g,  # single-sided at g = 1: R_y = g^k R_x = R_x
        "eta": eta_g,
        "dphi": np.full(n, math.pi / 2.0),
    }
    _, res, _, _ = _optimize_chunk(SystemParams(k=2, g=1.0), ("tau", "theta"), values)
    target = np.array(
        [analytic_single_pump_I(r, e, d) for r, e, d in zip(r_g, eta_g, d_g)]
    )
    worst = float(np.max(np.abs(res["I"] - target) / target))
    return worst <= tol, f"max relative error {worst:.3e} (tolerance {tol:g})"


def _random_points(rng, count):
    return dict(
        r_x=rng.uniform(0.0, 0.95, count),
        r_y=rng.uniform(0.0, 0.95, count),
        dphi=rng.uniform(0.0, 2.0 * math.pi, count),
        g=rng.uniform(0.0, 5.0, count),
        eta=rng.uniform(0.0, 1.0, count),
        delta=rng.uniform(-4.0, 4.0, count),
        theta=rng.uniform(0.0, math.pi, count),
        tau=rng.uniform(-4.0, 4.0, count),
    )


def _suite_ppt(seed, count=10000, band=1e-6):
    """Verdict agreement of I and the partial-transpose eigenvalue."""
    rng = np.random.default_rng(seed)
    pts = _random_points(rng, count)
    p = SystemParams(k=2)
    res = inseparability_batch(
        p, pts["delta"], pts["theta"], pts["tau"], r_x=pts["r_x"], r_y=pts["r_y"],
        g=pts["g"], eta=pts["eta"], dphi=pts["dphi"],
    )
    ok = ~res["error"]
    i_v, nu = res["I"][ok], res["nu_ppt"][ok]
    decided = (np.abs(i_v - 1.0) > band) & (np.abs(nu - 1.0) > band)
    agree = np.sign(i_v - 1.0)[decided] == np.sign(nu - 1.0)[decided]
    n_bad = int(np.sum(~agree))
    margin_ok = bool(np.all(res["physicality_margin"][ok] >= -1e-9))
    passed = n_bad == 0 and margin_ok
    return passed, (
        f"{int(decided.sum())} decided points, {n_bad} verdict disagreements, "
        f"min physicality margin {res['physicality_margin'][ok].min():.2e}"
    )


def _suite_langevin(seed):
    """Quick stochastic cross-check at the single-OPO squeezing point."""
    p = validate_params(SystemParams(k=2, r_x=0.9, r_y=0.0, g=0.0, eta=0.99))
    est = simulate_langevin(p, [0.0], duration=80.0, step=0.02, seed=seed,
                            theta=0.0, segments=96)
    from .model import build_system_matrix, transfer_matrices
    from .moments import DetectionSettings, output_moments, quad_covariance

    sm = build_system_matrix(p, est.delta[0])
    cm = quad_covariance(
        output_moments(transfer_matrices(sm, p.eta), est.delta[0]),
        DetectionSettings(theta=0.0),
    )
    expected = joint_quadrature_variances(cm)
    bad = []
    for j, lab in enumerate(est.labels):
        if lab in ("xp",):  # anti-squeezed: huge variance, skip in quick mode
            continue
        diff = abs(est.variances[0, j] - float(expected[lab]))
        if diff > 3.0 * est.stderr[0, j] + 1e-12:
            bad.append(f"{lab}: {est.variances[0, j]:.4g} vs {float(expected[lab]):.4g}")
    return not bad, ("all variances within 3 standard errors" if not bad
                     else "; ".join(bad))


def _suite_determinism(seed):
    spec = figure_preset("fig2-sync", resolution=7)
    csv1 = rows_to_csv(sweep(spec, workers=1).rows)
    csv2 = rows_to_csv(sweep(spec, workers=2).rows)
    same = csv1 == csv2
    return same, "worker counts 1 and 2 give byte-identical CSV" if same else "CSV mismatch"


@main.command("validate")
@shared_options
@click.option("--skip-langevin", is_flag=True, hidden=True)
@click.option("--break-tolerance", is_flag=True, hidden=True,
              help="test hook: corrupt the analytic-suite tolerance")
def cmd_validate(config_path, out, workers, seed, precision, axis_overrides,
                 skip_langevin, break_tolerance):
    """Run the desk-scale validation suites; exit 0 iff all pass."""
    suites = [
        ("analytic-oracle", lambda: _suite_analytic(tol=1e-30 if break_tolerance else 1e-6)),
        ("ppt-agreement", lambda: _suite_ppt(seed)),
        ("determinism", lambda: _suite_determinism(seed)),
    ]
    if not skip_langevin:
        suites.insert(2, ("langevin-oracle", lambda: _suite_langevin(seed)))
    click.echo(f"coupled-opo validate (seed {seed})")
    click.echo("calibration: single-sided phase convention = amplitude (dphi = pi/2); "
               "published inseparability form = sum")
    all_ok = True
    for name, fn in suites:
        ok, detail = fn()
        all_ok &= ok
        click.echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    sys.exit(0 if all_ok else 1)


if __name__ == "__main__":
    main()
