"""Parameter-space exploration: grids, per-point optimization, presets.

A sweep evaluates the inseparability pipeline on the Cartesian grid of its
axes; at every grid point an inner coordinate-descent optimization (coarse
grid followed by golden-section refinement, axis order delta -> tau ->
theta) can minimize I over any subset of {delta, tau, theta}.  Grid points
are batched through the vectorized pipeline in fixed-size chunks, so row
values are independent of the worker count and row order is always
row-major in the axis order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .entanglement import VERDICT_BAND, inseparability_batch
from .model import SystemParams, validate_params

__all__ = [
    "Axis",
    "SweepSpec",
    "SweepResult",
    "OptimizeOutcome",
    "sweep",
    "optimize_point",
    "figure_preset",
    "PRESET_NAMES",
]

AXIS_NAMES = ("delta", "g", "tau", "theta", "dphi", "R", "eta")
OPTIMIZABLE = ("delta", "tau", "theta")

# Fixed batch size: chunk boundaries must not depend on the worker count,
# otherwise float reductions could differ between runs.
CHUNK = 512

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
COARSE_POINTS = 64
MAX_ROUNDS = 8
DESCENT_TOL = 1e-10

# Default optimization bounds (tau is bounded through tau*delta when delta
# itself is being optimized).
DEFAULT_BOUNDS = {
    "delta": (0.0, 5.0),
    "theta": (0.0, math.pi),
    "tau_times_delta": (-math.pi, math.pi),
}


@dataclass(frozen=True)
class Axis:
    """One sweep axis: either a (lo, hi, count) linspace or explicit values."""

    name: str
    lo: float = 0.0
    hi: float = 0.0
    count: int = 1
    values: tuple = None

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.lo, self.hi, self.count)

    def __len__(self) -> int:
        return len(self.values) if self.values is not None else self.count


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of a sweep.

    axes          ordered sweep axes (row-major in the output)
    fixed         system parameters for everything not swept
    delta, theta, tau
                  detection defaults used when not swept or optimized
    objective     quantities recorded per row
    optimize_over subset of {delta, tau, theta} minimized per grid point
    """

    axes: tuple
    fixed: SystemParams
    delta: float = 0.0
    theta: float = 0.0
    tau: float = 0.0
    objective: tuple = ("I",)
    optimize_over: tuple = ()
    name: str = "custom"
    bounds: tuple = ()  # ((name, (lo, hi)), ...) overrides of DEFAULT_BOUNDS

    def validate(self) -> "SweepSpec":
        validate_params(self.fixed)
        seen = set()
        for ax in self.axes:
            if ax.name not in AXIS_NAMES:
                raise ValueError(f"unknown sweep axis {ax.name!r}")
            if ax.name in seen:
                raise ValueError(f"duplicate sweep axis {ax.name!r}")
            seen.add(ax.name)
            if len(ax) < 1:
                raise ValueError(f"axis {ax.name!r} needs at least one point")
            if ax.values is None and ax.lo > ax.hi:
                raise ValueError(f"axis {ax.name!r} has min > max")
        for name in self.optimize_over:
            if name not in OPTIMIZABLE:
                raise ValueError(f"cannot optimize over {name!r}")
            if name in seen:
                raise ValueError(f"{name!r} is both swept and optimized")
        return self


@dataclass(frozen=True)
class SweepResult:
    """Flat row-major sweep output plus reproducibility metadata."""

    rows: list
    metadata: dict


@dataclass(frozen=True)
class OptimizeOutcome:
    """Result of a per-point minimization of I."""

    argmin: dict
    i_min: float
    on_bound: bool
    rounds: int


def _eval_batch(p: SystemParams, values: dict, light: bool = False) -> dict:
    """One vectorized pipeline call from a name->array mapping."""
    return inseparability_batch(
        p,
        delta=values["delta"],
        theta=values["theta"],
        tau=values["tau"],
        r=values.get("R"),
        g=values.get("g"),
        eta=values.get("eta"),
        dphi=values.get("dphi"),
        light=light,
    )


def _golden_refine(fun, lo, hi, n_coarse=COARSE_POINTS, iters=42):
    """Vectorized coarse-grid + golden-section line minimization.

    ``fun`` maps an array of coordinates (one per batch point) to I values;
    ``lo``/``hi`` are per-point bounds.  Returns (x, f(x), on_bound).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n_pts = lo.shape[0]
    best_f = np.full(n_pts, np.inf)
    best_i = np.zeros(n_pts, dtype=int)
    fracs = np.linspace(0.0, 1.0, n_coarse)
    for i, fr in enumerate(fracs):
        f = fun(lo + fr * (hi - lo))
        f = np.where(np.isnan(f), np.inf, f)
        better = f < best_f
        best_f = np.where(better, f, best_f)
        best_i = np.where(better, i, best_i)
    on_bound = (best_i == 0) | (best_i == n_coarse - 1)
    step = (hi - lo) / (n_coarse - 1)
    a = lo + np.maximum(best_i - 1, 0) * step
    b = lo + np.minimum(best_i + 1, n_coarse - 1) * step
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1 = np.where(np.isnan(fv := fun(x1)), np.inf, fv)
    f2 = np.where(np.isnan(fv := fun(x2)), np.inf, fv)
    for _ in range(iters):
        pick1 = f1 <= f2
        b = np.where(pick1, x2, b)
        a = np.where(pick1, a, x1)
        x1n = np.where(pick1, b - GOLDEN * (b - a), x2)
        x2n = np.where(pick1, x1, a + GOLDEN * (b - a))
        newx = np.where(pick1, x1n, x2n)
        fnew = np.where(np.isnan(fv := fun(newx)), np.inf, fv)
        f1n = np.where(pick1, fnew, f2)
        f2n = np.where(pick1, f1, fnew)
        x1, x2, f1, f2 = x1n, x2n, f1n, f2n
    pick1 = f1 <= f2
    x = np.where(pick1, x1, x2)
    f = np.where(pick1, f1, f2)
    # deterministic tie-break against the coarse winner
    coarse_x = lo + best_i * step
    keep_coarse = best_f < f
    x = np.where(keep_coarse, coarse_x, x)
    f = np.where(keep_coarse, best_f, f)
    return x, f, on_bound


def _tau_bounds(over, delta_now, tau_bound):
    """Per-point tau search window: one period when delta is fixed, the
    user window in the detection phase s = delta*tau otherwise (the line
    search then runs in s directly; see _optimize_chunk)."""
    eps = 1e-9
    mag = np.maximum(np.abs(delta_now), eps)
    if "delta" in over:
        lo = np.full_like(mag, tau_bound[0])
        hi = np.full_like(mag, tau_bound[1])
    else:
        lo = np.zeros_like(mag)
        hi = 2.0 * math.pi / mag
    return lo, hi


def _optimize_chunk(p: SystemParams, over, values: dict, bounds=None, eval_fn=None):
    """Coordinate-descent minimization of I for a chunk of grid points.

    ``values`` maps every pipeline input name to a per-point array; entries
    named in ``over`` provide the starting values and are replaced by the
    argmins in the returned mapping.  ``eval_fn`` defaults to the physics
    pipeline and can be replaced by a surrogate objective in tests.
    """
    eval_fn = eval_fn or _eval_batch
    bounds = dict(bounds or {})
    d_bound = bounds.get("delta", DEFAULT_BOUNDS["delta"])
    t_bound = bounds.get("theta", DEFAULT_BOUNDS["theta"])
    tau_bound = bounds.get("tau_times_delta", DEFAULT_BOUNDS["tau_times_delta"])
    vals = {k: np.array(v, dtype=float, copy=True) for k, v in values.items()}
    n_pts = vals["delta"].shape[0]
    if not over:
        res = eval_fn(p, vals)
        return vals, res, np.zeros(n_pts, dtype=bool), 0

    # When delta and tau are both optimized, the tau coordinate is handled
    # as the detection phase s = delta*tau: the pipeline objective depends
    # on tau only through that product, so scanning delta at fixed s
    # (rather than fixed tau) decouples the two line searches exactly.
    # Injected surrogate objectives carry no such structure and get plain
    # coordinate descent.
    joint_tau = "delta" in over and "tau" in over and eval_fn is _eval_batch

    def safe_delta(d):
        return np.where(np.abs(d) < 1e-9, 1.0, d)

    def line(name, x):
        trial = dict(vals)
        if name == "delta" and joint_tau:
            s_cur = vals["tau"] * vals["delta"]
            trial["delta"] = x
            trial["tau"] = s_cur / safe_delta(x)
        elif name == "tau" and joint_tau:
            trial["tau"] = x / safe_delta(vals["delta"])
        else:
            trial[name] = x
        return eval_fn(p, trial, light=True)["I"]

    def axis_bounds(name):
        if name == "delta":
            return np.full(n_pts, d_bound[0]), np.full(n_pts, d_bound[1])
        if name == "theta":
            return np.full(n_pts, t_bound[0]), np.full(n_pts, t_bound[1])
        return _tau_bounds(over, vals["delta"], tau_bound)

    if joint_tau:
        # 2-D seed scan over (delta, s).  Near threshold the asynchronous
        # basin is invisible along either coordinate alone (at tau = 0 the
        # detuned resonance appears as a maximum of I), so coordinate
        # descent needs a joint starting point.
        dlo = np.full(n_pts, d_bound[0])
        dhi = np.full(n_pts, d_bound[1])
        best_f = np.full(n_pts, np.inf)
        best_d = np.array(vals["delta"], copy=True)
        best_s = vals["tau"] * vals["delta"]
        for s_fr in np.linspace(0.0, 1.0, 9):
            s_val = tau_bound[0] + s_fr * (tau_bound[1] - tau_bound[0])
            for d_fr in np.linspace(0.0, 1.0, COARSE_POINTS):
                d_val = dlo + d_fr * (dhi - dlo)
                trial = dict(vals)
                trial["delta"] = d_val
                trial["tau"] = s_val / safe_delta(d_val)
                f = eval_fn(p, trial, light=True)["I"]
                f = np.where(np.isnan(f), np.inf, f)
                better = f < best_f
                best_f = np.where(better, f, best_f)
                best_d = np.where(better, d_val, best_d)
                best_s = np.where(better, s_val, best_s)
        vals["delta"] = best_d
        vals["tau"] = best_s / safe_delta(best_d)

    on_bound = np.zeros(n_pts, dtype=bool)
    prev_best = np.full(n_pts, np.inf)
    best = prev_best
    rounds_used = 0
    for rnd in range(MAX_ROUNDS):
        rounds_used = rnd + 1
        on_bound[:] = False
        for name in ("delta", "tau", "theta"):
            if name not in over:
                continue
            glo, ghi = axis_bounds(name)
            if rnd == 0 or (rnd == 1 and joint_tau):
                # Joint (delta, tau) optimization gets a second full-width
                # round: the round-1 delta search ran before tau and theta
                # had sensible values and may have settled on the wrong
                # branch of the landscape.
                lo, hi, n_coarse = glo, ghi, COARSE_POINTS
            else:
                # later rounds only re-bracket around the current argmin,
                # one coarse step to either side
                if name == "tau" and joint_tau:
                    cur = vals["tau"] * vals["delta"]
                else:
                    cur = vals[name]
                step = (ghi - glo) / (COARSE_POINTS - 1)
                lo = np.clip(cur - step, glo, ghi)
                hi = np.clip(cur + step, glo, ghi)
                n_coarse = 5
            x, f, _ = _golden_refine(lambda xx: line(name, xx), lo, hi,
                                     n_coarse=n_coarse)
            if name == "delta" and joint_tau:
                # keep the detection phase fixed across the delta update
                s_cur = vals["tau"] * vals["delta"]
                vals["delta"] = x
                vals["tau"] = s_cur / safe_delta(x)
            elif name == "tau":
                if joint_tau:
                    x_tau = x / safe_delta(vals["delta"])
                else:
                    x_tau = x
                # a delay is meaningless on resonance
                delta_undefined = np.abs(vals["delta"]) < 1e-12
                vals["tau"] = np.where(delta_undefined, 0.0, x_tau)
            else:
                vals[name] = x
            best = f
            eps = 1e-9 + 1e-9 * np.abs(ghi - glo)
            on_bound |= (np.abs(x - glo) < eps) | (np.abs(x - ghi) < eps)
        if np.all(np.abs(prev_best - best) < DESCENT_TOL):
            prev_best = best
            break
        prev_best = best
    res = eval_fn(p, vals)
    return vals, res, on_bound, rounds_used


def optimize_point(
    p: SystemParams,
    over,
    bounds=None,
    delta: float = 0.0,
    theta: float = 0.0,
    tau: float = 0.0,
    objective=None,
) -> OptimizeOutcome:
    """Minimize I over a subset of {delta, tau, theta} at fixed parameters.

    ``objective`` may be a callable mapping coordinate arrays (delta,
    theta, tau) to objective values; it replaces the physics pipeline
    (used by tests with closed-form surrogates).
    """
    validate_params(p)
    for name in over:
        if name not in OPTIMIZABLE:
            raise ValueError(f"cannot optimize over {name!r}")
    values = {
        "delta": np.array([delta], dtype=float),
        "theta": np.array([theta], dtype=float),
        "tau": np.array([tau], dtype=float),
    }
    eval_fn = None
    if objective is not None:
        def eval_fn(_p, vals, light=False):
            return {
                "I": np.asarray(objective(vals["delta"], vals["theta"], vals["tau"])),
                "error": np.zeros_like(vals["delta"], dtype=bool),
            }

    vals, res, on_bound, rounds = _optimize_chunk(
        p, tuple(over), values, bounds, eval_fn=eval_fn
    )
    argmin = {name: float(vals[name][0]) for name in over}
    return OptimizeOutcome(
        argmin=argmin,
        i_min=float(res["I"][0]),
        on_bound=bool(on_bound[0]),
        rounds=rounds,
    )


def _classify_chunk(p: SystemParams, values: dict):
    """Vectorized sync/async regime tags for a chunk of grid points."""
    n_pts = values["delta"].shape[0]
    lo = np.zeros(n_pts)
    hi = np.full(n_pts, math.pi)

    def line_theta(tau_arr):
        def fun(th):
            trial = dict(values)
            trial["theta"] = th
            trial["tau"] = tau_arr
            return _eval_batch(p, trial, light=True)["I"]

        return _golden_refine(fun, lo, hi)[1]

    i_sync = line_theta(np.zeros(n_pts))
    delta_now = values["delta"]
    undefined = np.abs(delta_now) < 1e-12
    safe_delta = np.where(undefined, 1.0, delta_now)
    i_async = line_theta(math.pi / (2.0 * safe_delta))
    i_async = np.where(undefined, np.nan, i_async)
    tags = []
    for s, a, u in zip(i_sync, i_async, undefined):
        is_sync = s < 1.0 - VERDICT_BAND
        is_async = (not u) and not np.isnan(a) and a < 1.0 - VERDICT_BAND
        tags.append(
            {
                (False, False): "none",
                (True, False): "sync",
                (False, True): "async",
                (True, True): "both",
            }[(bool(is_sync), bool(is_async))]
        )
    return tags, undefined


def _chunk_rows(args):
    """Evaluate one chunk of flattened grid points; used by worker pools."""
    spec, start, stop = args
    p = spec.fixed
    grids = [ax.grid() for ax in spec.axes]
    shape = tuple(len(g) for g in grids)
    idx = np.unravel_index(np.arange(start, stop), shape) if shape else ()
    n_pts = stop - start

    values = {
        "delta": np.full(n_pts, spec.delta, dtype=float),
        "theta": np.full(n_pts, spec.theta, dtype=float),
        "tau": np.full(n_pts, spec.tau, dtype=float),
    }
    for a_i, (ax, ix) in enumerate(zip(spec.axes, idx)):
        values[ax.name] = grids[a_i][ix].astype(float)

    vals, res, on_bound, _ = _optimize_chunk(
        p, spec.optimize_over, values, bounds=dict(spec.bounds)
    )
    want_regime = "regime" in spec.objective
    if want_regime:
        tags, undefined = _classify_chunk(p, vals)
    rows = []
    r_col = vals.get("R")
    dphi_col = vals.get("dphi")
    for j in range(n_pts):
        rx = float(r_col[j]) if r_col is not None else p.r_x
        ry = float(r_col[j]) if r_col is not None else p.r_y
        dphi = float(dphi_col[j]) if dphi_col is not None else p.dphi
        err = ""
        if bool(res["error"][j]):
            err = "near-singular"
        elif bool(res["degenerate"][j]):
            err = "degenerate"
        row = {
            "k": p.k,
            "R_x": rx,
            "R_y": ry,
            "dphi": dphi,
            "g": float(vals["g"][j]) if "g" in vals else p.g,
            "eta": float(vals["eta"][j]) if "eta" in vals else p.eta,
            "delta": float(vals["delta"][j]),
            "theta": float(vals["theta"][j]),
            "tau": float(vals["tau"][j]),
            "I": float(res["I"][j]),
            "I_sum": float(res["I_sum"][j]),
            "I_product": float(res["I_product"][j]),
            "n": float(res["n"][j]),
            "m": float(res["m"][j]),
            "c": float(res["c"][j]),
            "cprime": float(res["cprime"][j]),
            "nu_ppt": float(res["nu_ppt"][j]),
            "regime": tags[j] if want_regime else "",
            "physicality_margin": float(res["physicality_margin"][j]),
            "error": err,
        }
        rows.append(row)
    return start, rows


def sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate the pipeline over the full grid of ``spec``.

    Per-row failures (near-singular points) are recorded in the row's
    ``error`` field.  Output is row-major in axis order and byte-for-byte
    independent of ``workers``.
    """
    spec.validate()
    total = 1
    for ax in spec.axes:
        total *= len(ax)
    chunks = [(spec, s, min(s + CHUNK, total)) for s in range(0, total, CHUNK)]
    results = {}
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, rows in pool.map(_chunk_rows, chunks):
                results[start] = rows
    else:
        for args in chunks:
            start, rows = _chunk_rows(args)
            results[start] = rows
    all_rows = []
    for start in sorted(results):
        all_rows.extend(results[start])
    metadata = {
        "name": spec.name,
        "axes": [
            {
                "name": ax.name,
                "count": len(ax),
                **(
                    {"values": list(map(float, ax.grid()))}
                    if ax.values is not None
                    else {"min": ax.lo, "max": ax.hi}
                ),
            }
            for ax in spec.axes
        ],
        "fixed": {
            "k": spec.fixed.k,
            "R_x": spec.fixed.r_x,
            "R_y": spec.fixed.r_y,
            "phi_x": spec.fixed.phi_x,
            "phi_y": spec.fixed.phi_y,
            "g": spec.fixed.g,
            "eta": spec.fixed.eta,
        },
        "detection_defaults": {
            "delta": spec.delta,
            "theta": spec.theta,
            "tau": spec.tau,
        },
        "optimize_over": list(spec.optimize_over),
        "descent_order": ["delta", "tau", "theta"],
        "objective": list(spec.objective),
        "inseparability_form": "sum",
        "single_sided_phase_convention": "amplitude (dphi = pi/2)",
        "version": __version__,
        "rows": total,
    }
    return SweepResult(rows=all_rows, metadata=metadata)


PRESET_NAMES = (
    "fig2-sync",
    "fig2-async",
    "fig3-tau",
    "fig3-R-eta",
    "fig3-R-eta-sync",
    "fig3-R-eta-async",
    "fig4-polar",
)

# Illustrative coupling-rate set for the delay curves.
FIG3_G_VALUES = (0.25, 0.5, 1.0, 2.0, 5.0)


def figure_preset(name: str, k: int = 2, resolution: int = 101) -> SweepSpec:
    """Sweep spec reproducing one of the reference figure geometries."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    base = SystemParams(k=k, r_x=0.9, r_y=0.9, eta=0.99, g=1.0)
    if name == "fig2-sync":
        return SweepSpec(
            axes=(Axis("delta", 0.0, 5.0, resolution), Axis("g", 0.0, 5.0, resolution)),
            fixed=base,
            tau=0.0,
            optimize_over=("theta",),
            name=name,
        )
    if name == "fig2-async":
        return SweepSpec(
            axes=(Axis("delta", 0.0, 5.0, resolution), Axis("g", 0.0, 5.0, resolution)),
            fixed=replace(base, phi_y=math.pi / k),
            optimize_over=("tau", "theta"),
            name=name,
        )
    if name == "fig3-tau":
        return SweepSpec(
            axes=(
                Axis("tau", -math.pi, math.pi, resolution),
                Axis("g", values=FIG3_G_VALUES),
            ),
            fixed=base,
            optimize_over=("delta", "theta"),
            name=name,
        )
    if name in ("fig3-R-eta", "fig3-R-eta-async"):
        return SweepSpec(
            axes=(Axis("R", 0.0, 0.99, resolution), Axis("eta", 0.0, 1.0, resolution)),
            fixed=replace(base, g=10.0, phi_y=math.pi / k),
            optimize_over=("delta", "tau", "theta"),
            # the asynchronous optimum sits near delta = g, well outside
            # the default detuning window
            bounds=(("delta", (0.0, 15.0)),),
            name="fig3-R-eta-async",
        )
    if name == "fig3-R-eta-sync":
        return SweepSpec(
            axes=(Axis("R", 0.0, 0.99, resolution), Axis("eta", 0.0, 1.0, resolution)),
            fixed=replace(base, g=0.5),
            tau=0.0,
            optimize_over=("delta", "theta"),
            name=name,
        )
    # fig4-polar
    azimuthal = tuple(np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False))
    return SweepSpec(
        axes=(Axis("R", 0.0, 0.99, resolution), Axis("dphi", values=azimuthal)),
        fixed=base,
        optimize_over=("delta", "tau", "theta"),
        name="fig4-polar",
    )
