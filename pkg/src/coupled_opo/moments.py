"""Second moments of the output fields and joint-quadrature covariances.

The output of each cavity is measured by heterodyne detection against a
local oscillator halfway between signal and idler; the photocurrent at
analysis frequency delta is proportional to the joint quadrature

    Xj_m = (X_{m,1}^{delta*t_m + theta} + X_{m,2}^{-delta*t_m + theta}) / sqrt(2)

so a measurement-time offset t_m rotates the observed signal and idler
quadratures in opposite directions.  This module expands the output ladder
operators over the vacuum input and loss ports, contracts them into an 8x8
second-moment matrix, and projects that onto the 4x4 real covariance of the
two joint-quadrature pairs.

A time-domain stochastic integrator of the same equations of motion is
included as an independent cross-check of the frequency-domain route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SystemParams, TransferMatrices, validate_params

__all__ = [
    "MomentMatrix",
    "DetectionSettings",
    "QuadCovariance",
    "LangevinEstimate",
    "UnstableIntegrationError",
    "OUTPUT_BASIS",
    "output_moments",
    "quad_covariance",
    "check_physicality",
    "joint_quadrature_variances",
    "simulate_langevin",
]

# Fixed ordering of the 8 output ladder operators.
OUTPUT_BASIS = (
    "a_x1", "a_x1^dag", "a_x2", "a_x2^dag",
    "a_y1", "a_y1^dag", "a_y2", "a_y2^dag",
)

# Positions of the 4-vector [a_x1, a_x2^dag, a_y1, a_y2^dag] (the basis the
# transfer matrices act on) inside the 8-operator basis, and of the
# daggered partners of those four entries.
_ROW_PLAIN = (0, 3, 4, 7)
_ROW_DAG = (1, 2, 5, 6)

# Symplectic form of the two joint-quadrature pairs, normalized so that the
# vacuum covariance (identity) saturates CM + i*Omega >= 0.
OMEGA = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0, 0.0],
])


class UnstableIntegrationError(RuntimeError):
    """The stochastic integration diverged (step too large or R too high)."""


@dataclass(frozen=True)
class MomentMatrix:
    """8x8 complex matrix of <b_i b_j> over the vacuum ports.

    ``entries`` may carry leading batch dimensions (..., 8, 8).
    """

    entries: np.ndarray
    delta: float | np.ndarray
    basis: tuple = OUTPUT_BASIS


@dataclass(frozen=True)
class DetectionSettings:
    """Local-oscillator phase and measurement times of the two detectors.

    The delay tau = tau_x - tau_y enters the joint quadratures as opposite
    rotations +/- delta*t of the signal and idler quadratures.
    """

    theta: float = 0.0
    tau_x: float = 0.0
    tau_y: float = 0.0


@dataclass(frozen=True)
class QuadCovariance:
    """Real symmetric covariance of (Xj_x, Xj_x', Xj_y, Xj_y').

    The primed quadratures are at LO phase theta + pi/2.  Vacuum variance
    is 1 per joint quadrature.  ``entries`` may be batched (..., 4, 4).
    """

    entries: np.ndarray
    settings: DetectionSettings = field(default_factory=DetectionSettings)
    delta: float | np.ndarray = 0.0


def _moment_entries(t_in: np.ndarray, t_loss: np.ndarray) -> np.ndarray:
    """Contract the transfer matrices over vacuum inputs.

    Each output operator is a linear combination of the 16 port operators
    (8 input-port + 8 loss-port); daggered rows carry the element-wise
    conjugated coefficients.  The only non-vanishing vacuum contraction is
    <a a^dag> = 1 within a port, mode by mode.
    """
    shape = t_in.shape[:-2]
    s = np.zeros(shape + (8, 8), dtype=complex)
    for t in (t_in, t_loss):
        c = np.zeros(shape + (8, 8), dtype=complex)
        for r in range(4):
            c[..., _ROW_PLAIN[r], _ROW_PLAIN] = t[..., r, :]
            c[..., _ROW_DAG[r], _ROW_DAG] = np.conj(t[..., r, :])
        # <w_p w_q> = 1 only for (p, q) = (2m, 2m+1): pick those column pairs.
        s = s + c[..., 0::2] @ np.swapaxes(c[..., 1::2], -1, -2)
    return s


def output_moments(t: TransferMatrices, delta) -> MomentMatrix:
    """Second moments <b_i b_j> of the 8 output ladder operators."""
    return MomentMatrix(entries=_moment_entries(t.t_in, t.t_loss), delta=delta)


def _quad_projector(theta, tau_x, tau_y, delta) -> np.ndarray:
    """Coefficient rows expressing the 4 joint quadratures over the 8 ladder
    operators; broadcastable in (theta, tau_x, tau_y, delta)."""
    theta, tau_x, tau_y, delta = np.broadcast_arrays(theta, tau_x, tau_y, delta)
    shape = np.asarray(theta, dtype=float).shape
    u = np.zeros(shape + (4, 8), dtype=complex)
    for row, (tm, base) in enumerate([(tau_x, 0), (tau_x, 0), (tau_y, 4), (tau_y, 4)]):
        lo = np.asarray(theta, dtype=float) + (row % 2) * (math.pi / 2.0)
        p1 = np.asarray(delta * tm, dtype=float) + lo
        p2 = -np.asarray(delta * tm, dtype=float) + lo
        u[..., row, base + 0] = np.exp(-1j * p1)
        u[..., row, base + 1] = np.exp(1j * p1)
        u[..., row, base + 2] = np.exp(-1j * p2)
        u[..., row, base + 3] = np.exp(1j * p2)
    return u / math.sqrt(2.0)


def quad_covariance(m: MomentMatrix, d: DetectionSettings) -> QuadCovariance:
    """Symmetrized covariance matrix of the two joint-quadrature pairs."""
    u = _quad_projector(d.theta, d.tau_x, d.tau_y, m.delta)
    s_sym = (m.entries + np.swapaxes(m.entries, -1, -2)) / 2.0
    cm = np.real(np.einsum("...ip,...pq,...jq->...ij", u, s_sym, u))
    cm = (cm + np.swapaxes(cm, -1, -2)) / 2.0
    return QuadCovariance(entries=cm, settings=d, delta=m.delta)


def check_physicality(cm: QuadCovariance | np.ndarray) -> float | np.ndarray:
    """Smallest eigenvalue of CM + i*Omega; >= -1e-9 counts as physical."""
    entries = cm.entries if isinstance(cm, QuadCovariance) else np.asarray(cm)
    h = entries + 1j * OMEGA
    eig = np.linalg.eigvalsh(h)
    out = eig[..., 0].real
    return float(out) if out.ndim == 0 else out


# Labels for the variance combinations reported by the stochastic oracle:
# the four joint quadratures, then sum/difference EPR-type combinations
# (Xj_x +/- Xj_y)/sqrt(2) for both LO phases.
VARIANCE_LABELS = ("xq", "xp", "yq", "yp", "sum_q", "sum_p", "diff_q", "diff_p")

_COMBOS = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0), 0.0],
    [0.0, 1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)],
    [1.0 / math.sqrt(2.0), 0.0, -1.0 / math.sqrt(2.0), 0.0],
    [0.0, 1.0 / math.sqrt(2.0), 0.0, -1.0 / math.sqrt(2.0)],
])


def joint_quadrature_variances(cm: QuadCovariance) -> dict:
    """The eight scalar variances the stochastic oracle estimates, read off
    the covariance matrix (keys follow VARIANCE_LABELS)."""
    vals = np.einsum("ki,...ij,kj->...k", _COMBOS, cm.entries, _COMBOS)
    return {lab: vals[..., i] for i, lab in enumerate(VARIANCE_LABELS)}


@dataclass(frozen=True)
class LangevinEstimate:
    """Welch-averaged spectral variance estimates with standard errors.

    variances/stderr have shape (len(delta), 8), columns ordered per
    ``labels``; estimates at detuning delta[i] are taken at the nearest
    FFT bin, reported in ``delta`` (snapped values).
    """

    delta: np.ndarray
    variances: np.ndarray
    stderr: np.ndarray
    labels: tuple = VARIANCE_LABELS
    segments: int = 0
    step: float = 0.0


def _drift_matrix(p: SystemParams) -> np.ndarray:
    """Real 8x8 drift matrix for the fields stacked as
    [Re ax1, Im ax1, Re ax2, Im ax2, Re ay1, Im ay1, Re ay2, Im ay2]."""
    # Complex form: d/dt [ax1, ax2, ay1, ay2]:
    #   ax1' = px*conj(ax2) - ax1 - i g ay1, ax2' = px*conj(ax1) - ax2 - i g ay2
    # and x<->y.  conj() makes this R-linear only, hence the real embedding.
    px = p.r_x * np.exp(1j * p.k * p.phi_x)
    py = p.r_y * np.exp(1j * p.k * p.phi_y)
    a = np.zeros((8, 8))

    def put(i, j, z, conjugate):
        # field i gains z * a_j (or z * conj(a_j)) in the complex equation
        re, im = z.real, z.imag
        a[2 * i, 2 * j] += re
        a[2 * i + 1, 2 * j + 1] += -re if conjugate else re
        a[2 * i, 2 * j + 1] += im if conjugate else -im
        a[2 * i + 1, 2 * j] += im

    for i in range(4):
        put(i, i, complex(-1.0), False)
    put(0, 1, px, True)
    put(1, 0, px, True)
    put(2, 3, py, True)
    put(3, 2, py, True)
    for i, j in ((0, 2), (1, 3)):
        put(i, j, -1j * p.g, False)
        put(j, i, -1j * p.g, False)
    return a


def simulate_langevin(
    p: SystemParams,
    delta_grid,
    duration: float = 160.0,
    step: float = 0.02,
    seed: int = 0,
    theta: float = 0.0,
    tau_x: float = 0.0,
    tau_y: float = 0.0,
    segments: int = 128,
    burn_in: float = 20.0,
) -> LangevinEstimate:
    """Stochastic (Euler-Maruyama) cross-check of the output spectra.

    Integrates the four linear field equations driven by vacuum-level white
    noise on the input and loss ports, records the output fields, and
    returns Welch-averaged joint-quadrature variances at the detunings
    nearest to ``delta_grid``.  ``duration`` is the length of one Welch
    segment in units of the cavity lifetime; ``segments`` independent
    trajectories are integrated in parallel (reduction order is fixed, so
    results are bit-identical for a fixed seed).
    """
    validate_params(p)
    if step > 0.05:
        raise ValueError("integration step must be <= 0.05 cavity lifetimes")
    rng = np.random.default_rng(seed)
    n_steps = int(round(duration / step))
    n_burn = int(round(burn_in / step))
    drift = _drift_matrix(p)
    # Noise enters as -sqrt(2 eta) a_in + sqrt(2 (1-eta)) a_l; vacuum has
    # symmetrized variance 1/2 per complex field, i.e. 1/4 per real part
    # per unit bandwidth.
    amp_in = math.sqrt(2.0 * p.eta)
    amp_loss = math.sqrt(2.0 * (1.0 - p.eta))
    sqdt = math.sqrt(step)

    fields = np.zeros((segments, 8))
    out = np.empty((segments, n_steps, 8))
    divergence_bound = 1e6
    for n in range(n_burn + n_steps):
        dw_in = rng.standard_normal((segments, 8)) * (0.5 * sqdt)
        dw_loss = rng.standard_normal((segments, 8)) * (0.5 * sqdt)
        if n >= n_burn:
            # a_out = sqrt(2 eta) a + a_in, with a_in sampled as dW/dt
            out[:, n - n_burn, :] = amp_in * fields + dw_in / step
        fields = fields + step * fields @ drift.T - amp_in * dw_in + amp_loss * dw_loss
        if not np.all(np.abs(fields) < divergence_bound):
            raise UnstableIntegrationError(
                "unstable integration: field magnitude exceeded divergence bound"
            )

    # FFT of the four complex output fields per segment.
    cplx = out[..., 0::2] + 1j * out[..., 1::2]  # (segments, n_steps, 4)
    spec = np.fft.fft(cplx, axis=1) * step  # continuous-FT normalization
    freqs = 2.0 * math.pi * np.fft.fftfreq(n_steps, d=step)

    delta_grid = np.atleast_1d(np.asarray(delta_grid, dtype=float))
    snapped = np.empty_like(delta_grid)
    variances = np.empty((delta_grid.size, len(VARIANCE_LABELS)))
    stderr = np.empty_like(variances)
    t_span = n_steps * step
    for i, dv in enumerate(delta_grid):
        idx_p = int(np.argmin(np.abs(freqs - dv)))
        dv_s = freqs[idx_p]
        idx_m = int(np.argmin(np.abs(freqs + dv_s)))
        snapped[i] = dv_s
        # The frequency-domain route resolves fields against e^{+i delta t}
        # and pairs the signal at +delta with the idler at -delta; with the
        # FFT's e^{-i delta t} kernel the signal amplitudes therefore live
        # in the -delta bin and the idler amplitudes in the +delta bin.
        amp = np.empty((segments, 4), dtype=complex)
        amp[:, 0] = spec[:, idx_m, 0]  # ax1
        amp[:, 1] = spec[:, idx_p, 1]  # ax2
        amp[:, 2] = spec[:, idx_m, 2]  # ay1
        amp[:, 3] = spec[:, idx_p, 3]  # ay2
        # X^phi = a e^{-i phi} + a^dag e^{i phi} per mode
        quads = np.empty((segments, 4), dtype=complex)
        for row, (tm, m1, m2) in enumerate(
            [(tau_x, 0, 1), (tau_x, 0, 1), (tau_y, 2, 3), (tau_y, 2, 3)]
        ):
            lo = theta + (row % 2) * (math.pi / 2.0)
            p1 = dv_s * tm + lo
            p2 = -dv_s * tm + lo
            x1 = amp[:, m1] * np.exp(-1j * p1) + np.conj(amp[:, m1]) * np.exp(1j * p1)
            x2 = amp[:, m2] * np.exp(-1j * p2) + np.conj(amp[:, m2]) * np.exp(1j * p2)
            quads[:, row] = (x1 + x2) / math.sqrt(2.0)
        combos = quads @ _COMBOS.T  # (segments, 8)
        # Periodogram normalization: vacuum gives E|Xj(delta)|^2 = t_span.
        power = np.abs(combos) ** 2 / t_span
        variances[i] = power.mean(axis=0)
        stderr[i] = power.std(axis=0, ddof=1) / math.sqrt(segments)
    return LangevinEstimate(
        delta=snapped,
        variances=variances,
        stderr=stderr,
        segments=segments,
        step=step,
    )
