"""Dimensionless model of two coherently coupled below-threshold OPOs.

Each cavity hosts a parametric down-conversion process in which k pump
photons convert into a signal/idler pair; the two cavities exchange photons
at a coherent rate g.  Everything here is expressed in units of the total
cavity decay rate: pump strengths R_x, R_y (R = 1 is the oscillation
threshold), detuning delta, coupling g, and escape efficiency eta.

The frequency-domain dynamics are encoded in a 4x4 complex system matrix
acting on the mode vector [a_x1, a_x2^dag, a_y1, a_y2^dag]; inverting it
yields the input and loss transfer matrices that map vacuum inputs to the
output fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SystemParams",
    "SystemMatrix",
    "TransferMatrices",
    "ParameterError",
    "NearSingularError",
    "validate_params",
    "build_system_matrix",
    "transfer_matrices",
    "derive_single_sided",
    "SINGULARITY_TOL",
]

# |det M| below this signals operation at an effective threshold where the
# intracavity field formally diverges; inversion results would be garbage.
SINGULARITY_TOL = 1e-10


class ParameterError(ValueError):
    """A system parameter is outside its physical domain."""


class NearSingularError(RuntimeError):
    """The system matrix is (numerically) singular: effective threshold."""


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless configuration of the coupled-OPO pair.

    k        order parameter: the nonlinearity is chi^(k+1), i.e. k pump
             photons are consumed per signal/idler pair
    r_x, r_y pump strength of each cavity, in [0, 1); 1 is threshold
    phi_x, phi_y
             pump phases in radians; only k*phi and dphi = phi_y - phi_x
             ever enter the dynamics
    g        coherent inter-cavity coupling rate, >= 0
    eta      cavity escape efficiency, in [0, 1]
    """

    k: int = 1
    r_x: float = 0.0
    r_y: float = 0.0
    phi_x: float = 0.0
    phi_y: float = 0.0
    g: float = 0.0
    eta: float = 1.0
    single_sided: bool = False

    @property
    def dphi(self) -> float:
        return self.phi_y - self.phi_x


@dataclass(frozen=True)
class SystemMatrix:
    """The 4x4 frequency-domain system matrix at detuning delta.

    ``entries`` may carry leading batch dimensions (..., 4, 4) when built
    from an array of detunings.
    """

    delta: float | np.ndarray
    entries: np.ndarray


@dataclass(frozen=True)
class TransferMatrices:
    """Input and loss transfer matrices of the output-field solution.

    t_in  = I4 + 2*eta*M^-1   (acts on the input-port vacuum)
    t_loss = 2*sqrt(eta*(1-eta))*M^-1   (acts on the loss-port vacuum)
    """

    t_in: np.ndarray
    t_loss: np.ndarray
    eta: float


def validate_params(p: SystemParams) -> SystemParams:
    """Check all domain invariants; return ``p`` unchanged if they hold."""
    if int(p.k) != p.k or p.k < 1:
        raise ParameterError(f"order parameter k must be a positive integer, got {p.k}")
    for name, r in (("R_x", p.r_x), ("R_y", p.r_y)):
        if not 0.0 <= r < 1.0:
            raise ParameterError(
                f"{name} = {r} is at/above threshold or negative (need 0 <= R < 1)"
            )
    if not 0.0 <= p.eta <= 1.0:
        raise ParameterError(f"escape efficiency out of range: eta = {p.eta}")
    if p.g < 0.0:
        raise ParameterError(f"coupling rate must be non-negative, got g = {p.g}")
    for name, val in (("phi_x", p.phi_x), ("phi_y", p.phi_y)):
        if not math.isfinite(val):
            raise ParameterError(f"{name} must be finite")
    return p


def _system_matrix_entries(k, r_x, r_y, phi_x, phi_y, g, delta):
    """Batched construction of the 4x4 system matrix.

    All arguments broadcast against each other; the result has shape
    ``broadcast_shape + (4, 4)``.

    The rows of the daggered operators (2 and 4) carry the conjugated pump
    phase e^{-ik phi}, as obtained by Hermitian conjugation of the idler
    equation of motion; this keeps the x and y blocks structurally
    identical under relabeling.
    """
    k, r_x, r_y, phi_x, phi_y, g, delta = np.broadcast_arrays(
        k, r_x, r_y, phi_x, phi_y, g, delta
    )
    shape = delta.shape
    m = np.zeros(shape + (4, 4), dtype=complex)
    diag = 1j * np.asarray(delta, dtype=float) - 1.0
    px = np.asarray(r_x, dtype=float) * np.exp(1j * np.asarray(k * phi_x, dtype=float))
    py = np.asarray(r_y, dtype=float) * np.exp(1j * np.asarray(k * phi_y, dtype=float))
    ig = 1j * np.asarray(g, dtype=float)
    for i in range(4):
        m[..., i, i] = diag
    m[..., 0, 1] = px
    m[..., 1, 0] = np.conj(px)
    m[..., 2, 3] = py
    m[..., 3, 2] = np.conj(py)
    m[..., 0, 2] = -ig
    m[..., 2, 0] = -ig
    m[..., 1, 3] = ig
    m[..., 3, 1] = ig
    return m


def build_system_matrix(p: SystemParams, delta) -> SystemMatrix:
    """System matrix of the coupled pair at detuning ``delta``.

    ``delta`` may be a scalar or an array; an array produces a stacked
    (..., 4, 4) result.
    """
    entries = _system_matrix_entries(
        p.k, p.r_x, p.r_y, p.phi_x, p.phi_y, p.g, np.asarray(delta, dtype=float)
    )
    return SystemMatrix(delta=delta, entries=entries)


def transfer_matrices(m: SystemMatrix, eta: float) -> TransferMatrices:
    """Invert the system matrix into input/loss transfer matrices.

    Raises NearSingularError when |det M| falls below SINGULARITY_TOL
    anywhere in the batch.
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"escape efficiency out of range: eta = {eta}")
    det = np.linalg.det(m.entries)
    if np.any(np.abs(det) < SINGULARITY_TOL):
        raise NearSingularError(
            "near-singular system matrix (|det M| < %.0e): operating at an "
            "effective threshold" % SINGULARITY_TOL
        )
    minv = np.linalg.inv(m.entries)
    eye = np.eye(4)
    t_in = eye + 2.0 * eta * minv
    t_loss = 2.0 * math.sqrt(eta * (1.0 - eta)) * minv
    return TransferMatrices(t_in=t_in, t_loss=t_loss, eta=eta)


def derive_single_sided(
    p: SystemParams, phase_convention: str = "amplitude"
) -> SystemParams:
    """Fill in cavity y's pump for single-sided (x-only) external pumping.

    The pump of mode y builds up through the coherent coupling, with field
    amplitude i*g times that of mode x, so |alpha_y| = g|alpha_x| gives
    R_y = g^k * R_x.

    phase_convention selects the relative pump phase:
      "amplitude"  dphi = pi/2, the phase of the factor i in the coupled
                   pump amplitude (default; this is the convention the
                   validation suite confirms against the analytic
                   single-pump inseparability)
      "stated"     dphi = 3*pi/4, an alternative convention kept for
                   comparison (does not reproduce the analytic formula)
    """
    conventions = {"amplitude": math.pi / 2.0, "stated": 3.0 * math.pi / 4.0}
    try:
        dphi = conventions[phase_convention]
    except KeyError:
        raise ParameterError(
            f"unknown phase convention {phase_convention!r}; "
            f"expected one of {sorted(conventions)}"
        ) from None
    return replace(
        p,
        r_y=p.g ** p.k * p.r_x,
        phi_y=p.phi_x + dphi,
        single_sided=True,
    )
