"""Bipartite Gaussian entanglement of the two heterodyne outputs.

The covariance matrix of the joint-quadrature pairs is reduced by local
symplectic operations to the canonical two-mode form (n, m, c, c'); an
additional pair of local squeezing scalings imposes the constraints under
which the EPR-variance criterion is necessary and sufficient, yielding the
degree of inseparability I with I < 1 iff the state is entangled and I = 0
for maximal entanglement.  The smallest symplectic eigenvalue of the
partially transposed covariance matrix provides an independent check of the
entangled/separable verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SystemParams, build_system_matrix, transfer_matrices, validate_params
from .moments import DetectionSettings, QuadCovariance, output_moments, quad_covariance

__all__ = [
    "StandardForm",
    "InseparabilityResult",
    "DegenerateStateError",
    "UnphysicalStateError",
    "to_standard_form",
    "degree_of_inseparability",
    "analytic_single_pump_I",
    "ppt_check",
    "classify_regime",
    "inseparability",
    "inseparability_batch",
    "RegimeClassification",
]

# Below these scales a state is treated as vacuum-like/uncorrelated.
DEGENERATE_TOL = 1e-12
SIGN_TIE_TOL = 1e-12
PHYSICALITY_TOL = 1e-9
# Dead band for the entangled/separable verdicts compared between I and the
# partial-transpose eigenvalue.
VERDICT_BAND = 1e-6


class DegenerateStateError(ValueError):
    """Vacuum-like state: the gain parameter of the EPR combination is
    undefined.  Callers map this to I = 1 (separable boundary)."""


class UnphysicalStateError(ValueError):
    """Covariance matrix violates the Heisenberg bound."""


@dataclass(frozen=True)
class StandardForm:
    """Canonical two-mode parameters reached by local symplectic operations.

    n, m, c, cprime are the rotation-invariant canonical values (diagonal
    blocks n*I and m*I, cross block diag(c, c')).  block_x, block_y and
    cross hold the diagonals after the extra local squeezings that enforce
    the tight-criterion constraints; a0 is the EPR gain parameter.
    applied_local_ops holds the composed local operation (L_x, L_y) such
    that L CM L^T is the squeezed standard form, L = diag(L_x, L_y).
    """

    n: float
    m: float
    c: float
    cprime: float
    a0: float
    block_x: tuple[float, float]
    block_y: tuple[float, float]
    cross: tuple[float, float]
    applied_local_ops: tuple = ()

    def entries(self) -> np.ndarray:
        """The squeezed standard-form covariance matrix."""
        n1, n2 = self.block_x
        m1, m2 = self.block_y
        c1, c2 = self.cross
        return np.array([
            [n1, 0.0, c1, 0.0],
            [0.0, n2, 0.0, c2],
            [c1, 0.0, m1, 0.0],
            [0.0, c2, 0.0, m2],
        ])

    def reconstruct(self) -> np.ndarray:
        """Undo the recorded local operations; reproduces the input CM."""
        lx, ly = self.applied_local_ops
        linv = np.zeros((4, 4))
        linv[:2, :2] = np.linalg.inv(lx)
        linv[2:, 2:] = np.linalg.inv(ly)
        return linv @ self.entries() @ linv.T


@dataclass(frozen=True)
class InseparabilityResult:
    """Degree of inseparability and its cross-checks at one evaluation point.

    I < 1 certifies entanglement, I = 0 is maximal.  I_sum and I_product
    are the sum- and product-form EPR-variance measures (they coincide on
    the canonically squeezed form up to the variance asymmetry); the
    published I is the sum form.  nu_ppt is the smallest symplectic
    eigenvalue of the partially transposed covariance matrix.
    """

    I: float
    I_sum: float
    I_product: float
    nu_ppt: float
    theta: float = 0.0
    tau: float = 0.0
    delta: float = 0.0
    n: float = 1.0
    m: float = 1.0
    c: float = 0.0
    cprime: float = 0.0
    physicality_margin: float = 0.0


def _block_dets(cm):
    """detA, detB, detC, det(CM) for (...,4,4) input, via 2x2 cofactors."""
    a = cm[..., :2, :2]
    b = cm[..., 2:, 2:]
    c = cm[..., :2, 2:]
    det2 = lambda q: q[..., 0, 0] * q[..., 1, 1] - q[..., 0, 1] * q[..., 1, 0]
    return det2(a), det2(b), det2(c), np.linalg.det(cm)


def canonical_invariants(cm_entries):
    """Rotation-invariant standard-form values (n, m, c, cprime).

    Works on stacked (..., 4, 4) covariance matrices.  Convention:
    c >= |cprime| >= 0 up to the sign of det C carried by cprime.
    """
    det_a, det_b, det_c, det_s = _block_dets(np.asarray(cm_entries))
    n = np.sqrt(np.maximum(det_a, 0.0))
    m = np.sqrt(np.maximum(det_b, 0.0))
    nm = np.maximum(n * m, DEGENERATE_TOL)
    ssum = (nm ** 2 + det_c ** 2 - det_s) / nm
    disc = np.maximum(ssum ** 2 - 4.0 * det_c ** 2, 0.0)
    root = np.sqrt(disc)
    c = np.sqrt(np.maximum((ssum + root) / 2.0, 0.0))
    cprime = np.sign(det_c) * np.sqrt(np.maximum((ssum - root) / 2.0, 0.0))
    return n, m, c, cprime


def _squeeze_residual(lr1, n, m, c_abs, cp_abs):
    """Constraint mismatch of the tight-criterion squeezing, as a function
    of log(r1^2); vectorized over all arguments."""
    r1sq = np.exp(lr1)
    a = n * r1sq
    b = n / r1sq
    # The matching squeeze of mode y solves a quadratic fixed by requiring
    # equal EPR-gain ratios in both quadratures.
    bm1 = b - 1.0
    small = np.abs(bm1) < 1e-14
    disc = (a - b) ** 2 + 4.0 * bm1 * (a - 1.0) * m ** 2
    u_gen = (-(a - b) + np.sqrt(np.maximum(disc, 0.0))) / np.where(small, 1.0, 2.0 * bm1)
    u = np.where(small, m, u_gen)  # b ~= 1 only when r1 ~= 1 and then u = m
    u = np.maximum(u, DEGENERATE_TOL)
    r2sq = u / m
    rr = np.sqrt(r1sq * r2sq)
    n1, n2 = a, b
    m1, m2 = m * r2sq, m / r2sq
    lhs = c_abs * rr - cp_abs / rr
    rhs = np.sqrt(np.maximum(n1 - 1.0, 0.0) * np.maximum(m1 - 1.0, 0.0)) - np.sqrt(
        np.maximum(n2 - 1.0, 0.0) * np.maximum(m2 - 1.0, 0.0)
    )
    return lhs - rhs, r2sq


def _solve_squeezings(n, m, c, cprime):
    """Local squeeze factors (r1^2, r2^2) enforcing the tight-criterion
    constraints; vectorized.  The residual is >= 0 at r1 = 1 (since
    c >= |cprime|) and -> -inf for large r1, so a root is bracketed by
    scanning upward in log(r1^2)."""
    n = np.asarray(n, dtype=float)
    c_abs, cp_abs = np.abs(c), np.abs(cprime)
    # residual(0) >= 0 by the c >= |cprime| ordering, and the residual
    # crosses zero at most once on [0, 8], so a plain sign bisection of the
    # whole interval homes in on the root without a bracketing scan.
    lo = np.zeros_like(n)
    hi = np.full_like(n, 8.0)
    found = _squeeze_residual(hi, n, m, c_abs, cp_abs)[0] < 0.0
    for _ in range(48):
        mid = (lo + hi) / 2.0
        rmid = _squeeze_residual(mid, n, m, c_abs, cp_abs)[0]
        take_hi = rmid >= 0.0
        lo = np.where(found & take_hi, mid, lo)
        hi = np.where(found & ~take_hi, mid, hi)
    # Unbracketed points are (numerically) already at the constraint: r = 1.
    lr1 = np.where(found, (lo + hi) / 2.0, 0.0)
    _, r2sq = _squeeze_residual(lr1, n, m, c_abs, cp_abs)
    return np.exp(lr1), r2sq


def _epr_measures(n, m, c, cprime):
    """Vectorized (I_sum, I_product, a0, squeezed blocks) from canonical
    values."""
    n = np.asarray(n, dtype=float)
    r1sq, r2sq = _solve_squeezings(n, m, c, cprime)
    rr = np.sqrt(r1sq * r2sq)
    n1, n2 = n * r1sq, n / r1sq
    m1, m2 = m * r2sq, m / r2sq
    c1, c2 = c * rr, cprime / rr
    a0sq = np.sqrt(
        np.maximum(m1 - 1.0, DEGENERATE_TOL) / np.maximum(n1 - 1.0, DEGENERATE_TOL)
    )
    v_u = a0sq * n1 + m1 / a0sq - 2.0 * np.abs(c1)
    v_v = a0sq * n2 + m2 / a0sq - 2.0 * np.abs(c2)
    bound = 2.0 * (a0sq + 1.0 / a0sq)
    i_sum = (v_u + v_v) / bound
    i_product = np.sqrt(np.maximum(v_u * v_v, 0.0)) / (bound / 2.0)
    degenerate = (np.abs(n - 1.0) < DEGENERATE_TOL) & (np.abs(m - 1.0) < DEGENERATE_TOL) & (
        np.abs(c) < DEGENERATE_TOL
    ) & (np.abs(cprime) < DEGENERATE_TOL)
    i_sum = np.where(degenerate, 1.0, i_sum)
    i_product = np.where(degenerate, 1.0, i_product)
    blocks = (n1, n2, m1, m2, c1, c2)
    return i_sum, i_product, np.sqrt(a0sq), blocks, degenerate


def _rotation_to_principal(block):
    """SO(2) rotation diagonalizing a symmetric 2x2 block (descending)."""
    w, v = np.linalg.eigh(block)
    # eigh returns ascending; flip for descending and fix orientation
    v = v[:, ::-1]
    if np.linalg.det(v) < 0:
        v = v * np.array([1.0, -1.0])
    return v.T, w[::-1]


def to_standard_form(cm: QuadCovariance | np.ndarray) -> StandardForm:
    """Reduce a physical two-mode covariance matrix to standard form.

    Local rotations+squeezings bring the diagonal blocks to multiples of
    the identity and the cross block to diagonal form; a further pair of
    local squeezings imposes the tight-criterion constraints.  The composed
    local operations are recorded so the reduction can be audited and
    reversed.
    """
    entries = cm.entries if isinstance(cm, QuadCovariance) else np.asarray(cm)
    if entries.shape != (4, 4):
        raise ValueError("to_standard_form expects a single 4x4 covariance matrix")
    if not np.allclose(entries, entries.T, atol=1e-9):
        raise ValueError("covariance matrix must be symmetric")
    from .moments import check_physicality

    margin = check_physicality(entries)
    if margin < -PHYSICALITY_TOL:
        raise UnphysicalStateError(
            f"covariance matrix violates the Heisenberg bound (margin {margin:.3e})"
        )

    a = entries[:2, :2].copy()
    b = entries[2:, 2:].copy()
    cross = entries[:2, 2:].copy()

    # Symplectic diagonalization of each single-mode block: rotate to
    # principal axes, then squeeze to a multiple of the identity.
    rot_a, eig_a = _rotation_to_principal(a)
    rot_b, eig_b = _rotation_to_principal(b)
    n = math.sqrt(max(eig_a[0] * eig_a[1], 0.0))
    m = math.sqrt(max(eig_b[0] * eig_b[1], 0.0))
    sq_a = np.diag(np.sqrt(n / np.maximum(eig_a, DEGENERATE_TOL)))
    sq_b = np.diag(np.sqrt(m / np.maximum(eig_b, DEGENERATE_TOL)))
    lx = sq_a @ rot_a
    ly = sq_b @ rot_b
    cross1 = lx @ cross @ ly.T

    # Rotations (leaving n*I, m*I invariant) diagonalize the cross block.
    u, sv, vt = np.linalg.svd(cross1)
    du, dv = np.linalg.det(u), np.linalg.det(vt)
    flip_u = np.diag([1.0, du])
    flip_v = np.diag([1.0, dv])
    # c carries no sign freedom left beyond a joint pi rotation; make it >= 0.
    c_diag = flip_u @ np.diag(sv) @ flip_v
    lx = (u @ flip_u).T @ lx
    ly = (flip_v @ vt) @ ly
    c_val = float(c_diag[0, 0])
    cp_val = float(c_diag[1, 1])
    if c_val < 0.0:
        # rotate both modes by pi
        lx = -lx
        ly = -ly
        # cross block invariant under joint negation of both modes' ops:
        # (-I) C (-I)^T = C, so nothing to update.

    degenerate = (
        abs(n - 1.0) < DEGENERATE_TOL
        and abs(m - 1.0) < DEGENERATE_TOL
        and abs(c_val) < DEGENERATE_TOL
        and abs(cp_val) < DEGENERATE_TOL
    )
    if degenerate:
        raise DegenerateStateError(
            "vacuum-like state: EPR gain parameter undefined (I = 1)"
        )

    r1sq, r2sq = (float(q) for q in _solve_squeezings(
        np.asarray(n), np.asarray(m), np.asarray(c_val), np.asarray(cp_val)
    ))
    r1, r2 = math.sqrt(r1sq), math.sqrt(r2sq)
    lx = np.diag([r1, 1.0 / r1]) @ lx
    ly = np.diag([r2, 1.0 / r2]) @ ly
    rr = r1 * r2
    a0sq = math.sqrt(
        max(m * r2sq - 1.0, DEGENERATE_TOL) / max(n * r1sq - 1.0, DEGENERATE_TOL)
    )
    return StandardForm(
        n=float(n),
        m=float(m),
        c=c_val,
        cprime=cp_val,
        a0=math.sqrt(a0sq),
        block_x=(n * r1sq, n / r1sq),
        block_y=(m * r2sq, m / r2sq),
        cross=(c_val * rr, cp_val / rr),
        applied_local_ops=(lx, ly),
    )


def degree_of_inseparability(sf: StandardForm) -> InseparabilityResult:
    """EPR-variance degree of inseparability of a standard-form state."""
    n1, n2 = sf.block_x
    m1, m2 = sf.block_y
    c1, c2 = sf.cross
    a0sq = sf.a0 ** 2
    sgn1 = 1.0 if abs(c1) < SIGN_TIE_TOL else math.copysign(1.0, c1)
    sgn2 = 1.0 if abs(c2) < SIGN_TIE_TOL else math.copysign(1.0, c2)
    v_u = a0sq * n1 + m1 / a0sq - 2.0 * sgn1 * c1
    v_v = a0sq * n2 + m2 / a0sq - 2.0 * sgn2 * c2
    bound = 2.0 * (a0sq + 1.0 / a0sq)
    i_sum = (v_u + v_v) / bound
    i_product = math.sqrt(max(v_u * v_v, 0.0)) / (bound / 2.0)
    nu = _nu_ppt_from_invariants(sf.n, sf.m, sf.c, sf.cprime)
    return InseparabilityResult(
        I=i_sum,
        I_sum=i_sum,
        I_product=i_product,
        nu_ppt=float(nu),
        n=sf.n,
        m=sf.m,
        c=sf.c,
        cprime=sf.cprime,
    )


def analytic_single_pump_I(r: float, eta: float, delta: float) -> float:
    """Closed-form inseparability for single-sided chi^(3) pumping at g = 1.

    Valid for r in [0, 1), eta in [0, 1]; values above 1 (separable side)
    are returned as-is.
    """
    if not 0.0 <= r < 1.0:
        raise ValueError(f"pump strength out of range: R = {r}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"escape efficiency out of range: eta = {eta}")
    num = 16.0 * eta * r * (delta - r * (1.0 - eta))
    den = ((1.0 + r) ** 2 + (delta - 1.0) ** 2) * ((1.0 - r) ** 2 + (delta + 1.0) ** 2)
    radicand = 1.0 - num / den
    if radicand < 0.0:
        raise ValueError(
            f"complex result: radicand {radicand} < 0 for (R={r}, eta={eta}, delta={delta})"
        )
    return math.sqrt(radicand)


def _nu_ppt_from_invariants(n, m, c, cprime):
    det_a = np.asarray(n, dtype=float) ** 2
    det_b = np.asarray(m, dtype=float) ** 2
    det_c = np.asarray(c, dtype=float) * np.asarray(cprime, dtype=float)
    det_s = (n * m - np.asarray(c) ** 2) * (n * m - np.asarray(cprime) ** 2)
    delta_tilde = det_a + det_b - 2.0 * det_c
    disc = np.maximum(delta_tilde ** 2 - 4.0 * det_s, 0.0)
    nu_sq = (delta_tilde - np.sqrt(disc)) / 2.0
    return np.sqrt(np.maximum(nu_sq, 0.0))


def ppt_check(cm: QuadCovariance | np.ndarray) -> float | np.ndarray:
    """Smallest symplectic eigenvalue of the partial transpose of CM.

    A momentum sign flip on mode y negates det C; values below 1 certify
    entanglement in vacuum-1 normalization.
    """
    entries = cm.entries if isinstance(cm, QuadCovariance) else np.asarray(cm)
    det_a, det_b, det_c, det_s = _block_dets(entries)
    delta_tilde = det_a + det_b - 2.0 * det_c  # sign flip of det C under PT
    disc = np.maximum(delta_tilde ** 2 - 4.0 * det_s, 0.0)
    nu = np.sqrt(np.maximum((delta_tilde - np.sqrt(disc)) / 2.0, 0.0))
    return float(nu) if nu.ndim == 0 else nu


def inseparability_batch(
    p: SystemParams,
    delta,
    theta,
    tau,
    r=None,
    g=None,
    eta=None,
    dphi=None,
    r_x=None,
    r_y=None,
    light: bool = False,
):
    """Vectorized full pipeline: returns a dict of arrays broadcast over
    (delta, theta, tau) and any overridden parameter arrays.

    ``r`` sets both pump strengths; ``dphi`` offsets phi_y from phi_x.
    Near-singular points are flagged in ``error`` instead of raising.
    ``light`` computes only the objective I (used inside line searches).
    """
    from .model import SINGULARITY_TOL, _system_matrix_entries
    from .moments import OMEGA, _moment_entries, _quad_projector

    rx = p.r_x if r_x is None else r_x
    ry = p.r_y if r_y is None else r_y
    if r is not None:
        rx, ry = r, r
    gval = p.g if g is None else g
    eta_val = p.eta if eta is None else eta
    phi_y = p.phi_y if dphi is None else p.phi_x + np.asarray(dphi, dtype=float)

    (rx, ry, gval, eta_val, phi_y, delta, theta, tau) = np.broadcast_arrays(
        rx, ry, gval, eta_val, phi_y, delta, theta, tau
    )
    entries = _system_matrix_entries(p.k, rx, ry, p.phi_x, phi_y, gval, delta)
    det = np.linalg.det(entries)
    singular = np.abs(det) < SINGULARITY_TOL
    safe = entries.copy()
    safe[singular] = np.eye(4)
    minv = np.linalg.inv(safe)
    eta_arr = np.asarray(eta_val, dtype=float)[..., None, None]
    t_in = np.eye(4) + 2.0 * eta_arr * minv
    t_loss = 2.0 * np.sqrt(eta_arr * (1.0 - eta_arr)) * minv
    s = _moment_entries(t_in, t_loss)
    s_sym = (s + np.swapaxes(s, -1, -2)) / 2.0
    u = _quad_projector(theta, tau, np.zeros_like(np.asarray(tau, dtype=float)), delta)
    cm = np.real(u @ s_sym @ np.swapaxes(u, -1, -2))
    cm = (cm + np.swapaxes(cm, -1, -2)) / 2.0

    n, m, c, cprime = canonical_invariants(cm)
    i_sum, i_product, a0, _, degenerate = _epr_measures(n, m, c, cprime)
    i_sum = np.where(singular, np.nan, i_sum)
    if light:
        return {"I": i_sum, "error": singular}
    nu = ppt_check(cm)
    margin = np.linalg.eigvalsh(cm + 1j * OMEGA)[..., 0].real
    i_product = np.where(singular, np.nan, i_product)
    nu = np.where(singular, np.nan, nu)
    return {
        "I": i_sum,
        "I_sum": i_sum,
        "I_product": i_product,
        "nu_ppt": nu,
        "n": n,
        "m": m,
        "c": c,
        "cprime": cprime,
        "a0": a0,
        "physicality_margin": margin,
        "degenerate": degenerate,
        "error": singular,
        "cm": cm,
    }


def inseparability(
    p: SystemParams, delta: float, theta: float, tau: float
) -> InseparabilityResult:
    """Full pipeline at a single evaluation point."""
    validate_params(p)
    sm = build_system_matrix(p, delta)
    tm = transfer_matrices(sm, p.eta)
    mm = output_moments(tm, delta)
    cm = quad_covariance(mm, DetectionSettings(theta=theta, tau_x=tau, tau_y=0.0))
    from .moments import check_physicality

    margin = check_physicality(cm)
    try:
        sf = to_standard_form(cm)
        res = degree_of_inseparability(sf)
    except DegenerateStateError:
        res = InseparabilityResult(I=1.0, I_sum=1.0, I_product=1.0, nu_ppt=1.0)
    return InseparabilityResult(
        I=res.I,
        I_sum=res.I_sum,
        I_product=res.I_product,
        nu_ppt=res.nu_ppt,
        theta=theta,
        tau=tau,
        delta=delta,
        n=res.n,
        m=res.m,
        c=res.c,
        cprime=res.cprime,
        physicality_margin=margin,
    )


@dataclass(frozen=True)
class RegimeClassification:
    """Synchronous/asynchronous entanglement verdict at one working point."""

    tag: str  # none | sync | async | both
    i_sync: float
    i_async: float
    delay_undefined: bool = False


def _optimize_theta(p: SystemParams, delta: float, tau: float) -> float:
    """Min over the LO phase of I at fixed (delta, tau)."""
    thetas = np.linspace(0.0, math.pi, 128, endpoint=False)
    res = inseparability_batch(p, delta, thetas, tau)
    vals = res["I"]
    i0 = int(np.nanargmin(vals))
    lo = thetas[max(i0 - 1, 0)]
    hi = thetas[min(i0 + 1, len(thetas) - 1)]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - gr * (hi - lo)
    x2 = lo + gr * (hi - lo)
    f1 = float(inseparability_batch(p, delta, x1, tau)["I"])
    f2 = float(inseparability_batch(p, delta, x2, tau)["I"])
    for _ in range(60):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = float(inseparability_batch(p, delta, x1, tau)["I"])
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = float(inseparability_batch(p, delta, x2, tau)["I"])
    return min(f1, f2)


def classify_regime(p: SystemParams, delta: float, theta: float = None) -> RegimeClassification:
    """Tag the working point by where its entanglement lives in time.

    I is evaluated at tau = 0 (synchronous) and tau = pi/(2*delta)
    (asynchronous), each minimized over the LO phase; ``theta`` is ignored
    by the optimization and kept for signature compatibility with
    fixed-phase callers (pass it to ``inseparability`` instead).
    """
    validate_params(p)
    i_sync = _optimize_theta(p, delta, 0.0)
    if delta == 0.0:
        tag = "sync" if i_sync < 1.0 - VERDICT_BAND else "none"
        return RegimeClassification(
            tag=tag, i_sync=i_sync, i_async=math.nan, delay_undefined=True
        )
    i_async = _optimize_theta(p, delta, math.pi / (2.0 * delta))
    sync = i_sync < 1.0 - VERDICT_BAND
    is_async = i_async < 1.0 - VERDICT_BAND
    tag = {
        (False, False): "none",
        (True, False): "sync",
        (False, True): "async",
        (True, True): "both",
    }[(sync, is_async)]
    return RegimeClassification(tag=tag, i_sync=i_sync, i_async=i_async)
