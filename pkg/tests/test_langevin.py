"""Stochastic time-domain oracle versus the frequency-domain pipeline."""

import numpy as np
import pytest

from coupled_opo.model import SystemParams, build_system_matrix, transfer_matrices
from coupled_opo.moments import (
    DetectionSettings,
    UnstableIntegrationError,
    joint_quadrature_variances,
    output_moments,
    quad_covariance,
    simulate_langevin,
)


def expected_variances(p, delta, theta=0.0, tau_x=0.0, tau_y=0.0):
    tm = transfer_matrices(build_system_matrix(p, delta), p.eta)
    cm = quad_covariance(
        output_moments(tm, delta),
        DetectionSettings(theta=theta, tau_x=tau_x, tau_y=tau_y),
    )
    return joint_quadrature_variances(cm)


def test_vacuum_spectra():
    p = SystemParams(k=2, g=1.0, eta=0.8)
    est = simulate_langevin(p, [0.0, 1.0], duration=60.0, seed=7, segments=128)
    for i in range(est.delta.size):
        for j, lab in enumerate(est.labels):
            # 4 sigma: the stderr estimate is itself noisy at this sample size
            assert abs(est.variances[i, j] - 1.0) <= 4.0 * est.stderr[i, j]


def test_seed_determinism():
    p = SystemParams(k=2, r_x=0.6, eta=0.9)
    a = simulate_langevin(p, [0.5], duration=40.0, seed=42, segments=32)
    b = simulate_langevin(p, [0.5], duration=40.0, seed=42, segments=32)
    assert np.array_equal(a.variances, b.variances)
    assert np.array_equal(a.stderr, b.stderr)
    c = simulate_langevin(p, [0.5], duration=40.0, seed=43, segments=32)
    assert not np.array_equal(a.variances, c.variances)


def test_step_limit_enforced():
    with pytest.raises(ValueError, match="step"):
        simulate_langevin(SystemParams(), [0.0], step=0.1)


def test_divergence_detected():
    # explicit Euler is unstable at step 0.05 once the coupling rate pushes
    # |1 + step*lambda| past 1 (g well above ~6 suffices)
    p = SystemParams(k=2, r_x=0.5, r_y=0.5, g=20.0, eta=0.9)
    with pytest.raises(UnstableIntegrationError):
        simulate_langevin(p, [0.0], duration=400.0, step=0.05, seed=1, segments=8)


def test_single_opo_squeezing():
    p = SystemParams(k=2, r_x=0.9, eta=0.99)
    est = simulate_langevin(
        p, [0.0], duration=160.0, step=0.01, seed=11, segments=96
    )
    ref = expected_variances(p, est.delta[0])
    for j, lab in enumerate(est.labels):
        assert abs(est.variances[0, j] - float(ref[lab])) <= 4.0 * est.stderr[0, j]
    # and the squeezed joint quadrature really is squeezed
    j = est.labels.index("xp")
    assert est.variances[0, j] < 0.05


def test_coupled_asynchronous_point():
    p = SystemParams(k=2, r_x=0.9, r_y=0.9, g=1.0, eta=0.99, phi_y=np.pi / 2.0)
    delta = 1.0
    tau = np.pi / (2.0 * delta)
    est = simulate_langevin(
        p, [delta], duration=160.0, step=0.01, seed=23, segments=96,
        theta=0.3, tau_x=tau,
    )
    ref = expected_variances(p, est.delta[0], theta=0.3, tau_x=tau)
    for j, lab in enumerate(est.labels):
        assert abs(est.variances[0, j] - float(ref[lab])) <= 4.0 * est.stderr[0, j]
