"""Standard-form reduction, degree of inseparability, PPT cross-check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coupled_opo.entanglement import (
    DegenerateStateError,
    UnphysicalStateError,
    analytic_single_pump_I,
    canonical_invariants,
    classify_regime,
    degree_of_inseparability,
    inseparability,
    inseparability_batch,
    ppt_check,
    to_standard_form,
)
from coupled_opo.model import SystemParams, derive_single_sided

EQ_REF = 0.1551371393349197  # analytic value at (R=0.9, eta=0.99, delta=1)


def tms_cm(n=1.25, c=0.75):
    """Two-mode squeezed covariance matrix in standard form."""
    return np.array([
        [n, 0.0, c, 0.0],
        [0.0, n, 0.0, -c],
        [c, 0.0, n, 0.0],
        [0.0, -c, 0.0, n],
    ])


def rot2(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def local_op(cm, lx, ly):
    l = np.zeros((4, 4))
    l[:2, :2], l[2:, 2:] = lx, ly
    return l @ cm @ l.T


class TestStandardForm:
    def test_tms_passthrough(self):
        sf = to_standard_form(tms_cm())
        assert sf.n == pytest.approx(1.25, abs=1e-12)
        assert sf.m == pytest.approx(1.25, abs=1e-12)
        assert sf.c == pytest.approx(0.75, abs=1e-12)
        assert sf.cprime == pytest.approx(-0.75, abs=1e-12)
        assert sf.a0 == pytest.approx(1.0, abs=1e-9)

    def test_rotation_invariance(self):
        base = to_standard_form(tms_cm())
        rotated = local_op(tms_cm(), rot2(math.pi / 6.0), np.eye(2))
        sf = to_standard_form(rotated)
        for attr in ("n", "m", "c", "cprime"):
            assert getattr(sf, attr) == pytest.approx(getattr(base, attr), abs=1e-10)

    def test_reconstruction_roundtrip(self):
        rng = np.random.default_rng(3)
        cm = local_op(
            tms_cm(1.6, 0.9),
            np.diag([1.3, 1.0 / 1.3]) @ rot2(0.7),
            rot2(-0.3) @ np.diag([0.8, 1.25]),
        )
        sf = to_standard_form(cm)
        assert np.allclose(sf.reconstruct(), cm, atol=1e-9)

    def test_vacuum_degenerate(self):
        with pytest.raises(DegenerateStateError):
            to_standard_form(np.eye(4))

    def test_unphysical_rejected(self):
        with pytest.raises(UnphysicalStateError):
            to_standard_form(np.diag([0.5, 0.5, 1.0, 1.0]))

    def test_canonical_invariants_batch(self):
        n, m, c, cp = canonical_invariants(tms_cm())
        assert float(n) == pytest.approx(1.25, abs=1e-12)
        assert float(m) == pytest.approx(1.25, abs=1e-12)
        assert float(c) == pytest.approx(0.75, abs=1e-12)
        assert float(cp) == pytest.approx(-0.75, abs=1e-12)


class TestInseparability:
    def test_tms_value(self):
        res = degree_of_inseparability(to_standard_form(tms_cm()))
        assert res.I == pytest.approx(0.5, abs=1e-10)
        assert res.I_sum == pytest.approx(res.I_product, abs=1e-10)
        assert res.nu_ppt == pytest.approx(0.5, abs=1e-10)

    def test_pipeline_matches_analytic_at_reference(self):
        p = derive_single_sided(SystemParams(k=2, r_x=0.9, g=1.0, eta=0.99))
        thetas = np.linspace(0.0, math.pi, 256)
        res = inseparability_batch(p, 1.0, thetas, math.pi / 2.0)
        assert float(np.nanmin(res["I"])) == pytest.approx(EQ_REF, abs=2e-4)

    def test_scalar_matches_batch(self):
        p = SystemParams(k=2, r_x=0.8, r_y=0.5, g=1.2, eta=0.9, phi_y=0.6)
        rng = np.random.default_rng(8)
        for _ in range(6):
            d, t, tau = rng.uniform(-2, 2), rng.uniform(0, math.pi), rng.uniform(-2, 2)
            a = inseparability(p, d, t, tau)
            b = inseparability_batch(p, d, t, tau)
            assert a.I == pytest.approx(float(b["I"]), abs=1e-9)
            assert a.nu_ppt == pytest.approx(float(b["nu_ppt"]), abs=1e-9)

    def test_local_rotation_invariance(self):
        rng = np.random.default_rng(21)
        p = SystemParams(k=2, r_x=0.85, r_y=0.85, g=0.7, eta=0.95)
        base_cm = inseparability_batch(p, 0.4, 0.7, 0.0)["cm"]
        base = degree_of_inseparability(to_standard_form(base_cm))
        for _ in range(10):
            rotated = local_op(
                base_cm, rot2(rng.uniform(0, math.pi)), rot2(rng.uniform(0, math.pi))
            )
            res = degree_of_inseparability(to_standard_form(rotated))
            assert res.I == pytest.approx(base.I, abs=1e-9)


class TestAnalyticFormula:
    def test_trivial_points(self):
        assert analytic_single_pump_I(0.0, 0.9, 1.7) == 1.0
        # bracket zero: delta = R (1 - eta)
        assert analytic_single_pump_I(0.6, 0.75, 0.15) == pytest.approx(1.0, abs=1e-15)

    def test_reference_value(self):
        assert analytic_single_pump_I(0.9, 0.99, 1.0) == pytest.approx(
            EQ_REF, abs=1e-15
        )

    def test_domain_errors(self):
        with pytest.raises(ValueError, match="out of range"):
            analytic_single_pump_I(1.0, 0.9, 1.0)
        with pytest.raises(ValueError, match="out of range"):
            analytic_single_pump_I(0.5, 1.2, 1.0)


class TestPPT:
    def test_known_values(self):
        assert ppt_check(np.eye(4)) == pytest.approx(1.0, abs=1e-12)
        assert ppt_check(tms_cm()) == pytest.approx(0.5, abs=1e-12)

    @given(st.floats(1.0, 50.0), st.floats(1.0, 50.0))
    @settings(max_examples=50, deadline=None)
    def test_product_states_separable(self, v, w):
        cm = np.diag([v, 1.0 / v, w, 1.0 / w])
        # the discriminant nearly cancels, so allow an O(sqrt(eps)) slack
        assert ppt_check(cm) >= 1.0 - 1e-7

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_verdict_agreement(self, seed):
        rng = np.random.default_rng(seed)
        n = 64
        p = SystemParams(k=2)
        res = inseparability_batch(
            p,
            rng.uniform(-4, 4, n),
            rng.uniform(0, math.pi, n),
            rng.uniform(-4, 4, n),
            r_x=rng.uniform(0, 0.95, n),
            r_y=rng.uniform(0, 0.95, n),
            g=rng.uniform(0, 5, n),
            eta=rng.uniform(0, 1, n),
            dphi=rng.uniform(0, 2 * math.pi, n),
        )
        ok = ~res["error"]
        i_v, nu = res["I"][ok], res["nu_ppt"][ok]
        decided = (np.abs(i_v - 1.0) > 1e-6) & (np.abs(nu - 1.0) > 1e-6)
        assert np.all(
            np.sign(i_v - 1.0)[decided] == np.sign(nu - 1.0)[decided]
        )


def test_dphi_periodicity():
    # I as a function of the relative pump phase has period 2 pi / k
    for k in (1, 2, 3):
        p = SystemParams(k=k, r_x=0.8, r_y=0.7, g=1.1, eta=0.9)
        dphis = np.linspace(0.0, 2.0 * math.pi, 9, endpoint=False)
        a = inseparability_batch(p, 0.9, 0.4, 0.3, dphi=dphis)["I"]
        b = inseparability_batch(p, 0.9, 0.4, 0.3, dphi=dphis + 2.0 * math.pi / k)["I"]
        assert np.allclose(a, b, atol=1e-9)


class TestClassifyRegime:
    def test_sync_point(self):
        p = SystemParams(k=2, r_x=0.9, r_y=0.9, g=0.5, eta=0.99)
        tag = classify_regime(p, 0.3).tag
        assert tag in ("sync", "both")
        assert classify_regime(p, 0.3).i_sync < 1.0

    def test_async_point(self):
        p = derive_single_sided(SystemParams(k=2, r_x=0.9, g=1.0, eta=0.99))
        rc = classify_regime(p, 1.0)
        assert rc.tag == "async"
        assert rc.i_sync >= 1.0 - 1e-6

    def test_uncoupled_point(self):
        p = derive_single_sided(SystemParams(k=2, r_x=0.9, g=0.0, eta=0.99))
        assert classify_regime(p, 1.0).tag == "none"

    def test_resonant_delay_undefined(self):
        p = SystemParams(k=2, r_x=0.9, r_y=0.9, g=0.5, eta=0.99)
        rc = classify_regime(p, 0.0)
        assert rc.delay_undefined
        assert math.isnan(rc.i_async)
