import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qas_sim import gaussian_core as gc
from qas_sim.errors import NumericFailureError


def tmsv_state(n_a=1.0, phase=0.0):
    return gc.apply_two_mode_squeeze(
        gc.vacuum(2), 0, 1, gc.SqueezeParams.from_mean_photons(n_a, phase)
    )


class TestVacuum:
    def test_two_modes(self):
        st_ = gc.vacuum(2)
        assert np.array_equal(st_.mean, np.zeros(4))
        assert np.array_equal(st_.cov, np.eye(4))

    def test_mean_photon_zero(self):
        assert gc.mean_photon(gc.vacuum(1), 0) == 0.0

    def test_vacuum_probability_one(self):
        assert gc.vacuum_probability(gc.vacuum(2)) == pytest.approx(1.0, abs=1e-12)

    def test_zero_modes_rejected(self):
        with pytest.raises(ValueError):
            gc.vacuum(0)


class TestSqueezeParams:
    def test_negative_magnitude_rejected(self):
        with pytest.raises(ValueError):
            gc.SqueezeParams(r=-0.1)

    @pytest.mark.parametrize("n_a", [0.0, 0.3, 1.0, 2.0, 10.0])
    def test_mean_photon_roundtrip(self, n_a):
        params = gc.SqueezeParams.from_mean_photons(n_a)
        assert params.mean_photons == pytest.approx(n_a, abs=1e-12)
        assert params.r == pytest.approx(math.asinh(math.sqrt(n_a)), abs=1e-12)


class TestTwoModeSqueeze:
    def test_sinh_squared_photons(self):
        state = tmsv_state(1.0)
        assert gc.mean_photon(state, 0) == pytest.approx(1.0, abs=1e-10)
        assert gc.mean_photon(state, 1) == pytest.approx(1.0, abs=1e-10)

    def test_inverse_restores_vacuum(self):
        params = gc.SqueezeParams.from_mean_photons(1.0)
        state = gc.apply_two_mode_squeeze(tmsv_state(1.0), 0, 1, params.inverse())
        assert np.abs(state.cov - np.eye(4)).max() < 1e-10
        assert np.abs(state.mean).max() < 1e-10

    def test_vacuum_probability_half_at_one_photon(self):
        # 1 / cosh^2(r) with sinh^2(r) = 1.
        assert gc.vacuum_probability(tmsv_state(1.0)) == pytest.approx(0.5, abs=1e-12)

    def test_squeeze_additivity(self):
        p1 = gc.SqueezeParams(r=0.3, phase=0.7)
        p2 = gc.SqueezeParams(r=0.5, phase=0.7)
        once = gc.apply_two_mode_squeeze(gc.vacuum(2), 0, 1, gc.SqueezeParams(0.8, 0.7))
        twice = gc.apply_two_mode_squeeze(
            gc.apply_two_mode_squeeze(gc.vacuum(2), 0, 1, p1), 0, 1, p2
        )
        assert np.abs(once.cov - twice.cov).max() < 1e-10

    def test_same_mode_rejected(self):
        with pytest.raises(ValueError):
            gc.apply_two_mode_squeeze(gc.vacuum(2), 1, 1, gc.SqueezeParams(0.5))

    def test_out_of_range_mode_rejected(self):
        with pytest.raises(ValueError):
            gc.apply_two_mode_squeeze(gc.vacuum(2), 0, 2, gc.SqueezeParams(0.5))


class TestThermalLoss:
    def test_identity_at_zero_absorption(self):
        state = tmsv_state(1.0)
        out = gc.apply_thermal_loss(state, 0, 0.0, 1.0)
        assert np.abs(out.cov - state.cov).max() == 0.0
        assert np.abs(out.mean - state.mean).max() == 0.0

    def test_full_absorption_swaps_in_thermal(self):
        out = gc.apply_thermal_loss(gc.vacuum(1), 0, 1.0, 1.0)
        assert gc.mean_photon(out, 0) == pytest.approx(1.0, abs=1e-12)

    def test_mean_photon_mixes_linearly(self):
        # 0.9 * 1 + 0.1 * 1 on the lossy arm of a one-photon source.
        out = gc.apply_thermal_loss(tmsv_state(1.0), 0, 0.1, 1.0)
        assert gc.mean_photon(out, 0) == pytest.approx(1.0, abs=1e-10)

    def test_loss_composition(self):
        # Two pure losses compose via the product of transmissions.
        state = tmsv_state(1.0)
        a1, a2 = 0.2, 0.35
        seq = gc.apply_thermal_loss(gc.apply_thermal_loss(state, 0, a1, 0.0), 0, a2, 0.0)
        combined = gc.apply_thermal_loss(state, 0, 1.0 - (1.0 - a1) * (1.0 - a2), 0.0)
        assert np.abs(seq.cov - combined.cov).max() < 1e-10

    @pytest.mark.parametrize("alpha", [-0.1, 1.1])
    def test_alpha_range_checked(self, alpha):
        with pytest.raises(ValueError):
            gc.apply_thermal_loss(gc.vacuum(1), 0, alpha, 0.0)

    def test_negative_occupation_rejected(self):
        with pytest.raises(ValueError):
            gc.apply_thermal_loss(gc.vacuum(1), 0, 0.5, -1.0)


class TestDisplacement:
    def test_coherent_photon_number(self):
        n_a = 0.7
        state = gc.apply_displacement(gc.vacuum(1), 0, 2.0 * math.sqrt(n_a), 0.0)
        assert gc.mean_photon(state, 0) == pytest.approx(n_a, abs=1e-12)

    def test_zero_displacement_is_identity(self):
        out = gc.apply_displacement(gc.vacuum(1), 0, 0.0, 0.0)
        assert np.array_equal(out.mean, np.zeros(2))
        assert np.array_equal(out.cov, np.eye(2))

    def test_displaced_vacuum_through_loss(self):
        state = gc.apply_displacement(gc.vacuum(1), 0, 2.0, 0.0)
        out = gc.apply_thermal_loss(state, 0, 0.5, 0.0)
        assert gc.mean_photon(out, 0) == pytest.approx(0.5, abs=1e-12)


class TestMoments:
    def test_coherent_is_poissonian(self):
        state = gc.apply_displacement(gc.vacuum(1), 0, 2.0, 0.0)
        assert gc.photon_number_variance(state, 0) == pytest.approx(1.0, abs=1e-12)

    def test_thermal_variance(self):
        state = gc.apply_thermal_loss(gc.vacuum(1), 0, 1.0, 1.0)
        assert gc.photon_number_variance(state, 0) == pytest.approx(2.0, abs=1e-12)

    def test_lossy_coherent_mean(self):
        state = gc.apply_displacement(gc.vacuum(1), 0, 2.0, 0.0)
        out = gc.apply_thermal_loss(state, 0, 0.01, 1.0)
        assert gc.mean_photon(out, 0) == pytest.approx(1.0, abs=1e-12)

    def test_tmsv_marginal_is_thermal(self):
        state = tmsv_state(1.0)
        assert gc.photon_number_variance(state, 0) == pytest.approx(2.0, abs=1e-10)


class TestVacuumProbability:
    def test_coherent(self):
        state = gc.apply_displacement(gc.vacuum(1), 0, 2.0, 0.0)
        assert gc.vacuum_probability(state) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_thermal(self):
        state = gc.apply_thermal_loss(gc.vacuum(1), 0, 1.0, 1.0)
        assert gc.vacuum_probability(state) == pytest.approx(0.5, abs=1e-12)

    def test_unphysical_state_raises(self):
        bad = gc.GaussianState(1, np.zeros(2), -2.0 * np.eye(2))
        with pytest.raises(NumericFailureError):
            gc.vacuum_probability(bad)


class TestReducedState:
    def test_marginal_of_tmsv_is_thermal(self):
        marg = gc.reduced_state(tmsv_state(1.0), [0])
        assert marg.n_modes == 1
        assert np.abs(marg.cov - 3.0 * np.eye(2)).max() < 1e-12


@st.composite
def random_operations(draw):
    ops = []
    for _ in range(draw(st.integers(0, 5))):
        kind = draw(st.sampled_from(["squeeze", "loss", "displace"]))
        if kind == "squeeze":
            ops.append(
                (
                    "squeeze",
                    draw(st.floats(0.0, 1.2)),
                    draw(st.floats(0.0, 2.0 * math.pi, exclude_max=True)),
                )
            )
        elif kind == "loss":
            ops.append(
                (
                    "loss",
                    draw(st.integers(0, 1)),
                    draw(st.floats(0.0, 1.0)),
                    draw(st.floats(0.0, 2.0)),
                )
            )
        else:
            ops.append(
                ("displace", draw(st.integers(0, 1)), draw(st.floats(-3.0, 3.0)), draw(st.floats(-3.0, 3.0)))
            )
    return ops


@settings(max_examples=60, deadline=None)
@given(random_operations())
def test_physicality_preserved_under_random_pipelines(ops):
    """cov + i Omega stays positive semidefinite along any operation sequence."""
    state = gc.vacuum(2)
    for op in ops:
        if op[0] == "squeeze":
            state = gc.apply_two_mode_squeeze(state, 0, 1, gc.SqueezeParams(op[1], op[2]))
        elif op[0] == "loss":
            state = gc.apply_thermal_loss(state, op[1], op[2], op[3])
        else:
            state = gc.apply_displacement(state, op[1], op[2], op[3])
    assert state.symmetry_defect() < 1e-12
    assert state.physicality_defect() > -1e-10


@pytest.mark.parametrize("theta", np.linspace(0.0, 2.0 * math.pi, 7)[:-1])
def test_source_phase_does_not_move_observables(theta):
    """Joint phase freedom of source and matched OPA leaves the output invariant."""

    def output(phase):
        n_a, alpha, n_th = 1.0, 0.1, 1.0
        state = gc.apply_two_mode_squeeze(
            gc.vacuum(2), 0, 1, gc.SqueezeParams.from_mean_photons(n_a, phase)
        )
        state = gc.apply_thermal_loss(state, 0, alpha, n_th)
        params = gc.SqueezeParams(math.asinh(math.sqrt(n_a)), phase + math.pi)
        return gc.apply_two_mode_squeeze(state, 0, 1, params)

    state = output(theta)
    golden_zpp = 0.7116086386235804  # phase-0 value, pinned by the Fock oracle
    assert gc.vacuum_probability(state) == pytest.approx(golden_zpp, abs=1e-10)
    assert gc.mean_photon(state, 0) == pytest.approx(
        gc.mean_photon(output(0.0), 0), abs=1e-10
    )
