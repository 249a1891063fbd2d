import numpy as np
import pytest

from parityreject.algebra import KET_H, KET_PLUS, DensityOperator, basis_ket, tensor
from parityreject.noise import (
    BELL_LABELS,
    CalibrationError,
    BellDiagonalSource,
    PauliChannel,
    WaveplateSandwich,
    bell_diagonal_rho,
    bell_ket,
    calibrate_from_visibilities,
    choi_matrix,
    degrade_parity_coherence,
    parity_branch_projectors,
    pauli_apply,
    sandwich_as_channel,
    trace_distance,
    visibility,
)


# -- Pauli channel -----------------------------------------------------------

def test_pauli_channel_validation():
    with pytest.raises(ValueError):
        PauliChannel(0.5, 0.6)
    with pytest.raises(ValueError):
        PauliChannel(1.2, -0.2)
    ch = PauliChannel.bit_flip(0.25)
    assert ch.probs.sum() == pytest.approx(1.0)
    assert np.allclose(ch.cumulative(), [0.75, 1.0, 1.0, 1.0])


def test_bit_flip_action():
    ch = PauliChannel.bit_flip(0.3)
    rho = pauli_apply(ch, KET_H.density(), 0)
    assert rho.array[0, 0] == pytest.approx(0.7)
    assert rho.array[1, 1] == pytest.approx(0.3)
    # |+> is invariant under X
    rho = pauli_apply(ch, KET_PLUS.density(), 0)
    assert np.allclose(rho.array, KET_PLUS.density().array)


def test_pauli_apply_targets_one_photon():
    rho = tensor(KET_H.density(), KET_H.density())
    out = pauli_apply(PauliChannel.bit_flip(1.0), rho, 1)
    assert out.array[1, 1] == pytest.approx(1.0)  # |HV><HV|


def test_hadamard_conjugation_swaps_x_and_z():
    ch = PauliChannel(0.4, 0.3, 0.2, 0.1)
    cj = ch.conjugated_by_hadamard()
    assert (cj.p_i, cj.p_x, cj.p_y, cj.p_z) == (0.4, 0.1, 0.2, 0.3)
    assert cj.conjugated_by_hadamard() == ch


def test_channel_is_completely_positive_and_trace_preserving():
    for ch in (PauliChannel.bit_flip(0.2), PauliChannel(0.1, 0.2, 0.3, 0.4)):
        choi = choi_matrix(ch.kraus())
        eigs = np.linalg.eigvalsh(choi)
        assert eigs.min() > -1e-12
        assert np.trace(choi).real == pytest.approx(1.0)


# -- wave-plate sandwich -----------------------------------------------------

def test_sandwich_flip_probability_and_inverse():
    s = WaveplateSandwich(15.0)
    assert s.flip_probability == pytest.approx(0.25)
    back = WaveplateSandwich.for_flip_probability(0.25)
    assert back.theta_deg == pytest.approx(15.0)
    with pytest.raises(ValueError):
        WaveplateSandwich(60.0)


@pytest.mark.parametrize("theta", [0, 5, 10, 15, 20, 25, 30, 35, 40, 45])
def test_sandwich_equals_bit_flip_channel(theta):
    s = WaveplateSandwich(float(theta))
    d = trace_distance(choi_matrix(s.kraus()),
                       choi_matrix(sandwich_as_channel(s).kraus()))
    assert d < 1e-12


def test_fixed_sign_sandwich_is_not_the_averaged_channel():
    s = WaveplateSandwich(15.0, sign_random=False)
    d = trace_distance(choi_matrix(s.kraus()),
                       choi_matrix(PauliChannel.bit_flip(0.25).kraus()))
    assert d > 0.1  # a lone unitary keeps the coherence the average destroys


# -- entangled-pair sources --------------------------------------------------

def test_bell_kets_are_orthonormal():
    gram = np.array([[np.vdot(bell_ket(a).array, bell_ket(b).array)
                      for b in BELL_LABELS] for a in BELL_LABELS])
    assert np.allclose(gram, np.eye(4))


def test_source_validation_and_visibilities():
    with pytest.raises(ValueError):
        BellDiagonalSource((0.5, 0.5, 0.5, -0.5))
    src = BellDiagonalSource((0.955, 0.03, 0.015, 0.0))
    assert src.visibility_hv == pytest.approx(0.97)
    assert src.visibility_pm == pytest.approx(0.94)
    rho = bell_diagonal_rho(src)
    assert visibility(rho, "hv") == pytest.approx(0.97)
    assert visibility(rho, "pm") == pytest.approx(0.94)


def test_calibration_roundtrip():
    src = calibrate_from_visibilities(0.97, 0.94)
    assert src.lambdas[3] == 0.0
    assert src.visibility_hv == pytest.approx(0.97, abs=1e-12)
    assert src.visibility_pm == pytest.approx(0.94, abs=1e-12)
    rho = bell_diagonal_rho(src)
    again = calibrate_from_visibilities(visibility(rho, "hv"), visibility(rho, "pm"))
    assert np.allclose(again.lambdas, src.lambdas, atol=1e-12)
    with pytest.raises(CalibrationError):
        calibrate_from_visibilities(0.97, 1.2)  # would need a negative phi- weight


def test_ideal_source_is_phi_plus():
    rho = bell_diagonal_rho(BellDiagonalSource.ideal())
    vec = bell_ket("phi+").array
    assert np.allclose(rho.array, np.outer(vec, vec.conj()))


# -- parity-coherence degradation ---------------------------------------------

def test_degrade_scales_cross_branch_coherence_only():
    projs = parity_branch_projectors(2)
    rho = bell_ket("phi+").density()
    out = degrade_parity_coherence(rho, 0.6, projs)
    assert out.array[0, 0] == pytest.approx(0.5)    # populations untouched
    assert out.array[3, 3] == pytest.approx(0.5)
    assert out.array[0, 3] == pytest.approx(0.6 * 0.5)  # coherence scaled by v
    assert np.trace(out.array).real == pytest.approx(1.0)


def test_degrade_identity_at_full_visibility():
    projs = parity_branch_projectors(3)
    rho = tensor(bell_ket("phi+").density(), KET_PLUS.density())
    out = degrade_parity_coherence(rho, 1.0, projs)
    assert out is rho


def test_degrade_validates_projectors_and_v():
    projs = parity_branch_projectors(2)
    rho = bell_ket("phi+").density()
    with pytest.raises(ValueError):
        degrade_parity_coherence(rho, 1.5, projs)
    bad = (np.eye(4) * 0.5, projs[1].array)
    with pytest.raises(ValueError):
        degrade_parity_coherence(rho, 0.9, bad)
    overlapping = (projs[0].array, projs[0].array)
    with pytest.raises(ValueError):
        degrade_parity_coherence(rho, 0.9, overlapping)


def test_degrade_on_embedded_pair_leaves_spectator_alone():
    # pair (0,1) of a three-photon register; photon 2 is a spectator
    projs = parity_branch_projectors(3, (0, 1))
    psi = (basis_ket("HHV").array + basis_ket("VVH").array) / np.sqrt(2)
    rho = DensityOperator(np.outer(psi, psi.conj()))
    out = degrade_parity_coherence(rho, 0.3, projs)
    i, j = 0b001, 0b110
    assert out.array[i, j] == pytest.approx(0.3 * 0.5)
    assert out.array[i, i] == pytest.approx(0.5)
