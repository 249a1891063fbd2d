"""End-to-end and unit tests for the encode/transmit/decode pipeline."""

import numpy as np
import pytest

from parityreject.algebra import (
    KET_H,
    KET_MINUS,
    KET_PLUS,
    KET_V,
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    DensityOperator,
    Ket,
    apply,
    basis_ket,
    fidelity,
    haar_random_ket,
    tensor,
)
from parityreject.bench import PhotonicState, coincidence_postselect, pbs, polarizer_project
from parityreject.noise import (
    BELL_LABELS,
    BellDiagonalSource,
    CalibrationError,
    PauliChannel,
    WaveplateSandwich,
    bell_diagonal_rho,
    bell_ket,
    calibrate_from_visibilities,
    pauli_apply,
)
from parityreject.protocol import (
    CHANNEL_KINDS,
    ROTATED_BY_HADAMARD,
    BranchRecord,
    PipelineConfig,
    SixState,
    calibrate_parity_visibility,
    channel_for,
    decode,
    encode,
    decoded_qber_law,
    ghz_decoded,
    ghz_intermediate,
    heralded_input,
    phase_error_wrap,
    run_analytic,
    run_direct_baseline,
    six_state_average,
    transmit,
)

P_GRID = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]


def code_ket(chi: Ket) -> Ket:
    """a|HH> + b|VV> for chi = a|H> + b|V>."""
    a, b = chi.normalized().array
    vec = np.zeros(4, dtype=complex)
    vec[0b00], vec[0b11] = a, b
    return Ket(vec)


# -- reference inputs ----------------------------------------------------------

def test_six_state_table():
    assert SixState.H.ket is KET_H
    assert SixState.MINUS.ket is KET_MINUS
    assert SixState.H.basis == "HV" and SixState.V.basis == "HV"
    assert SixState.PLUS.basis == "PM" and SixState.L.basis == "RL"
    for s in SixState:
        inner = np.vdot(s.ket.array, s.orthogonal.ket.array)
        assert abs(inner) < 1e-15
        assert s.orthogonal.orthogonal is s


def test_coerce():
    assert SixState.coerce("+") is SixState.PLUS
    assert SixState.coerce(SixState.R) is SixState.R
    with pytest.raises(ValueError, match="unknown input state"):
        SixState.coerce("D")


def test_rotation_table_matches_the_matrix():
    from parityreject.algebra import HADAMARD

    for s, t in ROTATED_BY_HADAMARD.items():
        rotated = HADAMARD.array @ s.ket.array
        assert fidelity(Ket(rotated), t.ket) == pytest.approx(1.0, abs=1e-14)
        assert ROTATED_BY_HADAMARD[t] is s


def test_channel_for():
    assert channel_for("bitflip", 0.3) == PauliChannel.bit_flip(0.3)
    assert channel_for("sandwich", 0.3) == PauliChannel.bit_flip(0.3)
    assert channel_for("phaseflip", 0.3) == PauliChannel.phase_flip(0.3)
    with pytest.raises(ValueError):
        channel_for("depolarizing", 0.3)
    with pytest.raises(ValueError):
        channel_for("bitflip", 1.5)
    assert set(CHANNEL_KINDS) == {"bitflip", "phaseflip", "sandwich"}


def test_branch_record_requires_matching_compensation():
    BranchRecord("encode", "+", 0.25, False)
    BranchRecord("decode", "-", 0.25, True)
    with pytest.raises(ValueError):
        BranchRecord("encode", "-", 0.25, False)
    with pytest.raises(ValueError):
        BranchRecord("encode", "+", 0.25, True)


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(parity_visibility=1.2)
    with pytest.raises(ValueError):
        PipelineConfig(channel_kind="lossy")
    cfg = PipelineConfig.calibrated()
    assert cfg.herald == cfg.ancilla
    assert cfg.ancilla == calibrate_from_visibilities(0.97, 0.94)


# -- closed-form error rate ----------------------------------------------------

def test_decoded_qber_law_values_and_domain():
    assert decoded_qber_law(0.0) == 0.0
    assert decoded_qber_law(0.5) == pytest.approx(0.5)
    assert decoded_qber_law(1.0) == pytest.approx(1.0)
    p = 0.3
    assert decoded_qber_law(p) == pytest.approx(p * p / ((1 - p) ** 2 + p * p), abs=1e-15)
    with pytest.raises(ValueError):
        decoded_qber_law(-0.1)


# -- encode --------------------------------------------------------------------

def test_encode_ideal_is_exact_on_random_inputs():
    rng = np.random.default_rng(7)
    for _ in range(20):
        chi = haar_random_ket(1, rng)
        success, rho, records = encode(chi)
        assert success == pytest.approx(0.5, abs=1e-12)
        assert fidelity(rho, code_ket(chi)) == pytest.approx(1.0, abs=1e-12)
        assert {r.outcome for r in records} == {"+", "-"}
        assert sum(r.prob for r in records) == pytest.approx(0.5, abs=1e-12)


def test_encode_plus_branch_only_halves_the_yield():
    rng = np.random.default_rng(8)
    chi = haar_random_ket(1, rng)
    success, rho, records = encode(chi, use_minus_branches=False)
    assert success == pytest.approx(0.25, abs=1e-12)
    assert fidelity(rho, code_ket(chi)) == pytest.approx(1.0, abs=1e-12)
    assert [r.outcome for r in records] == ["+"]


def test_encode_with_swapped_pair_component():
    # a psi+ ancilla flips the partner photon of the code word
    rng = np.random.default_rng(9)
    chi = haar_random_ket(1, rng)
    success, rho, _ = encode(chi, bell_ket("psi+").density())
    assert success == pytest.approx(0.5, abs=1e-12)
    expected = apply(PAULI_X, code_ket(chi), (1,))
    assert fidelity(rho, expected) == pytest.approx(1.0, abs=1e-12)


def test_encode_input_validation():
    with pytest.raises(ValueError):
        encode(bell_ket("phi+"))  # two photons where one is expected
    with pytest.raises(TypeError):
        encode(np.array([1.0, 0.0]))


def test_encode_agrees_with_explicit_beam_splitter_routing():
    """The fixed-register parity projector shortcut must reproduce the
    explicit optical route (PBS + coincidence + polarizer) for arbitrary
    inputs and every Bell component of the ancilla."""
    rng = np.random.default_rng(10)
    z0 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)  # Z on photon 0 of 2
    for kind in BELL_LABELS:
        for _ in range(5):
            chi = haar_random_ket(1, rng)
            success, rho, _ = encode(chi, bell_ket(kind).density())

            st = PhotonicState.product(
                PhotonicState.single("a", "1", chi),
                PhotonicState.bell(("b", "c"), ("2", "3"), kind),
            )
            st = pbs(st, "1", "2", "1p", "2p")
            p_coin, kept = coincidence_postselect(st, ("1p", "2p", "3"))
            acc = np.zeros((4, 4), dtype=complex)
            weight = 0.0
            for axis, minus in ((KET_PLUS, False), (KET_MINUS, True)):
                p_b, rem = polarizer_project(kept, "1p", axis.array)
                if rem is None:
                    continue
                vec = rem.ket_on_modes(("2p", "3")).array
                if minus:
                    vec = z0 @ vec
                acc += p_b * np.outer(vec, vec.conj())
                weight += p_b
            assert success == pytest.approx(p_coin * weight, abs=1e-12)
            assert np.allclose(rho.array, acc / weight, atol=1e-12)


# -- transmit ------------------------------------------------------------------

def test_transmit_applies_independent_channels():
    rng = np.random.default_rng(11)
    rho = haar_random_ket(2, rng).density()
    a, b = PauliChannel.bit_flip(0.2), PauliChannel.phase_flip(0.4)
    out = transmit(rho, a, b)
    expected = pauli_apply(b, pauli_apply(a, rho, 0), 1)
    assert np.allclose(out.array, expected.array, atol=1e-14)


def test_transmit_accepts_the_wave_plate_realization():
    rho = code_ket(KET_PLUS).density()
    via_plates = transmit(rho, WaveplateSandwich(15.0))
    via_channel = transmit(rho, PauliChannel.bit_flip(0.25))
    assert np.allclose(via_plates.array, via_channel.array, atol=1e-12)


# -- decode and error rejection --------------------------------------------------

def test_noiseless_roundtrip():
    rng = np.random.default_rng(12)
    for _ in range(10):
        chi = haar_random_ket(1, rng)
        _, rho, _ = encode(chi)
        accept, out, _ = decode(rho)
        assert accept == pytest.approx(1.0, abs=1e-12)
        assert fidelity(out, chi) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("photon", [0, 1])
def test_single_flip_is_rejected(photon):
    rng = np.random.default_rng(13)
    chi = haar_random_ket(1, rng)
    _, rho, _ = encode(chi)
    flipped = apply(PAULI_X, rho, (photon,))
    accept, out, _ = decode(flipped)
    assert accept < 1e-14
    assert out is None


def test_double_flip_is_accepted_as_a_logical_flip():
    rng = np.random.default_rng(14)
    chi = haar_random_ket(1, rng)
    _, rho, _ = encode(chi)
    flipped = apply(PAULI_X, apply(PAULI_X, rho, (0,)), (1,))
    accept, out, _ = decode(flipped)
    assert accept == pytest.approx(1.0, abs=1e-12)
    assert fidelity(out, apply(PAULI_X, chi, (0,))) == pytest.approx(1.0, abs=1e-12)


# -- heralded preparation --------------------------------------------------------

def test_herald_prepares_every_reference_state():
    src = BellDiagonalSource.ideal()
    for s in SixState:
        prob, rho = heralded_input(src, s.ket)
        assert prob == pytest.approx(0.5, abs=1e-12)
        assert fidelity(rho, s.ket) == pytest.approx(1.0, abs=1e-12)


def test_herald_transposes_the_pair_error():
    # one-hot Bell components act on the kept photon as the transposed Pauli
    paulis = {"phi+": PAULI_I, "phi-": PAULI_Z, "psi+": PAULI_X}
    paulis["psi-"] = Ket(np.array([0, 1.0]))  # placeholder, handled below
    rng = np.random.default_rng(15)
    chi = haar_random_ket(1, rng)
    for idx, kind in enumerate(BELL_LABELS):
        lams = [0.0] * 4
        lams[idx] = 1.0
        prob, rho = heralded_input(BellDiagonalSource(tuple(lams)), chi)
        assert prob == pytest.approx(0.5, abs=1e-12)
        if kind == "psi-":
            sigma = PAULI_X.array @ PAULI_Z.array
        else:
            sigma = paulis[kind].array
        expected = Ket(sigma.T @ chi.array)
        assert fidelity(rho, expected) == pytest.approx(1.0, abs=1e-12)


# -- full analytic pipeline -------------------------------------------------------

@pytest.mark.parametrize("p", P_GRID)
def test_ideal_error_rates_follow_the_closed_form(p):
    cfg = PipelineConfig.ideal()
    for s in SixState:
        out = run_analytic(cfg, s, p)
        expected = 0.0 if s.basis == "PM" else decoded_qber_law(p)
        assert out.qber == pytest.approx(expected, abs=1e-12)
        assert out.accept_prob == pytest.approx((1 - p) ** 2 + p * p, abs=1e-12)
        assert out.total_yield == pytest.approx(((1 - p) ** 2 + p * p) / 2, abs=1e-12)


def test_plus_branch_only_yield():
    out = run_analytic(PipelineConfig.ideal(use_minus_branches=False), "H", 0.2)
    assert out.total_yield == pytest.approx(((0.8) ** 2 + 0.04) / 8, abs=1e-12)
    assert out.qber == pytest.approx(decoded_qber_law(0.2), abs=1e-12)


def test_direct_baseline():
    for p in (0.0, 0.1, 0.3):
        assert run_direct_baseline("H", p) == pytest.approx(p, abs=1e-12)
        assert run_direct_baseline("R", p) == pytest.approx(p, abs=1e-12)
        assert run_direct_baseline("+", p) == pytest.approx(0.0, abs=1e-12)
    assert run_direct_baseline("+", 0.3, "phaseflip") == pytest.approx(0.3, abs=1e-12)
    assert run_direct_baseline("H", 0.3, "phaseflip") == pytest.approx(0.0, abs=1e-12)


def test_six_state_average_requires_all_six():
    per_state = {s: decoded_qber_law(0.2) if s.basis != "PM" else 0.0 for s in SixState}
    assert six_state_average(per_state) == pytest.approx(2 / 3 * decoded_qber_law(0.2), abs=1e-14)
    per_state.pop(SixState.L)
    with pytest.raises(ValueError, match="missing"):
        six_state_average(per_state)


@pytest.mark.parametrize("p", [0.0, 0.1, 0.25, 0.4])
def test_rotated_frame_swaps_the_protected_basis(p):
    cfg = phase_error_wrap(PipelineConfig.ideal(channel_kind="phaseflip"))
    assert cfg.phase_error_mode
    for s in SixState:
        out = run_analytic(cfg, s, p)
        expected = 0.0 if s.basis == "HV" else decoded_qber_law(p)
        assert out.qber == pytest.approx(expected, abs=1e-12)
    # the output leaves the pipeline in the original frame
    out = run_analytic(cfg, "H", p)
    assert fidelity(out.output_state, KET_H) == pytest.approx(1.0, abs=1e-12)


def test_unrotated_pipeline_passes_phase_noise_through():
    out = run_analytic(PipelineConfig.ideal(channel_kind="phaseflip"), "+", 0.25)
    # two independent phase flips on a parity code act as a logical phase flip
    assert out.accept_prob == pytest.approx(1.0, abs=1e-12)
    assert out.qber > 0.3


# -- calibrated imperfections ------------------------------------------------------

CAL_V = 0.9393390674513354  # 0.83 / (0.94 * 0.94), frozen


def test_calibrated_parity_visibility_value():
    src = calibrate_from_visibilities(0.97, 0.94)
    v = calibrate_parity_visibility(src, src, 0.83)
    assert v == pytest.approx(CAL_V, abs=1e-15)
    assert PipelineConfig.calibrated().parity_visibility == pytest.approx(CAL_V, abs=1e-15)


def test_calibration_rejects_unreachable_targets():
    src = calibrate_from_visibilities(0.97, 0.94)
    with pytest.raises(CalibrationError):
        calibrate_parity_visibility(src, src, 0.99)
    with pytest.raises(CalibrationError):
        PipelineConfig.calibrated(encoded_visibility_target=0.99)


def test_four_photon_visibility_hits_the_calibration_target():
    rho, vis = ghz_intermediate(PipelineConfig.ideal())
    plus = basis_ket("HHHH").array + basis_ket("VVVV").array
    assert vis == pytest.approx(1.0, abs=1e-12)
    assert fidelity(rho, Ket(plus / np.sqrt(2))) == pytest.approx(1.0, abs=1e-12)
    _, vis = ghz_intermediate(PipelineConfig.calibrated())
    assert vis == pytest.approx(0.83, abs=1e-12)


def test_decoded_two_photon_visibility_regression():
    _, vis = ghz_decoded(PipelineConfig.ideal())
    assert vis == pytest.approx(1.0, abs=1e-12)
    _, vis = ghz_decoded(PipelineConfig.calibrated())
    assert vis == pytest.approx(0.7788935835789639, abs=1e-12)


def test_calibrated_zero_noise_error_floors_regression():
    cfg = PipelineConfig.calibrated()
    floors = {s: run_analytic(cfg, s, 0.0).qber for s in SixState}
    assert floors[SixState.H] == pytest.approx(0.015, abs=1e-12)
    assert floors[SixState.V] == pytest.approx(0.015, abs=1e-12)
    assert floors[SixState.PLUS] == pytest.approx(0.11055320821051805, abs=1e-12)
    assert floors[SixState.MINUS] == pytest.approx(0.11055320821051805, abs=1e-12)
    assert floors[SixState.R] == pytest.approx(0.12298236113996962, abs=1e-12)
    assert floors[SixState.L] == pytest.approx(0.12298236113996962, abs=1e-12)


def test_parity_visibility_only_degrades_the_coherent_bases():
    cfg = PipelineConfig.ideal(parity_visibility=0.8)
    assert run_analytic(cfg, "H", 0.0).qber == pytest.approx(0.0, abs=1e-12)
    plus = run_analytic(cfg, "+", 0.0).qber
    # two parity checks at visibility v leave |±> coherence at v², so the
    # error is (1 − v²)/2
    assert plus == pytest.approx((1 - 0.8 ** 2) / 2, abs=1e-12)
