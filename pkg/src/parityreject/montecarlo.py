"""Trial-level Monte Carlo of the error-rejection pipeline.

Two interchangeable kernels sample the same experiment.  The vector kernel
tracks the Pauli frame of each trial with numpy bit arrays — exact for
Pauli channels, where every intermediate state is a Pauli transport of the
input and all branch probabilities are 0, 1/2 or 1.  The bench kernel
drives a PhotonicState through the literal optical elements per trial and
is the only one that can sample the wave-plate sandwich as a unitary,
where the ± branch weights genuinely depend on the state.

Reproducibility: trial i of a labeled run always consumes uniforms
[i*N_SLOTS, (i+1)*N_SLOTS) of a counter-based Philox stream keyed by
(master seed, label), so counts are independent of chunking and any
sub-range of trials can be replayed in isolation.  Slot layout:

  0  ancilla-pair Bell component
  1  herald-pair Bell component (drawn but idle without a herald)
  2  herald projection outcome (succeeds at probability 1/2)
  3  first parity-check coincidence (probability 1/2)
  4  encode parity-coherence toggle (u < (1-v)/2 applies a code Z)
  5  encode ± branch (gates acceptance only when minus branches are dropped)
  6  channel element on the kept check photon
  7  channel element on the transmitted partner
  8  decode coincidence (deterministic for Pauli noise; fractional for the
     unitary sandwich)
  9  decode parity-coherence toggle
 10  decode ± branch
 11  output measurement (a Born draw; the vector kernel knows the bit exactly)

The kernels agree trial by trial wherever the bench branch probabilities
are exactly 0, 1/2 or 1; floating-point rounding of those probabilities
can in principle flip a comparison against the shared uniform, at odds of
order 1e-16 per trial.  In the 45°-rotated frame the per-trial pairing of
channel draws additionally requires a single-component channel (pure bit
or phase flip); mixed channels still agree in distribution.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .algebra import HADAMARD, KET_MINUS, KET_PLUS, PAULI_Z
from .bench import (
    PhotonicState,
    apply_jones,
    coincidence_postselect,
    pbs,
    polarizer_project,
)
from .noise import BELL_LABELS, PAULI_MATRICES, PauliChannel, WaveplateSandwich
from .protocol import ROTATED_BY_HADAMARD, PipelineConfig, SixState

#: uniforms consumed per trial, one row of the stream
N_SLOTS = 12

_BELL_XBIT = np.array((0, 0, 1, 1), dtype=np.uint8)
_BELL_ZBIT = np.array((0, 1, 0, 1), dtype=np.uint8)
_PAULI_XBIT = np.array((0, 1, 1, 0), dtype=np.uint8)
_PAULI_ZBIT = np.array((0, 0, 1, 1), dtype=np.uint8)


@dataclass(frozen=True)
class SeedPolicy:
    """Counter-based stream factory: one independent Philox stream per label."""

    master_seed: int

    def philox_key(self, label: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.master_seed}|{label}".encode()).digest()
        return np.frombuffer(digest[:16], dtype=np.uint64).copy()

    def uniforms(self, label: str, start: int, count: int,
                 width: int = N_SLOTS) -> np.ndarray:
        """Rows [start, start+count) of the label's uniform table.

        One double consumes one 64-bit word and Philox advances in blocks
        of four words, so the stream is positioned by whole blocks plus a
        discarded remainder; any split of [0, n) into (start, count) ranges
        reproduces the same table.
        """
        if start < 0 or count < 0:
            raise ValueError("start and count must be non-negative")
        words = start * width
        bitgen = np.random.Philox(key=self.philox_key(label))
        if words >= 4:
            bitgen = bitgen.advance(words // 4)
        gen = np.random.Generator(bitgen)
        if words % 4:
            gen.random(words % 4)
        return gen.random((count, width))


def stream_label(cfg: PipelineConfig, state: SixState, noise) -> str:
    """Stable run label: same label => same uniform rows in either kernel."""
    if isinstance(noise, WaveplateSandwich):
        tag = f"sandwich:{noise.theta_deg:.17g}"
    elif isinstance(noise, PauliChannel):
        tag = "pauli:" + ",".join(f"{p:.17g}" for p in noise.probs)
    else:
        raise TypeError(f"unsupported noise model {type(noise).__name__}")
    frame = "rot" if cfg.phase_error_mode else "std"
    return f"{state.value}|{tag}|{frame}"


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n."""
    if n <= 0:
        raise ValueError("need at least one observation")
    if not 0 <= k <= n:
        raise ValueError(f"count {k} outside [0, {n}]")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence {confidence} outside (0, 1)")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    # at k = 0 (k = n) the bound is exactly 0 (1); rounding must not leave
    # an interval that misses the point estimate itself
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class TrialStats:
    """Counts and interval estimates from one Monte Carlo run."""

    n_trials: int
    n_accepted: int
    n_errors: int
    seed: int
    qber_hat: float     # nan when nothing was accepted
    yield_hat: float
    ci_low: float       # Wilson bounds on the QBER; nan when undefined
    ci_high: float

    @property
    def qber_defined(self) -> bool:
        return self.n_accepted > 0

    @classmethod
    def from_counts(cls, n_trials: int, n_accepted: int, n_errors: int,
                    seed: int, confidence: float = 0.95) -> "TrialStats":
        if not 0 <= n_errors <= n_accepted <= n_trials:
            raise ValueError(
                f"inconsistent counts: {n_errors} errors, {n_accepted} accepted, "
                f"{n_trials} trials")
        if n_accepted:
            qber = n_errors / n_accepted
            lo, hi = wilson_interval(n_errors, n_accepted, confidence)
        else:
            qber = lo = hi = float("nan")
        return cls(n_trials, n_accepted, n_errors, seed, qber,
                   n_accepted / n_trials if n_trials else 0.0, lo, hi)


def convergence_check(stats: TrialStats, oracle: float) -> bool:
    """Whether the run's interval covers an exact reference value."""
    if not stats.qber_defined:
        raise ValueError("no accepted trials: the error rate is undefined")
    return stats.ci_low <= oracle <= stats.ci_high


def _draw(cumulative: np.ndarray, u) -> np.ndarray:
    idx = np.searchsorted(cumulative, u, side="right")
    return np.minimum(idx, len(cumulative) - 1)


def _vector_counts(cfg: PipelineConfig, state: SixState, noise: PauliChannel,
                   policy: SeedPolicy, label: str, start: int,
                   count: int) -> tuple[int, int]:
    """Pauli-frame bit algebra over one chunk of trials.

    Single flips fail the decode parity gate by construction; of the
    surviving trials, the net code X toggles H/V, the net code Z (channel
    Z components, source φ⁻/ψ⁻ admixtures and the two coherence toggles)
    toggles +/−, and their XOR toggles R/L.
    """
    u = policy.uniforms(label, start, count)
    if cfg.phase_error_mode:
        state = ROTATED_BY_HADAMARD[state]
        noise = noise.conjugated_by_hadamard()

    anc = _draw(cfg.ancilla.cumulative(), u[:, 0])
    xa, za = _BELL_XBIT[anc], _BELL_ZBIT[anc]
    if cfg.herald is not None:
        her = _draw(cfg.herald.cumulative(), u[:, 1])
        xh, zh = _BELL_XBIT[her], _BELL_ZBIT[her]
        ok = u[:, 2] < 0.5
    else:
        xh = zh = np.zeros(count, dtype=np.uint8)
        ok = np.ones(count, dtype=bool)

    ok &= u[:, 3] < 0.5
    if not cfg.use_minus_branches:
        ok &= u[:, 5] < 0.5

    chan_cum = noise.cumulative()
    c1 = _draw(chan_cum, u[:, 6])
    c2 = _draw(chan_cum, u[:, 7])
    x1, z1 = _PAULI_XBIT[c1], _PAULI_ZBIT[c1]
    x2, z2 = _PAULI_XBIT[c2], _PAULI_ZBIT[c2]
    ok &= (x1 ^ xa ^ x2) == 0
    if not cfg.use_minus_branches:
        ok &= u[:, 10] < 0.5

    toggle = 0.5 * (1.0 - cfg.parity_visibility)
    z_deph = (u[:, 4] < toggle).astype(np.uint8) ^ (u[:, 9] < toggle).astype(np.uint8)
    netx = xh ^ x1
    netz = zh ^ za ^ z1 ^ z2 ^ z_deph
    basis = state.basis
    if basis == "HV":
        err = netx
    elif basis == "PM":
        err = netz
    else:
        err = netx ^ netz
    n_accepted = int(np.count_nonzero(ok))
    n_errors = int(np.count_nonzero(ok & err.astype(bool)))
    return n_accepted, n_errors


def _bench_counts(cfg: PipelineConfig, state: SixState, noise,
                  policy: SeedPolicy, label: str, start: int,
                  count: int) -> tuple[int, int]:
    """Per-trial optical simulation over one chunk of trials.

    Builds the photon register, routes it through both beam splitters, and
    gates every post-selection against the trial's uniform row, so a run is
    bit-compatible with the vector kernel wherever the branch probabilities
    are exact.  In the rotated frame the channel is physically wrapped in
    45° half-wave plates and the source and analyzer are rotated.
    """
    u = policy.uniforms(label, start, count)
    rotated = cfg.phase_error_mode
    h = HADAMARD.array
    z = PAULI_Z.array
    chi = state.ket.array
    prep = h @ chi if rotated else chi
    herald_target = np.conj(prep)
    ortho = state.orthogonal.ket.array

    sandwich = isinstance(noise, WaveplateSandwich)
    if sandwich:
        plates = [noise.unitary(+1).array, noise.unitary(-1).array]
    else:
        plates = list(PAULI_MATRICES)
    if rotated:
        plates = [h @ mat @ h for mat in plates]

    anc_idx = _draw(cfg.ancilla.cumulative(), u[:, 0])
    her_idx = (_draw(cfg.herald.cumulative(), u[:, 1])
               if cfg.herald is not None else None)
    if sandwich:
        ch1 = (u[:, 6] >= 0.5).astype(np.intp)   # u < 0.5 picks the +theta plate
        ch2 = (u[:, 7] >= 0.5).astype(np.intp)
    else:
        ch1 = _draw(noise.cumulative(), u[:, 6])
        ch2 = _draw(noise.cumulative(), u[:, 7])
    toggle = 0.5 * (1.0 - cfg.parity_visibility)
    deph_enc = u[:, 4] < toggle
    deph_dec = u[:, 9] < toggle

    n_accepted = 0
    n_errors = 0
    for i in range(count):
        row = u[i]
        if cfg.herald is not None:
            pair = PhotonicState.bell((0, 9), ("1", "4"), BELL_LABELS[her_idx[i]])
            p_herald, st_in = polarizer_project(pair, "4", herald_target)
            if st_in is None or not row[2] < p_herald:
                continue
        else:
            st_in = PhotonicState.single(0, "1", prep)
        ancilla = PhotonicState.bell((2, 3), ("2", "3"), BELL_LABELS[anc_idx[i]])
        st = PhotonicState.product(st_in, ancilla)

        st = pbs(st, "1", "2", "1p", "2p")
        p_coin, st = coincidence_postselect(st, ("1p", "2p", "3"))
        if st is None or not row[3] < p_coin:
            continue
        if deph_enc[i]:
            st = apply_jones(st, "1p", z)
        p_plus, st_plus = polarizer_project(st, "1p", KET_PLUS)
        if st_plus is not None and row[5] < p_plus:
            st = st_plus
        else:
            if not cfg.use_minus_branches:
                continue
            _, st = polarizer_project(st, "1p", KET_MINUS)
            if st is None:
                continue
            st = apply_jones(st, "2p", z)

        st = apply_jones(st, "2p", plates[ch1[i]])
        st = apply_jones(st, "3", plates[ch2[i]])

        st = pbs(st, "2p", "3", "2pp", "3p")
        p_coin, st = coincidence_postselect(st, ("2pp", "3p"))
        if st is None or not row[8] < p_coin:
            continue
        if deph_dec[i]:
            st = apply_jones(st, "2pp", z)
        p_plus, st_plus = polarizer_project(st, "2pp", KET_PLUS)
        if st_plus is not None and row[10] < p_plus:
            st = st_plus
        else:
            if not cfg.use_minus_branches:
                continue
            _, st = polarizer_project(st, "2pp", KET_MINUS)
            if st is None:
                continue
            st = apply_jones(st, "3p", z)

        n_accepted += 1
        if rotated:
            st = apply_jones(st, "3p", h)
        p_err, _ = polarizer_project(st, "3p", ortho)
        if row[11] < p_err:
            n_errors += 1
    return n_accepted, n_errors


_KERNELS = {"vector": _vector_counts, "bench": _bench_counts}


def run_trials(cfg: PipelineConfig, state, noise, n_trials: int,
               policy: SeedPolicy, *, kernel: str | None = None,
               chunk_size: int = 250_000, confidence: float = 0.95) -> TrialStats:
    """Monte Carlo of the pipeline at one (input state, channel) point.

    kernel None picks "vector" for Pauli channels and "bench" for the
    wave-plate sandwich, whose per-trial interference the bit algebra
    cannot represent.  Counts are invariant to chunk_size and to splitting
    the trial range across calls.
    """
    s = SixState.coerce(state)
    if n_trials <= 0:
        raise ValueError("n_trials must be positive")
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    if kernel is None:
        kernel = "bench" if isinstance(noise, WaveplateSandwich) else "vector"
    if kernel not in _KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; pick from {sorted(_KERNELS)}")
    if kernel == "vector" and isinstance(noise, WaveplateSandwich):
        raise ValueError("the vector kernel cannot sample the unitary sandwich; "
                         "use kernel='bench' or convert via sandwich_as_channel")
    label = stream_label(cfg, s, noise)
    fn = _KERNELS[kernel]
    n_accepted = 0
    n_errors = 0
    for chunk_start in range(0, n_trials, chunk_size):
        n = min(chunk_size, n_trials - chunk_start)
        acc, err = fn(cfg, s, noise, policy, label, chunk_start, n)
        n_accepted += acc
        n_errors += err
    return TrialStats.from_counts(n_trials, n_accepted, n_errors,
                                  policy.master_seed, confidence)
