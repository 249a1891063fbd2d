"""Photons in labeled spatial modes: wave plates, polarizing beam splitters,
coincidence post-selection and polarizer projections.

A PhotonicState is a superposition over assignments of (spatial mode,
polarization) to the photons of a register.  Photons are indistinguishable:
a term is keyed by its multiset of (mode, polarization) occupations, not by
which photon carries which mode.  That identification is what lets
amplitudes from different routing histories interfere after a parity check,
which is the physical heart of this protocol.  The photon-id tuple is kept
for arity bookkeeping only.
"""

from __future__ import annotations

import numpy as np

from .algebra import ATOL, PROB_EPS, Ket, Operator, _array

#: term key: sorted tuple of (mode, polarization) pairs, duplicates allowed
TermKey = tuple[tuple[str, str], ...]

HALF = "half"
QUARTER = "quarter"

_POL_INDEX = {"H": 0, "V": 1}


def _rotation(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s], [s, c]])


def jones_matrix(kind: str, angle_deg: float) -> Operator:
    """Jones matrix of a wave plate with fast axis at `angle_deg` from H.

    HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]] and QWP(t) is
    R(t) diag(1, i) R(-t), so QWP(0) = diag(1, i).
    """
    t = float(np.deg2rad(angle_deg))
    if kind == HALF:
        c, s = np.cos(2 * t), np.sin(2 * t)
        mat = np.array([[c, s], [s, -c]], dtype=complex)
    elif kind == QUARTER:
        mat = _rotation(t) @ np.diag([1.0, 1j]) @ _rotation(-t)
    else:
        raise ValueError(f"unknown wave plate kind {kind!r}")
    return Operator(mat, assert_unitary=True)


class PhotonicState:
    """Superposition over (mode, polarization) assignments of a photon register."""

    def __init__(self, photons, terms) -> None:
        self.photons = tuple(str(p) for p in photons)
        if len(set(self.photons)) != len(self.photons):
            raise ValueError(f"duplicate photon ids {self.photons}")
        cleaned: dict[TermKey, complex] = {}
        for key, amp in terms.items():
            key = tuple(sorted((str(m), str(p)) for m, p in key))
            if len(key) != len(self.photons):
                raise ValueError(
                    f"term {key} assigns {len(key)} photons, register has {len(self.photons)}"
                )
            for _, pol in key:
                if pol not in _POL_INDEX:
                    raise ValueError(f"invalid polarization {pol!r}")
            amp = complex(amp)
            if amp != 0:
                cleaned[key] = cleaned.get(key, 0.0) + amp
        self.terms = {k: a for k, a in cleaned.items() if a != 0}

    # -- constructors ------------------------------------------------------

    @classmethod
    def single(cls, photon: str, mode: str, ket) -> "PhotonicState":
        """One photon in `mode` with polarization ket (a_H, a_V)."""
        vec = _array(ket).ravel()
        if vec.size != 2:
            raise ValueError("single-photon polarization ket must have dimension 2")
        terms = {}
        for pol, amp in zip("HV", vec):
            if amp != 0:
                terms[((mode, pol),)] = amp
        return cls((photon,), terms)

    @classmethod
    def from_ket(cls, photons, modes, ket) -> "PhotonicState":
        """Register state from a dense ket, photon j sitting in modes[j]."""
        vec = _array(ket).ravel()
        n = len(tuple(modes))
        if vec.size != 2 ** n:
            raise ValueError(f"ket dim {vec.size} does not match {n} modes")
        terms: dict[TermKey, complex] = {}
        for index in np.flatnonzero(np.abs(vec) > 0):
            bits = [(int(index) >> (n - 1 - j)) & 1 for j in range(n)]
            key = tuple((str(m), "V" if b else "H") for m, b in zip(modes, bits))
            terms[key] = vec[index]
        return cls(photons, terms)

    @classmethod
    def bell(cls, photons, modes, kind: str) -> "PhotonicState":
        """Bell pair of two photons: kind in {'phi+', 'phi-', 'psi+', 'psi-'}."""
        amp = 1.0 / np.sqrt(2.0)
        (ma, mb) = modes
        table = {
            "phi+": {((ma, "H"), (mb, "H")): amp, ((ma, "V"), (mb, "V")): amp},
            "phi-": {((ma, "H"), (mb, "H")): amp, ((ma, "V"), (mb, "V")): -amp},
            "psi+": {((ma, "H"), (mb, "V")): amp, ((ma, "V"), (mb, "H")): amp},
            "psi-": {((ma, "H"), (mb, "V")): amp, ((ma, "V"), (mb, "H")): -amp},
        }
        if kind not in table:
            raise ValueError(f"unknown Bell state {kind!r}")
        return cls(photons, table[kind])

    @classmethod
    def product(cls, *states: "PhotonicState") -> "PhotonicState":
        """Tensor product of registers occupying disjoint modes."""
        photons: tuple[str, ...] = ()
        terms: dict[TermKey, complex] = {(): 1.0}
        seen_modes: set[str] = set()
        for st in states:
            photons += st.photons
            st_modes = {m for key in st.terms for m, _ in key}
            if st_modes & seen_modes:
                raise ValueError(f"mode collision in product: {st_modes & seen_modes}")
            seen_modes |= st_modes
            terms = {
                tuple(sorted(k1 + k2)): a1 * a2
                for k1, a1 in terms.items()
                for k2, a2 in st.terms.items()
            }
        return cls(photons, terms)

    # -- inspection --------------------------------------------------------

    @property
    def n_photons(self) -> int:
        return len(self.photons)

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def normalized(self) -> "PhotonicState":
        n2 = self.norm_sq()
        if n2 <= PROB_EPS:
            raise ValueError("cannot normalize a zero photonic state")
        scale = 1.0 / np.sqrt(n2)
        return PhotonicState(self.photons, {k: a * scale for k, a in self.terms.items()})

    def modes(self) -> set[str]:
        return {m for key in self.terms for m, _ in key}

    def ket_on_modes(self, mode_order) -> Ket:
        """Dense ket with photon j = the photon found in mode_order[j].

        Requires every term to occupy exactly the listed modes, one photon
        each (i.e. call this only after coincidence post-selection).
        """
        order = [str(m) for m in mode_order]
        if len(order) != self.n_photons:
            raise ValueError("mode_order arity does not match the register")
        vec = np.zeros(2 ** len(order), dtype=complex)
        for key, amp in self.terms.items():
            by_mode: dict[str, list[str]] = {}
            for m, p in key:
                by_mode.setdefault(m, []).append(p)
            if sorted(by_mode) != sorted(order) or any(len(v) != 1 for v in by_mode.values()):
                raise ValueError(f"term {key} does not occupy modes {order} one-to-one")
            index = 0
            for m in order:
                index = 2 * index + _POL_INDEX[by_mode[m][0]]
            vec[index] = amp
        return Ket(vec)

    def __repr__(self) -> str:
        parts = [f"{a:.4g} * |{key}>" for key, a in sorted(self.terms.items())]
        return "PhotonicState(" + " + ".join(parts) + ")"


def waveplate_apply(state: PhotonicState, mode: str, kind: str,
                    angle_deg: float) -> PhotonicState:
    """Apply a wave plate to the photon occupying `mode`, term by term.

    Terms without a photon in the mode pass unchanged (the plate acts on an
    empty beam path); a term with two photons bunched in the mode is an error.
    """
    jones = jones_matrix(kind, angle_deg).array
    return _single_photon_op(state, mode, jones)


def apply_jones(state: PhotonicState, mode: str, jones) -> PhotonicState:
    """Apply an arbitrary 2x2 polarization operator to the photon in `mode`."""
    mat = _array(jones)
    if mat.shape != (2, 2):
        raise ValueError("jones operator must be a 2x2 matrix")
    return _single_photon_op(state, mode, mat)


def _single_photon_op(state: PhotonicState, mode: str, mat: np.ndarray) -> PhotonicState:
    out: dict[TermKey, complex] = {}
    for key, amp in state.terms.items():
        slots = [i for i, (m, _) in enumerate(key) if m == mode]
        if len(slots) > 1:
            raise ValueError(f"mode {mode!r} holds more than one photon in term {key}")
        if not slots:
            out[key] = out.get(key, 0.0) + amp
            continue
        i = slots[0]
        col = _POL_INDEX[key[i][1]]
        for row, pol in enumerate("HV"):
            coeff = mat[row, col]
            if coeff == 0:
                continue
            new_key = tuple(sorted(key[:i] + ((mode, pol),) + key[i + 1:]))
            out[new_key] = out.get(new_key, 0.0) + amp * coeff
    return PhotonicState(state.photons, out)


def pbs(state: PhotonicState, in_a: str, in_b: str, out_c: str,
        out_d: str) -> PhotonicState:
    """Polarizing beam splitter: H transmits, V reflects, no extra phase.

    (in_a, H) -> (out_c, H);  (in_a, V) -> (out_d, V)
    (in_b, H) -> (out_d, H);  (in_b, V) -> (out_c, V)

    Photons outside the input modes pass through untouched; it is an error
    for such a photon to already occupy an output mode.  Bunched outputs
    (two photons in one arm) are kept: post-selection is a separate step.
    """
    route = {
        (in_a, "H"): out_c, (in_a, "V"): out_d,
        (in_b, "H"): out_d, (in_b, "V"): out_c,
    }
    out: dict[TermKey, complex] = {}
    for key, amp in state.terms.items():
        new_pairs = []
        for m, p in key:
            if m in (in_a, in_b):
                new_pairs.append((route[(m, p)], p))
            else:
                if m in (out_c, out_d):
                    raise ValueError(
                        f"pass-through photon already occupies output mode {m!r}"
                    )
                new_pairs.append((m, p))
        new_key = tuple(sorted(new_pairs))
        out[new_key] = out.get(new_key, 0.0) + amp
    return PhotonicState(state.photons, out)


def coincidence_postselect(state: PhotonicState, required_modes):
    """Keep terms with exactly one photon in each required mode.

    Returns (probability, conditional state or None).  Photons in modes not
    listed are unconstrained.
    """
    required = [str(m) for m in required_modes]
    total = state.norm_sq()
    if total <= PROB_EPS:
        raise ValueError("coincidence_postselect on a zero state")
    kept: dict[TermKey, complex] = {}
    for key, amp in state.terms.items():
        counts = {m: 0 for m in required}
        for m, _ in key:
            if m in counts:
                counts[m] += 1
        if all(c == 1 for c in counts.values()):
            kept[key] = amp
    prob = sum(abs(a) ** 2 for a in kept.values()) / total
    if prob <= PROB_EPS:
        return prob, None
    scale = 1.0 / np.sqrt(prob * total)
    return prob, PhotonicState(state.photons, {k: a * scale for k, a in kept.items()})


def polarizer_project(state: PhotonicState, mode: str, axis):
    """Project the photon in `mode` onto a polarization axis and remove it.

    Returns (probability, remaining state or None).  Every term must hold
    exactly one photon in the mode; amplitudes of terms that agree on the
    remaining occupations merge coherently, which is how the two parity
    branches interfere.
    """
    vec = _array(axis).ravel()
    if vec.size != 2:
        raise ValueError("polarizer axis must be a single-photon ket")
    n = float(np.linalg.norm(vec))
    if abs(n - 1.0) >= ATOL:
        raise ValueError("polarizer axis must be normalized")
    total = state.norm_sq()
    if total <= PROB_EPS:
        raise ValueError("polarizer_project on a zero state")
    out: dict[TermKey, complex] = {}
    for key, amp in state.terms.items():
        slots = [i for i, (m, _) in enumerate(key) if m == mode]
        if len(slots) != 1:
            raise ValueError(
                f"mode {mode!r} must hold exactly one photon, term {key} has {len(slots)}"
            )
        i = slots[0]
        coeff = np.conj(vec[_POL_INDEX[key[i][1]]])
        if coeff == 0:
            continue
        new_key = key[:i] + key[i + 1:]
        out[new_key] = out.get(new_key, 0.0) + amp * coeff
    prob = sum(abs(a) ** 2 for a in out.values()) / total
    if prob <= PROB_EPS:
        return prob, None
    scale = 1.0 / np.sqrt(prob * total)
    remaining = state.photons[:-1]  # ids are bookkeeping; identity is not tracked
    return prob, PhotonicState(remaining, {k: a * scale for k, a in out.items()})
