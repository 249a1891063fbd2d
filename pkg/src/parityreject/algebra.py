"""Complex linear algebra over small multi-photon polarization registers.

States live in the H/V product basis: photon 0 owns the most significant
bit, H = 0 and V = 1, so |HV> of a two-photon register sits at index 1.
Amplitudes are plain complex128 numbers.  Everything here is pure and
immutable, and sized for the dense, dim <= 16 registers this protocol
needs; there is deliberately no sparse or Fock-space machinery.
"""

from __future__ import annotations

import numpy as np

#: tolerance for algebraic identities (norms, unitarity, hermiticity)
ATOL = 1e-12
#: eigenvalue slack tolerated after repeated channel composition
POSITIVITY_TOL = 1e-10
#: conditional states below this probability are undefined
PROB_EPS = 1e-14

_SQRT2 = float(np.sqrt(2.0))


def _as_state_array(data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def _require_power_of_two(n: int, name: str) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"{name} dimension must be a power of two, got {n}")


class Ket:
    """Pure polarization state of one or more photons."""

    def __init__(self, amplitudes) -> None:
        vec = _as_state_array(amplitudes, "ket")
        if vec.ndim != 1:
            raise ValueError("ket must be a one-dimensional amplitude vector")
        _require_power_of_two(vec.size, "ket")
        vec.setflags(write=False)
        self.array = vec

    @property
    def dim(self) -> int:
        return self.array.size

    @property
    def n_photons(self) -> int:
        return self.dim.bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    def normalized(self) -> "Ket":
        n = self.norm()
        if n <= PROB_EPS:
            raise ValueError("cannot normalize a zero ket")
        return Ket(self.array / n)

    def density(self) -> "DensityOperator":
        v = self.normalized().array
        return DensityOperator(np.outer(v, v.conj()))

    def __repr__(self) -> str:
        return f"Ket({np.array2string(self.array, precision=6, suppress_small=True)})"


class Operator:
    """Dense matrix acting on a polarization register.

    Args:
        matrix: square array of dimension 2**k.
        assert_unitary: validate U+U = I at construction.
        assert_hermitian: validate A = A+ at construction.
    """

    def __init__(self, matrix, *, assert_unitary: bool = False,
                 assert_hermitian: bool = False) -> None:
        mat = _as_state_array(matrix, "operator")
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("operator must be a square matrix")
        _require_power_of_two(mat.shape[0], "operator")
        if assert_unitary:
            defect = float(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0]))))
            if defect >= ATOL:
                raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
        if assert_hermitian:
            defect = float(np.max(np.abs(mat - mat.conj().T)))
            if defect >= ATOL:
                raise ValueError(f"matrix is not hermitian (defect {defect:.3e})")
        self.is_unitary = bool(assert_unitary)
        self.is_hermitian = bool(assert_hermitian)
        mat.setflags(write=False)
        self.array = mat

    @property
    def dim(self) -> int:
        return self.array.shape[0]

    @property
    def n_photons(self) -> int:
        return self.dim.bit_length() - 1

    def dagger(self) -> "Operator":
        return Operator(self.array.conj().T)

    def __repr__(self) -> str:
        return f"Operator({np.array2string(self.array, precision=6, suppress_small=True)})"


class DensityOperator:
    """Hermitian, positive, unit-trace matrix over a polarization register.

    Positivity is enforced up to an eigenvalue slack of -POSITIVITY_TOL so
    that long chains of channel applications do not trip on rounding.
    """

    def __init__(self, matrix) -> None:
        mat = _as_state_array(matrix, "density operator")
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("density operator must be a square matrix")
        _require_power_of_two(mat.shape[0], "density operator")
        herm = float(np.max(np.abs(mat - mat.conj().T)))
        if herm >= ATOL:
            raise ValueError(f"density operator is not hermitian (defect {herm:.3e})")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) >= ATOL:
            raise ValueError(f"density operator trace is {tr:.12g}, expected 1")
        low = float(np.min(np.linalg.eigvalsh(mat)))
        if low < -POSITIVITY_TOL:
            raise ValueError(f"density operator has negative eigenvalue {low:.3e}")
        mat.setflags(write=False)
        self.array = mat

    @property
    def dim(self) -> int:
        return self.array.shape[0]

    @property
    def n_photons(self) -> int:
        return self.dim.bit_length() - 1

    def purity(self) -> float:
        return float(np.real(np.trace(self.array @ self.array)))

    def __repr__(self) -> str:
        return f"DensityOperator({np.array2string(self.array, precision=6, suppress_small=True)})"


def _array(x) -> np.ndarray:
    if isinstance(x, (Ket, Operator, DensityOperator)):
        return x.array
    return _as_state_array(x, "array")


def tensor(a, b):
    """Kronecker product of two kets, two operators or two density operators."""
    pairs = ((Ket, Ket), (Operator, Operator), (DensityOperator, DensityOperator))
    for ka, kb in pairs:
        if isinstance(a, ka) and isinstance(b, kb):
            out = np.kron(a.array, b.array)
            if ka is Operator:
                return Operator(out)
            return ka(out)
    raise TypeError(
        f"tensor requires two operands of the same kind, got "
        f"{type(a).__name__} and {type(b).__name__}"
    )


def _check_photon_indices(on_photons, n_photons: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in on_photons)
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate photon indices {idx}")
    for i in idx:
        if not 0 <= i < n_photons:
            raise ValueError(f"photon index {i} out of range for {n_photons} photons")
    return idx


def embed(matrix, on_photons, n_photons: int) -> np.ndarray:
    """Embed an operator on the listed photons into the full register.

    The operator's own photon order follows the order of `on_photons`,
    which may be any permutation of distinct register indices.
    """
    mat = _array(matrix)
    idx = _check_photon_indices(on_photons, n_photons)
    k = len(idx)
    if mat.shape != (2 ** k, 2 ** k):
        raise ValueError(f"operator dim {mat.shape} does not match {k} photons")
    rest = [i for i in range(n_photons) if i not in idx]
    full = np.kron(mat, np.eye(2 ** len(rest), dtype=complex))
    # current tensor-leg order is (idx..., rest...); permute back to 0..n-1
    order = list(idx) + rest
    inv = np.argsort(order)
    tens = full.reshape((2,) * (2 * n_photons))
    axes = list(inv) + [n_photons + i for i in inv]
    return np.ascontiguousarray(tens.transpose(axes).reshape(2 ** n_photons, 2 ** n_photons))


def apply(op, target, on_photons):
    """Apply an operator to the listed photons of a ket or density operator.

    Density operators are conjugated (U rho U+), so `op` is expected to be
    unitary in that case.
    """
    n = target.n_photons if isinstance(target, (Ket, DensityOperator)) else None
    if n is None:
        raise TypeError("apply target must be a Ket or DensityOperator")
    full = embed(op, on_photons, n)
    if isinstance(target, Ket):
        return Ket(full @ target.array)
    return DensityOperator(full @ target.array @ full.conj().T)


def project(state, projector, on_photons):
    """Project a state, returning (probability, conditional state or None).

    The projector must be idempotent on its own subspace.  Probabilities at
    or below PROB_EPS leave the conditional state undefined (None).
    """
    proj = _array(projector)
    defect = float(np.max(np.abs(proj @ proj - proj)))
    if defect >= ATOL:
        raise ValueError(f"projector is not idempotent (defect {defect:.3e})")
    n = state.n_photons
    full = embed(proj, on_photons, n)
    if isinstance(state, Ket):
        amp = full @ state.array
        prob = float(np.real(np.vdot(state.array, amp)))
        prob = max(prob, 0.0)
        if prob <= PROB_EPS:
            return prob, None
        return prob, Ket(amp / np.sqrt(prob))
    if isinstance(state, DensityOperator):
        kept = full @ state.array @ full
        prob = max(float(np.real(np.trace(kept))), 0.0)
        if prob <= PROB_EPS:
            return prob, None
        return prob, DensityOperator(kept / prob)
    raise TypeError("project target must be a Ket or DensityOperator")


def _partial_trace_array(rho: np.ndarray, keep, n_photons: int) -> np.ndarray:
    idx = sorted(_check_photon_indices(keep, n_photons))
    rest = [i for i in range(n_photons) if i not in idx]
    dk, dr = 2 ** len(idx), 2 ** len(rest)
    tens = rho.reshape((2,) * (2 * n_photons))
    axes = idx + rest + [n_photons + i for i in idx] + [n_photons + i for i in rest]
    block = tens.transpose(axes).reshape(dk, dr, dk, dr)
    return np.einsum("arbr->ab", block)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every photon not listed in `keep` (result in ascending order)."""
    if not isinstance(rho, DensityOperator):
        raise TypeError("partial_trace expects a DensityOperator")
    if len(tuple(keep)) == 0:
        raise ValueError("must keep at least one photon")
    return DensityOperator(_partial_trace_array(rho.array, keep, rho.n_photons))


def permute_photons(state, order):
    """Reorder a register so photon j of the result is photon order[j] of the input."""
    perm = [int(i) for i in order]
    n = state.n_photons
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
    if isinstance(state, Ket):
        vec = state.array.reshape((2,) * n).transpose(perm).ravel()
        return Ket(vec)
    if isinstance(state, DensityOperator):
        tens = state.array.reshape((2,) * (2 * n))
        axes = perm + [n + i for i in perm]
        mat = tens.transpose(axes).reshape(2 ** n, 2 ** n)
        return DensityOperator(mat)
    raise TypeError("permute_photons expects a Ket or DensityOperator")


def fidelity(rho, target: Ket) -> float:
    """<psi| rho |psi> for a density operator (or ket) against a pure target."""
    t = _array(target).ravel()
    mat = _array(rho)
    if mat.ndim == 1:
        mat = np.outer(mat, mat.conj())
    if mat.shape[0] != t.size:
        raise ValueError(f"dimension mismatch: state dim {mat.shape[0]}, target dim {t.size}")
    val = float(np.real(t.conj() @ mat @ t))
    return max(val, 0.0)


def phase_aligned(vec) -> np.ndarray:
    """Rescale so the first amplitude above 1e-12 is real and positive.

    Used for structural equality of states that are physically identical up
    to a global phase.
    """
    arr = _array(vec).ravel().copy()
    nz = np.flatnonzero(np.abs(arr) > 1e-12)
    if nz.size == 0:
        return arr
    lead = arr[nz[0]]
    return arr * (abs(lead) / lead)


def basis_ket(labels: str) -> Ket:
    """Product basis ket from a string of H/V labels, e.g. 'HVH'."""
    index = 0
    for ch in labels:
        if ch not in "HV":
            raise ValueError(f"invalid polarization label {ch!r}")
        index = 2 * index + (1 if ch == "V" else 0)
    vec = np.zeros(2 ** len(labels), dtype=complex)
    vec[index] = 1.0
    return Ket(vec)


def haar_random_ket(n_photons: int, rng: np.random.Generator) -> Ket:
    z = rng.standard_normal(2 ** n_photons) + 1j * rng.standard_normal(2 ** n_photons)
    return Ket(z / np.linalg.norm(z))


KET_H = Ket([1.0, 0.0])
KET_V = Ket([0.0, 1.0])
KET_PLUS = Ket([1.0 / _SQRT2, 1.0 / _SQRT2])
KET_MINUS = Ket([1.0 / _SQRT2, -1.0 / _SQRT2])
KET_R = Ket([1.0 / _SQRT2, 1j / _SQRT2])
KET_L = Ket([1.0 / _SQRT2, -1j / _SQRT2])

PAULI_I = Operator(np.eye(2), assert_unitary=True, assert_hermitian=True)
PAULI_X = Operator([[0, 1], [1, 0]], assert_unitary=True, assert_hermitian=True)
PAULI_Y = Operator([[0, -1j], [1j, 0]], assert_unitary=True, assert_hermitian=True)
PAULI_Z = Operator([[1, 0], [0, -1]], assert_unitary=True, assert_hermitian=True)
HADAMARD = Operator(np.array([[1, 1], [1, -1]]) / _SQRT2,
                    assert_unitary=True, assert_hermitian=True)
