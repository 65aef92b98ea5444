"""
Binary POVMs from bounded observables, bipartite correlations and the CHSH
combination for finite-dimensional systems.

Any Hermitian operator ``A`` with spectrum in ``[-1, 1]`` defines a two-outcome
measurement ``E_pm = (1 pm A) / 2`` whose outcome statistics reproduce
``<A> = P_+ - P_-``.  Correlations built this way can be plugged into the CHSH
combination without binning the spectrum of ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_ATOL = 1e-12
SPECTRUM_ATOL = 1e-10
POSITIVITY_ATOL = 1e-10
UNITARY_ATOL = 1e-12
NORM_ATOL = 1e-12
PROB_ATOL = 1e-10

TSIRELSON = 2.0 * np.sqrt(2.0)

# Outcome labels in table order: index 0 is +1, index 1 is -1.
OUTCOMES = (1, -1)


def _as_square(entries, name):
    m = np.array(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class DiscreteObservable:
    """Hermitian matrix whose eigenvalues lie in ``[-1, 1]``."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_square(self.entries, "observable")
        if not np.allclose(m, m.conj().T, rtol=0, atol=HERMITIAN_ATOL):
            raise ValueError("observable is not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -1 - SPECTRUM_ATOL or ev.max() > 1 + SPECTRUM_ATOL:
            raise ValueError(
                f"observable spectrum [{ev.min():.6g}, {ev.max():.6g}] exceeds [-1, 1]; "
                "use rescale_to_unit_spectrum for an explicit rescaling"
            )
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True)
class UnitaryOperator:
    entries: np.ndarray

    def __post_init__(self):
        m = _as_square(self.entries, "unitary")
        gap = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
        if gap > UNITARY_ATOL * max(1.0, np.sqrt(m.shape[0])):
            raise ValueError(f"operator is not unitary (|U^dag U - 1|_F = {gap:.3g})")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class BinaryPOVM:
    """Two-outcome POVM ``(E_+, E_-)``."""

    e_plus: np.ndarray
    e_minus: np.ndarray

    def __post_init__(self):
        ep = _as_square(self.e_plus, "e_plus")
        em = _as_square(self.e_minus, "e_minus")
        if ep.shape != em.shape:
            raise ValueError("effects have different shapes")
        if not np.allclose(ep + em, np.eye(ep.shape[0]), rtol=0, atol=HERMITIAN_ATOL):
            raise ValueError("effects do not sum to the identity")
        for e in (ep, em):
            if not np.allclose(e, e.conj().T, rtol=0, atol=HERMITIAN_ATOL):
                raise ValueError("effect is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -POSITIVITY_ATOL:
                raise ValueError("effect is not positive semidefinite")
        object.__setattr__(self, "e_plus", ep)
        object.__setattr__(self, "e_minus", em)

    @property
    def dim(self) -> int:
        return self.e_plus.shape[0]

    def observable(self) -> np.ndarray:
        """``E_+ - E_-``."""
        return self.e_plus - self.e_minus


@dataclass(frozen=True)
class BipartiteState:
    """Pure or mixed state on ``C^dim_a (x) C^dim_b``.

    ``data`` is either a state vector of length ``dim_a * dim_b`` or a density
    matrix of that size.
    """

    dim_a: int
    dim_b: int
    data: np.ndarray

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValueError("dimensions must be positive")
        n = self.dim_a * self.dim_b
        d = np.array(self.data, dtype=complex)
        if d.ndim == 1:
            if d.shape != (n,):
                raise ValueError(f"state vector must have length {n}")
            if abs(np.vdot(d, d).real - 1) > NORM_ATOL:
                raise ValueError("state vector is not normalized")
        elif d.ndim == 2:
            if d.shape != (n, n):
                raise ValueError(f"density matrix must be {n}x{n}")
            if not np.allclose(d, d.conj().T, rtol=0, atol=HERMITIAN_ATOL):
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(d).real - 1) > NORM_ATOL:
                raise ValueError("density matrix does not have unit trace")
            if np.linalg.eigvalsh(d).min() < -POSITIVITY_ATOL:
                raise ValueError("density matrix is not positive semidefinite")
        else:
            raise ValueError("state must be a vector or a matrix")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def expectation(self, op: np.ndarray) -> float:
        if self.is_pure:
            return float(np.vdot(self.data, op @ self.data).real)
        return float(np.trace(self.data @ op).real)

    @classmethod
    def from_vector(cls, vec, dim_a, dim_b=None):
        dim_b = dim_a if dim_b is None else dim_b
        return cls(dim_a, dim_b, np.asarray(vec, dtype=complex))

    @classmethod
    def maximally_mixed(cls, dim_a, dim_b=None):
        dim_b = dim_a if dim_b is None else dim_b
        n = dim_a * dim_b
        return cls(dim_a, dim_b, np.eye(n) / n)


@dataclass(frozen=True)
class JointProbs:
    """``p[k, l]`` for outcomes ordered as ``OUTCOMES`` on both parties."""

    p: np.ndarray = field(repr=True)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape != (2, 2):
            raise ValueError("joint probabilities must be a 2x2 table")
        if p.min() < -PROB_ATOL or p.max() > 1 + PROB_ATOL:
            raise ValueError("joint probability outside [0, 1]")
        if abs(p.sum() - 1) > PROB_ATOL:
            raise ValueError(f"joint probabilities sum to {p.sum():.12g}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __getitem__(self, kl):
        k, l = kl
        return self.p[OUTCOMES.index(k), OUTCOMES.index(l)]

    def correlation(self) -> float:
        """``P_++ + P_-- - P_+- - P_-+``."""
        p = self.p
        return float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])

    def marginal_a(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def marginal_b(self) -> np.ndarray:
        return self.p.sum(axis=0)


# -- POVM construction ------------------------------------------------------


def povm_from_observable(a: DiscreteObservable) -> BinaryPOVM:
    """``E_pm = (1 pm A) / 2``."""
    one = np.eye(a.dim)
    return BinaryPOVM((one + a.entries) / 2, (one - a.entries) / 2)


def povm_from_unitary(d: UnitaryOperator) -> BinaryPOVM:
    """``E_pm = (1 pm D^dag)(1 pm D) / 4``.

    For unitary ``D`` this coincides with ``povm_from_observable`` applied to
    ``(D + D^dag) / 2``; the product form is what an interferometer realizes.
    """
    one = np.eye(d.dim)
    u = d.entries
    ud = u.conj().T
    ep = (one + ud) @ (one + u) / 4
    em = (one - ud) @ (one - u) / 4
    # symmetrize away rounding so the Hermiticity check is about the input only
    return BinaryPOVM((ep + ep.conj().T) / 2, (em + em.conj().T) / 2)


def observable_from_unitary(d: UnitaryOperator) -> DiscreteObservable:
    """Real part ``(D + D^dag) / 2`` of a unitary."""
    u = d.entries
    return DiscreteObservable((u + u.conj().T) / 2)


def two_level_observable(theta: float, normalized: bool = False) -> DiscreteObservable:
    """Two-level observable with eigenvalues ``cos(theta + (-1)^j pi/2)``.

    That is ``diag(-sin theta, sin theta)``.  With ``normalized`` the spectrum
    is rescaled to ``pm 1`` (a Pauli-z up to sign).
    """
    ev = np.array([np.cos(theta + np.pi / 2), np.cos(theta - np.pi / 2)])
    if normalized:
        s = abs(np.sin(theta))
        if s < 1e-14:
            raise ValueError("cannot normalize: sin(theta) = 0 gives a zero spectrum")
        ev = ev / s
    return DiscreteObservable(np.diag(ev))


def rescale_to_unit_spectrum(entries) -> DiscreteObservable:
    """Divide a Hermitian matrix by its spectral radius (if larger than 1)."""
    m = np.array(entries, dtype=complex)
    m = (m + m.conj().T) / 2
    r = np.abs(np.linalg.eigvalsh(m)).max()
    if r > 1:
        m = m / r
    return DiscreteObservable(m)


# -- correlations -------------------------------------------------------------


def _check_dims(state: BipartiteState, a: DiscreteObservable, b: DiscreteObservable):
    if a.dim != state.dim_a or b.dim != state.dim_b:
        raise ValueError(
            f"dimension mismatch: state is {state.dim_a}x{state.dim_b}, "
            f"observables are {a.dim} and {b.dim}"
        )


def correlation(state: BipartiteState, a: DiscreteObservable, b: DiscreteObservable) -> float:
    """``<A (x) B>``."""
    _check_dims(state, a, b)
    return state.expectation(np.kron(a.entries, b.entries))


def joint_probs(state: BipartiteState, a: DiscreteObservable, b: DiscreteObservable) -> JointProbs:
    """Coincidence table of the two binary POVMs built from ``a`` and ``b``.

    ``P_kl = (1 + k<A> + l<B> + kl<A (x) B>) / 4``.  Entries are reported as
    computed, so they may be negative at the 1e-16 level.
    """
    _check_dims(state, a, b)
    ia, ib = np.eye(a.dim), np.eye(b.dim)
    ma = state.expectation(np.kron(a.entries, ib))
    mb = state.expectation(np.kron(ia, b.entries))
    mab = state.expectation(np.kron(a.entries, b.entries))
    p = np.empty((2, 2))
    for i, k in enumerate(OUTCOMES):
        for j, l in enumerate(OUTCOMES):
            p[i, j] = (1 + k * ma + l * mb + k * l * mab) / 4
    return JointProbs(p)


def chsh(state, a1, a2, b1, b2) -> float:
    """``E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2)``."""
    return (
        correlation(state, a1, b1)
        + correlation(state, a1, b2)
        + correlation(state, a2, b1)
        - correlation(state, a2, b2)
    )


# -- sampling ---------------------------------------------------------------


def shot_uniforms(key, start: int, n: int) -> np.ndarray:
    """Uniform variates for shots ``start .. start+n-1`` of the stream ``key``.

    Backed by the counter-based Philox generator, so the variate of a given
    shot depends only on ``(key, shot index)`` and any partition of a shot
    range into batches reproduces the same outcomes.
    """
    if start < 0 or n < 0:
        raise ValueError("shot range must be nonnegative")
    key = np.asarray(key, dtype=np.uint64).ravel()
    if key.size == 1:
        key = np.array([key[0], 0], dtype=np.uint64)
    bg = np.random.Philox(key=key)
    # Philox emits four 64-bit words per counter step
    bg.advance(start // 4)
    skip = start % 4
    raw = bg.random_raw(skip + n)[skip:]
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _cdf(probs) -> np.ndarray:
    p = np.clip(np.asarray(probs, dtype=float).ravel(), 0.0, None)
    total = p.sum()
    if total <= 0:
        raise ValueError("probabilities are all zero")
    cdf = np.cumsum(p / total)
    cdf[-1] = 1.0
    return cdf


def categorical_counts(probs, shots: int, key, start: int = 0) -> np.ndarray:
    """Counts of ``shots`` categorical draws, shaped like ``probs``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = np.asarray(probs, dtype=float)
    u = shot_uniforms(key, start, shots)
    idx = np.searchsorted(_cdf(probs), u, side="right")
    return np.bincount(idx, minlength=probs.size).reshape(probs.shape)


def sample_outcomes(probs: JointProbs, shots: int, seed: int) -> np.ndarray:
    """Simulate ``shots`` coincidence events; returns a 2x2 integer table."""
    return categorical_counts(probs.p, shots, key=[seed, 0])


# -- random ensembles for audits ----------------------------------------------


def haar_state(dim_a: int, dim_b: int, rng: np.random.Generator) -> BipartiteState:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    n = dim_a * dim_b
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return BipartiteState(dim_a, dim_b, v / np.linalg.norm(v))


def random_observable(dim: int, rng: np.random.Generator) -> DiscreteObservable:
    """Random observable with eigenvalues drawn uniformly from ``[-1, 1]``."""
    q = random_unitary(dim, rng).entries
    ev = rng.uniform(-1, 1, size=dim)
    m = (q * ev) @ q.conj().T
    return DiscreteObservable((m + m.conj().T) / 2)


def random_unitary(dim: int, rng: np.random.Generator) -> UnitaryOperator:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return UnitaryOperator(q * (d / np.abs(d)))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def singlet() -> BipartiteState:
    return BipartiteState.from_vector(np.array([0, 1, -1, 0]) / np.sqrt(2), 2)
