"""
Photonic realization: diffraction-grating state preparation, Mach-Zehnder
photon counting and two-party coincidence statistics.

A single photon behind a grating of slit period ``L`` has the transverse
wavefunction ``Psi(x) = T(x) f_G(x)`` with ``T(x) = sum_m c_m exp(2 pi i m x / L)``
and a Gaussian envelope ``f_G`` of width ``sigma``.  With ``ell = 2L`` this is a
modular packet whose position teeth come from the ``c_m`` and whose momentum
teeth come from the envelope.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .chsh import categorical_counts
from .modular import (
    DEFAULT_RESOLUTION,
    PBAR_PERIOD,
    ModularFrame,
    ModularWavepacket,
    pair_marginal_expectation,
    setting_correlation,
    setting_index,
    single_party_expectation,
)

VALIDITY_LIMIT = 0.2
SWAP_SUCCESS_PROBABILITY = 0.5
SETTINGS = (0.0, math.pi / 2)
# CHSH setting pairs and their signs
CHSH_PAIRS = (
    ((0.0, 0.0), 1),
    ((0.0, math.pi / 2), 1),
    ((math.pi / 2, 0.0), 1),
    ((math.pi / 2, math.pi / 2), -1),
)


class GratingValidityWarning(UserWarning):
    """``L / sigma`` is too large for the separable modular form."""


@dataclass(frozen=True)
class GratingSpec:
    """Grating of slit period ``L`` with Gaussian teeth, Gaussian envelope ``sigma``.

    ``transverse_shift`` moves the grating (and so the teeth) across the beam;
    ``slm_phase_slope`` is the modular momentum imprinted by the SLM.
    """

    L: float
    kappa: float
    sigma: float
    transverse_shift: float = 0.0
    slm_phase_slope: float = 0.0

    def __post_init__(self):
        for name in ("L", "kappa", "sigma"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def validity_ratio(self) -> float:
        return self.L / self.sigma

    @property
    def warning(self) -> bool:
        return self.validity_ratio > VALIDITY_LIMIT


def transmission_coeffs(kappa: float, m_max: int | None = None, tail: float = 1e-14):
    """Fourier coefficients ``c_m ~ exp(-m^2 kappa^2 / 2)`` for ``|m| <= m_max``.

    Normalized so ``sum |c_m|^2 = 1``.  Raises if the discarded ``|c_m|^2`` mass
    would be ``tail`` or more; with ``m_max=None`` the smallest adequate cutoff
    is used.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")

    def discarded(mm):
        # |c_m|^2 beyond mm relative to the kept mass, bounded by a geometric tail
        m = np.arange(mm + 1, mm + 200)
        return 2 * np.exp(-(m**2) * kappa**2).sum()

    if m_max is None:
        m_max = 0
        while discarded(m_max) >= tail:
            m_max += 1
    elif m_max < 0:
        raise ValueError("m_max must be nonnegative")
    elif discarded(m_max) >= tail:
        raise ValueError(f"m_max={m_max} leaves a tail of {discarded(m_max):.2g} >= {tail:g}")
    m = np.arange(-m_max, m_max + 1)
    c = np.exp(-(m**2) * kappa**2 / 2)
    return m, c / np.linalg.norm(c)


@dataclass(frozen=True)
class GratingMapping:
    """Modular packet produced by a grating, with the parameters behind it."""

    frame: ModularFrame
    packet: ModularWavepacket
    xbar_width_param: float  # kappa^2 L^2 / (2 pi)^2
    pbar_width_param: float  # h^2 / (2 pi sigma)^2
    validity_ratio: float
    warning: bool


def grating_to_modular(spec: GratingSpec, hbar: float = 1.0) -> GratingMapping:
    """Map grating optics onto a modular packet with ``ell = 2L``.

    The position teeth of ``T`` are Gaussians of amplitude width
    ``kappa L / (2 pi)`` and the momentum comb has width ``hbar / sigma``;
    the width parameters ``kappa^2 L^2/(2 pi)^2`` and ``h^2/(2 pi sigma)^2`` are
    the squares of these.  Emits ``GratingValidityWarning`` when
    ``L / sigma > 0.2``.
    """
    frame = ModularFrame(ell=2 * spec.L, hbar=hbar)
    sx = spec.kappa * spec.L / (2 * math.pi)
    sp = hbar / spec.sigma
    a_x = (spec.transverse_shift % spec.L) / frame.ell
    a_p = spec.slm_phase_slope / frame.p_period
    if not 0 <= a_p < PBAR_PERIOD:
        raise ValueError(f"slm_phase_slope {spec.slm_phase_slope} outside [0, h/ell)")
    packet = ModularWavepacket(a_x, a_p, sx / frame.ell, sp / frame.p_period)
    if spec.warning:
        warnings.warn(
            f"L/sigma = {spec.validity_ratio:.3g} > {VALIDITY_LIMIT}: separable modular form degrades",
            GratingValidityWarning,
            stacklevel=2,
        )
    return GratingMapping(
        frame,
        packet,
        xbar_width_param=spec.kappa**2 * spec.L**2 / (2 * math.pi) ** 2,
        pbar_width_param=frame.h**2 / (2 * math.pi * spec.sigma) ** 2,
        validity_ratio=spec.validity_ratio,
        warning=spec.warning,
    )


def _transmission(spec, x, m_max=None):
    m, c = transmission_coeffs(spec.kappa, m_max)
    phase = np.exp(2j * np.pi * np.multiply.outer(np.asarray(x) - spec.transverse_shift, m) / spec.L)
    return phase @ c


def grating_wavefunction(spec: GratingSpec, x_grid, hbar: float = 1.0, m_max=None) -> np.ndarray:
    """``T(x) f_G(x)`` times the SLM phase, normalized on the uniform grid ``x_grid``."""
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("x_grid must be a 1D grid")
    dx = np.diff(x)
    if not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
        raise ValueError("x_grid must be uniform")
    if x[0] > -5 * spec.sigma or x[-1] < 5 * spec.sigma:
        raise ValueError("x_grid must cover at least +-5 sigma")
    tooth = spec.kappa * spec.L / (2 * math.pi)
    if dx[0] >= tooth / 4:
        raise ValueError(f"grid spacing {dx[0]:.3g} does not resolve comb teeth of width {tooth:.3g}")
    ell = 2 * spec.L
    n = np.floor(x / ell)
    psi = _transmission(spec, x, m_max) * np.exp(-(x**2) / (2 * spec.sigma**2)) / (spec.sigma * math.pi)
    psi = psi * np.exp(1j * spec.slm_phase_slope * n * ell / hbar)
    return psi / math.sqrt(float(np.sum(np.abs(psi) ** 2)) * dx[0])


def grating_modular_density(spec: GratingSpec, nx: int = 256, npbar: int = 128, hbar: float = 1.0):
    """Modular density of the grating photon on ``[0, L) x [0, h/ell)``.

    Evaluates ``sum_n Psi(xbar + n ell) exp(-i pbar n ell / hbar)`` without the
    separable approximation and returns ``(x_frac, u_frac, density)`` in the
    fractional coordinates of ``ModularWavepacket.density``.
    """
    ell = 2 * spec.L
    x = np.arange(nx) * spec.L / nx
    u = np.arange(npbar) / npbar
    nmax = math.ceil(12 * spec.sigma / ell) + 2
    n = np.arange(-nmax, nmax + 1)
    pos = x[:, None] + n[None, :] * ell
    amp = _transmission(spec, pos.ravel()).reshape(pos.shape) * np.exp(-(pos**2) / (2 * spec.sigma**2))
    amp = amp * np.exp(1j * spec.slm_phase_slope * n * ell / hbar)
    zak = amp @ np.exp(-2j * np.pi * np.outer(n, u))
    rho = np.abs(zak) ** 2
    xf = x / ell
    rho /= rho.sum() * (xf[1] - xf[0]) * (u[1] - u[0])
    return xf, u, rho


def wrap_and_compare(spec: GratingSpec, nx: int = 256, npbar: int = 128, hbar: float = 1.0) -> float:
    """Relative sup-norm gap between the exact grating density and its modular packet."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GratingValidityWarning)
        packet = grating_to_modular(spec, hbar).packet
    x, u, rho = grating_modular_density(spec, nx, npbar, hbar)
    ref = packet.density(x, u)
    return float(np.max(np.abs(rho - ref)) / np.max(ref))


def apply_slm_phase(packet: ModularWavepacket, a_pbar: float) -> ModularWavepacket:
    """Translate the modular-momentum centre by ``a_pbar`` (fraction of ``h/ell``)."""
    new = packet.a_pbar + a_pbar
    if not 0 <= new < PBAR_PERIOD:
        raise ValueError(f"shifted a_pbar={new} leaves [0, 1); wrap the shift explicitly")
    return replace(packet, a_pbar=new)


# -- interferometer statistics ----------------------------------------------------


@dataclass(frozen=True)
class MachZehnderOutcome:
    p_plus: float
    p_minus: float
    phi: float

    def __post_init__(self):
        if abs(self.p_plus + self.p_minus - 1) > 1e-12:
            raise ValueError("outcome probabilities do not sum to 1")
        for p in (self.p_plus, self.p_minus):
            if not -1e-12 <= p <= 1 + 1e-12:
                raise ValueError("outcome probability outside [0, 1]")

    @property
    def expectation(self) -> float:
        return self.p_plus - self.p_minus


def mach_zehnder_probs(
    packet: ModularWavepacket,
    phi: float,
    frame: ModularFrame = ModularFrame(),
    partner: ModularWavepacket | None = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> MachZehnderOutcome:
    """Photon-count probabilities ``p_pm = (1 pm <A_phi>) / 2`` at the two outputs.

    Without ``partner`` the photon is alone in ``|f>``; with ``partner`` it is
    party ``a`` of the entangled pair built from the two packets.
    """
    setting_index(phi)
    if partner is None:
        e = single_party_expectation(packet, phi, resolution)
    else:
        e = pair_marginal_expectation(packet, partner, phi, "a", resolution)
    return MachZehnderOutcome((1 + e) / 2, (1 - e) / 2, phi)


@dataclass
class CoincidenceTable:
    """Per setting pair ``(phi, phi')``, a 2x2 table over outcomes ``(+, -)``.

    ``kind`` is ``"prob"`` or ``"counts"``.
    """

    tables: dict = field(default_factory=dict)
    kind: str = "prob"
    shots: int | None = None

    def __post_init__(self):
        for key, t in self.tables.items():
            t = np.asarray(t)
            if t.shape != (2, 2):
                raise ValueError(f"table for {key} is not 2x2")
            if self.kind == "prob" and abs(t.sum() - 1) > 1e-10:
                raise ValueError(f"probabilities for {key} sum to {t.sum():.12g}")
            if self.kind == "counts" and self.shots is not None and t.sum() != self.shots:
                raise ValueError(f"counts for {key} do not sum to {self.shots}")

    def correlation(self, key) -> float:
        t = np.asarray(self.tables[key], dtype=float)
        return float((t[0, 0] + t[1, 1] - t[0, 1] - t[1, 0]) / t.sum())

    def chsh(self) -> float:
        return sum(s * self.correlation(k) for k, s in CHSH_PAIRS)

    def chsh_standard_error(self) -> float:
        """Binomial standard error of ``chsh()`` from finite counts."""
        var = 0.0
        for k, _ in CHSH_PAIRS:
            n = float(np.sum(self.tables[k]))
            e = self.correlation(k)
            var += (1 - e * e) / n
        return math.sqrt(var)


def coincidence_povm_probs(
    packet_a: ModularWavepacket,
    packet_b: ModularWavepacket,
    phi: float,
    phi_prime: float,
    frame: ModularFrame = ModularFrame(),
    resolution: int = DEFAULT_RESOLUTION,
) -> np.ndarray:
    """2x2 coincidence probabilities ``P_kl`` for settings ``(phi, phi')``.

    ``P_kl = (1 + k<A_phi> + l<B_phi'> + kl<A_phi B_phi'>) / 4``.
    """
    ma = pair_marginal_expectation(packet_a, packet_b, phi, "a", resolution)
    mb = pair_marginal_expectation(packet_a, packet_b, phi_prime, "b", resolution)
    e = setting_correlation(packet_a, packet_b, phi, phi_prime, resolution)
    p = np.empty((2, 2))
    for i, k in enumerate((1, -1)):
        for j, l in enumerate((1, -1)):
            p[i, j] = (1 + k * ma + l * mb + k * l * e) / 4
    return p


def chsh_coincidences(packet_a, packet_b, frame=ModularFrame(), resolution=DEFAULT_RESOLUTION) -> CoincidenceTable:
    """Coincidence probabilities for all four CHSH setting pairs."""
    tables = {k: coincidence_povm_probs(packet_a, packet_b, *k, frame, resolution) for k, _ in CHSH_PAIRS}
    return CoincidenceTable(tables, "prob")


def sample_coincidences(table: CoincidenceTable, shots: int, seed: int) -> CoincidenceTable:
    """Multinomial counts per setting pair, keyed on ``(seed, setting index)``."""
    if table.kind != "prob":
        raise ValueError("can only sample from a probability table")
    counts = {}
    for s, (key, t) in enumerate(table.tables.items()):
        counts[key] = categorical_counts(t, shots, key=[seed, s + 1])
    return CoincidenceTable(counts, "counts", shots)


def polarization_coeffs(sign: int = 1) -> np.ndarray:
    """Amplitudes of the polarization state on ``(HH, HV, VH, VV)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r2 = math.sqrt(2)
    n = 2 * math.sqrt(2 - sign * r2)
    hv = sign * 1j * (r2 - sign)
    return np.array([1, hv, hv, 1], dtype=complex) / n


@dataclass(frozen=True)
class EntangledPair:
    """Pair state prepared by swapping polarization entanglement onto packets.

    The swap succeeds conditionally; ``success_probability`` is bookkeeping
    only and is not simulated event by event.
    """

    packet_a: ModularWavepacket
    packet_b: ModularWavepacket
    sign: int = 1
    success_probability: float = SWAP_SUCCESS_PROBABILITY

    @property
    def amplitudes(self) -> np.ndarray:
        return polarization_coeffs(self.sign)
