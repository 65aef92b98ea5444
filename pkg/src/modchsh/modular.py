"""
Modular-variables Bell test.

Position and momentum are split as ``x = xbar + N*ell`` and
``p = pbar + M*h/ell``.  In the basis of joint modular eigenstates the two
measurement settings of each party become 2x2 blocks (``sz`` and ``sy``)
acting on the pair ``{|xbar, pbar>, |xbar + ell/2, pbar>}``, weighted by

    c(xbar)       = cos(2 pi xbar / ell)
    d(xbar, pbar) = cos(2 pi xbar / ell - pbar ell / (2 hbar))

Packets are stored in dimensionless form: positions as fractions of ``ell``
and momenta as fractions of the momentum period ``h/ell``.  In these units
``d = cos(2 pi x - pi u)`` regardless of the physical scale, and
``ModularFrame`` converts to and from absolute coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

TSIRELSON = 2.0 * math.sqrt(2.0)
LOCAL_BOUND = 2.0

# Packet widths (amplitude sigma, fraction of the axis period) at or below
# this are evaluated in the delta limit: a unit point mass at the centre.
NEAR_DELTA_WIDTH = 5e-4
# Gaussian window half-width in units of the density standard deviation.
WINDOW_SIGMAS = 9.0
DEFAULT_RESOLUTION = 64
BRUTEFORCE_MAX_NODES = 48
XBAR_PERIOD = 0.5  # packets live on [0, ell/2)
PBAR_PERIOD = 1.0


class QuadratureError(RuntimeError):
    """Quadrature failed to converge under resolution doubling."""


class NoCrossingError(ValueError):
    """Threshold bracket does not contain a sign change."""


@dataclass(frozen=True)
class ModularFrame:
    """Length scale ``ell`` and the induced momentum period ``h/ell``."""

    ell: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.ell > 0 or not self.hbar > 0:
            raise ValueError("ell and hbar must be positive")

    @property
    def h(self) -> float:
        return 2 * math.pi * self.hbar

    @property
    def p_period(self) -> float:
        return self.h / self.ell

    def wrap_position(self, x: float) -> tuple[float, int]:
        return _wrap(x, self.ell)

    def wrap_momentum(self, p: float) -> tuple[float, int]:
        return _wrap(p, self.p_period)

    def point_fractions(self, point: "ModularPoint") -> tuple[float, float]:
        return point.xbar / self.ell, point.pbar / self.p_period


def _wrap(x, period):
    n = math.floor(x / period)
    r = x - n * period
    if r >= period:  # rounding at the upper edge
        r -= period
        n += 1
    if r < 0:
        r = 0.0
    return r, int(n)


def wrap_position(x: float, frame: ModularFrame) -> tuple[float, int]:
    """Split ``x`` into ``(xbar, n)`` with ``x = xbar + n*ell`` and ``0 <= xbar < ell``."""
    return frame.wrap_position(x)


@dataclass(frozen=True)
class ModularPoint:
    """Eigenvalue pair ``(xbar, pbar)`` of a modular eigenstate, absolute units."""

    xbar: float
    pbar: float

    def validate(self, frame: ModularFrame, half: bool = False):
        xmax = frame.ell / 2 if half else frame.ell
        if not 0 <= self.xbar < xmax:
            raise ValueError(f"xbar={self.xbar} outside [0, {xmax})")
        if not 0 <= self.pbar < frame.p_period:
            raise ValueError(f"pbar={self.pbar} outside [0, {frame.p_period})")
        return self


@dataclass(frozen=True)
class ModularWavepacket:
    """Gaussian packet on ``[0, ell/2) x [0, h/ell)`` with periodic boundaries.

    The amplitude is ``f ~ exp(-(x - a_x)^2 / (2 s_x^2)) exp(-(u - a_p)^2 / (2 s_p^2))``
    wrapped onto the domain, so the probability density ``|f|^2`` is a wrapped
    normal with standard deviation ``s / sqrt(2)`` on each axis.  All four
    parameters are fractions: positions of ``ell``, momenta of ``h/ell``.
    """

    a_xbar: float
    a_pbar: float
    sigma_xbar: float
    sigma_pbar: float

    def __post_init__(self):
        if not 0 <= self.a_xbar < XBAR_PERIOD:
            raise ValueError(f"a_xbar={self.a_xbar} outside [0, 0.5)")
        if not 0 <= self.a_pbar < PBAR_PERIOD:
            raise ValueError(f"a_pbar={self.a_pbar} outside [0, 1)")
        if not (self.sigma_xbar > 0 and self.sigma_pbar > 0):
            raise ValueError("packet widths must be positive")
        if not all(map(math.isfinite, (self.sigma_xbar, self.sigma_pbar))):
            raise ValueError("packet widths must be finite")

    @classmethod
    def from_absolute(cls, frame, a_xbar, a_pbar, sigma_xbar, sigma_pbar):
        return cls(
            a_xbar / frame.ell,
            a_pbar / frame.p_period,
            sigma_xbar / frame.ell,
            sigma_pbar / frame.p_period,
        )

    def with_center(self, a_xbar=None, a_pbar=None) -> "ModularWavepacket":
        kw = {}
        if a_xbar is not None:
            kw["a_xbar"] = a_xbar % XBAR_PERIOD
        if a_pbar is not None:
            kw["a_pbar"] = a_pbar
        return replace(self, **kw)

    def xbar_density(self, x):
        """Marginal density over ``xbar`` (per unit fraction of ``ell``)."""
        return wrapped_normal_pdf(x, self.a_xbar, self.sigma_xbar / math.sqrt(2), XBAR_PERIOD)

    def pbar_density(self, u):
        return wrapped_normal_pdf(u, self.a_pbar, self.sigma_pbar / math.sqrt(2), PBAR_PERIOD)

    def density(self, x, u):
        """Joint density in fractional coordinates; integrates to 1 over the domain."""
        return np.multiply.outer(self.xbar_density(x), self.pbar_density(u))


def wrapped_normal_pdf(x, center, std, period):
    """Normal density of standard deviation ``std`` wrapped onto ``[0, period)``.

    Narrow packets use the image sum (``|n| <= ceil(8 std/period) + 2``); broad
    ones use the equivalent Fourier series, which converges faster there.
    """
    x = np.asarray(x, dtype=float)
    t = x - center
    if std <= period:
        nmax = math.ceil(8 * std / period) + 2
        n = np.arange(-nmax, nmax + 1) * period
        z = (t[..., None] - n) / std
        return np.exp(-0.5 * z * z).sum(axis=-1) / (std * math.sqrt(2 * math.pi))
    # Fourier side: tail exp(-2 pi^2 k^2 std^2 / period^2) < 1e-16 past kmax
    kmax = max(1, math.ceil(math.sqrt(37.0) * period / (math.sqrt(2) * math.pi * std)) + 1)
    k = np.arange(1, kmax + 1)
    coef = np.exp(-2 * (math.pi * k * std / period) ** 2)
    s = (coef * np.cos(2 * math.pi * k * t[..., None] / period)).sum(axis=-1)
    return (1 + 2 * s) / period


def wrapped_gaussian_density(packet: ModularWavepacket, point: ModularPoint, frame: ModularFrame) -> float:
    """Density ``|f|^2`` of ``packet`` at ``point`` in absolute units (per ``h``)."""
    point.validate(frame, half=True)
    x, u = frame.point_fractions(point)
    return float(packet.xbar_density(x) * packet.pbar_density(u)) / frame.h


# -- per-axis quadrature -------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def axis_rule(center, sigma, period, n):
    """Nodes and probability weights for one packet axis.

    ``sigma`` is the amplitude width (fraction of ``period``).  The wrapped
    density is integrated piecewise with ``n``-point Gauss-Legendre rules over
    the part of ``[0, period)`` within ``WINDOW_SIGMAS`` density standard
    deviations of the centre, split where the window crosses the domain edge.
    The weights are renormalized to sum to one.  Widths at or below
    ``NEAR_DELTA_WIDTH * period`` return the single node ``center``.
    """
    if sigma <= NEAR_DELTA_WIDTH * period:
        return np.array([float(center)]), np.array([1.0])
    std = sigma / math.sqrt(2)
    half = WINDOW_SIGMAS * std
    if 2 * half >= period:
        pieces = [(0.0, period)]
    else:
        lo, hi = center - half, center + half
        if lo < 0:
            pieces = [(0.0, hi), (lo + period, period)]
        elif hi > period:
            pieces = [(lo, period), (0.0, hi - period)]
        else:
            pieces = [(lo, hi)]
    t, w = _gauss_legendre(n)
    nodes, weights = [], []
    for a, b in pieces:
        if b <= a:
            continue
        nodes.append(a + (b - a) * (t + 1) / 2)
        weights.append(w * (b - a) / 2)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights) * wrapped_normal_pdf(nodes, center, std, period)
    total = weights.sum()
    if not total > 0:
        raise QuadratureError("packet weights vanish on the quadrature grid")
    return nodes, weights / total


def packet_rules(packet: ModularWavepacket, resolution: int):
    """``((x_nodes, x_weights), (u_nodes, u_weights))`` for a packet."""
    return (
        axis_rule(packet.a_xbar, packet.sigma_xbar, XBAR_PERIOD, resolution),
        axis_rule(packet.a_pbar, packet.sigma_pbar, PBAR_PERIOD, resolution),
    )


# -- Bell block ------------------------------------------------------------------


def sigma_blocks() -> tuple[np.ndarray, np.ndarray]:
    """``sz`` and ``sy`` in the ordered basis ``(|xbar, pbar>, |xbar + ell/2, pbar>)``."""
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    return sz, sy


def setting_weights(x, u):
    """``(c, d)`` weights at fractional coordinates ``x`` (of ell), ``u`` (of h/ell)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    c = np.cos(2 * np.pi * x)
    d = np.cos(2 * np.pi * x - np.pi * u)
    return c, d


def _bell_terms():
    sz, sy = sigma_blocks()
    return (
        np.kron(sz, sz),
        np.kron(sz, sy),
        np.kron(sy, sz),
        -np.kron(sy, sy),
    )


def bell_matrix(ca, da, cb, db):
    """4x4 block ``ca cb sz.sz + ca db sz.sy + da cb sy.sz - da db sy.sy``.

    Accepts broadcastable arrays; the matrix axes are the trailing two.
    """
    zz, zy, yz, myy = _bell_terms()
    ca, da, cb, db = (np.asarray(v, dtype=float)[..., None, None] for v in (ca, da, cb, db))
    return ca * cb * zz + ca * db * zy + da * cb * yz + da * db * myy


@dataclass(frozen=True)
class BellBlock:
    """Pointwise Bell operator on the four modular eigenstates of two parties."""

    point_a: ModularPoint
    point_b: ModularPoint
    matrix: np.ndarray
    c_a: float
    d_a: float
    c_b: float
    d_b: float

    def eigh(self):
        return np.linalg.eigh(self.matrix)

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def bell_block(point_a: ModularPoint, point_b: ModularPoint, frame: ModularFrame = ModularFrame()) -> BellBlock:
    point_a.validate(frame, half=True)
    point_b.validate(frame, half=True)
    ca, da = setting_weights(*frame.point_fractions(point_a))
    cb, db = setting_weights(*frame.point_fractions(point_b))
    m = bell_matrix(ca, da, cb, db)
    return BellBlock(point_a, point_b, m, float(ca), float(da), float(cb), float(db))


def psi_amplitudes(sign: int = 1) -> np.ndarray:
    """Eigenvectors of the origin Bell block for eigenvalue ``sign * 2 sqrt 2``.

    Basis order ``(00, 01, 10, 11)`` where 1 marks the ``xbar + ell/2`` state.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r2 = math.sqrt(2)
    cross = sign * 1j * (r2 - sign)
    norm = 2 * math.sqrt(2 - sign * r2)
    return np.array([1, cross, cross, 1], dtype=complex) / norm


@lru_cache(maxsize=2)
def _contractions(sign):
    """``<psi| s (x) s' |psi>`` for ``(s, s')`` in ``zz, zy, yz, yy`` order."""
    psi = psi_amplitudes(sign)
    sz, sy = sigma_blocks()
    pairs = ((sz, sz), (sz, sy), (sy, sz), (sy, sy))
    return tuple(float(np.vdot(psi, np.kron(s, t) @ psi).real) for s, t in pairs)


# -- expectation values ------------------------------------------------------------


def party_moments(packet: ModularWavepacket, resolution: int = DEFAULT_RESOLUTION):
    """Packet averages ``(<c>, <d>)`` of the two setting weights."""
    (x, wx), (u, wu) = packet_rules(packet, resolution)
    c, _ = setting_weights(x, 0.0)
    d = np.cos(2 * np.pi * x[:, None] - np.pi * u[None, :])
    return float(wx @ c), float(wx @ d @ wu)


def _combine(ma, mb, sign):
    kzz, kzy, kyz, kyy = _contractions(sign)
    (ca, da), (cb, db) = ma, mb
    return ca * cb * kzz + ca * db * kzy + da * cb * kyz - da * db * kyy


def setting_correlation(packet_a, packet_b, phi_a, phi_b, resolution=DEFAULT_RESOLUTION, sign=1):
    """``<A_phi_a (x) B_phi_b>`` in the packet-superposed state.

    ``phi`` is ``0`` (``sz`` weighted by ``c``) or ``pi/2`` (``sy`` weighted by ``d``).
    """
    ia, ib = setting_index(phi_a), setting_index(phi_b)
    ma = party_moments(packet_a, resolution)
    mb = ma if packet_b == packet_a else party_moments(packet_b, resolution)
    return ma[ia] * mb[ib] * _contractions(sign)[2 * ia + ib]


def setting_index(phi) -> int:
    if math.isclose(phi, 0.0, abs_tol=1e-12):
        return 0
    if math.isclose(phi, math.pi / 2, abs_tol=1e-12):
        return 1
    raise ValueError(f"unsupported setting phi={phi}; only 0 and pi/2 have closed modular forms")


def single_party_expectation(packet, phi, resolution=DEFAULT_RESOLUTION) -> float:
    """``<f| A_phi |f>`` for a lone photon prepared in ``|f>``.

    ``|f>`` only populates the ``xbar`` half of each modular pair, so ``sz``
    contributes ``+<c>`` and the off-diagonal ``sy`` contributes nothing.
    """
    if setting_index(phi) == 1:
        return 0.0
    return party_moments(packet, resolution)[0]


def pair_marginal_expectation(packet_a, packet_b, phi, party="a", resolution=DEFAULT_RESOLUTION, sign=1):
    """``<A_phi (x) 1>`` (or ``<1 (x) B_phi>``) in the packet-superposed pair state."""
    i = setting_index(phi)
    packet = {"a": packet_a, "b": packet_b}[party]
    psi = psi_amplitudes(sign)
    block = sigma_blocks()[i]
    op = np.kron(block, np.eye(2)) if party == "a" else np.kron(np.eye(2), block)
    k = float(np.vdot(psi, op @ psi).real)
    return party_moments(packet, resolution)[i] * k


def _bell_value(packet_a, packet_b, resolution, sign):
    ma = party_moments(packet_a, resolution)
    mb = ma if packet_b == packet_a else party_moments(packet_b, resolution)
    return _combine(ma, mb, sign)


def bell_expectation(
    packet_a: ModularWavepacket,
    packet_b: ModularWavepacket,
    frame: ModularFrame = ModularFrame(),
    resolution: int = DEFAULT_RESOLUTION,
    tol: float | None = None,
    sign: int = 1,
) -> float:
    """``<B>`` for the state built from ``psi_sign`` and the two packets.

    The modular eigenstates are delta-orthonormal, so ``<B>`` is the packet
    average of ``psi^dag B(point) psi``.  That integrand is bilinear in the
    per-party weights, so the 4D integral factorizes into per-party averages
    of ``c`` and ``d``.  With ``tol`` set, the value is recomputed at doubled
    resolution and ``QuadratureError`` is raised if the two differ by more.
    """
    value = _bell_value(packet_a, packet_b, resolution, sign)
    if tol is not None:
        err = abs(_bell_value(packet_a, packet_b, 2 * resolution, sign) - value)
        if not err <= tol:
            raise QuadratureError(f"<B> changed by {err:.3g} under resolution doubling (tol {tol:.1g})")
    return value


def bell_estimate(packet_a, packet_b, frame=ModularFrame(), resolution=DEFAULT_RESOLUTION, sign=1):
    """``(value, |value(2n) - value(n)|)``."""
    v = _bell_value(packet_a, packet_b, resolution, sign)
    return v, abs(_bell_value(packet_a, packet_b, 2 * resolution, sign) - v)


def bell_expectation_bruteforce(
    packet_a, packet_b, frame=ModularFrame(), resolution=32, sign=1, max_nodes=BRUTEFORCE_MAX_NODES
):
    """Tensor-grid 4D quadrature of ``psi^dag B(point) psi``.

    Builds the full Bell block at every grid point.  Used to validate the
    factorized path; ``resolution`` is capped at ``max_nodes``.
    """
    if resolution > max_nodes:
        raise ValueError(f"resolution {resolution} exceeds the brute-force budget of {max_nodes} nodes per axis")
    (xa, wxa), (ua, wua) = packet_rules(packet_a, resolution)
    (xb, wxb), (ub, wub) = packet_rules(packet_b, resolution)
    psi = psi_amplitudes(sign)
    # party b grid flattened once
    XB, UB = np.meshgrid(xb, ub, indexing="ij")
    WB = np.outer(wxb, wub).ravel()
    cb = np.cos(2 * np.pi * XB).ravel()
    db = np.cos(2 * np.pi * XB - np.pi * UB).ravel()
    total = 0.0
    for i, x in enumerate(xa):
        for j, u in enumerate(ua):
            ca, da = setting_weights(x, u)
            m = bell_matrix(ca, da, cb, db)  # (nb, 4, 4)
            vals = np.einsum("i,nij,j->n", psi.conj(), m, psi).real
            total += wxa[i] * wua[j] * float(WB @ vals)
    return total


def delta_limit_bell(a_xbar: float, frame: ModularFrame = ModularFrame()) -> float:
    """``2 sqrt2 cos^2(2 pi a_xbar / ell)``: point packets at ``(a_xbar, 0)``."""
    return TSIRELSON * math.cos(2 * math.pi * a_xbar / frame.ell) ** 2


# -- sweeps and thresholds -------------------------------------------------------


@dataclass
class SweepResult:
    a_xbar: np.ndarray
    bell: np.ndarray
    errors: np.ndarray
    converged: np.ndarray
    resolution: int
    packet: ModularWavepacket
    tol: float

    @property
    def rows(self):
        return list(zip(self.a_xbar.tolist(), self.bell.tolist()))

    @property
    def convergence_estimate(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0

    def argmax(self) -> int:
        return int(np.argmax(self.bell))

    def max(self) -> float:
        return float(np.max(self.bell))


def sweep_ax(template, ax_grid, frame=ModularFrame(), resolution=DEFAULT_RESOLUTION, tol=1e-6):
    """``<B>`` along a grid of packet centres ``a_xbar`` (fractions of ``ell``).

    Both parties use ``template`` shifted to each grid point.  Rows are
    independent; non-converged rows are flagged rather than raised.
    """
    grid = np.asarray(ax_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("empty a_xbar grid")
    if grid.min() < 0 or grid.max() >= XBAR_PERIOD:
        raise ValueError("a_xbar grid must lie in [0, 0.5)")
    vals = np.empty(grid.size)
    errs = np.empty(grid.size)
    for i, a in enumerate(grid):
        p = template.with_center(a_xbar=a)
        try:
            vals[i], errs[i] = bell_estimate(p, p, frame, resolution)
        except QuadratureError as exc:
            raise QuadratureError(f"row {i} (a_xbar={a}): {exc}") from exc
    return SweepResult(grid, vals, errs, errs <= tol, resolution, template, tol)


def default_ax_grid(n: int) -> np.ndarray:
    """``n`` cell-centred points covering ``[0, 0.5)``."""
    return (np.arange(n) + 0.5) * XBAR_PERIOD / n


def max_over_ax(template, frame=ModularFrame(), resolution=DEFAULT_RESOLUTION, coarse=64):
    """Maximize ``<B>`` over ``a_xbar``: coarse grid, then golden-section.

    ``<B>`` is periodic in ``a_xbar`` with period ``ell/2``, so the bracket
    may straddle the domain edge.
    """
    grid = np.arange(coarse) * XBAR_PERIOD / coarse

    def value(a):
        p = template.with_center(a_xbar=a % XBAR_PERIOD)
        return _bell_value(p, p, resolution, 1)

    vals = np.array([value(a) for a in grid])
    i = int(np.argmax(vals))
    h = XBAR_PERIOD / coarse
    best_a, best_v = grid[i], vals[i]
    left, right = value(best_a - h), value(best_a + h)
    if best_v >= left and best_v >= right and best_v > min(left, right):
        res = minimize_scalar(
            lambda a: -value(a),
            bracket=(best_a - h, best_a, best_a + h),
            method="golden",
            options={"xtol": 1e-8},
        )
        if -res.fun > best_v:
            best_a, best_v = float(res.x), float(-res.fun)
    return best_a % XBAR_PERIOD, best_v


@dataclass
class ThresholdResult:
    sigma_star: float
    bracket: tuple[float, float]
    iterations: int
    history: list = field(default_factory=list)  # (sigma, a_argmax, max_bell)

    @property
    def inner_max_locations(self):
        return [(s, a) for s, a, _ in self.history]


def violation_threshold(
    template,
    frame=ModularFrame(),
    resolution=DEFAULT_RESOLUTION,
    bracket=(0.01, 0.08),
    tol=5e-4,
    bound=LOCAL_BOUND,
    max_iter=100,
):
    """Width ``sigma_xbar*`` (fraction of ``ell``) where ``max_a <B>`` equals ``bound``.

    Bisection on ``sigma_xbar``; the packet's other parameters come from
    ``template``.  The returned value is the midpoint of the final bracket,
    whose width is at most ``tol``.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}: need 0 < lo < hi")
    history = []

    def excess(sigma):
        a, v = max_over_ax(replace(template, sigma_xbar=sigma), frame, resolution)
        history.append((sigma, a, v))
        return v - bound

    f_lo, f_hi = excess(lo), excess(hi)
    if np.sign(f_lo) == np.sign(f_hi) or f_lo == 0 or f_hi == 0:
        if f_lo == 0:
            return ThresholdResult(lo, (lo, hi), 0, history)
        if f_hi == 0:
            return ThresholdResult(hi, (lo, hi), 0, history)
        raise NoCrossingError(
            f"max <B> - {bound} has the same sign at both ends of [{lo}, {hi}] "
            f"({f_lo:+.4g}, {f_hi:+.4g})"
        )
    a, b, fa = lo, hi, f_lo
    it = 0
    while b - a > tol and it < max_iter:
        mid = 0.5 * (a + b)
        fm = excess(mid)
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
        it += 1
    return ThresholdResult(0.5 * (a + b), (lo, hi), it, history)


# -- wrapped densities on [0, ell) -------------------------------------------------------


@dataclass(frozen=True)
class WrappedDensity:
    """Probability density sampled on a uniform periodic grid over ``[0, ell)``.

    ``values`` is 1D (one party) or 2D (joint, axes ``xbar``, ``ybar``).  The
    integrals below use the periodic trapezoidal rule with spacing ``ell/n``.
    """

    values: np.ndarray
    ell: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim not in (1, 2) or 0 in v.shape:
            raise ValueError("density must be a non-empty 1D or 2D grid")
        if v.ndim == 2 and v.shape[0] != v.shape[1]:
            raise ValueError("joint density grid must be square")
        if v.min() < 0:
            raise ValueError("density must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return self.ell / self.n

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def mass(self) -> float:
        return float(self.values.sum() * self.spacing**self.values.ndim)

    def check_normalized(self, atol=1e-10):
        m = self.mass()
        if abs(m - 1) > atol:
            raise ValueError(f"density is not normalized (mass {m:.12g})")
        return self

    # constructors

    @classmethod
    def uniform(cls, n, ell=1.0):
        return cls(np.full(n, 1.0 / ell), ell)

    @classmethod
    def spike(cls, at, n, ell=1.0):
        """All mass on the grid node nearest ``at``."""
        v = np.zeros(n)
        v[int(round(at / ell * n)) % n] = n / ell
        return cls(v, ell)

    @classmethod
    def wrapped_normal(cls, center, std, n, ell=1.0):
        x = np.arange(n) * ell / n
        v = wrapped_normal_pdf(x / ell, center / ell, std / ell, 1.0) / ell
        return cls(v / (v.sum() * ell / n), ell)

    @classmethod
    def product(cls, pa: "WrappedDensity", pb: "WrappedDensity"):
        if pa.n != pb.n or pa.ell != pb.ell or pa.values.ndim != 1 or pb.values.ndim != 1:
            raise ValueError("product needs two 1D densities on the same grid")
        return cls(np.outer(pa.values, pb.values), pa.ell)

    @classmethod
    def diagonal(cls, q: "WrappedDensity"):
        """Perfectly correlated joint density ``q(x) delta(x - y)``."""
        return cls(np.diag(q.values) / q.spacing, q.ell)


def expectation_from_wrapped_density(density: WrappedDensity, frame: ModularFrame = ModularFrame()) -> float:
    """``<A> = int_0^ell cos(2 pi x / ell) p(x) dx``."""
    _same_scale(density, frame)
    if density.values.ndim != 1:
        raise ValueError("expected a single-party density")
    density.check_normalized()
    c = np.cos(2 * np.pi * density.grid / frame.ell)
    return float(density.values @ c * density.spacing)


def correlation_from_joint_wrapped_density(joint: WrappedDensity, frame: ModularFrame = ModularFrame()) -> float:
    """``<A B> = iint cos(2 pi x / ell) cos(2 pi y / ell) p(x, y)``."""
    _same_scale(joint, frame)
    if joint.values.ndim != 2:
        raise ValueError("expected a joint density")
    joint.check_normalized()
    c = np.cos(2 * np.pi * joint.grid / frame.ell)
    return float(c @ joint.values @ c * joint.spacing**2)


def position_phase_expectation(density: WrappedDensity, frame: ModularFrame = ModularFrame()) -> complex:
    """``<exp(i 2 pi x / ell)>``; its real part is ``expectation_from_wrapped_density``."""
    _same_scale(density, frame)
    if density.values.ndim != 1:
        raise ValueError("expected a single-party density")
    density.check_normalized()
    e = np.exp(2j * np.pi * density.grid / frame.ell)
    return complex(density.values @ e * density.spacing)


def _same_scale(density, frame):
    if not math.isclose(density.ell, frame.ell, rel_tol=1e-12):
        raise ValueError(f"density period {density.ell} does not match frame ell {frame.ell}")
