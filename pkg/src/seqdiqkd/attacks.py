"""Closed-form state families and Eve's sequential attack.

Two routes exist for almost every quantity here: a closed form written in
terms of (alpha) or (q, gamma, theta), and the density-matrix pipeline
(``collective_state`` / ``sequential_state`` fed through
``measurement``). Tests hold the two against each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .measurement import eve_measurements, luders_update
from .quantum import PHI_PLUS, DensityMatrix

SQRT2 = np.sqrt(2.0)
# CHSH of the collective family at alpha = 0
CHSH_COLLECTIVE_MAX = 3 / SQRT2
# alpha at which the collective family stops violating CHSH at all
ALPHA_CHSH_CAP = np.sqrt(8 * SQRT2 - 11)


def _check_unit(name, value, lo=0.0, hi=1.0):
    if not (lo <= value <= hi):
        raise DomainError(name, value, f"[{lo}, {hi}]")


@dataclass(frozen=True)
class CollectiveStateParams:
    alpha: float

    def __post_init__(self):
        _check_unit("alpha", self.alpha)


@dataclass(frozen=True)
class SequentialAttackParams:
    """Eve's knobs: bias q towards E1, unsharpness of E1/E2, Alice's tilt theta."""

    q: float
    gamma1: float = 1.0
    gamma2: float = 0.0
    theta: float = np.pi / 4

    def __post_init__(self):
        _check_unit("q", self.q, 0.5, 1.0)
        _check_unit("gamma1", self.gamma1)
        _check_unit("gamma2", self.gamma2)
        _check_unit("theta", self.theta, 0.0, np.pi / 2)

    @classmethod
    def optimal(cls, q, gamma):
        """gamma1 = 1 with theta at the CHSH-maximising angle."""
        return cls(q, 1.0, gamma, theta_star(q, gamma))


@dataclass(frozen=True)
class BellDiagonalSpectrum:
    """Weights on |Phi+>, |Phi->, |Psi+>; the |Psi-> weight is identically zero."""

    phi_plus: float
    phi_minus: float
    psi_plus: float
    psi_minus = 0.0

    def __post_init__(self):
        w = self.weights
        if w.min() < -1e-12 or abs(w.sum() - 1) > 1e-12:
            raise DomainError("spectrum", tuple(w), "nonnegative weights summing to 1")

    @property
    def weights(self):
        return np.array([self.phi_plus, self.phi_minus, self.psi_plus])

    @classmethod
    def from_sequential(cls, q, gamma1, gamma2):
        c1, c2 = np.sqrt(1 - gamma1**2), np.sqrt(1 - gamma2**2)
        return cls(
            0.5 * (1 + q * c1 + (1 - q) * c2),
            q / 2 * (1 - c1),
            (1 - q) / 2 * (1 - c2),
        )

    @classmethod
    def from_attack(cls, q, gamma):
        """Spectrum of the post-attack state with a sharp E1 (gamma1 = 1)."""
        c = np.sqrt(1 - gamma**2)
        return cls(0.5 * (1 + (1 - q) * c), q / 2, (1 - q) / 2 * (1 - c))

    @classmethod
    def collective(cls, alpha):
        s = np.sqrt(1 - alpha**2)
        return cls((2 + s) / 4, 0.25, (1 - s) / 4)

    @property
    def lambda_plus(self):
        """Larger eigenvalue of Eve's state conditioned on Bob's key bit."""
        p, m, s = self.phi_plus, self.phi_minus, self.psi_plus
        # p^2 + (m-s)^2 + 2p(m-s), factored: the expanded sum cancels badly near p + m = s
        return 0.5 * (1 + abs(p + (m - s)))

    def density_matrix(self):
        return DensityMatrix.bell_diagonal([self.phi_plus, self.phi_minus, self.psi_plus, 0.0])


class GammaInterval(NamedTuple):
    q: float
    lower: float
    upper: float
    tag: str

    @property
    def empty(self):
        return not (self.lower < self.upper)


@dataclass(frozen=True)
class ParameterRegion:
    """Set ``{(q, gamma): q in q_interval, gamma_lower(q) < gamma < gamma_upper(q)}``.

    ``q_interval`` is (lo, hi, lo_closed, hi_closed).
    """

    q_interval: tuple[float, float, bool, bool]
    gamma_lower: Callable[[float], float]
    gamma_upper: Callable[[float], float]
    region_tag: str

    def contains_q(self, q):
        lo, hi, lo_closed, hi_closed = self.q_interval
        above = q >= lo if lo_closed else q > lo
        below = q <= hi if hi_closed else q < hi
        return above and below

    def interval(self, q):
        if not self.contains_q(q):
            return GammaInterval(q, np.nan, np.nan, self.region_tag)
        return GammaInterval(q, float(self.gamma_lower(q)), float(self.gamma_upper(q)), self.region_tag)

    def contains(self, q, gamma):
        iv = self.interval(q)
        return not iv.empty and iv.lower < gamma < iv.upper


# -- collective attack ------------------------------------------------------


def collective_state(alpha):
    _check_unit("alpha", alpha)
    return BellDiagonalSpectrum.collective(alpha).density_matrix()


def collective_chsh(alpha):
    _check_unit("alpha", alpha)
    return (2 + np.sqrt(1 - alpha**2)) / SQRT2


def collective_qber(alpha):
    _check_unit("alpha", alpha)
    return 0.25 * (1 - np.sqrt(1 - alpha**2))


# -- sequential attack ------------------------------------------------------


def sequential_state(params, rho=None):
    """Average state after Eve's biased unsharp measurement on Bob's qubit.

    Defaults to the maximally entangled |Phi+> input.
    """
    if rho is None:
        rho = DensityMatrix.from_ket(PHI_PLUS, (2, 2))
    e1, e2 = eve_measurements(params.gamma1, params.gamma2)
    m1 = luders_update(rho, e1.kraus(), site=1)
    m2 = luders_update(rho, e2.kraus(), site=1)
    return DensityMatrix(params.q * m1.matrix + (1 - params.q) * m2.matrix, rho.dims)


def sequential_chsh(q, gamma1, gamma2, theta):
    """Alice-Bob CHSH of the post-attack state under Alice's tilted settings."""
    c1, c2 = np.sqrt(1 - gamma1**2), np.sqrt(1 - gamma2**2)
    return 2 * (
        np.sin(theta)
        - q * np.sin(theta) * (1 - c1)
        + np.cos(theta) * (q + c2 - q * c2)
    )


def sequential_chsh_tilde(q, gamma, theta):
    """Alice-Bob CHSH with a sharp E1 (gamma1 = 1)."""
    c = np.sqrt(1 - gamma**2)
    return 2 * (q * np.cos(theta) + (1 - q) * (np.sin(theta) + np.cos(theta) * c))


def alice_eve_chsh(q, gamma1, gamma2, theta):
    """Biased-Bell value between Alice and Eve; its local bound is ``q``."""
    return gamma1 * q * np.cos(theta) + gamma2 * (1 - q) * np.sin(theta)


def alice_eve_violates(q, gamma1, gamma2, theta):
    return alice_eve_chsh(q, gamma1, gamma2, theta) > q


def alice_eve_condition_branches(q, gamma1, gamma2, theta):
    """The two published sufficient-condition branches, evaluated literally.

    Returns ``(branch_1, branch_2)``:

    * branch 1: ``g1 cos - g2 sin > 1`` with ``1/2 <= q <= 1``;
    * branch 2: ``g1 cos - g2 sin < 1`` with
      ``1/2 <= q < g2 sin / (g1 cos - g2 sin - 1)``.

    The q ranges of the two branches may overlap. For theta in [0, pi/2]
    branch 1 needs ``g1 cos > 1`` and branch 2 has a negative right-hand
    side, so neither fires on physical parameters. ``alice_eve_violates``
    and ``alice_eve_q_bound`` give the direct condition.
    """
    d = gamma1 * np.cos(theta) - gamma2 * np.sin(theta)
    branch1 = bool(d > 1 and 0.5 <= q <= 1)
    branch2 = False
    if d < 1:
        branch2 = bool(0.5 <= q < gamma2 * np.sin(theta) / (d - 1))
    return branch1, branch2


def alice_eve_q_bound(gamma1, gamma2, theta):
    """Largest bias for which Alice-Eve beats the local bound: ``S_AE > q`` iff ``q`` is below it."""
    d = gamma1 * np.cos(theta) - gamma2 * np.sin(theta)
    if d >= 1:
        return np.inf
    return gamma2 * np.sin(theta) / (1 - d)


def simultaneous_gamma_bounds(theta, q):
    """Lower (Alice-Eve) and upper (Alice-Bob) gamma bounds at a (theta, q) slice."""
    lower = q * np.tan(theta / 2) / (1 - q)
    x = (1 - np.sin(theta) - SQRT2 * q * np.sin(np.pi / 4 - theta)) / ((1 - q) * np.cos(theta))
    upper = np.sqrt(1 - x**2) if abs(x) <= 1 else np.nan
    return lower, upper


def simultaneous_nonlocality_window(theta, q):
    """Gamma window where Bob and Eve both violate their Bell tests with Alice."""
    if not 0 < theta < np.pi / 4:
        raise DomainError("theta", theta, "(0, pi/4)")
    if not 0.5 <= q < 1:
        raise DomainError("q", q, "[1/2, 1)")
    lower, upper = simultaneous_gamma_bounds(theta, q)
    if np.isnan(upper):
        upper = lower
    return GammaInterval(q, float(lower), float(upper), "simultaneous-nonlocality")


def simultaneous_nonlocality_region(theta):
    if not 0 < theta < np.pi / 4:
        raise DomainError("theta", theta, "(0, pi/4)")
    return ParameterRegion(
        (0.5, 1 - np.tan(theta / 2), True, False),
        lambda q: simultaneous_nonlocality_window(theta, q).lower,
        lambda q: simultaneous_nonlocality_window(theta, q).upper,
        "simultaneous-nonlocality",
    )


def simultaneous_q_caps(theta):
    """Upper q limits implied by gamma_l < 1 and gamma_u > 0 respectively."""
    t = np.tan(theta / 2)
    return 1 / (1 + t), 1 - t


# -- optimal CHSH and the key-rate windows ---------------------------------


def horodecki_optimal_chsh(spectrum):
    p, m, s = spectrum.phi_plus, spectrum.phi_minus, spectrum.psi_plus
    return 2 * np.sqrt((m - p - s) ** 2 + (m + p - s) ** 2)


def optimal_chsh(q, gamma):
    """Maximal Alice-Bob CHSH of the sharp-E1 attack state, expanded in (q, gamma)."""
    c = np.sqrt(1 - gamma**2)
    g2 = gamma**2
    return 2 * np.sqrt(2 - g2 - 2 * q * (2 - g2 - c) + q**2 * (3 - g2 - 2 * c))


def theta_star(q, gamma):
    if not 0.5 <= q < 1:
        raise DomainError("q", q, "[1/2, 1)")
    _check_unit("gamma", gamma)
    return np.pi / 2 - np.arctan(q / (1 - q) + np.sqrt(1 - gamma**2))


def gamma_for_chsh(q, target):
    """Closed-form gamma with ``optimal_chsh(q, gamma) == target``.

    Returns 0.0 when even gamma = 0 falls short of ``target`` and NaN when
    no gamma in [0, 1] reaches it from above.
    """
    radicand = (target / 2) ** 2 - (1 - q) ** 2
    if radicand < 0:
        return np.nan
    c = (np.sqrt(radicand) - q) / (1 - q)
    if c >= 1:
        return 0.0
    if c < 0:
        return np.nan
    return float(np.sqrt(1 - c**2))


def solve_gamma_for_chsh(q, target, tol=1e-13):
    """Root of ``optimal_chsh(q, .) = target`` by bracketing on [0, 1].

    Independent of the algebraic inversion in ``gamma_for_chsh``.
    """
    f = lambda g: optimal_chsh(q, g) - target
    if f(0.0) <= 0:
        return 0.0
    hi = 1.0
    if f(hi) > 0:
        return np.nan
    return float(brentq(f, 0.0, hi, xtol=tol))


def gamma_nl_rounded(q):
    """Lower gamma bound of the key-rate window with the rounded published constants."""
    x = 0.5 / (1 - q) * np.sqrt(0.4999 + 8 * q - 4 * q**2) - q / (1 - q)
    return float(np.sqrt(1 - x**2)) if x <= 1 else 0.0


def gamma_nu_rounded(q):
    """Upper gamma bound of the key-rate window with the rounded published constants."""
    x = 0.25 / (1 - q) * np.sqrt(1.5813 + 32 * q - 16 * q**2) - q / (1 - q)
    return float(np.sqrt(1 - x**2)) if x <= 1 else 0.0


def q_cap_for_chsh(target):
    """Bias q at which gamma = 0 lands exactly on ``target``."""
    return float(brentq(lambda q: optimal_chsh(q, 0.0) - target, 0.5, 1 - 1e-12, xtol=1e-15))


@lru_cache(maxsize=None)
def _default_chsh_targets():
    from .keyrate import collective_key_window

    w = collective_key_window()
    return w.chsh_low, w.chsh_high


def appendix_a_regions(chsh_low=None, chsh_high=None, rounded=False):
    """The two (q, gamma) regions whose optimal CHSH falls in [chsh_low, chsh_high].

    Defaults to the window of the collective family with positive key rate.
    Region caps on q are the gamma = 0 roots of the two CHSH targets. With
    ``rounded=True`` the gamma bounds use the rounded published constants
    instead of the exact inversion.
    """
    if chsh_low is None or chsh_high is None:
        lo, hi = _default_chsh_targets()
        chsh_low = lo if chsh_low is None else chsh_low
        chsh_high = hi if chsh_high is None else chsh_high
    q1 = q_cap_for_chsh(chsh_high)
    q2 = q_cap_for_chsh(chsh_low)
    if rounded:
        lower, upper = gamma_nl_rounded, gamma_nu_rounded
    else:
        lower = lambda q: gamma_for_chsh(q, chsh_high)
        upper = lambda q: gamma_for_chsh(q, chsh_low)
    region1 = ParameterRegion((0.5, q1, False, True), lower, upper, "appendixA-region1")
    region2 = ParameterRegion((q1, q2, False, False), lambda q: 0.0, upper, "appendixA-region2")
    return region1, region2
