"""Devetak-Winter style key rates for the collective, sequential-individual
and sequential-collective attacks.

Rates are kept raw (they go negative outside the secure window); use
``KeyRateReport.floored`` for protocol decisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .attacks import (
    BellDiagonalSpectrum,
    collective_chsh,
    collective_qber,
    gamma_for_chsh,
    optimal_chsh,
    q_cap_for_chsh,
)
from .errors import DomainError
from .measurement import SIGMA_Z
from .quantum import DensityMatrix, PureState, partial_trace, shannon_entropy, von_neumann_entropy

TSIRELSON = 2 * np.sqrt(2)
BRANCH_EPS = 1e-12


@dataclass(frozen=True)
class KeyRateReport:
    model: str
    rate: float
    qber: float
    chsh: float
    holevo: float | None = None
    eve_information: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def floored(self):
        return max(self.rate, 0.0)

    def as_row(self):
        row = {"model": self.model, **self.params, "chsh": self.chsh, "qber": self.qber}
        row["holevo"] = np.nan if self.holevo is None else self.holevo
        row["eve_information"] = np.nan if self.eve_information is None else self.eve_information
        row["rate"] = self.rate
        row["rate_floored"] = self.floored
        return row


def binary_entropy(p):
    if not 0.0 <= p <= 1.0:
        raise DomainError("p", p, "[0, 1]")
    return shannon_entropy([p, 1 - p])


def _check_prob(name, p, lo=0.0, hi=1.0):
    if not lo <= p <= hi:
        raise DomainError(name, p, f"[{lo}, {hi}]")


# -- collective attack ------------------------------------------------------


def chsh_holevo_bound(chsh):
    """Upper bound on Eve's Holevo information given a CHSH value in [2, 2 sqrt 2]."""
    if not 2.0 <= chsh <= TSIRELSON + 1e-12:
        raise DomainError("chsh", chsh, "[2, 2*sqrt(2)]")
    root = np.sqrt(max((chsh / 2) ** 2 - 1, 0.0))
    return binary_entropy(min(0.5 * (1 + root), 1.0))


def collective_key_rate(qber, chsh):
    _check_prob("qber", qber)
    chi = chsh_holevo_bound(chsh)
    return KeyRateReport(
        "collective", 1 - binary_entropy(qber) - chi, qber, chsh, holevo=chi, eve_information=chi
    )


def collective_alpha_rate(alpha):
    return collective_key_rate(collective_qber(alpha), collective_chsh(alpha)).rate


@dataclass(frozen=True)
class CollectiveKeyWindow:
    """Collective family restricted to a positive key rate."""

    alpha_cap: float
    chsh_low: float
    chsh_high: float
    qber_cap: float


@lru_cache(maxsize=None)
def collective_key_window():
    alpha_cap = brentq(collective_alpha_rate, 0.05, 0.5, xtol=1e-15)
    return CollectiveKeyWindow(
        float(alpha_cap),
        float(collective_chsh(alpha_cap)),
        float(collective_chsh(0.0)),
        float(collective_qber(alpha_cap)),
    )


# -- sequential individual attack -------------------------------------------


def sequential_qber(q, gamma, qber=0.0):
    """Error rate on the key pair after the attack, with Alice's bit pre-randomised to ``qber``."""
    _check_prob("q", q, 0.5, 1.0)
    _check_prob("gamma", gamma)
    _check_prob("qber", qber, 0.0, 0.5)
    return (1 - 2 * qber) * (1 - q) / 2 * (1 - np.sqrt(1 - gamma**2)) + qber


def sequential_individual_key_rate(q, gamma, qber=0.0):
    qs = sequential_qber(q, gamma, qber)
    eve = q * (1 - binary_entropy(qber))
    return KeyRateReport(
        "sequential-individual",
        1 - binary_entropy(qs) - eve,
        qs,
        optimal_chsh(q, gamma),
        eve_information=eve,
        params={"q": q, "gamma": gamma, "base_qber": qber},
    )


# -- sequential collective attack -------------------------------------------


def bell_diagonal_holevo(spectrum):
    """Eve's Holevo information on Bob's Z outcome for a Bell-diagonal state she purifies."""
    return shannon_entropy(spectrum.weights) - binary_entropy(min(spectrum.lambda_plus, 1.0))


@dataclass(frozen=True)
class HolevoBreakdown:
    chi: float
    eve_state: DensityMatrix
    outcome_probabilities: tuple[float, ...]
    conditional_states: tuple[DensityMatrix | None, ...]


def purification_holevo(purification: PureState, key_observable=SIGMA_Z, bob=1):
    """Holevo quantity between Bob's projective key outcome and the purifying ancilla.

    The ancilla is the last subsystem of ``purification``. Branches with
    probability below 1e-12 contribute no entropy.
    """
    dims = purification.dims
    psi = purification.vector.reshape(dims)
    eve = len(dims) - 1
    rho_all = purification.density_matrix()
    eve_state = partial_trace(rho_all, [eve])
    probs, cond = [], []
    chi = von_neumann_entropy(eve_state)
    for proj in key_observable.effects():
        branch = np.moveaxis(np.tensordot(proj, psi, axes=([1], [bob])), 0, bob)
        p = float(np.vdot(branch, branch).real)
        probs.append(p)
        if p < BRANCH_EPS:
            cond.append(None)
            continue
        state = DensityMatrix.from_ket(branch.ravel(), dims)
        rho_e = partial_trace(state, [eve])
        cond.append(rho_e)
        chi -= p * von_neumann_entropy(rho_e)
    return HolevoBreakdown(chi, eve_state, tuple(probs), tuple(cond))


def sequential_collective_key_rate(q, gamma, qber=0.0):
    qs = sequential_qber(q, gamma, qber)
    spectrum = BellDiagonalSpectrum.from_attack(q, gamma)
    chi = bell_diagonal_holevo(spectrum)
    return KeyRateReport(
        "sequential-collective",
        1 - binary_entropy(qs) - chi,
        qs,
        optimal_chsh(q, gamma),
        holevo=chi,
        eve_information=chi,
        params={"q": q, "gamma": gamma, "base_qber": qber},
    )


# -- attacks that reproduce a collective correlation ------------------------


@dataclass(frozen=True)
class MatchedAttack:
    """Sequential attack point reproducing the collective (S, Q) at ``alpha``."""

    alpha: float
    q: float
    gamma: float
    base_qber: float
    r_s: float
    r_cs: float


def matched_attack(alpha, q):
    """Sequential attack with bias ``q`` whose optimal CHSH and QBER match ``alpha``.

    Gamma is fixed by the CHSH target; Alice's pre-randomisation absorbs the
    rest of the QBER. Returns None if the target cannot be reached at ``q``.
    """
    target_s, target_q = collective_chsh(alpha), collective_qber(alpha)
    gamma = gamma_for_chsh(q, target_s)
    # gamma_for_chsh clamps to 0 when the target sits above the gamma = 0 value
    if np.isnan(gamma) or abs(optimal_chsh(q, gamma) - target_s) > 1e-9:
        return None
    leak = (1 - q) / 2 * (1 - np.sqrt(1 - gamma**2))
    if leak > target_q + 1e-15:
        return None
    base = max((target_q - leak) / (1 - 2 * leak), 0.0)
    return MatchedAttack(
        alpha,
        q,
        gamma,
        base,
        sequential_individual_key_rate(q, gamma, base).rate,
        sequential_collective_key_rate(q, gamma, base).rate,
    )


def matched_attack_family(alpha, n=201):
    """Matched attacks on a grid of q from 1/2 up to the gamma = 0 root."""
    q_top = q_cap_for_chsh(collective_chsh(alpha))
    out = [matched_attack(alpha, q) for q in np.linspace(0.5, q_top, n)]
    return [m for m in out if m is not None]


def optimal_sequential_individual(alpha, n=201):
    """Matched attack minimising the sequential-individual rate."""
    return min(matched_attack_family(alpha, n), key=lambda m: m.r_s)


def optimal_sequential_collective(alpha, n=201):
    """Matched attack minimising the sequential-collective rate."""
    return min(matched_attack_family(alpha, n), key=lambda m: m.r_cs)
