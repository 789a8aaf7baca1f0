"""Two-outcome measurements, Lüders updates and Bell functionals.

Outcome labelling follows g in {0, 1} -> eigenvalue (-1)**g, so index 0 is
always the +1 outcome. Every measurement object exposes ``effects()``
returning the pair (E_+, E_-), which is all the correlator code needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DomainError, NumericalIntegrityError
from .quantum import I2, PAULIS, DensityMatrix, embed, tensor

BLOCH_TOL = 1e-12
IMAG_TOL = 1e-9
TRACE_TOL = 1e-9


@dataclass(frozen=True)
class Observable:
    """Sharp dichotomic observable ``n . sigma`` for a unit Bloch vector ``n``."""

    bloch: tuple[float, float, float]
    label: str = ""

    def __post_init__(self):
        n = tuple(float(c) for c in self.bloch)
        if len(n) != 3 or abs(np.linalg.norm(n) - 1) > BLOCH_TOL:
            raise DomainError("bloch", self.bloch, "unit 3-vector")
        object.__setattr__(self, "bloch", n)

    @classmethod
    def from_angle(cls, phi, label=""):
        """Direction in the x-z plane at angle ``phi`` from +z towards +x."""
        return cls((np.sin(phi), 0.0, np.cos(phi)), label)

    @property
    def matrix(self):
        return sum(c * p for c, p in zip(self.bloch, PAULIS))

    def projector(self, outcome):
        if outcome not in (1, -1):
            raise DomainError("outcome", outcome, "{+1, -1}")
        return 0.5 * (I2 + outcome * self.matrix)

    def effects(self):
        return self.projector(1), self.projector(-1)


SIGMA_Z = Observable((0.0, 0.0, 1.0), "Z")
SIGMA_X = Observable((1.0, 0.0, 0.0), "X")


@dataclass(frozen=True)
class KrausPair:
    """Kraus operators ``K0 1 + (-1)**g K1 E`` whose squares are the unsharp effects."""

    operators: tuple[np.ndarray, np.ndarray]

    def channel(self, rho_site):
        return sum(k @ rho_site @ k.conj().T for k in self.operators)


@dataclass(frozen=True)
class UnsharpEffectPair:
    """Unsharp measurement ``{(1 + (-1)**g gamma E)/2}`` along ``direction``."""

    direction: Observable
    gamma: float
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError("gamma", self.gamma, "[0, 1]")

    def effects(self):
        e = self.direction.matrix
        return 0.5 * (I2 + self.gamma * e), 0.5 * (I2 - self.gamma * e)

    @property
    def observable_matrix(self):
        """Expectation operator ``E_+ - E_- = gamma E``."""
        return self.gamma * self.direction.matrix

    def kraus(self):
        # closed-form square roots of the effects; no generic sqrtm
        a, b = np.sqrt(1 + self.gamma), np.sqrt(1 - self.gamma)
        k0 = (a + b) / (2 * np.sqrt(2))
        k1 = (a - b) / (2 * np.sqrt(2))
        e = self.direction.matrix
        return KrausPair((k0 * I2 + k1 * e, k0 * I2 - k1 * e))


def _effects(m):
    if hasattr(m, "effects"):
        return m.effects()
    raise TypeError(f"expected a measurement with effects(), got {type(m).__name__}")


def born_probability(rho, a_effect, b_effect):
    """``Tr[rho (A (x) B)]`` for single-qubit effects on a two-qubit state."""
    p = np.trace(rho.matrix @ tensor(a_effect, b_effect))
    if abs(p.imag) > IMAG_TOL:
        raise NumericalIntegrityError(f"Born probability has imaginary part {p.imag:.3e}")
    p = p.real
    if p < -1e-10 or p > 1 + 1e-10:
        raise NumericalIntegrityError(f"Born probability {p} outside [0, 1]")
    return float(min(max(p, 0.0), 1.0))


def joint_distribution(rho, A, B):
    """2x2 table ``p[a, b]`` with index 0 for outcome +1."""
    ea, eb = _effects(A), _effects(B)
    return np.array([[born_probability(rho, x, y) for y in eb] for x in ea])


def correlator(rho, A, B):
    """``<A B> = sum_ab a b p(a, b)`` with a, b in {+1, -1}."""
    p = joint_distribution(rho, A, B)
    return float(p[0, 0] - p[0, 1] - p[1, 0] + p[1, 1])


def chsh_value(rho, A1, A2, B1, B2):
    return (
        correlator(rho, A1, B1)
        + correlator(rho, A1, B2)
        + correlator(rho, A2, B1)
        - correlator(rho, A2, B2)
    )


def biased_chsh_value(rho, settings: Mapping[str, object], q):
    """Biased Bell functional with local bound ``q``.

    ``settings`` maps the four slots ``"A0", "A1", "B0", "B1"`` to
    measurements; the B side is the biased one (B0 chosen with probability
    q). For Alice-Eve nonlocality pass Alice's rotated A1, A2 into slots
    A0, A1 and Eve's unsharp E1, E2 into B0, B1.
    """
    if not 0.5 <= q <= 1.0:
        raise DomainError("q", q, "[1/2, 1]")
    a0, a1, b0, b1 = (settings[k] for k in ("A0", "A1", "B0", "B1"))
    c00 = correlator(rho, a0, b0)
    c01 = correlator(rho, a0, b1)
    c10 = correlator(rho, a1, b0)
    c11 = correlator(rho, a1, b1)
    return q / 2 * (c00 - c01 + c10 + c11) + 0.5 * (c01 + c11) - c11


def luders_update(rho, kraus, site=1):
    """Non-selective Lüders update ``sum_g K_g rho K_g^dag`` on subsystem ``site``."""
    out = np.zeros_like(rho.matrix)
    for k in kraus.operators:
        kk = embed(k, site, rho.dims)
        out = out + kk @ rho.matrix @ kk.conj().T
    drift = abs(np.trace(out).real - 1)
    if drift > TRACE_TOL:
        raise NumericalIntegrityError(f"Lüders update changed the trace by {drift:.2e}")
    return DensityMatrix(out, rho.dims)


def correlation_matrix(rho):
    """Real 3x3 ``T_ij = Tr[rho sigma_i (x) sigma_j]`` of a two-qubit state."""
    return np.array([[np.trace(rho.matrix @ tensor(si, sj)).real for sj in PAULIS] for si in PAULIS])


def horodecki_chsh(rho):
    """Maximal CHSH value from the two largest singular values of the correlation matrix."""
    s = np.linalg.svd(correlation_matrix(rho), compute_uv=False)
    return float(2 * np.sqrt(s[0] ** 2 + s[1] ** 2))


def standard_settings():
    """Alice (A0, A1, A2) and Bob (B1, B2) reaching 2*sqrt(2) on |Phi+>.

    A1 and A2 are the +/- combinations of Bob's directions, so that the
    rotated family of ``rotated_settings`` reduces to this at theta = pi/4.
    """
    return rotated_settings(np.pi / 4)


def rotated_settings(theta):
    """A0 = Z, A1/A2 = cos(theta) Z +/- sin(theta) X; B1 = Z, B2 = X."""
    alice = (
        Observable((0.0, 0.0, 1.0), "A0"),
        Observable.from_angle(theta, "A1"),
        Observable.from_angle(-theta, "A2"),
    )
    bob = (Observable((0.0, 0.0, 1.0), "B1"), Observable((1.0, 0.0, 0.0), "B2"))
    return alice, bob


def eve_measurements(gamma1, gamma2):
    """Eve's E1 = Z (unsharpness gamma1) and E2 = X (unsharpness gamma2)."""
    return (
        UnsharpEffectPair(Observable((0.0, 0.0, 1.0), "E1"), gamma1, "E1"),
        UnsharpEffectPair(Observable((1.0, 0.0, 0.0), "E2"), gamma2, "E2"),
    )

