"""Round-by-round Monte Carlo of the entanglement-based protocol.

Per round Alice picks one of three settings, Bob one of two, and (under a
sequential attack) Eve picks E1 with probability q. Outcomes are drawn from
the exact joint distribution built by chaining conditional states: Alice's
projective measurement, then Eve's Lüders update on Bob's qubit, then Bob.

Randomness comes from a counter-based Philox stream keyed by the seed.
Round ``i`` always consumes the eight doubles at stream offset ``8 i``, so
chunks can be generated independently (and in parallel) with identical
results.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .attacks import SequentialAttackParams, collective_state
from .errors import DomainError, UndefinedEstimateError
from .measurement import Observable, eve_measurements, rotated_settings, standard_settings
from .quantum import I2, PHI_PLUS, DensityMatrix, tensor

DRAWS_PER_ROUND = 8
ATTACKS = ("none", "collective", "sequential")
RECORD_FIELDS = ("index", "x", "y", "e", "a", "b", "g", "spot")


@dataclass(frozen=True)
class SimulationConfig:
    rounds: int
    seed: int = 0
    attack: str = "none"
    alpha: float = 0.0
    sequential: SequentialAttackParams | None = None
    base_qber: float = 0.0
    spot_check_fraction: float = 0.25
    alice_settings: tuple[Observable, Observable, Observable] | None = None
    bob_settings: tuple[Observable, Observable] | None = None

    def __post_init__(self):
        if self.rounds < 1:
            raise DomainError("rounds", self.rounds, "[1, inf)")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed", self.seed, "[0, 2**64)")
        if self.attack not in ATTACKS:
            raise DomainError("attack", self.attack, "|".join(ATTACKS))
        if self.attack == "sequential" and self.sequential is None:
            raise DomainError("sequential", None, "SequentialAttackParams for a sequential attack")
        if not 0 <= self.alpha <= 1:
            raise DomainError("alpha", self.alpha, "[0, 1]")
        if not 0 <= self.base_qber <= 0.5:
            raise DomainError("base_qber", self.base_qber, "[0, 1/2]")
        if not 0 < self.spot_check_fraction <= 1:
            raise DomainError("spot_check_fraction", self.spot_check_fraction, "(0, 1]")
        alice, bob = self.alice_settings, self.bob_settings
        if alice is None or bob is None:
            if self.attack == "sequential":
                default_a, default_b = rotated_settings(self.sequential.theta)
            else:
                default_a, default_b = standard_settings()
            object.__setattr__(self, "alice_settings", tuple(alice or default_a))
            object.__setattr__(self, "bob_settings", tuple(bob or default_b))

    @property
    def has_eve(self):
        return self.attack == "sequential"

    @property
    def eve_bias(self):
        return self.sequential.q if self.has_eve else 1.0

    def source_state(self):
        if self.attack == "collective":
            return collective_state(self.alpha)
        return DensityMatrix.from_ket(PHI_PLUS, (2, 2))


class RoundRecord(NamedTuple):
    index: int
    alice_setting: int
    bob_setting: int
    eve_setting: int | None
    alice_outcome: int
    bob_outcome: int
    eve_outcome: int | None
    spot_check: bool


@dataclass(frozen=True)
class RoundRecords:
    """Columnar store of round records; iterating yields ``RoundRecord`` tuples.

    Eve's columns hold 0 where she is absent.
    """

    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    a: np.ndarray
    b: np.ndarray
    g: np.ndarray
    spot: np.ndarray
    has_eve: bool

    def __post_init__(self):
        for name in ("x", "y", "e", "a", "b", "g", "spot"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.x.size

    def __getitem__(self, i):
        i = range(len(self))[i]
        e = int(self.e[i]) if self.has_eve else None
        g = int(self.g[i]) if self.has_eve else None
        return RoundRecord(
            i, int(self.x[i]), int(self.y[i]), e, int(self.a[i]), int(self.b[i]), g, bool(self.spot[i])
        )

    def __iter__(self) -> Iterator[RoundRecord]:
        return (self[i] for i in range(len(self)))

    def to_text(self):
        """CSV text, one record per line in the order index,x,y,e,a,b,g,spot.

        Eve's fields are left empty when she is absent.
        """
        cols = np.stack([self.x, self.y, self.e, self.a, self.b, self.g, self.spot], axis=1).astype(np.int64)
        # every field lies in [-1, 2]: pack a row into one base-4 integer so
        # the few hundred distinct rows are formatted once each
        codes = (cols + 1) @ (4 ** np.arange(cols.shape[1]))
        kinds, which = np.unique(codes, return_inverse=True)
        suffix = []
        for code in kinds.tolist():
            x, y, e, a, b, g, spot = ((code >> (2 * k)) % 4 - 1 for k in range(7))
            e, g = (str(e), str(g)) if self.has_eve else ("", "")
            suffix.append(f",{x},{y},{e},{a},{b},{g},{spot}\n")
        body = "".join(f"{i}{suffix[k]}" for i, k in enumerate(which.tolist()))
        return ",".join(RECORD_FIELDS) + "\n" + body

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    def digest(self):
        h = hashlib.sha256()
        for col in (self.x, self.y, self.e, self.a, self.b, self.g, self.spot):
            h.update(np.ascontiguousarray(col).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class EstimateReport:
    chsh: float
    chsh_se: float
    qber: float
    qber_se: float
    sifted_key_length: int
    raw_key_alice: np.ndarray = field(repr=False)
    raw_key_bob: np.ndarray = field(repr=False)
    cell_counts: dict = field(default_factory=dict)

    def z_scores(self, chsh, qber):
        return (self.chsh - chsh) / self.chsh_se, (self.qber - qber) / self.qber_se

    def summary(self):
        return {
            "chsh": self.chsh,
            "chsh_se": self.chsh_se,
            "qber": self.qber,
            "qber_se": self.qber_se,
            "sifted_key_length": self.sifted_key_length,
            "key_disagreements": int(np.count_nonzero(self.raw_key_alice != self.raw_key_bob)),
        }


# -- exact outcome tables ----------------------------------------------------


def _local(op, site):
    return tensor(op, I2) if site == 0 else tensor(I2, op)


def _eve_ops(config):
    """Per Eve setting: list of (effect, kraus) pairs indexed by outcome."""
    if not config.has_eve:
        return [[(I2, I2), (0 * I2, 0 * I2)]]
    p = config.sequential
    out = []
    for m in eve_measurements(p.gamma1, p.gamma2):
        out.append(list(zip(m.effects(), m.kraus().operators)))
    return out


def joint_outcome_table(config, chain="AEB"):
    """Exact ``p[x, e, y, a, g, b]`` with outcome index 0 meaning +1.

    ``chain`` fixes the order in which the measurements update the state:
    ``"AEB"`` (Alice, Eve, Bob) or ``"EBA"`` (Eve, Bob, Alice). Both must
    agree since Alice's operators commute with Eve's and Bob's.
    """
    if chain not in ("AEB", "EBA"):
        raise DomainError("chain", chain, "AEB|EBA")
    rho = config.source_state().matrix
    # lift every local operator once; the loops below only multiply
    alice = [[_local(p, 0) for p in m.effects()] for m in config.alice_settings]
    bob = [[_local(p, 1) for p in m.effects()] for m in config.bob_settings]
    eve = [[_local(k, 1) for _, k in ops] for ops in _eve_ops(config)]
    table = np.zeros((3, len(eve), 2, 2, 2, 2))
    for x, ea in enumerate(alice):
        for e, kraus in enumerate(eve):
            for a in range(2):
                for g in range(2):
                    k = kraus[g]
                    for y, eb in enumerate(bob):
                        for b in range(2):
                            if chain == "AEB":
                                s = k @ (ea[a] @ rho @ ea[a]) @ k.conj().T
                                p = np.trace(eb[b] @ s)
                            else:
                                s = eb[b] @ (k @ rho @ k.conj().T) @ eb[b]
                                p = np.trace(ea[a] @ s)
                            table[x, e, y, a, g, b] = max(p.real, 0.0)
    return table


def _conditionals(table, order):
    """Stage-wise conditional CDFs for sampling the outcomes in ``order``.

    ``order`` permutes (a, g, b) = (0, 1, 2).
    """
    t = table.transpose(0, 1, 2, *(3 + i for i in order))
    with np.errstate(invalid="ignore", divide="ignore"):
        p1 = t.sum(axis=(4, 5))
        p2 = t.sum(axis=5) / p1[..., None]
        p3 = t / t.sum(axis=5, keepdims=True)
    # unreachable branches get a harmless deterministic value
    return np.nan_to_num(p1[..., 0], nan=1.0), np.nan_to_num(p2[..., 0], nan=1.0), np.nan_to_num(p3[..., 0], nan=1.0)


def analytic_estimates(config):
    """Exact CHSH (settings A1, A2 x B1, B2) and key-pair QBER the estimator targets."""
    t = joint_outcome_table(config)
    prior = np.array([config.eve_bias, 1 - config.eve_bias])[: t.shape[1]]
    pab = np.einsum("e,xeyagb->xyab", prior, t)
    corr = pab[..., 0, 0] + pab[..., 1, 1] - pab[..., 0, 1] - pab[..., 1, 0]
    chsh = corr[1, 0] + corr[1, 1] + corr[2, 0] - corr[2, 1]
    raw_q = pab[0, 0, 0, 1] + pab[0, 0, 1, 0]
    f = config.base_qber
    return float(chsh), float((1 - 2 * f) * raw_q + f)


# -- sampling ------------------------------------------------------------------


def _uniforms(seed, start, stop):
    bitgen = np.random.Philox(key=seed)
    # one Philox counter step yields four 64-bit words, two steps per round
    bitgen.advance(start * DRAWS_PER_ROUND // 4)
    return np.random.Generator(bitgen).random((stop - start, DRAWS_PER_ROUND))


def _sample_chunk(config, cdfs, order, start, stop):
    u = _uniforms(config.seed, start, stop)
    x = np.minimum((u[:, 0] * 3).astype(np.int64), 2)
    y = np.minimum((u[:, 1] * 2).astype(np.int64), 1)
    e = (u[:, 2] >= config.eve_bias).astype(np.int64) if config.has_eve else np.zeros(stop - start, np.int64)
    spot = u[:, 3] < config.spot_check_fraction
    p1, p2, p3 = cdfs
    o1 = (u[:, 4] >= p1[x, e, y]).astype(np.int64)
    o2 = (u[:, 5] >= p2[x, e, y, o1]).astype(np.int64)
    o3 = (u[:, 6] >= p3[x, e, y, o1, o2]).astype(np.int64)
    idx = np.empty((3, stop - start), np.int64)
    idx[list(order)] = np.stack([o1, o2, o3])
    sign = 1 - 2 * idx  # 0 -> +1, 1 -> -1
    a, g, b = sign
    flip = (x == 0) & (u[:, 7] < config.base_qber)
    a = np.where(flip, -a, a)
    return x, y + 1, e + 1, a, b, g, spot


def run_simulation(config, order=(0, 1, 2), chunk_size=1 << 18, workers=1):
    """Simulate ``config.rounds`` rounds; returns (records, estimate report).

    ``order`` permutes the sampling order of (Alice, Eve, Bob) outcomes; the
    joint distribution does not depend on it. The report carries NaN
    estimates when a required cell is empty.
    """
    cdfs = _conditionals(joint_outcome_table(config), order)
    bounds = [(s, min(s + chunk_size, config.rounds)) for s in range(0, config.rounds, chunk_size)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda se: _sample_chunk(config, cdfs, order, *se), bounds))
    else:
        parts = [_sample_chunk(config, cdfs, order, *se) for se in bounds]
    x, y, e, a, b, g, spot = (np.concatenate(col) for col in zip(*parts))
    if not config.has_eve:
        e = np.zeros_like(e)
        g = np.zeros_like(g)
    records = RoundRecords(
        x.astype(np.int8), y.astype(np.int8), e.astype(np.int8),
        a.astype(np.int8), b.astype(np.int8), g.astype(np.int8),
        spot, config.has_eve,
    )
    return records, sift_and_estimate(records, strict=False)


# -- estimation ----------------------------------------------------------------


def _smoothed(k, n):
    # half-count smoothing keeps the standard error positive at 0 or n hits
    return (k + 0.5) / (n + 1)


def sift_and_estimate(records, strict=True):
    """CHSH and QBER from spot-checked rounds; raw key from the rest.

    With ``strict`` an empty estimation cell raises; otherwise that
    estimate is NaN.
    """
    if len(records) == 0:
        raise UndefinedEstimateError("no rounds recorded")
    x, y, a, b, spot = records.x, records.y, records.a, records.b, records.spot
    agree = a == b
    counts = {}

    corr, var = {}, 0.0
    for xs in (1, 2):
        for ys in (1, 2):
            m = spot & (x == xs) & (y == ys)
            n = int(m.sum())
            counts[f"A{xs}B{ys}"] = n
            if n == 0:
                corr[xs, ys] = np.nan
                var = np.nan
                continue
            k = int(agree[m].sum())
            corr[xs, ys] = 2 * k / n - 1
            p = _smoothed(k, n)
            var += 4 * p * (1 - p) / n
    chsh = corr[1, 1] + corr[1, 2] + corr[2, 1] - corr[2, 2]

    m = spot & (x == 0) & (y == 1)
    n = int(m.sum())
    counts["A0B1"] = n
    if n:
        k = int((~agree[m]).sum())
        qber = k / n
        p = _smoothed(k, n)
        qber_se = float(np.sqrt(p * (1 - p) / n))
    else:
        qber = qber_se = np.nan

    if strict and (np.isnan(chsh) or np.isnan(qber)):
        empty = [c for c, v in counts.items() if v == 0]
        raise UndefinedEstimateError(f"no spot-check rounds in cells {empty}")

    key = ~spot & (x == 0) & (y == 1)
    bits_a = ((1 - a[key]) // 2).astype(np.uint8)
    bits_b = ((1 - b[key]) // 2).astype(np.uint8)
    return EstimateReport(
        float(chsh),
        float(np.sqrt(var)),
        float(qber),
        float(qber_se),
        int(key.sum()),
        bits_a,
        bits_b,
        counts,
    )


def eve_key_rounds(records):
    """Mask of rounds where Alice measured A0 and Eve measured E1."""
    if not records.has_eve:
        raise UndefinedEstimateError("records carry no eavesdropper data")
    return (records.x == 0) & (records.e == 1)


def eve_guess_accuracy(records):
    """Fraction of A0/E1 rounds where Eve's outcome equals Alice's recorded bit."""
    m = eve_key_rounds(records)
    if not m.any():
        raise UndefinedEstimateError("no rounds with Alice on A0 and Eve on E1")
    return float(np.mean(records.g[m] == records.a[m]))
