"""Codebook design: required SNRs, supported-user counts, power levels, energy-per-bit.

Classes are (code length, power level) pairs.  The design order walks the
lowest power level first and, inside a level, shortest length first; every
class treats the classes fixed before it (plus the other users of its own
class) as Gaussian noise.  Decoding runs in the reverse order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

LOG2E = math.log2(math.e)
# relative slack tolerated when an SINR inequality is met with equality
FEASIBILITY_RTOL = 1e-9


class DesignError(ValueError):
    """The requested codebook cannot be built from the given menu."""


def db(x):
    return 10.0 * np.log10(x)


def undb(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


# --------------------------------------------------------------------------
# SNR requirement tables


@dataclass
class SnrRequirementTable:
    """Required SINR (dB) per code length at a target block error rate."""

    snr_db: dict
    payload_bits: int = 85
    crc_bits: int = 12
    list_size: int | None = None
    source: str = "unspecified"
    target_bler: float = 0.05

    def __post_init__(self):
        self.snr_db = {int(k): float(v) for k, v in sorted(self.snr_db.items())}

    def linear(self, length: int) -> float:
        try:
            return float(undb(self.snr_db[int(length)]))
        except KeyError:
            raise DesignError(f"no required SNR for code length {length}") from None

    @property
    def lengths(self) -> list:
        return sorted(self.snr_db)

    def is_decreasing(self) -> bool:
        vals = [self.snr_db[n] for n in self.lengths]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "snr_db", "source", "list_size"])
        for n in self.lengths:
            w.writerow([n, f"{self.snr_db[n]:.2f}", self.source,
                        "" if self.list_size is None else self.list_size])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, **kw) -> "SnrRequirementTable":
        rows = [r for r in csv.DictReader(line for line in io.StringIO(text)
                                          if not line.startswith("#"))]
        if not rows:
            raise ValueError("empty SNR table")
        snr = {int(r["length"]): float(r["snr_db"]) for r in rows}
        ls = rows[0].get("list_size") or None
        kw.setdefault("source", rows[0].get("source", "csv"))
        kw.setdefault("list_size", int(ls) if ls else None)
        return cls(snr, **kw)


# Required SNR (dB) for 85 payload + 12 CRC bits at BLER <= 0.05, CA-SCL L = 8192.
REFERENCE_SNR_DB = {
    8192: -16.8, 7680: -16.5, 7168: -16.2, 6656: -15.9, 6144: -15.6, 5632: -15.2,
    5120: -14.7, 4608: -14.2, 4096: -13.9, 3584: -13.4, 3072: -12.6, 2560: -11.8,
    2048: -10.9, 1792: -10.3, 1536: -9.6, 1280: -8.7, 1024: -7.8, 768: -6.5,
}


def reference_snr_table() -> SnrRequirementTable:
    return SnrRequirementTable(REFERENCE_SNR_DB, list_size=8192, source="reference-L8192")


def desk_snr_table() -> SnrRequirementTable:
    """Simulation-calibrated table for the desk-scale decoder (L = 32), shipped as data."""
    text = resources.files("polar_ura.data").joinpath("desk_snr_table.csv").read_text()
    return SnrRequirementTable.from_csv(text)


# --------------------------------------------------------------------------
# finite-blocklength bound


def awgn_capacity(p):
    return 0.5 * np.log2(1.0 + p)


def awgn_dispersion(p):
    return p * (p + 2.0) / (2.0 * (p + 1.0) ** 2) * LOG2E**2


def normal_approx_snr(n_c: int, bits: int, eps: float, bracket=(1e-8, 1e4)) -> float:
    """Smallest SNR (linear) whose normal-approximation rate reaches bits / n_c."""
    if n_c <= 0 or not 0 < eps < 1:
        raise ValueError("need n_c > 0 and 0 < eps < 1")
    rate = bits / n_c
    q = norm.isf(eps)
    f = lambda p: awgn_capacity(p) - np.sqrt(awgn_dispersion(p) / n_c) * q - rate
    lo, hi = bracket
    if f(lo) > 0:
        return lo
    if f(hi) < 0:
        raise DesignError("no solution in the SNR bracket")
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=1e-13))


def normal_approx_table(lengths, bits=97, eps=0.05) -> SnrRequirementTable:
    snr = {n: float(db(normal_approx_snr(n, bits, eps))) for n in lengths}
    return SnrRequirementTable(snr, payload_bits=bits, crc_bits=0, source="normal-approx",
                               target_bler=eps)


# --------------------------------------------------------------------------
# configuration


@dataclass
class CodeClass:
    level: int  # 0-based power level index
    index: int  # 0-based length index within the level
    length: int
    power: float
    users: int

    def load(self, block_length: int) -> float:
        """Average interference power one user of this class puts on the block."""
        return self.length * self.power / block_length


@dataclass
class CodebookConfig:
    k_a: int
    block_length: int = 28000
    payload_bits: int = 85
    crc_bits: int = 12
    preamble_bits: int = 15
    preamble_length: int = 2000
    preamble_power: float | None = None
    target_bler: float = 0.05
    margin: float = 1.0
    power_ratio: float = 2.0
    classes: list = field(default_factory=list)
    snr_db: dict = field(default_factory=dict)
    snr_source: str = ""

    def __post_init__(self):
        self.classes = [c if isinstance(c, CodeClass) else CodeClass(**c) for c in self.classes]
        self.snr_db = {int(k): float(v) for k, v in self.snr_db.items()}

    @property
    def powers(self) -> list:
        levels = sorted({c.level for c in self.classes})
        return [next(c.power for c in self.classes if c.level == j) for j in levels]

    @property
    def total_users(self) -> int:
        return sum(c.users for c in self.classes)

    @property
    def preamble_power_value(self) -> float:
        if self.preamble_power is not None:
            return self.preamble_power
        return max(c.power for c in self.classes) if self.classes else 0.0

    def design_order(self) -> list:
        return sorted(self.classes, key=lambda c: (c.level, c.length))

    def decode_order(self) -> list:
        return self.design_order()[::-1]

    def scaled(self, factor: float) -> "CodebookConfig":
        """Copy with every data and preamble power multiplied by ``factor``."""
        return replace(
            self,
            preamble_power=self.preamble_power_value * factor,
            classes=[replace(c, power=c.power * factor) for c in self.classes],
            snr_db=dict(self.snr_db),
        )

    def snr_table(self) -> SnrRequirementTable:
        return SnrRequirementTable(self.snr_db, self.payload_bits, self.crc_bits,
                                   source=self.snr_source, target_bler=self.target_bler)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = {str(k): v for k, v in self.snr_db.items()}
        d["selection_probabilities"] = [c.users / self.k_a for c in self.classes] if self.k_a else []
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CodebookConfig":
        d = {k: v for k, v in d.items() if k != "selection_probabilities"}
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "CodebookConfig":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# design equations


def interference_power(config: CodebookConfig, level: int, index: int) -> float:
    """Average power treated as noise by one user of class (level, index).

    Counts every earlier class in design order in full and the other users of
    the class itself.
    """
    order = config.design_order()
    pos = [(c.level, c.index) for c in order]
    try:
        at = pos.index((level, index))
    except ValueError:
        raise KeyError(f"no class ({level}, {index})") from None
    n = config.block_length
    earlier = sum(c.users * c.load(n) for c in order[:at])
    me = order[at]
    return earlier + max(me.users - 1, 0) * me.load(n)


def max_supported_users(power, required_snr, prior_interference, length, block_length) -> int:
    """Largest k with power / (1 + A + (k - 1) * length * power / N) >= required_snr."""
    head = power / required_snr - 1.0 - prior_interference
    tol = FEASIBILITY_RTOL * (power / required_snr)
    if head < -tol:
        return 0
    per_user = length * power / block_length
    return int(math.floor(max(head, 0.0) / per_user + tol / per_user)) + 1


def min_power_p1(snr_0, k_0, n_0, block_length) -> float:
    """Lowest power at which k_0 users of a length-n_0 code reach snr_0 with no other load."""
    denom = 1.0 / snr_0 - (k_0 - 1) * n_0 / block_length
    if denom <= 0:
        raise DesignError(f"{k_0} users of length {n_0} cannot reach the SNR at any power")
    return 1.0 / denom


def design_codebook(
    k_a: int,
    snr_table: SnrRequirementTable,
    lengths_per_level,
    seed_users: int,
    *,
    block_length: int = 28000,
    payload_bits: int = 85,
    crc_bits: int = 12,
    target_bler: float = 0.05,
    power_ratio: float = 2.0,
    margin: float = 0.9,
    preamble_bits: int = 15,
    preamble_length: int = 2000,
    preamble_power: float | None = None,
) -> CodebookConfig:
    """Greedy sequential design.

    The shortest length of the first level is the seed class carrying
    ``seed_users`` users; it fixes P_1.  Every later class gets
    ``floor(margin * kbar)`` users, where ``kbar`` is the largest load its SINR
    inequality allows, until the counts reach ``k_a`` (the last class is
    truncated).  Level j uses ``power_ratio ** j * P_1``.

    With ``margin < 1`` the seed class gets the same headroom: P_1 is sized
    for ``ceil(seed_users / margin)`` users.
    """
    if k_a < 1:
        raise DesignError("k_a must be positive")
    if not 0 < margin <= 1:
        raise DesignError("margin must be in (0, 1]")
    levels = [sorted(int(n) for n in lv) for lv in lengths_per_level]
    if not levels or not levels[0]:
        raise DesignError("empty length menu")
    for lv in levels:
        if len(set(lv)) != len(lv):
            raise DesignError("duplicate lengths within a level")
    n = block_length
    n_0 = levels[0][0]
    snr_0 = snr_table.linear(n_0)
    seed_users = min(int(seed_users), k_a)
    sized_for = math.ceil(seed_users / margin - 1e-12)
    p1 = min_power_p1(snr_0, sized_for, n_0, n)

    classes = []
    remaining = k_a
    load = 0.0
    for j, lv in enumerate(levels):
        power = p1 * power_ratio**j
        for i, length in enumerate(lv):
            if remaining == 0:
                break
            if j == 0 and i == 0:
                k = seed_users
            else:
                kbar = max_supported_users(power, snr_table.linear(length), load, length, n)
                k = int(math.floor(margin * kbar + 1e-12))
            k = min(k, remaining)
            if k > 0:
                classes.append(CodeClass(j, i, length, power, k))
                load += k * length * power / n
                remaining -= k
        if remaining == 0:
            break
    if remaining > 0:
        raise DesignError(
            f"cannot reach K_a={k_a}: the length/power menu supports only {k_a - remaining} users"
        )
    used = {c.length for c in classes}
    return CodebookConfig(
        k_a=k_a,
        block_length=n,
        payload_bits=payload_bits,
        crc_bits=crc_bits,
        preamble_bits=preamble_bits,
        preamble_length=preamble_length,
        preamble_power=preamble_power,
        target_bler=target_bler,
        margin=margin,
        power_ratio=power_ratio,
        classes=classes,
        snr_db={m: snr_table.snr_db[m] for m in sorted(used)},
        snr_source=snr_table.source,
    )


def config_from_counts(k_a, counts_per_level, snr_table: SnrRequirementTable, p1=None,
                       power_ratio=2.0, block_length=28000, **kw) -> CodebookConfig:
    """Build a config from explicit class counts.

    ``counts_per_level`` is a list (one entry per power level) of
    ``{length: users}`` maps.  Without ``p1`` the first level's shortest class
    seeds P_1 through :func:`min_power_p1`.
    """
    levels = [sorted(lv.items()) for lv in counts_per_level]
    if p1 is None:
        n_0, k_0 = levels[0][0]
        p1 = min_power_p1(snr_table.linear(n_0), k_0, n_0, block_length)
    classes = [
        CodeClass(j, i, int(length), p1 * power_ratio**j, int(k))
        for j, lv in enumerate(levels)
        for i, (length, k) in enumerate(lv)
    ]
    used = {c.length for c in classes}
    return CodebookConfig(k_a=k_a, block_length=block_length, power_ratio=power_ratio,
                          classes=classes,
                          snr_db={m: snr_table.snr_db[m] for m in sorted(used)},
                          snr_source=snr_table.source, **kw)


def selection_probabilities(config: CodebookConfig, k_a: int | None = None, strict=True):
    """p = k / K_a per class, in the order of ``config.classes``.

    In strict mode the counts must add up to K_a; otherwise probabilities are
    renormalised to sum to one.
    """
    k_a = config.k_a if k_a is None else k_a
    counts = np.array([c.users for c in config.classes], dtype=float)
    total = counts.sum()
    if strict and total != k_a:
        raise ValueError(f"class counts sum to {total:g}, expected K_a={k_a}")
    if not strict:
        return counts / total
    return counts / k_a


def counts_from_fractions(fractions, k_a: int) -> np.ndarray:
    """Largest-remainder rounding of reference fractions to integer counts summing to k_a."""
    f = np.asarray(fractions, dtype=float)
    raw = f / f.sum() * k_a
    k = np.floor(raw).astype(int)
    short = k_a - k.sum()
    order = np.argsort(-(raw - k), kind="stable")
    k[order[:short]] += 1
    return k


def energy_per_bit(config: CodebookConfig, k_a: int | None = None):
    """System E_b/N_0 including preamble energy; returns (linear, dB)."""
    k_a = config.k_a if k_a is None else k_a
    data_energy = sum(c.users * c.length * c.power for c in config.classes)
    data_users = sum(c.users for c in config.classes)
    num = k_a * config.preamble_length * config.preamble_power_value + data_energy
    den = 2.0 * k_a * config.preamble_bits + 2.0 * config.payload_bits * data_users
    val = num / den
    return val, float(db(val))


@dataclass
class ClassReport:
    level: int
    index: int
    length: int
    users: int
    sinr: float
    required: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.slack >= -FEASIBILITY_RTOL * self.required


@dataclass
class FeasibilityReport:
    classes: list

    @property
    def valid(self) -> bool:
        return all(c.ok for c in self.classes)

    @property
    def violations(self) -> list:
        return [c for c in self.classes if not c.ok]


def validate_config(config: CodebookConfig, snr_table: SnrRequirementTable | None = None):
    """SINR slack of every class in design order."""
    table = config.snr_table() if snr_table is None else snr_table
    out = []
    for c in config.design_order():
        if c.users == 0:
            continue
        sinr = c.power / (1.0 + interference_power(config, c.level, c.index))
        req = table.linear(c.length)
        out.append(ClassReport(c.level, c.index, c.length, c.users, sinr, req, sinr - req))
    return FeasibilityReport(out)
