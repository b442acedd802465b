"""Treat-interference-as-noise successive interference cancellation receiver.

Classes are processed from the highest power level down and, inside a level,
from the longest code to the shortest.  All users of a class are decoded
against the same residual; the CRC-valid ones are then re-encoded and
subtracted together.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codebook import CodebookConfig
from .mac import SideInfo, amplitude, class_construction, message_key
from .polar import DEFAULT_CRC, CrcSpec, ca_scl_decode, encode_message
from .spreading import make_interleaver, positions


@dataclass(frozen=True)
class ReceiverConfig:
    list_size: int = 32
    noise_model: str = "realized"  # or "designed"
    cleanup_passes: int = 0
    crc: CrcSpec = DEFAULT_CRC

    def __post_init__(self):
        if self.list_size < 1:
            raise ValueError("list size must be >= 1")
        if self.noise_model not in ("realized", "designed"):
            raise ValueError(f"unknown noise model {self.noise_model!r}")


@dataclass
class Decoded:
    class_index: int
    seed: int
    message: np.ndarray
    codeword: np.ndarray


@dataclass
class ClassStep:
    level: int
    length: int
    attempted: int
    succeeded: int
    sigma2: float
    cleanup: int = 0


@dataclass
class SicState:
    y: np.ndarray
    config: CodebookConfig
    pending: dict  # class index -> list of SideInfo not yet subtracted
    counts: np.ndarray  # per-class users still counted as interference
    residual: np.ndarray = None
    subtracted: np.ndarray = None
    log: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    messages: dict = field(default_factory=dict)  # key -> message

    def __post_init__(self):
        if self.residual is None:
            self.residual = self.y.copy()
        if self.subtracted is None:
            self.subtracted = np.zeros_like(self.y)

    @classmethod
    def start(cls, y, side_info, config: CodebookConfig, noise_model="realized"):
        pending = {i: [] for i in range(len(config.classes))}
        for s in side_info:
            pending[s.class_index].append(s)
        if noise_model == "designed":
            counts = np.array([c.users for c in config.classes], dtype=float)
        else:
            counts = np.array([len(pending[i]) for i in pending], dtype=float)
        return cls(np.asarray(y, dtype=np.float64), config, pending, counts)

    @property
    def decoded_list(self) -> list:
        return list(self.messages.values())


def decode_order(config: CodebookConfig) -> list:
    """Class indices, highest power first, longest code first within a level."""
    return sorted(range(len(config.classes)),
                  key=lambda i: (-config.classes[i].level, -config.classes[i].length))


def effective_noise_variance(state: SicState, class_index: int, self_excluded=True) -> float:
    cfg = state.config
    n = cfg.block_length
    loads = np.array([c.load(n) for c in cfg.classes])
    var = 1.0 + float(np.dot(np.maximum(state.counts, 0.0), loads))
    if self_excluded:
        var -= loads[class_index]
    return max(var, 1.0)


def llr_compute(residual, side: SideInfo, config: CodebookConfig, sigma2: float) -> np.ndarray:
    """BPSK LLRs 2 a y / sigma2 on the positions the user owns, in codeword order."""
    cls = config.classes[side.class_index]
    a = amplitude(cls.power)
    pos = positions(make_interleaver(side.seed, config.block_length), cls.length)
    return 2.0 * a * residual[pos] / sigma2


def decode_class(state: SicState, class_index: int, receiver: ReceiverConfig, users=None):
    """Decode every pending user of a class from the current residual.

    Returns (successes, failures) where failures are SideInfo entries.
    """
    cfg = state.config
    users = state.pending[class_index] if users is None else users
    if not users:
        return [], []
    con = class_construction(cfg, class_index)
    sigma2 = effective_noise_variance(state, class_index)
    ok, bad = [], []
    for side in users:
        llr = llr_compute(state.residual, side, cfg, sigma2)
        msg = ca_scl_decode(llr, con, receiver.list_size, receiver.crc)
        if msg is None:
            bad.append(side)
        else:
            ok.append(Decoded(class_index, side.seed, msg, encode_message(msg, con, receiver.crc)))
    return ok, bad


def codeword_signal(dec: Decoded, config: CodebookConfig):
    cls = config.classes[dec.class_index]
    pos = positions(make_interleaver(dec.seed, config.block_length), cls.length)
    return pos, amplitude(cls.power) * (1.0 - 2.0 * dec.codeword)


def subtract(state: SicState, successes) -> SicState:
    for dec in successes:
        pos, sym = codeword_signal(dec, state.config)
        state.residual[pos] -= sym
        state.subtracted[pos] += sym
        state.counts[dec.class_index] -= 1
        state.pending[dec.class_index] = [
            s for s in state.pending[dec.class_index] if s.seed != dec.seed
        ]
        state.log.append(dec)
        state.messages.setdefault(message_key(dec.message), dec.message)
    return state


def run_sic(y, side_info, config: CodebookConfig, receiver: ReceiverConfig = ReceiverConfig(),
            on_step=None) -> SicState:
    """Full TIN-SIC pass (plus optional clean-up passes over failed users)."""
    state = SicState.start(y, side_info, config, receiver.noise_model)
    order = decode_order(config)
    for rnd in range(1 + receiver.cleanup_passes):
        for ci in order:
            if rnd and not state.pending[ci]:
                continue
            sigma2 = effective_noise_variance(state, ci)
            attempted = len(state.pending[ci])
            ok, _ = decode_class(state, ci, receiver)
            subtract(state, ok)
            c = config.classes[ci]
            state.steps.append(ClassStep(c.level, c.length, attempted, len(ok), sigma2, rnd))
            if on_step is not None:
                on_step(state)
    return state


def regenerate_subtracted(state: SicState) -> np.ndarray:
    """Sum of subtracted codewords rebuilt from the decode log alone."""
    total = np.zeros_like(state.y)
    for dec in state.log:
        pos, sym = codeword_signal(dec, state.config)
        total[pos] += sym
    return total
