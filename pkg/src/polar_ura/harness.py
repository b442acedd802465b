"""Monte-Carlo experiments: PUPE, required-SNR calibration, interference comparison, sweeps.

Randomness is split per trial: trial ``t`` of an experiment with master seed
``s`` draws from ``SeedSequence(s, spawn_key=(stream, t))``.  Results never
depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .codebook import CodebookConfig, db, energy_per_bit, normal_approx_snr
from .mac import genie_preambles, make_trace, message_key, sample_users, transmit
from .polar import (
    DEFAULT_CRC,
    bpsk,
    ca_scl_decode,
    construct_code,
    encode_message,
    mother_exponent_for,
    polar_encode,
)
from .sic import ReceiverConfig, run_sic
from .spreading import make_interleaver, positions

# stream ids keep experiments that share a master seed apart
STREAM_SYSTEM, STREAM_CALIBRATION, STREAM_INTERFERENCE = 1, 2, 3
SEED_SPACE = 2**63 - 1  # largest int64 bound numpy accepts


def trial_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def wilson_interval(errors: int, trials: int, confidence: float = 0.95):
    if trials == 0:
        return 0.0, 1.0
    z = norm.isf((1 - confidence) / 2)
    p = errors / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


def pupe(sent, decoded) -> float:
    """Fraction of sent messages with no matching entry in the decoded list.

    Messages are compared by value; a message sent twice needs two list entries.
    """
    sent_keys = Counter(message_key(m) for m in sent)
    if not sent_keys:
        return 0.0
    got = Counter(message_key(m) for m in decoded)
    missing = sum((sent_keys - got).values())
    return missing / sum(sent_keys.values())


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# --------------------------------------------------------------------------
# system trials


@dataclass
class TrialResult:
    seed: int
    trial: int
    k_a: int
    errors: int
    decoded: int
    pupe: float
    class_stats: list = field(default_factory=list)  # (level, length, attempted, succeeded, sigma2)
    trace: object = None


def system_trial(config: CodebookConfig, receiver: ReceiverConfig = ReceiverConfig(), seed: int = 0,
                 trial: int = 0, mode: str = "fixed", p_miss: float = 0.0,
                 power_scale: float = 1.0, keep_trace: bool = False) -> TrialResult:
    """One sample -> transmit -> genie preambles -> TIN-SIC -> PUPE."""
    cfg = config if power_scale == 1.0 else config.scaled(power_scale)
    rng = trial_rng(seed, STREAM_SYSTEM, trial)
    users = sample_users(cfg, cfg.k_a, mode, rng)
    y = transmit(users, cfg.block_length, rng)
    side = genie_preambles(users, p_miss, rng)
    state = run_sic(y, side, cfg, receiver)
    sent = [u.message for u in users]
    e = pupe(sent, state.decoded_list)
    stats = [(s.level, s.length, s.attempted, s.succeeded, s.sigma2) for s in state.steps]
    return TrialResult(
        seed=seed, trial=trial, k_a=len(users), errors=int(round(e * len(users))),
        decoded=len(state.messages), pupe=e, class_stats=stats,
        trace=make_trace(cfg, users, side, y) if keep_trace else None,
    )


def _system_job(args):
    config, receiver, seed, trial, mode, p_miss, scale, keep = args
    return system_trial(config, receiver, seed, trial, mode, p_miss, scale, keep)


def run_trials(config, receiver, trials, seed=0, mode="fixed", p_miss=0.0, power_scale=1.0,
               workers=1, keep_trace=False, first_trial=0) -> list:
    jobs = [(config, receiver, seed, t, mode, p_miss, power_scale, keep_trace)
            for t in range(first_trial, first_trial + trials)]
    return _map(_system_job, jobs, workers)


@dataclass
class SweepPoint:
    scale: float
    ebn0_db: float
    pupe: float
    ci_lo: float
    ci_hi: float
    trials: int


def summarize(results) -> tuple:
    errors = sum(r.errors for r in results)
    users = sum(r.k_a for r in results)
    p = errors / users if users else 0.0
    lo, hi = wilson_interval(errors, users)
    return p, lo, hi


def sweep_ebn0(config: CodebookConfig, scales, trials: int, receiver=ReceiverConfig(), seed=0,
               mode="fixed", p_miss=0.0, workers=1) -> list:
    """PUPE against E_b/N_0 as every power (data and preamble) is scaled together.

    Every scale reuses the same trial seeds (common random numbers).
    """
    out = []
    for s in scales:
        res = run_trials(config, receiver, trials, seed, mode, p_miss, s, workers)
        p, lo, hi = summarize(res)
        out.append(SweepPoint(float(s), energy_per_bit(config.scaled(s))[1], p, lo, hi, trials))
    return out


def required_ebn0(points, eps=0.05):
    """Lowest E_b/N_0 of a sweep whose PUPE estimate is <= eps (None if none)."""
    ok = [p for p in points if p.pupe <= eps]
    return min(ok, key=lambda p: p.ebn0_db) if ok else None


# --------------------------------------------------------------------------
# single-user calibration


@dataclass
class CalibrationPoint:
    length: int
    snr_db: float
    errors: int
    trials: int
    list_size: int

    @property
    def bler(self) -> float:
        return self.errors / self.trials if self.trials else float("nan")

    @property
    def ci(self):
        return wilson_interval(self.errors, self.trials)


@dataclass
class CalibrationResult:
    length: int
    required_snr_db: float
    points: list


def _bler_job(args):
    length, payload, crc_bits, list_size, snr_db, seed, trials = args
    con = construct_code(mother_exponent_for(length), length, payload, crc_bits, snr_db)
    a = math.sqrt(10 ** (snr_db / 10))
    errors = 0
    for t in trials:
        rng = trial_rng(seed, STREAM_CALIBRATION, length, t)
        msg = rng.integers(0, 2, payload, dtype=np.uint8)
        z = rng.standard_normal(length)
        y = bpsk(encode_message(msg, con), a) + z
        out = ca_scl_decode(2.0 * a * y, con, list_size)
        errors += out is None or not np.array_equal(out, msg)
    return errors


def max_admissible_errors(trials: int, eps: float) -> int:
    """Largest error count whose upper 95% Wilson bound stays <= eps (-1 if none)."""
    k = -1
    while k + 1 <= trials and wilson_interval(k + 1, trials)[1] <= eps:
        k += 1
    return k


def bler_point(length, snr_db, trials, list_size=32, payload=85, crc_bits=12, seed=0, workers=1,
               abort_above=None, chunk=100) -> CalibrationPoint:
    """Block error count at one SNR; stops early once ``abort_above`` errors are seen.

    Chunks run in order with a fixed size, so an early stop lands on the same
    trial count for any worker count.
    """
    errors = done = 0
    while done < trials:
        n = min(chunk, trials - done)
        per = max(1, math.ceil(n / max(workers, 1)))
        parts = [range(done + i, min(done + i + per, done + n)) for i in range(0, n, per)]
        jobs = [(length, payload, crc_bits, list_size, snr_db, seed, p) for p in parts]
        errors += sum(_map(_bler_job, jobs, workers))
        done += n
        if abort_above is not None and errors > abort_above:
            break
    return CalibrationPoint(length, snr_db, errors, done, list_size)


def calibrate_required_snr(length, payload=85, crc_bits=12, list_size=32, eps=0.05, bracket_db=None,
                           trials=2000, seed=0, workers=1, early_stop=True) -> CalibrationResult:
    """Smallest SNR on a 0.1 dB grid whose upper 95% Wilson bound on BLER is <= eps.

    Bisection over the grid; every point reuses the same trial seeds, so BLER
    is (almost surely) monotone along the grid.
    """
    if bracket_db is None:
        na = float(db(normal_approx_snr(length, payload, eps)))
        bracket_db = (na - 0.5, na + 3.0)
    lo = math.floor(round(bracket_db[0] * 10, 6))
    hi = math.ceil(round(bracket_db[1] * 10, 6))
    kmax = max_admissible_errors(trials, eps)
    points = {}

    def passes(g):
        if g not in points:
            points[g] = bler_point(length, g / 10, trials, list_size, payload, crc_bits, seed,
                                   workers, kmax if early_stop else None)
        p = points[g]
        return p.trials == trials and p.errors <= kmax

    if not passes(hi):
        raise RuntimeError(f"length {length}: BLER above target at the top of the bracket")
    if passes(lo):
        raise RuntimeError(f"length {length}: BLER already below target at the bottom of the bracket")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    pts = [points[g] for g in sorted(points)]
    return CalibrationResult(length, hi / 10, pts)


# --------------------------------------------------------------------------
# true vs. Gaussian interference


@dataclass
class ComparisonPoint:
    interferers: int
    sinr_db: float
    errors: int
    trials: int

    @property
    def bler(self):
        return self.errors / self.trials

    @property
    def ci(self):
        return wilson_interval(self.errors, self.trials)


def interference_samples(k, n_c, block_length, rng, construction=None, at=None):
    """Sum of k spread unit-amplitude BPSK codewords with random interleavers.

    With ``construction`` the codewords are polar codewords of random
    messages; otherwise the code bits are i.i.d. uniform.  ``at`` restricts
    the output to those block positions.
    """
    total = np.zeros(block_length)
    if k:
        seeds = rng.choice(SEED_SPACE, size=k, replace=False)
        if construction is None:
            bits = rng.integers(0, 2, size=(k, n_c), dtype=np.uint8)
        else:
            bits = polar_encode(rng.integers(0, 2, size=(k, construction.k), dtype=np.uint8),
                                construction)
        sym = bpsk(bits)
        for s, row in zip(seeds, sym):
            total[positions(make_interleaver(int(s), block_length), n_c)] += row
    return total if at is None else total[at]


def _comparison_job(args):
    k, n_c, block_length, sinr_db, list_size, seed, trials = args
    con = construct_code(mother_exponent_for(n_c), n_c, 85, 12, sinr_db)
    sinr = 10 ** (sinr_db / 10)
    total_var = 1.0 / sinr
    noise_var = total_var - k * n_c / block_length
    if noise_var <= 0:
        raise ValueError(f"SINR {sinr_db} dB unreachable with {k} unit-power interferers")
    errors = 0
    for t in trials:
        rng = trial_rng(seed, STREAM_INTERFERENCE, n_c, t)
        msg = rng.integers(0, 2, 85, dtype=np.uint8)
        own = positions(make_interleaver(int(rng.integers(SEED_SPACE)), block_length), n_c)
        z = rng.standard_normal(n_c)
        irng = trial_rng(seed, STREAM_INTERFERENCE, n_c, t, k)
        interf = interference_samples(k, n_c, block_length, irng, con, at=own)
        y = bpsk(encode_message(msg, con)) + interf + math.sqrt(noise_var) * z
        out = ca_scl_decode(2.0 * y / total_var, con, list_size)
        errors += out is None or not np.array_equal(out, msg)
    return errors


def interference_comparison(n_c=4096, counts=(0, 10, 25, 50), sinr_grid_db=(-13.9,), trials=2000,
                            list_size=32, block_length=28000, seed=0, workers=1, chunk=100) -> list:
    """BLER of one unit-power user under Gaussian noise plus k spread interferers.

    The decoder always assumes Gaussian noise of variance 1/SINR; the true noise
    variance is whatever remains after the interferers' k N_c / N.
    """
    out = []
    for k in counts:
        for s in sinr_grid_db:
            jobs = [(k, n_c, block_length, s, list_size, seed, range(i, min(i + chunk, trials)))
                    for i in range(0, trials, chunk)]
            errors = sum(_map(_comparison_job, jobs, workers))
            out.append(ComparisonPoint(k, float(s), errors, trials))
    return out
