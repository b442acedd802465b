import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polar_ura.harness import bler_point
from polar_ura.polar import (
    CodeConstruction,
    CrcSpec,
    bpsk,
    ca_scl_decode,
    construct_code,
    crc_append,
    crc_check,
    encode_message,
    expand_punctured,
    generator_matrix,
    mother_exponent_for,
    polar_encode,
    sc_decode,
    scl_list,
)
from polar_ura.polar.construction import bit_reversal, subchannel_means

CRC4 = CrcSpec(width=4, poly=0x3)  # x^4 + x + 1


def full_code(n):
    return construct_code(n, 1 << n, 1 << n, 0, 0.0)


# ---------------------------------------------------------------- encoding


def test_hand_examples_n2():
    con = full_code(2)
    assert con.info_set == (0, 1, 2, 3)
    assert polar_encode([0, 0, 0, 1], con).tolist() == [1, 1, 1, 1]
    assert polar_encode([1, 0, 0, 0], con).tolist() == [1, 0, 0, 0]
    assert not polar_encode([0, 0, 0, 0], con).any()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_generator_is_involution(n):
    g = generator_matrix(n).astype(int)
    assert np.array_equal(g @ g % 2, np.eye(1 << n, dtype=int))


def test_encoder_matches_dense_generator():
    rng = np.random.default_rng(0)
    con = full_code(6)
    g = generator_matrix(6).astype(int)
    u = rng.integers(0, 2, size=(50, 64), dtype=np.uint8)
    assert np.array_equal(polar_encode(u, con), u.astype(int) @ g % 2)


def test_puncturing_drops_leading_positions():
    rng = np.random.default_rng(1)
    con = construct_code(6, 48, 10, 0, 1.0)
    u_info = rng.integers(0, 2, size=10, dtype=np.uint8)
    u = np.zeros(64, dtype=int)
    u[list(con.info_set)] = u_info
    full = u @ generator_matrix(6).astype(int) % 2
    assert np.array_equal(polar_encode(u_info, con), full[16:])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(7, 100), (8, 256), (10, 768)]))
def test_encoding_is_linear(seed, shape):
    n, length = shape
    con = construct_code(n, length, 20, 12, -3.0)
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, size=(2, con.k), dtype=np.uint8)
    assert np.array_equal(polar_encode(a ^ b, con), polar_encode(a, con) ^ polar_encode(b, con))


def test_length_mismatch_rejected():
    con = construct_code(5, 32, 8, 0, 0.0)
    with pytest.raises(ValueError):
        polar_encode(np.zeros(9, dtype=np.uint8), con)


# ---------------------------------------------------------------- construction


def test_rate_one_code_uses_every_input():
    assert full_code(2).info_set == (0, 1, 2, 3)


def test_set_sizes_for_longest_length():
    con = construct_code(13, 8192, 85, 12, -16.8)
    assert len(con.info_set) == 97
    assert len(con.frozen_set) == 8095
    assert con.puncture_count == 0


def erased_inputs(n, punctured):
    """u indices left with zero capacity when the punctured codeword bits are erased
    and every other bit is perfect (exact erasure recursion)."""
    z = np.zeros(1 << n)
    z[bit_reversal(n)[:punctured]] = 1.0
    z = z[None, :]
    while z.shape[1] > 1:
        h = z.shape[1] // 2
        a, b = z[:, :h], z[:, h:]
        z = np.stack([a + b - a * b, a * b], axis=1).reshape(-1, h)
    return np.flatnonzero(z[:, 0] == 1.0)


def test_punctured_rows_never_informational():
    con = construct_code(12, 3584, 85, 12, -13.4)
    assert con.puncture_count == 512
    dead = erased_inputs(12, 512)
    assert dead.size == 512
    assert not set(dead.tolist()) & set(con.info_set)
    assert np.all(subchannel_means(12, 3584, -13.4)[dead] == 0.0)


@pytest.mark.parametrize("bad", [(3, 4, 1, 0), (3, 9, 1, 0), (3, 8, 6, 3), (4, 12, 12, 0), (0, 1, 0, 0)])
def test_invalid_construction_arguments(bad):
    n, length, b, c = bad
    with pytest.raises(ValueError):
        construct_code(n, length, b, c, 0.0)


def test_mother_exponent():
    assert mother_exponent_for(768) == 10
    assert mother_exponent_for(1024) == 10
    assert mother_exponent_for(1025) == 11
    assert mother_exponent_for(2) == 1


def test_construction_roundtrips_through_dict():
    con = construct_code(10, 768, 85, 12, -6.5)
    assert CodeConstruction.from_dict(con.to_dict()) == con


def genie_sc_llrs(llr_v, u):
    """Min-sum SC LLRs of every u index with the true earlier bits fed back."""
    n = llr_v.shape[1]
    if n == 1:
        return llr_v
    h = n // 2
    a, b = llr_v[:, :h], llr_v[:, h:]
    f = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    left = genie_sc_llrs(f, u[:, :h])
    k = h.bit_length() - 1
    s = u[:, :h].astype(int) @ _kron_f(k) % 2
    g = b + (1 - 2 * s) * a
    return np.concatenate([left, genie_sc_llrs(g, u[:, h:])], axis=1)


def _kron_f(k):
    out = np.ones((1, 1), dtype=int)
    for _ in range(k):
        out = np.kron(out, np.array([[1, 0], [1, 1]]))
    return out


def test_ga_ranking_agrees_with_genie_monte_carlo():
    """Information set vs. simulated bit-channel error rates (N=64 punctured to 48)."""
    n, length, k, snr_db = 6, 48, 16, 1.0
    con = construct_code(n, length, k, 0, snr_db)
    rng = np.random.default_rng(11)
    trials = 4000
    u = rng.integers(0, 2, size=(trials, 64), dtype=np.uint8)
    v = u.astype(int) @ _kron_f(n) % 2
    x = v[:, bit_reversal(n)]
    a = np.sqrt(10 ** (snr_db / 10))
    y = a * (1 - 2.0 * x) + rng.standard_normal(x.shape)
    llr_x = 2 * a * y
    llr_x[:, :16] = 0.0
    llr_v = llr_x[:, bit_reversal(n)]
    lu = genie_sc_llrs(llr_v, u)
    wrong = (lu * (1 - 2.0 * u) < 0) + 0.5 * (lu == 0)
    err = wrong.mean(axis=0)
    mc_best = set(np.argsort(err, kind="stable")[:k].tolist())
    assert len(mc_best & set(con.info_set)) >= k - 2
    dead = np.flatnonzero(subchannel_means(n, length, snr_db) == 0)
    assert np.all(np.abs(err[dead] - 0.5) < 0.05)


# ---------------------------------------------------------------- SC decoding


def brute_force_sc(llr_x, frozen, g):
    """Max-log SC by exhaustive search over every completion of each prefix."""
    n = g.shape[0]
    all_u = np.array(list(itertools.product([0, 1], repeat=n)), dtype=int)
    corr = (1 - 2 * (all_u @ g % 2)) @ llr_x
    decided = np.zeros(n, dtype=int)
    mask = np.ones(len(all_u), dtype=bool)
    for i in range(n):
        if frozen[i]:
            decided[i] = 0
        else:
            m0 = corr[mask & (all_u[:, i] == 0)].max()
            m1 = corr[mask & (all_u[:, i] == 1)].max()
            decided[i] = 0 if m0 >= m1 else 1
        mask &= all_u[:, i] == decided[i]
    return decided


def test_sc_matches_brute_force_n4():
    con = construct_code(4, 16, 4, 0, 0.0)
    g = generator_matrix(4).astype(int)
    rng = np.random.default_rng(3)
    for _ in range(100):
        info = rng.integers(0, 2, 4, dtype=np.uint8)
        y = bpsk(polar_encode(info, con)) + rng.standard_normal(16)
        llr = 2.0 * y
        ref = brute_force_sc(llr, con.frozen_mask, g)
        assert np.array_equal(sc_decode(llr, con), ref[list(con.info_set)])


@pytest.mark.parametrize("length", [128, 768, 1024, 3584])
def test_sc_noiseless(length):
    con = construct_code(mother_exponent_for(length), length, 85, 12, -5.0)
    info = np.random.default_rng(length).integers(0, 2, con.k, dtype=np.uint8)
    llr = 50.0 * bpsk(polar_encode(info, con))
    assert np.array_equal(sc_decode(llr, con), info)


def test_zero_llrs_decide_zero():
    con = construct_code(8, 200, 40, 12, 0.0)
    assert not sc_decode(np.zeros(200), con).any()


def test_expand_punctured_zeros_first():
    con = construct_code(10, 768, 85, 12, -6.5)
    full = expand_punctured(np.arange(1, 769, dtype=float), con)
    assert full.size == 1024
    assert not full[:256].any()
    assert np.array_equal(full[256:], np.arange(1, 769))


# ---------------------------------------------------------------- CA-SCL


def test_ca_scl_equals_exhaustive_ml():
    con = construct_code(4, 16, 4, 4, 0.0)
    msgs = np.array(list(itertools.product([0, 1], repeat=4)), dtype=np.uint8)
    words = np.array([encode_message(m, con, CRC4) for m in msgs])
    assert all(crc_check(crc_append(m, CRC4), CRC4) for m in msgs)
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(1000):
        m = msgs[rng.integers(16)]
        llr = 2.0 * (bpsk(encode_message(m, con, CRC4)) + rng.standard_normal(16))
        ml = msgs[np.argmax(bpsk(words) @ llr)]
        got = ca_scl_decode(llr, con, 256, CRC4)
        agree += got is not None and np.array_equal(got, ml)
    assert agree == 1000


def test_full_list_keeps_every_path():
    con = construct_code(4, 16, 4, 4, 0.0)
    rng = np.random.default_rng(2)
    u, pm = scl_list(rng.standard_normal(16), con, 256)
    assert len(u) == 256
    assert len({r.tobytes() for r in u}) == 256
    assert np.all(np.diff(pm) >= 0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([768, 1024, 1536, 2048, 3584, 4096]),
       st.sampled_from([1, 4, 32]))
def test_noiseless_roundtrip(seed, length, list_size):
    con = construct_code(mother_exponent_for(length), length, 85, 12, -9.0)
    msg = np.random.default_rng(seed).integers(0, 2, 85, dtype=np.uint8)
    llr = 20.0 * bpsk(encode_message(msg, con))
    assert np.array_equal(ca_scl_decode(llr, con, list_size), msg)


def test_no_crc_valid_path_returns_none():
    con = construct_code(9, 512, 85, 12, -3.0)
    llr = np.random.default_rng(4).standard_normal(512) * 0.01
    assert ca_scl_decode(llr, con, 1) is None


def test_crc_width_mismatch():
    con = construct_code(9, 512, 85, 12, -3.0)
    with pytest.raises(ValueError):
        ca_scl_decode(np.zeros(512), con, 4, CRC4)


def test_bler_monotone_in_snr_and_list_size():
    grid = (-4.0, -3.0, -2.0)
    counts = {(s, l): bler_point(512, s, 300, l, seed=9).errors for s in grid for l in (1, 8, 32)}
    for l in (1, 8, 32):
        errs = [counts[(s, l)] for s in grid]
        assert errs == sorted(errs, reverse=True)
    for s in grid:
        errs = [counts[(s, l)] for l in (1, 8, 32)]
        assert errs == sorted(errs, reverse=True)
    assert counts[(-4.0, 1)] > counts[(-2.0, 32)]
