import math

import numpy as np
import pytest

from qtc.core import SeedPath
from qtc.vector import (
    AratqConfig,
    LpSplitConfig,
    RatqConfig,
    SimqPlusConfig,
    _rank_composition,
    _unrank_composition,
    aratq_quantizer,
    atuq_vector_apply,
    lp_split_quantizer,
    ratq_quantizer,
    ratq_sample,
    rcs_ratq_sample,
    rcs_wrap,
    simq_decode,
    simq_encode,
    simq_plus_quantizer,
    simq_plus_sample,
    simq_quantizer,
)


def unit_vector(seed, d):
    y = SeedPath(seed).stream().normal(size=d)
    return y / np.linalg.norm(y)


def test_ratq_default_parameters_d256():
    cfg = RatqConfig.default(1.0, 256)
    assert cfg.ladder.h == 4 and cfg.s == 2 and cfg.k == 7
    assert cfg.bit_budget == 1024  # <= d(1+Delta1)+Delta2 = 1026


def test_ratq_budget_exact_every_message():
    cfg = RatqConfig.default(1.0, 256)
    q = ratq_quantizer(cfg)
    for t in range(20):
        msg, _ = q.roundtrip(unit_vector(t, 256), None, SeedPath(50).child("t", t))
        assert msg.nbits == cfg.bit_budget


def test_ratq_zero_vector():
    q = ratq_quantizer(RatqConfig.default(1.0, 64))
    _, rec = q.roundtrip(np.zeros(64), None, SeedPath(0))
    assert np.allclose(rec, 0.0)


def test_ratq_rejects_out_of_ball():
    q = ratq_quantizer(RatqConfig.default(1.0, 16))
    with pytest.raises(ValueError):
        q.encode(np.full(16, 1.0), None, SeedPath(1).stream())


def test_ratq_unbiased_and_bounded_second_moment():
    cfg = RatqConfig.default(1.0, 64)
    y = unit_vector(2, 64)
    recs = ratq_sample(y, cfg, 50_000, SeedPath(3).stream())
    se = recs.std(axis=0) / math.sqrt(len(recs))
    assert np.all(np.abs(recs.mean(axis=0) - y) <= 5 * se + 1e-12)
    bound = (9 + 3 * math.log(cfg.s)) / (cfg.k - 1) ** 2 + 1
    assert (recs**2).sum(axis=1).mean() <= bound


def test_ratq_bit_path_matches_sampler_distribution():
    cfg = RatqConfig.default(1.0, 16)
    q = ratq_quantizer(cfg)
    y = unit_vector(4, 16)
    bit_recs = np.array(
        [q.roundtrip(y, None, SeedPath(5).child("t", t))[1] for t in range(3000)]
    )
    mc_recs = ratq_sample(y, cfg, 3000, SeedPath(6).stream())
    se = np.sqrt(bit_recs.var(axis=0) + mc_recs.var(axis=0)) / math.sqrt(3000)
    assert np.all(np.abs(bit_recs.mean(0) - mc_recs.mean(0)) <= 6 * se + 1e-9)
    assert abs((bit_recs**2).sum(1).mean() - (mc_recs**2).sum(1).mean()) < 0.05


def test_ratq_non_pow2_dimension():
    cfg = RatqConfig.default(1.0, 24)
    q = ratq_quantizer(cfg)
    y = unit_vector(7, 24)
    msg, rec = q.roundtrip(y, None, SeedPath(8))
    assert msg.nbits == cfg.bit_budget and rec.shape == (24,)
    recs = ratq_sample(y, cfg, 20_000, SeedPath(9).stream())
    assert np.linalg.norm(recs.mean(axis=0) - y) < 0.05


def test_rcs_wrap_contract():
    cfg = RatqConfig.for_subsampling(1.0, 64)
    with pytest.raises(ValueError):
        rcs_wrap(RatqConfig.default(1.0, 64), 4)  # s != 1
    with pytest.raises(ValueError):
        rcs_wrap(cfg, 0)
    with pytest.raises(ValueError):
        rcs_wrap(cfg, 65)
    q = rcs_wrap(cfg, 4)
    assert q.bit_budget == 4 * (cfg.ladder.index_bits + 3)


def test_rcs_full_sampling_matches_ratq_distribution():
    # mu = 1 keeps every coordinate: distributionally identical to RATQ s=1
    cfg = RatqConfig.for_subsampling(1.0, 16)
    y = unit_vector(10, 16)
    full = rcs_ratq_sample(y, cfg, 16, 30_000, SeedPath(11).stream())
    plain = ratq_sample(y, cfg, 30_000, SeedPath(12).stream())
    assert abs((full**2).sum(1).mean() - (plain**2).sum(1).mean()) < 0.02
    assert np.linalg.norm(full.mean(0) - plain.mean(0)) < 0.05


def test_rcs_unbiased_and_second_moment_scaling():
    cfg = RatqConfig.for_subsampling(1.0, 64)
    y = unit_vector(13, 64)
    mu_d = 8
    recs = ratq_sample(y, cfg, 40_000, SeedPath(14).stream())
    sub = rcs_ratq_sample(y, cfg, mu_d, 40_000, SeedPath(15).stream())
    se = sub.std(axis=0) / math.sqrt(len(sub))
    assert np.all(np.abs(sub.mean(axis=0) - y) <= 5 * se + 1e-12)
    ratio = (sub**2).sum(1).mean() / (recs**2).sum(1).mean()
    assert ratio == pytest.approx(64 / mu_d, rel=0.1)


def test_rcs_roundtrip_budget():
    cfg = RatqConfig.for_subsampling(1.0, 64)
    q = rcs_wrap(cfg, 5)
    y = unit_vector(16, 64)
    msg, rec = q.roundtrip(y, None, SeedPath(17))
    assert msg.nbits == q.bit_budget
    # center mode agrees with zero-fill at side = 0
    qc = rcs_wrap(cfg, 5, mode="center")
    _, rec_center = qc.roundtrip(y, np.zeros(64), SeedPath(17))
    assert np.allclose(rec, rec_center)


def test_aratq_zero_and_overflow():
    cfg = AratqConfig.default(1.0, 32, T=1024)
    q = aratq_quantizer(cfg)
    _, rec = q.roundtrip(np.zeros(32), None, SeedPath(18))
    assert np.allclose(rec, 0.0)
    # gains beyond the top range decode to 0
    big = unit_vector(19, 32) * cfg.gain_ladder.ranges[-1] * 3
    _, rec = q.roundtrip(big, None, SeedPath(20))
    assert np.allclose(rec, 0.0)


def test_aratq_unbiased_in_range():
    cfg = AratqConfig.default(1.0, 32, T=1024)
    q = aratq_quantizer(cfg)
    y = unit_vector(21, 32) * 0.7
    recs = np.array([q.roundtrip(y, None, SeedPath(22).child("t", t))[1] for t in range(4000)])
    se = recs.std(axis=0) / math.sqrt(len(recs))
    assert np.all(np.abs(recs.mean(axis=0) - y) <= 6 * se + 0.01)


def test_aratq_budget_and_plus_mode():
    cfg = AratqConfig.default(1.0, 32, T=1024)
    assert cfg.bit_budget == cfg.gain_bits + cfg.shape.bit_budget
    q = aratq_quantizer(cfg)
    msg, _ = q.roundtrip(unit_vector(23, 32) * 0.5, None, SeedPath(24))
    assert msg.nbits == cfg.bit_budget
    plus = AratqConfig.default(1.0, 32, T=1024, gain_mode="aguq_plus")
    assert plus.bit_budget is None
    qp = aratq_quantizer(plus)
    msg, rec = qp.roundtrip(unit_vector(25, 32) * 0.5, None, SeedPath(26))
    assert rec.shape == (32,)


def test_simq_enumeration_exact():
    # analytic 3-outcome enumeration: E[decode] = y to 1e-12
    y = np.array([0.3, -0.2, 0.0])
    B = 1.0
    expect = np.zeros(3)
    for i in range(3):
        expect += (abs(y[i]) / B) * simq_decode((i + 1) * int(np.sign(y[i]) or 1), B, 3)
    assert np.max(np.abs(expect - y)) < 1e-12


def test_simq_distribution_and_corners():
    y = np.array([0.3, -0.2, 0.0])
    rng = SeedPath(27).stream()
    counts = {0: 0, 1: 0, -2: 0}
    n = 50_000
    for _ in range(n):
        counts[simq_encode(y, 1.0, rng)] += 1
    assert abs(counts[1] / n - 0.3) < 0.01
    assert abs(counts[-2] / n - 0.2) < 0.01
    assert abs(counts[0] / n - 0.5) < 0.01
    assert simq_encode(np.zeros(3), 1.0, rng) == 0
    corner = np.array([1.0, 0.0, 0.0])
    assert all(simq_encode(corner, 1.0, rng) == 1 for _ in range(50))


def test_simq_rejects_and_budget():
    q = simq_quantizer(1.0, 4)
    with pytest.raises(ValueError):
        q.encode(np.ones(4), None, SeedPath(28).stream())
    msg, rec = q.roundtrip(np.array([0.2, -0.1, 0.0, 0.05]), None, SeedPath(29))
    assert msg.nbits == math.ceil(math.log2(9))
    assert np.linalg.norm(rec, ord=2) <= 1.0 + 1e-12


def test_composition_ranking_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        parts = int(rng.integers(2, 8))
        k = int(rng.integers(1, 12))
        counts = rng.multinomial(k, np.ones(parts) / parts)
        rank = _rank_composition(counts)
        assert np.array_equal(_unrank_composition(rank, k, parts), counts)


def test_simq_plus_exact_average_and_budget():
    cfg = SimqPlusConfig(1.0, 64, 2.0, 64)
    q = simq_plus_quantizer(cfg)
    y = unit_vector(30, 64)
    msg, rec = q.roundtrip(y, None, SeedPath(31))
    assert msg.nbits <= cfg.bit_budget <= math.floor(cfg.analytic_budget()) + 1
    # replay the encoder's k draws: decode must equal the exact average
    rng = SeedPath(31).stream()
    avg = np.zeros(64)
    for _ in range(cfg.k):
        s = simq_encode(y, cfg.scale, rng)
        avg += simq_decode(s, cfg.scale, 64)
    assert np.allclose(rec, avg / cfg.k, atol=1e-12)


def test_simq_plus_reduces_to_simq_at_k1():
    cfg = SimqPlusConfig(1.0, 8, 2.0, 1)
    q = simq_plus_quantizer(cfg)
    y = unit_vector(32, 8) * 0.5
    _, rec = q.roundtrip(y, None, SeedPath(33))
    nz = np.nonzero(rec)[0]
    assert len(nz) <= 1
    if len(nz):
        assert abs(abs(rec[nz[0]]) - cfg.scale) < 1e-12


def test_simq_plus_zero_vector():
    cfg = SimqPlusConfig(1.0, 4, 2.0, 4)
    q = simq_plus_quantizer(cfg)
    msg, rec = q.roundtrip(np.zeros(4), None, SeedPath(34))
    assert np.allclose(rec, 0.0)


def test_simq_plus_mse_bound():
    cfg = SimqPlusConfig(1.0, 64, 2.0, 64)
    y = unit_vector(35, 64)
    recs = simq_plus_sample(y, cfg, 10_000, SeedPath(36).stream())
    mse = ((recs - y) ** 2).sum(axis=1).mean()
    assert mse <= cfg.d ** (2 / cfg.p) / cfg.k + 0.05


def test_lp_split_routing_and_unbiasedness():
    cfg = LpSplitConfig(1.0, 64, 1.5)
    q = lp_split_quantizer(cfg)
    # all small: pure CUQ path still roundtrips at the fixed budget
    small = np.full(64, cfg.threshold * 0.9 / 64 ** (1 / cfg.q))
    msg, _ = q.roundtrip(small, None, SeedPath(37))
    assert msg.nbits == cfg.bit_budget
    # one large coordinate lands in the masked RATQ part
    big = np.zeros(64)
    big[5] = 1.0
    assert 1.0 > cfg.threshold
    recs = []
    for t in range(3000):
        _, rec = q.roundtrip(big, None, SeedPath(38).child("t", t))
        recs.append(rec)
    recs = np.array(recs)
    se = recs.std(axis=0) / math.sqrt(len(recs))
    assert np.all(np.abs(recs.mean(axis=0) - big) <= 6 * se + 0.01)


def test_lp_split_zero_and_second_moment():
    cfg = LpSplitConfig(1.0, 32, 1.5)
    q = lp_split_quantizer(cfg)
    _, rec = q.roundtrip(np.zeros(32), None, SeedPath(39))
    assert np.allclose(rec, 0.0, atol=1e-12) or np.linalg.norm(rec) < 0.5
    qv = cfg.q
    rng = SeedPath(40).stream()
    sq = []
    for t in range(500):
        y = rng.normal(size=32)
        y /= np.sum(np.abs(y) ** qv) ** (1 / qv)
        _, rec = q.roundtrip(y, None, SeedPath(41).child("t", t))
        sq.append(np.sum(np.abs(rec) ** qv) ** (2 / qv))
    assert np.mean(sq) <= 12.0


def test_lp_split_p1_pure_cuq():
    cfg = LpSplitConfig(1.0, 16, 1.0)
    assert cfg.threshold == 1.0  # q = inf: no coordinate can exceed it
    q = lp_split_quantizer(cfg)
    y = np.clip(SeedPath(42).stream().normal(size=16), -1, 1)
    msg, rec = q.roundtrip(y, None, SeedPath(43))
    assert msg.nbits == cfg.bit_budget


def test_atuq_vector_apply_matches_variance_contract():
    cfg = RatqConfig(1.0, 64, 2, 7, RatqConfig.default(1.0, 64).ladder)
    xs = SeedPath(44).stream().normal(size=(200, 64)) * 0.05
    rec = atuq_vector_apply(xs, cfg, SeedPath(45).stream())
    assert rec.shape == xs.shape
    assert ((rec - xs) ** 2).mean() < 0.01
