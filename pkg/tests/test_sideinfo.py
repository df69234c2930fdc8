import math

import numpy as np
import pytest

from qtc.core import SeedPath
from qtc.sideinfo import (
    RdaqConfig,
    RmqConfig,
    boosted_rdaq_quantizer,
    boosted_rdaq_sample,
    daq_exact_mse,
    daq_quantizer,
    daq_sample,
    rdaq_quantizer,
    rdaq_sample,
    rmq_quantizer,
    rmq_sample,
    wz_known_quantizer,
    wz_known_sample,
    wz_unknown_quantizer,
    wz_unknown_sample,
)


def make_pair(seed, d, delta):
    rng = SeedPath(seed).stream()
    x = rng.normal(size=d)
    x /= np.linalg.norm(x)
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    return x, x + delta * u


def test_rmq_config_validation():
    with pytest.raises(ValueError):
        RmqConfig(8, 1.0, 0.1, 3)  # k < 4
    with pytest.raises(ValueError):
        RmqConfig(8, 1.0, 2.0, 8)  # delta_small >= delta
    cfg = RmqConfig(64, 1.0, 0.1, 8)
    assert cfg.delta_prime == pytest.approx(math.sqrt(6 / 64 * math.log(10.0)))


def test_rmq_equal_inputs_within_eps_ball():
    cfg = RmqConfig(64, 0.5, 0.05, 16)
    q = rmq_quantizer(cfg)
    x, _ = make_pair(0, 64, 0.5)
    _, rec = q.roundtrip(x, x, SeedPath(1))
    assert np.linalg.norm(rec - x) <= cfg.mq.eps * math.sqrt(cfg.d_pad) + 1e-9


def test_rmq_mse_and_bias_bound():
    d, delta, n_mc = 64, 0.5, 20_000
    cfg = RmqConfig(d, delta, delta / math.sqrt(100), 16)
    x, y = make_pair(2, d, delta)
    recs = rmq_sample(x, y, cfg, n_mc, SeedPath(3).stream())
    mse = ((recs - x) ** 2).sum(axis=1).mean()
    bound = 24 * delta**2 / (cfg.k - 2) ** 2 * math.log(delta / cfg.delta_small) + 154 * cfg.delta_small**2
    assert mse <= bound
    assert np.linalg.norm(recs.mean(axis=0) - x) ** 2 <= 154 * cfg.delta_small**2 + 0.01


def test_rmq_budget_and_decode_needs_side():
    cfg = RmqConfig(64, 0.5, 0.05, 16)
    q = rmq_quantizer(cfg)
    x, y = make_pair(4, 64, 0.5)
    msg, _ = q.roundtrip(x, y, SeedPath(5))
    assert msg.nbits == 64 * 4 == cfg.bit_budget
    with pytest.raises(ValueError):
        q.decode(msg, None, SeedPath(5).stream())


def test_wz_known_budget_and_full_sampling():
    cfg = RmqConfig(64, 0.5, 0.05, 16)
    x, y = make_pair(6, 64, 0.5)
    q = wz_known_quantizer(cfg, 8)
    msg, _ = q.roundtrip(x, y, SeedPath(7))
    assert msg.nbits == 8 * 4 == q.bit_budget
    # mu = 1 reproduces plain RMQ statistics
    full = wz_known_sample(x, y, cfg, 64, 15_000, SeedPath(8).stream())
    plain = rmq_sample(x, y, cfg, 15_000, SeedPath(9).stream())
    assert abs(((full - x) ** 2).sum(1).mean() - ((plain - x) ** 2).sum(1).mean()) < 0.01


def test_wz_known_unbiased_up_to_rmq_bias():
    cfg = RmqConfig(64, 0.5, 0.01, 16)
    x, y = make_pair(10, 64, 0.5)
    recs = wz_known_sample(x, y, cfg, 8, 40_000, SeedPath(11).stream())
    assert np.linalg.norm(recs.mean(axis=0) - x) < 0.05


def test_daq_identity_and_budget():
    d = 32
    q = daq_quantizer(d)
    x, _ = make_pair(12, d, 0.1)
    msg, rec = q.roundtrip(x, x, SeedPath(13))
    assert msg.nbits == d
    assert np.allclose(rec, x)


def test_daq_rejects_outside_ball():
    q = daq_quantizer(4)
    with pytest.raises(ValueError):
        q.encode(np.full(4, 1.0), None, SeedPath(14).stream())
    msg = q.encode(np.full(4, 0.4), None, SeedPath(14).stream())
    with pytest.raises(ValueError):
        q.decode(msg, np.full(4, 1.0), SeedPath(14).stream())


def test_daq_exact_mse_identity():
    # region-enumeration oracle matches 2||x-y||_1 - ||x-y||_2^2 to 1e-9
    rng = SeedPath(15).stream()
    for d in (1, 2, 3):
        for _ in range(20):
            x = rng.uniform(-1 / math.sqrt(d), 1 / math.sqrt(d), size=d)
            y = rng.uniform(-1 / math.sqrt(d), 1 / math.sqrt(d), size=d)
            oracle = daq_exact_mse(x, y)
            formula = 2 * np.abs(x - y).sum() - ((x - y) ** 2).sum()
            assert abs(oracle - formula) < 1e-9


def test_daq_d1_example():
    assert daq_exact_mse(np.array([0.5]), np.array([-0.5])) == pytest.approx(1.0)


def test_daq_monte_carlo_matches_formula():
    x, y = make_pair(16, 16, 0.4)
    recs = daq_sample(x, y, 16, 60_000, SeedPath(17).stream())
    emp = ((recs - x) ** 2).sum(axis=1).mean()
    formula = 2 * np.abs(x - y).sum() - ((x - y) ** 2).sum()
    assert emp == pytest.approx(formula, rel=0.05)


def test_rdaq_config_table():
    cfg = RdaqConfig(64)
    assert cfg.h == 4  # log h = ceil(log2(1 + log*(64/6))) = 2
    assert cfg.ranges[-1] >= 1.0
    assert cfg.bit_budget == 64 * (2 + 4 * 1)
    with pytest.raises(ValueError):
        RdaqConfig(64, N=0)


def test_rdaq_identity_recovery():
    cfg = RdaqConfig(32)
    q = rdaq_quantizer(cfg)
    x, _ = make_pair(18, 32, 0.1)
    msg, rec = q.roundtrip(x, x, SeedPath(19))
    assert msg.nbits == cfg.bit_budget
    assert np.allclose(rec, x, atol=1e-9)


def test_rdaq_unbiased():
    cfg = RdaqConfig(32)
    x, y = make_pair(20, 32, 0.3)
    recs = rdaq_sample(x, y, cfg, 40_000, SeedPath(21).stream())
    se = recs.std(axis=0) / math.sqrt(len(recs))
    assert np.all(np.abs(recs.mean(axis=0) - x) <= 5 * se + 1e-9)


def test_rdaq_delta_adaptive():
    cfg = RdaqConfig(64)
    mses = {}
    for i, delta in enumerate((0.01, 1.0)):
        x, y = make_pair(22 + i, 64, delta)
        recs = rdaq_sample(x, y, cfg, 30_000, SeedPath(24 + i).stream())
        mses[delta] = ((recs - x) ** 2).sum(axis=1).mean()
        assert mses[delta] <= 16 * math.sqrt(3) * delta
    assert mses[0.01] <= 0.03 * mses[1.0]


def test_wz_unknown_identity_and_budget():
    cfg = RdaqConfig(32)
    q = wz_unknown_quantizer(cfg, 5)
    x, _ = make_pair(26, 32, 0.2)
    msg, rec = q.roundtrip(x, x, SeedPath(27))
    assert msg.nbits == 5 * (cfg.index_bits + cfg.h) == q.bit_budget
    assert np.allclose(rec, x, atol=1e-9)


def test_wz_unknown_unbiased_and_scaling():
    cfg = RdaqConfig(32)
    x, y = make_pair(28, 32, 0.3)
    mu_d = 8
    sub = wz_unknown_sample(x, y, cfg, mu_d, 40_000, SeedPath(29).stream())
    se = sub.std(axis=0) / math.sqrt(len(sub))
    assert np.all(np.abs(sub.mean(axis=0) - x) <= 5 * se + 1e-9)
    full = rdaq_sample(x, y, cfg, 40_000, SeedPath(30).stream())
    mse_ratio = ((sub - x) ** 2).sum(1).mean() / ((full - x) ** 2).sum(1).mean()
    assert mse_ratio <= 32 / mu_d * 1.25  # alpha scales by at most 1/mu


def test_boosted_rdaq_halving():
    x, y = make_pair(31, 64, 0.3)
    mses = []
    for N in (1, 2, 4, 8):
        cfg = RdaqConfig(64, N=N)
        recs = boosted_rdaq_sample(x, y, cfg, 25_000, SeedPath(32).child("n", N).stream())
        mses.append(((recs - x) ** 2).sum(axis=1).mean())
    for a, b in zip(mses, mses[1:]):
        assert b / a == pytest.approx(0.5, rel=0.2)


def test_boosted_rdaq_bit_path():
    cfg = RdaqConfig(16, N=4)
    q = boosted_rdaq_quantizer(cfg)
    x, y = make_pair(33, 16, 0.2)
    msg, rec = q.roundtrip(x, y, SeedPath(34))
    assert msg.nbits == cfg.bit_budget == 16 * (cfg.index_bits + cfg.h * 3)
    _, rec_eq = q.roundtrip(x, x, SeedPath(35))
    assert np.allclose(rec_eq, x, atol=1e-9)
    assert np.isfinite(rec).all()


def test_unit_ball_precondition():
    cfg = RdaqConfig(8)
    q = rdaq_quantizer(cfg)
    with pytest.raises(ValueError):
        q.encode(np.full(8, 1.0), None, SeedPath(36).stream())
