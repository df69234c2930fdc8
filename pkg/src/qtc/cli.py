"""Benchmark command-line interface.

Subcommands: quantize-bench, dme-bench, opt-bench, rd-bench, aoi-solve,
aoi-sim.  Configuration is a flat key=value text file with exhaustive key
validation; every run is reproducible from (config, --seed) and emits
deterministic CSV (comma-separated, LF, no quoting).
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .adaptive import TetraLadder, log_star
from .aoi import (
    average_age,
    average_age_erasure_exact,
    entropy,
    optimize_age,
    optimize_delay,
    shannon_lengths,
    simulate_update_scheme,
    validate_pmf,
    zipf_pmf,
)
from .core import SeedPath
from .dme import DmeInstance, configure_known_delta, configure_no_side_info, run_dme, theoretical_bound
from .optim import Domain, psgd_run, quadratic_oracle
from .scalar import ModuloParams, mq_decode, mq_encode
from .sideinfo import wz_known_quantizer, wz_known_sample
from .vector import (
    RatqConfig,
    SimqPlusConfig,
    atuq_vector_apply,
    ratq_apply,
    ratq_sample,
    rcs_ratq_sample,
    rcs_wrap,
    simq_plus_sample,
)

# ---------------------------------------------------------------------------
# Gaussian rate-distortion / Wyner-Ziv benchmark configurations


def gaussian_rd_config(v: float, D: float, d: int) -> tuple[RatqConfig, float]:
    """Unrotated ATUQ tuned for subgaussian inputs with variance factor v and
    per-dimension distortion target D; returns (config, rate bits/dim)."""
    if not D < v / 4:
        raise ValueError("distortion target must satisfy D < v/4")
    log_h = math.ceil(math.log2(1 + log_star(4.0 * math.log(8 * math.sqrt(2) * v / D) / 3.0)))
    s = min(max(1, log_h), d)
    k = (1 << math.ceil(math.log2(2 + math.sqrt((18 * v + 6 * v * math.log(s)) / D)))) - 1
    ladder = TetraLadder(3 * v, 2 * v * math.log(s), 1 << log_h)
    cfg = RatqConfig(math.sqrt(v * d), d, s, k, ladder)
    rate = math.ceil(math.log2(k + 1)) + math.ceil(d / s) * max(1, log_h) / d
    return cfg, rate


def gaussian_rd_run(
    v: float, D: float, d: int, blocks: int, rng: np.random.Generator, source: str = "gaussian"
) -> tuple[float, float]:
    """Returns (empirical per-dimension MSE, rate in bits/dim)."""
    cfg, rate = gaussian_rd_config(v, D, d)
    if source == "gaussian":
        xs = rng.normal(scale=math.sqrt(v), size=(blocks, d))
    elif source == "laplace":
        # Laplace shape clipped to [-sqrt(v), sqrt(v)]: bounded, hence
        # subgaussian with variance factor v, but with heavier near-tails
        xs = np.clip(rng.laplace(scale=math.sqrt(v) / 2.0, size=(blocks, d)),
                     -math.sqrt(v), math.sqrt(v))
    else:
        raise ValueError(f"unknown source {source!r}")
    rec = atuq_vector_apply(xs, cfg, rng)
    mse = float(((rec - xs) ** 2).mean())
    return mse, rate


def gaussian_wz_params(sigma_z: float, D: float) -> tuple[ModuloParams, int]:
    """Modulo-quantizer parameters for side-information rate distortion."""
    if not D <= sigma_z**2 / 308:
        raise ValueError("distortion target must satisfy D <= sigma_z^2/308")
    delta_small = math.sqrt(D / 308.0)
    log_k = math.ceil(
        math.log2(2 + (sigma_z / math.sqrt(D)) * 4 * math.sqrt(
            3 * math.log(2 * math.sqrt(77) * sigma_z / math.sqrt(D))))
    )
    delta_prime = math.sqrt(6 * sigma_z**2 * math.log(sigma_z / delta_small))
    return ModuloParams(1 << log_k, delta_prime), log_k


def gaussian_wz_run(
    sigma_z: float,
    D: float,
    d: int,
    blocks: int,
    rng: np.random.Generator,
    sigma_y: float = 1.0,
    source: str = "gaussian",
) -> tuple[float, int]:
    """X = Y + Z per coordinate; MQ with decoder side information Y."""
    params, log_k = gaussian_wz_params(sigma_z, D)
    y = rng.normal(scale=sigma_y, size=(blocks, d))
    if source == "gaussian":
        z = rng.normal(scale=sigma_z, size=(blocks, d))
    elif source == "laplace":
        z = np.clip(rng.laplace(scale=sigma_z / 2.0, size=(blocks, d)), -sigma_z, sigma_z)
    else:
        raise ValueError(f"unknown source {source!r}")
    x = y + z
    w = mq_encode(x, params, rng)
    rec = mq_decode(w, y, params)
    mse = float(((rec - x) ** 2).mean())
    return mse, log_k


# ---------------------------------------------------------------------------
# Config file handling


class ConfigError(Exception):
    pass


def parse_config(text: str, schema: dict[str, type], defaults: dict) -> dict:
    """Flat key = value lines; '#' comments; unknown keys rejected."""
    values = dict(defaults)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        typ = schema[key]
        try:
            if typ is bool:
                values[key] = val.lower() in ("1", "true", "yes")
            elif typ is list:
                values[key] = [float(tok) for tok in val.split()]
            else:
                values[key] = typ(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def _emit(rows: list[list], header: list[str], out: Optional[str]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_quantize_bench(args) -> int:
    schema = {"d": int, "B": float, "quantizers": str}
    cfg = parse_config(args.config_text, schema, {"d": 256, "B": 1.0, "quantizers": "ratq,simq,simq_plus"})
    d, B = cfg["d"], cfg["B"]
    trials = args.trials or 2000
    rows = []
    root = SeedPath(args.seed)
    rng = root.child("input").stream()
    y = rng.normal(size=d)
    y *= B / np.linalg.norm(y)
    for name in [q.strip() for q in cfg["quantizers"].split(",") if q.strip()]:
        if name == "ratq":
            rcfg = RatqConfig.default(B, d)
            recs = ratq_sample(y, rcfg, trials, root.child("ratq").stream())
            bound = B * math.sqrt((9 + 3 * math.log(rcfg.s)) / (rcfg.k - 1) ** 2 + 1)
            bits = rcfg.bit_budget
        elif name == "simq":
            y1 = y * (B / np.abs(y).sum())
            probs = np.r_[np.abs(y1) / B, 1 - np.abs(y1).sum() / B]
            idx = root.child("simq").stream().choice(d + 1, size=trials, p=probs / probs.sum())
            recs = np.zeros((trials, d))
            sel = idx < d
            recs[np.nonzero(sel)[0], idx[sel]] = B * np.sign(y1[idx[sel]])
            y = y1
            bound = B
            bits = math.ceil(math.log2(2 * d + 1))
        elif name == "simq_plus":
            pcfg = SimqPlusConfig(B, d, 2.0)
            yn = y * (B / np.linalg.norm(y))
            recs = simq_plus_sample(yn, pcfg, trials, root.child("simq+").stream())
            y = yn
            bound = math.sqrt(B**2 * d ** (2.0 / pcfg.p) / pcfg.k + B**2)
            bits = pcfg.bit_budget
        else:
            raise ConfigError(f"unknown quantizer {name!r}")
        second = float((recs**2).sum(axis=1).mean())
        bias = float(np.linalg.norm(recs.mean(axis=0) - y))
        rows.append([name, d, B, bits, second, bound**2, bias])
    _emit(rows, ["quantizer", "d", "B", "r_bits", "empirical_second_moment",
                 "theoretical_bound", "empirical_bias_norm"], args.out)
    return 0


def cmd_dme_bench(args) -> int:
    schema = {"setting": str, "n": int, "d": int, "r_list": list, "delta": float}
    cfg = parse_config(args.config_text, schema,
                       {"setting": "no-side-info", "n": 10, "d": 256, "r_list": [16, 32, 64],
                        "delta": 0.1})
    n, d = cfg["n"], cfg["d"]
    trials = args.trials or 1000
    root = SeedPath(args.seed)
    rng = root.child("inputs").stream()
    xs = rng.normal(size=(n, d))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    rows = []
    for r in [int(x) for x in cfg["r_list"]]:
        if cfg["setting"] == "no-side-info":
            rcfg, mu_d = configure_no_side_info(n, d, r)
            quants = [rcs_wrap(rcfg, mu_d) for _ in range(n)]
            samplers = [
                lambda x, y, t, g, c=rcfg, m=mu_d: rcs_ratq_sample(x, c, m, t, g)
                for _ in range(n)
            ]
            inst = DmeInstance(xs, None, None, r)
            bound = theoretical_bound("no-side-info", n, d, r)
        elif cfg["setting"] == "known-delta":
            delta = cfg["delta"]
            u = root.child("side").stream().normal(size=(n, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            ys = xs + delta * u
            deltas = [delta] * n
            rcfgs, mu_d = configure_known_delta(n, d, r, deltas)
            quants = [wz_known_quantizer(c, mu_d) for c in rcfgs]
            samplers = [
                lambda x, y, t, g, c=rcfgs[i], m=mu_d: wz_known_sample(x, y, c, m, t, g)
                for i in range(n)
            ]
            inst = DmeInstance(xs, ys, np.array(deltas), r)
            bound = theoretical_bound("known-delta", n, d, r, deltas)
        else:
            raise ConfigError(f"unknown setting {cfg['setting']!r}")
        res = run_dme(inst, quants, root.child("run", r), trials, samplers=samplers)
        rows.append([cfg["setting"], n, d, r, cfg["delta"], res.mse, res.band, bound,
                     max(b for b in res.bits_per_client)])
    _emit(rows, ["setting", "n", "d", "r_bits", "delta", "empirical_mse", "band_3sigma",
                 "mse_bound", "bits_used"], args.out)
    return 0


def cmd_opt_bench(args) -> int:
    schema = {"d": int, "T_list": list, "B": float, "noise": float, "reps": int}
    cfg = parse_config(args.config_text, schema,
                       {"d": 32, "T_list": [256, 1024, 4096], "B": 2.0, "noise": 0.5, "reps": 8})
    d, B = cfg["d"], cfg["B"]
    if any(t < 1 for t in cfg["T_list"]):
        raise ConfigError("every horizon in T_list must be >= 1")
    x0 = np.zeros(d)
    x0[0] = 0.5
    oracle = quadratic_oracle(x0, cfg["noise"], B)
    dom = Domain("l2_ball", 1.0)
    x_init = np.zeros(d)
    x_init[min(1, d - 1)] = 0.9
    rcfg = RatqConfig.default(B, d)
    alpha2 = B * math.sqrt((9 + 3 * math.log(rcfg.s)) / (rcfg.k - 1) ** 2 + 1)
    rows = []
    gaps_q = []
    for T in [int(t) for t in cfg["T_list"]]:
        base = psgd_run(oracle, None, dom, T, seed=SeedPath(args.seed).child("id", T),
                        reps=cfg["reps"], x_init=x_init)
        qfun = lambda g, rng: ratq_apply(g, rcfg, rng)
        quant = psgd_run(oracle, qfun, dom, T, seed=SeedPath(args.seed).child("q", T),
                         reps=cfg["reps"], x_init=x_init, alpha2=alpha2,
                         bits_per_step=rcfg.bit_budget)
        bound = math.sqrt(2) * dom.diameter * B / math.sqrt(T)
        rows.append([T, base.mean_final_gap, quant.mean_final_gap, bound,
                     rcfg.bit_budget * T])
        gaps_q.append(quant.mean_final_gap)
    ts = np.log2([float(t) for t in cfg["T_list"]])
    slope = float(np.polyfit(ts, np.log2(gaps_q), 1)[0]) if len(ts) > 1 else float("nan")
    rows.append(["slope", slope, "", "", ""])
    _emit(rows, ["T", "identity_gap", "ratq_gap", "gap_bound", "bits_cumulative"], args.out)
    return 0


def cmd_rd_bench(args) -> int:
    schema = {"mode": str, "v": float, "D_frac": float, "sigma_z": float, "d": int,
              "blocks": int, "source": str}
    cfg = parse_config(args.config_text, schema,
                       {"mode": "rd", "v": 1.0, "D_frac": 16.0, "sigma_z": 0.1, "d": 4096,
                        "blocks": 200, "source": "gaussian"})
    rng = SeedPath(args.seed).child("rd").stream()
    rows = []
    if cfg["mode"] == "rd":
        v = cfg["v"]
        D = v / cfg["D_frac"]
        mse, rate = gaussian_rd_run(v, D, cfg["d"], cfg["blocks"], rng, cfg["source"])
        rows.append(["rd", cfg["source"], v, D, rate, 0.5 * math.log2(v / D), mse])
    elif cfg["mode"] == "wz":
        sz = cfg["sigma_z"]
        D = sz**2 / cfg["D_frac"]
        mse, rate = gaussian_wz_run(sz, D, cfg["d"], cfg["blocks"], rng, source=cfg["source"])
        rows.append(["wz", cfg["source"], sz**2, D, rate, 0.5 * math.log2(sz**2 / D), mse])
    else:
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    _emit(rows, ["mode", "source", "variance", "distortion_target", "rate_bits_per_dim",
                 "rate_distortion_function", "empirical_per_dim_mse"], args.out)
    return 0


def _load_pmf(cfg, root: SeedPath) -> np.ndarray:
    if cfg["pmf_file"]:
        rows = []
        with open(cfg["pmf_file"], "r", encoding="utf8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line:
                    sym, prob = line.split()
                    rows.append((sym, float(prob)))
        p = np.array([prob for _, prob in rows])
        return validate_pmf(p)
    return zipf_pmf(cfg["zipf_s"], cfg["zipf_n"])


def cmd_aoi_solve(args) -> int:
    schema = {"zipf_s": float, "zipf_n": int, "pmf_file": str, "objective": str,
              "l_th_offset": float, "restarts": int, "tol": float}
    cfg = parse_config(args.config_text, schema,
                       {"zipf_s": 1.0, "zipf_n": 256, "pmf_file": "", "objective": "age",
                        "l_th_offset": 2.0, "restarts": 6, "tol": 1e-6})
    p = _load_pmf(cfg, SeedPath(args.seed))
    h = entropy(p)
    if cfg["objective"] == "age":
        sol = optimize_age(p, restarts=cfg["restarts"], tol=cfg["tol"], seed=args.seed)
    elif cfg["objective"] == "delay":
        sol = optimize_delay(p, 2 * h + cfg["l_th_offset"], restarts=cfg["restarts"],
                             tol=cfg["tol"], seed=args.seed)
    else:
        raise ConfigError(f"unknown objective {cfg['objective']!r}")
    age_p_real = average_age(shannon_lengths(p, "real"), p)
    age_p_int = average_age(shannon_lengths(p, "integer"), p)
    lengths = sol.lengths
    age_star_real = average_age(lengths, p)
    age_star_int = average_age(np.maximum(1, np.ceil(lengths - 1e-9)), p)
    pstar = " ".join(f"{v:.8g}" for v in sol.p_star) if len(sol.p_star) <= 64 else "-"
    rows = [[cfg["objective"], h, age_p_real, age_p_int, age_star_real, age_star_int,
             sol.z, sol.value, sol.certificate_gap, int(sol.certified), pstar]]
    _emit(rows, ["objective", "entropy_bits", "age_P_real", "age_P_int", "age_Pstar_real",
                 "age_Pstar_int", "z_star", "maxmin_value", "certificate_gap", "certified",
                 "p_star"], args.out)
    return 0


def cmd_aoi_sim(args) -> int:
    schema = {"zipf_s": float, "zipf_n": int, "pmf_file": str, "horizon": int,
              "erasure": float, "code": str}
    cfg = parse_config(args.config_text, schema,
                       {"zipf_s": 1.0, "zipf_n": 64, "pmf_file": "", "horizon": 10**6,
                        "erasure": 0.0, "code": "shannon_p"})
    p = _load_pmf(cfg, SeedPath(args.seed))
    if cfg["code"] == "shannon_p":
        lengths = shannon_lengths(p, "integer")
    elif cfg["code"] == "shannon_pstar":
        sol = optimize_age(p, seed=args.seed)
        lengths = np.maximum(1, np.ceil(sol.lengths - 1e-9)).astype(int)
    else:
        raise ConfigError(f"unknown code {cfg['code']!r}")
    res = simulate_update_scheme(lengths, p, cfg["horizon"], SeedPath(args.seed).child("sim"),
                                 erasure=cfg["erasure"])
    if cfg["erasure"] > 0:
        formula = average_age_erasure_exact(lengths, p, cfg["erasure"])
    else:
        formula = average_age(lengths, p)
    rows = [[cfg["code"], cfg["horizon"], cfg["erasure"], res.avg_age, res.se, formula,
             res.cycles]]
    _emit(rows, ["code", "horizon_slots", "erasure_prob", "simulated_age", "renewal_se",
                 "formula_age", "cycles"], args.out)
    return 0


_COMMANDS = {
    "quantize-bench": cmd_quantize_bench,
    "dme-bench": cmd_dme_bench,
    "opt-bench": cmd_opt_bench,
    "rd-bench": cmd_rd_bench,
    "aoi-solve": cmd_aoi_solve,
    "aoi-sim": cmd_aoi_sim,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="qtc", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--seed", type=int, default=0, help="root seed (u64)")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--out", default=None, help="output CSV path (default stdout)")
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf8") as fh:
                args.config_text = fh.read()
        except OSError as exc:
            print(f"qtc: cannot read config: {exc}", file=sys.stderr)
            return 2
    else:
        args.config_text = ""
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"qtc: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
