"""Quantized first-order optimization harnesses.

Projected SGD and stochastic mirror descent share one engine (the mirror map
||x||_a^2 / (2(a-1)) reduces to 0.5 ||x||_2^2 at a = 2, so PSGD is literally
the a = 2 trajectory).  Runs are batched over independent replications; all
oracles operate on (reps, d) arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import SeedPath

__all__ = [
    "Domain",
    "GradientOracle",
    "quadratic_oracle",
    "hard_instance_oracle",
    "RunResult",
    "psgd_run",
    "mirror_descent_run",
    "l1_phase_scheme",
]


@dataclass(frozen=True)
class Domain:
    """l2 ball or l-infinity box, with Euclidean projection."""

    kind: str  # "l2_ball" | "linf_box"
    radius: float
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("l2_ball", "linf_box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("domain radius must be positive")

    def _c(self, d: int) -> np.ndarray:
        return np.zeros(d) if self.center is None else self.center

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius  # l2 diameter for the ball; box edge for linf

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = self._c(x.shape[-1])
        z = x - c
        if self.kind == "l2_ball":
            norms = np.linalg.norm(z, axis=-1, keepdims=True)
            scale = np.minimum(1.0, self.radius / np.maximum(norms, 1e-300))
            return c + z * scale
        return c + np.clip(z, -self.radius, self.radius)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        z = np.atleast_2d(x) - self._c(np.atleast_2d(x).shape[-1])
        if self.kind == "l2_ball":
            return bool(np.all(np.linalg.norm(z, axis=-1) <= self.radius + tol))
        return bool(np.all(np.abs(z) <= self.radius + tol))


@dataclass
class GradientOracle:
    """Stochastic subgradient source.

    query(x, rng) takes (reps, d) points and returns (reps, d) subgradient
    estimates; the declared bound B holds almost surely in the lq norm
    (model "as_lq") or in mean square for the l2 norm (model "ms_l2").
    """

    query: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    B: float
    f: Callable[[np.ndarray], np.ndarray]
    f_min: float
    model: str = "as_lq"
    q: float = 2.0


def quadratic_oracle(x0: np.ndarray, noise: float, B: float) -> GradientOracle:
    """f(x) = ||x - x0||^2 / 2 with noise uniform on the sphere of radius `noise`."""
    x0 = np.asarray(x0, dtype=float)

    def query(x, rng):
        x = np.atleast_2d(x)
        g = rng.normal(size=x.shape)
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        return (x - x0) + noise * g

    def f(x):
        z = np.atleast_2d(x) - x0
        return 0.5 * np.einsum("...d,...d->...", z, z)

    return GradientOracle(query, B, f, 0.0, "as_lq", 2.0)


def hard_instance_oracle(
    v: np.ndarray, delta: float, B: float, p: float, D: float = 1.0
) -> GradientOracle:
    """Coordinate-wise Bernoulli oracle for g_v(x) = a sum_i |x(i) - v(i) b|.

    Each coordinate independently takes -B/d^(1/q) with probability
    (1 + 2 delta v(i))/2 and +B/d^(1/q) otherwise, so the mean is the constant
    subgradient -2 B delta v / d^(1/q) everywhere on the box |x(i)| <= b.
    """
    if delta > 1.0 / 6.0:
        raise ValueError("construction requires delta <= 1/6")
    v = np.asarray(v, dtype=float)
    d = v.size
    q = math.inf if p == 1.0 else p / (p - 1.0)
    scale = B if q == math.inf else B / d ** (1.0 / q)
    a = 2 * B * delta / (d ** (1.0 / q) if q != math.inf else 1.0)
    b = D / (2 * d ** (1.0 / p))

    def query(x, rng):
        x = np.atleast_2d(x)
        p_minus = (1 + 2 * delta * v) / 2.0
        draws = rng.random(size=x.shape)
        return np.where(draws < p_minus, -scale, scale)

    def f(x):
        x = np.atleast_2d(x)
        return a * np.abs(x - v * b).sum(axis=-1)

    return GradientOracle(query, B, f, 0.0, "as_lq", q)


def _grad_map(x: np.ndarray, a: float) -> np.ndarray:
    """Gradient of ||x||_a^2 / (2(a-1)); identity at a = 2."""
    if a == 2.0:
        return x
    norms = np.linalg.norm(x, ord=a, axis=-1, keepdims=True)
    norms = np.maximum(norms, 1e-300)
    return norms ** (2.0 - a) * np.sign(x) * np.abs(x) ** (a - 1.0) / (a - 1.0)


def _grad_map_inv(theta: np.ndarray, a: float) -> np.ndarray:
    """Inverse of _grad_map via the conjugate exponent b = a/(a-1)."""
    if a == 2.0:
        return theta
    b = a / (a - 1.0)
    norms = np.linalg.norm(theta, ord=b, axis=-1, keepdims=True)
    norms = np.maximum(norms, 1e-300)
    return (a - 1.0) * norms ** (2.0 - b) * np.sign(theta) * np.abs(theta) ** (b - 1.0)


@dataclass
class RunResult:
    avg_iterate: np.ndarray  # (reps, d) averaged iterates
    gap_trace: np.ndarray  # (T,) mean per-step f-gap across reps
    final_gaps: np.ndarray  # (reps,) f-gap of each replication's averaged iterate
    bits_per_step: Optional[int]

    @property
    def mean_final_gap(self) -> float:
        return float(self.final_gaps.mean())


def _descent_engine(
    oracle: GradientOracle,
    qfun: Optional[Callable[[np.ndarray, np.random.Generator], np.ndarray]],
    domain: Domain,
    T: int,
    a: float,
    eta: float | None,
    gamma: float,
    seed: SeedPath,
    reps: int,
    x_init: Optional[np.ndarray],
    bits_per_step: Optional[int],
) -> RunResult:
    if T < 1:
        raise ValueError("need at least one step")
    rng = seed.stream()
    if x_init is None:
        raise ValueError("x_init is required")
    x = np.tile(np.asarray(x_init, dtype=float), (reps, 1))
    x = domain.project(x)
    sum_x = np.zeros_like(x)
    trace = np.empty(T)
    for t in range(T):
        g = oracle.query(x, rng)
        if qfun is not None:
            g = qfun(g, rng)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"divergent gradient estimate at step {t}")
        step = eta if gamma == 0.0 else 2.0 / (gamma * (t + 1))
        theta = _grad_map(x, a) - step * g
        x = domain.project(_grad_map_inv(theta, a))
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"divergent iterate at step {t}")
        sum_x += x
        trace[t] = float(np.mean(oracle.f(x)) - oracle.f_min)
    avg = sum_x / T
    final = oracle.f(avg) - oracle.f_min
    return RunResult(avg, trace, np.atleast_1d(final), bits_per_step)


def psgd_run(
    oracle: GradientOracle,
    qfun: Optional[Callable],
    domain: Domain,
    T: int,
    gamma: float = 0.0,
    seed: SeedPath = SeedPath(0),
    reps: int = 1,
    x_init: Optional[np.ndarray] = None,
    alpha2: Optional[float] = None,
    bits_per_step: Optional[int] = None,
) -> RunResult:
    """Projected SGD with quantized gradients.

    Convex mode (gamma = 0) uses the constant step D/(alpha2 sqrt(T)) where
    alpha2 is the quantizer's worst-case second-moment bound (the oracle's B
    when running unquantized); strongly convex mode uses 2/(gamma (t+1)).
    """
    alpha2 = oracle.B if alpha2 is None else alpha2
    eta = domain.diameter / (alpha2 * math.sqrt(T))
    return _descent_engine(
        oracle, qfun, domain, T, 2.0, eta, gamma, seed, reps, x_init, bits_per_step
    )


def mirror_exponent(p: float, d: int) -> float:
    """Mirror-map exponent: a = p while the conjugate q stays below 2 log2 d,
    else the 2 log d / (2 log d - 1) map that is strongly convex wrt l1."""
    logd = math.log2(max(d, 2))
    q = math.inf if p == 1.0 else p / (p - 1.0)
    if q <= 2 * logd:
        return p
    return 2 * logd / (2 * logd - 1.0)


def mirror_descent_run(
    oracle: GradientOracle,
    qfun: Optional[Callable],
    domain: Domain,
    T: int,
    p: float,
    seed: SeedPath = SeedPath(0),
    reps: int = 1,
    x_init: Optional[np.ndarray] = None,
    alpha_p: Optional[float] = None,
    eta: Optional[float] = None,
    bits_per_step: Optional[int] = None,
) -> RunResult:
    """Stochastic mirror descent with the ||x||_a^2/(2(a-1)) mirror map.

    At p = 2 the trajectory coincides bit-for-bit with psgd_run given the same
    seed.  The Bregman step is the projected dual update: mirror step, inverse
    map, Euclidean projection onto the domain.
    """
    if not (1.0 <= p <= 2.0):
        raise ValueError("mirror descent harness covers p in [1, 2]")
    if x_init is None:
        raise ValueError("x_init is required")
    a = mirror_exponent(p, np.asarray(x_init).size)
    alpha_p = oracle.B if alpha_p is None else alpha_p
    if eta is None:
        eta = domain.diameter / (alpha_p * math.sqrt(T))
    return _descent_engine(
        oracle, qfun, domain, T, a, eta, 0.0, seed, reps, x_init, bits_per_step
    )


def one_bit_sign_quantize(g: np.ndarray, B: float, rng: np.random.Generator) -> np.ndarray:
    """Unbiased 1-bit quantizer on [-B, B]: +B with probability (g+B)/(2B)."""
    g = np.asarray(g, dtype=float)
    if np.any(np.abs(g) > B * (1 + 1e-9)):
        raise ValueError("1-bit quantizer input outside [-B, B]")
    up = rng.random(size=g.shape) < (g + B) / (2.0 * B)
    return np.where(up, B, -B)


def l1_phase_scheme(
    oracle: GradientOracle,
    d: int,
    r: int,
    T: int,
    domain: Domain,
    seed: SeedPath = SeedPath(0),
    reps: int = 1,
    x_init: Optional[np.ndarray] = None,
    eta: Optional[float] = None,
) -> RunResult:
    """Phase scheme for l-infinity-bounded gradients under an r-bit budget.

    The horizon splits into T*r/d phases; within a phase the same point is
    queried ceil(d/r) times and each query contributes r coordinates (chosen
    through a fresh shared permutation) quantized to one bit each.  The summed
    phase estimate drives one mirror-descent step with the log-d mirror map.
    """
    if x_init is None:
        raise ValueError("x_init is required")
    if r < 1 or r > d:
        raise ValueError("per-query budget r must lie in 1..d")
    B = oracle.B
    phases = max(1, (T * r) // d)
    queries = math.ceil(d / r)
    a = 2 * math.log2(max(d, 2)) / (2 * math.log2(max(d, 2)) - 1.0)
    if eta is None:
        eta = domain.diameter / (B * math.sqrt(phases))
    rng = seed.stream()
    x = np.tile(np.asarray(x_init, dtype=float), (reps, 1))
    x = domain.project(x)
    sum_x = np.zeros_like(x)
    trace = np.empty(phases)
    for t in range(phases):
        sigma = rng.permutation(d)  # shared randomness, fresh per phase
        est = np.zeros_like(x)
        for i in range(queries):
            g = oracle.query(x, rng)
            coords = sigma[i * r : min((i + 1) * r, d)]
            est[:, coords] = one_bit_sign_quantize(g[:, coords], B, rng)
        theta = _grad_map(x, a) - eta * est
        x = domain.project(_grad_map_inv(theta, a))
        sum_x += x
        trace[t] = float(np.mean(oracle.f(x)) - oracle.f_min)
    avg = sum_x / phases
    final = oracle.f(avg) - oracle.f_min
    return RunResult(avg, trace, np.atleast_1d(final), r)
