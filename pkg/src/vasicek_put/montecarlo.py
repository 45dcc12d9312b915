"""Exact-transition Monte Carlo for (r, int r, X) and the estimators built on it.

Each step draws the Gaussian trio (r increment, int r increment, rate
Brownian increment) from its exact conditional law, plus an independent
normal for the part of the stock driver orthogonal to the rate driver.  No
time discretisation enters the state itself.

Random numbers come from Philox streams spawned from one SeedSequence, one
stream per block of ``block_size`` paths, so results do not depend on how
blocks are scheduled.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import MarketModel, OptionContract, _int_g, _int_g_squared, g
from .surface import BoundarySurface


@dataclass(frozen=True)
class PathConfig:
    n_paths: int
    n_steps: int  # per unit of time
    seed: int = 0
    antithetic: bool = True
    block_size: int = 8192

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.antithetic and (self.n_paths % 2 or self.block_size % 2):
            raise ValueError("antithetic sampling needs even n_paths and block_size")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class Estimate:
    estimate: float
    stderr: float
    n: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def step_factor(model: MarketModel, dt: float) -> np.ndarray:
    """Lower-triangular factor L with L L^T = Cov(dW, Y_r, Y_I) over one step.

    Y_r and Y_I are the Gaussian parts of r_{t+dt} and int_t^{t+dt} r.
    Falls back to a symmetric square root when the matrix is singular (beta = 0).
    """
    p = model.rates
    k, b = p.kappa, p.beta
    gk = float(g(k, dt))
    cov = np.array(
        [
            [dt, b * gk, b * float(_int_g(k, dt))],
            [b * gk, b**2 * float(g(2 * k, dt)), 0.5 * b**2 * gk**2],
            [b * float(_int_g(k, dt)), 0.5 * b**2 * gk**2, b**2 * float(_int_g_squared(k, dt))],
        ]
    )
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass
class PathBlock:
    """Paths for one block: arrays of shape (n, n_steps + 1)."""

    times: np.ndarray
    r: np.ndarray
    int_r: np.ndarray
    x: np.ndarray
    dW: np.ndarray | None = None  # rate Brownian increments, (n, n_steps)
    dB: np.ndarray | None = None  # stock Brownian increments


class PathSource:
    """Deterministic, block-streamed path generator."""

    def __init__(self, model: MarketModel, r0: float, x0: float, horizon: float, cfg: PathConfig,
                 n_intervals: int | None = None, stream: int = 0):
        if not x0 > 0:
            raise ValueError("x0 must be > 0")
        if not horizon > 0:
            raise ValueError("horizon must be > 0")
        self.model, self.r0, self.x0, self.horizon, self.cfg = model, float(r0), float(x0), float(horizon), cfg
        self.n_intervals = n_intervals or max(1, int(round(cfg.n_steps * horizon)))
        self.dt = self.horizon / self.n_intervals
        self.times = np.linspace(0.0, self.horizon, self.n_intervals + 1)
        self.n_blocks = -(-cfg.n_paths // cfg.block_size)
        root = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(stream,))
        self._seeds = root.spawn(self.n_blocks)
        self._L = step_factor(model, self.dt)

    def block_sizes(self):
        n, bs = self.cfg.n_paths, self.cfg.block_size
        return [min(bs, n - i * bs) for i in range(self.n_blocks)]

    def _normals(self, rng, n):
        m = self.n_intervals
        if self.cfg.antithetic:
            z = rng.standard_normal((n // 2, m, 4))
            return np.concatenate([z, -z], axis=0)
        return rng.standard_normal((n, m, 4))

    def block(self, index: int, keep_increments: bool = False) -> PathBlock:
        n = self.block_sizes()[index]
        rng = np.random.Generator(np.random.Philox(self._seeds[index]))
        z = self._normals(rng, n)
        p, m, dt = self.model.rates, self.n_intervals, self.dt
        corr = z[..., :3] @ self._L.T  # (n, m, 3): dW, Y_r, Y_I
        rho, sig = self.model.rho, self.model.sigma
        dW = corr[..., 0]
        dB = rho * dW + np.sqrt(1 - rho**2) * np.sqrt(dt) * z[..., 3]
        decay = np.exp(-p.kappa * dt)
        gk = float(g(p.kappa, dt))
        r = np.empty((n, m + 1))
        I = np.empty((n, m + 1))
        r[:, 0] = self.r0
        I[:, 0] = 0.0
        for k in range(m):
            rk = r[:, k]
            r[:, k + 1] = rk * decay + p.theta * (1 - decay) + corr[:, k, 1]
            I[:, k + 1] = I[:, k] + rk * gk + p.theta * (dt - gk) + corr[:, k, 2]
        dI = np.diff(I, axis=1)
        logx = np.empty((n, m + 1))
        logx[:, 0] = np.log(self.x0)
        logx[:, 1:] = np.log(self.x0) + np.cumsum(dI - 0.5 * sig**2 * dt + sig * dB, axis=1)
        blk = PathBlock(self.times, r, I, np.exp(logx))
        if keep_increments:
            blk.dW, blk.dB = dW, dB
        return blk

    def blocks(self, keep_increments: bool = False):
        for i in range(self.n_blocks):
            yield self.block(i, keep_increments)


def simulate_paths(model, r0, x0, horizon, cfg: PathConfig, n_intervals=None, stream=0) -> PathBlock:
    """All paths in memory; use PathSource.blocks() for large runs."""
    src = PathSource(model, r0, x0, horizon, cfg, n_intervals, stream)
    parts = list(src.blocks(keep_increments=True))
    cat = lambda name: np.concatenate([getattr(b, name) for b in parts], axis=0)
    return PathBlock(src.times, cat("r"), cat("int_r"), cat("x"), cat("dW"), cat("dB"))


class _Accumulator:
    """Blockwise sums of per-path samples, reduced in fixed block order."""

    def __init__(self, antithetic: bool):
        self.antithetic = antithetic
        self.units: list[np.ndarray] = []

    def add(self, samples: np.ndarray):
        if self.antithetic:
            h = samples.shape[0] // 2
            samples = 0.5 * (samples[:h] + samples[h:])
        self.units.append(samples)

    def result(self) -> tuple[float, float, int]:
        u = np.concatenate(self.units, axis=0)
        n = u.shape[0]
        mean = u.mean(axis=0)
        se = u.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
        return mean, se, n


def estimate_discounted(paths, payoff) -> Estimate:
    """Mean and standard error of exp(-int r) * payoff(r_T, I_T, X_T).

    ``paths`` is a PathSource (streamed) or a PathBlock; antithetic partners
    are averaged before the standard error is taken.
    """
    if isinstance(paths, PathSource):
        acc = _Accumulator(paths.cfg.antithetic)
        for blk in paths.blocks():
            acc.add(np.exp(-blk.int_r[:, -1]) * np.broadcast_to(
                payoff(blk.r[:, -1], blk.int_r[:, -1], blk.x[:, -1]), blk.r[:, -1].shape))
        mean, se, n = acc.result()
    else:
        s = np.exp(-paths.int_r[:, -1]) * np.broadcast_to(
            payoff(paths.r[:, -1], paths.int_r[:, -1], paths.x[:, -1]), paths.r[:, -1].shape)
        n = s.size
        mean, se = s.mean(), s.std(ddof=1) / np.sqrt(n)
    return Estimate(float(mean), float(se), int(n))


def terminal_source(model, r0, x0, horizon, n_paths, seed=0, antithetic=True, block_size=1 << 16):
    """Single exact step to the horizon; enough for terminal functionals."""
    cfg = PathConfig(n_paths, 1, seed, antithetic, block_size)
    return PathSource(model, r0, x0, horizon, cfg, n_intervals=1)


def _trapezoid_weights(m: int, dt: float) -> np.ndarray:
    w = np.full(m + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def mc_premium(source: PathSource, surface: BoundarySurface, contract: OptionContract, t0: float = 0.0) -> Estimate:
    """Trapezoidal time sum of exp(-int r) K r_u 1{X_u < b(t0 + u, r_u)}.

    The same paths are also summed on every other step; the difference
    between the two sums is returned as ``extra['bias_bound']``.
    """
    if not surface.converged:
        raise ValueError("surface is not converged")
    m = source.n_intervals
    K = contract.strike
    fine_w = _trapezoid_weights(m, source.dt)
    coarse = m % 2 == 0
    if coarse:
        coarse_w = np.zeros(m + 1)
        coarse_w[::2] = _trapezoid_weights(m // 2, 2 * source.dt)
    acc = _Accumulator(source.cfg.antithetic)
    for blk in source.blocks():
        integrand = np.zeros_like(blk.r)
        for k, u in enumerate(blk.times):
            rk, xk = blk.r[:, k], blk.x[:, k]
            cand = np.nonzero((rk > 0) & (xk < K))[0]
            if cand.size:
                b = surface(np.full(cand.size, t0 + u), rk[cand])
                hit = cand[xk[cand] < b]
                integrand[hit, k] = K * rk[hit] * np.exp(-blk.int_r[hit, k])
        cols = [integrand @ fine_w]
        if coarse:
            cols.append(integrand @ coarse_w)
        acc.add(np.stack(cols, axis=1))
    mean, se, n = acc.result()
    extra = {}
    if coarse:
        extra = {"coarse_estimate": float(mean[1]), "bias_bound": float(abs(mean[0] - mean[1]))}
    return Estimate(float(mean[0]), float(se[0]), int(n), extra)


DEFAULT_BASIS = ((0, 0), (1, 0), (2, 0), (0, 1), (0, 2), (1, 1))
RIDGE = 1e-8


def _design(basis, xs, rs):
    return np.stack([xs**i * rs**j for i, j in basis], axis=1)


def _fit(A, y):
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        coef = np.linalg.solve(A.T @ A + RIDGE * np.eye(A.shape[1]), A.T @ y)
    return coef


def ls_american(model: MarketModel, contract: OptionContract, r0: float, x0: float, cfg: PathConfig,
                basis_spec=DEFAULT_BASIS) -> Estimate:
    """Two-pass least-squares Monte Carlo value of the American put.

    Exercise dates are the ``cfg.n_steps`` per unit time grid.  The policy
    is fitted on one path set and valued on an independent one.  Basis
    entries (i, j) stand for (x/K)^i (r/0.1)^j, fitted on in-the-money paths.
    """
    if not basis_spec:
        raise ValueError("basis_spec must be nonempty")
    basis = tuple(tuple(b) for b in basis_spec)
    K, T = contract.strike, contract.maturity
    fit_paths = simulate_paths(model, r0, x0, T, cfg, stream=1)
    m = fit_paths.r.shape[1] - 1
    xs, rs = fit_paths.x / K, fit_paths.r / 0.1
    pay = np.maximum(K - fit_paths.x, 0.0)
    disc = fit_paths.int_r
    # cash value discounted to time 0, and the index where it is received
    cash = pay[:, -1] * np.exp(-disc[:, -1])
    coefs = [None] * (m + 1)
    for k in range(m - 1, 0, -1):
        itm = pay[:, k] > 0
        if itm.sum() > len(basis):
            A = _design(basis, xs[itm, k], rs[itm, k])
            y = cash[itm] * np.exp(disc[itm, k])  # value seen at t_k
            c = _fit(A, y)
            coefs[k] = c
            cont = A @ c
            ex = pay[itm, k] > cont
            idx = np.nonzero(itm)[0][ex]
            cash[idx] = pay[idx, k] * np.exp(-disc[idx, k])
    continuation0 = float(cash.mean())
    stop0 = max(K - x0, 0.0) >= continuation0

    ev = simulate_paths(model, r0, x0, T, cfg, stream=2)
    if stop0:
        vals = np.full(ev.r.shape[0], max(K - x0, 0.0))
    else:
        pay = np.maximum(K - ev.x, 0.0)
        vals = pay[:, -1] * np.exp(-ev.int_r[:, -1])
        alive = np.ones(ev.r.shape[0], dtype=bool)
        for k in range(1, m):
            if coefs[k] is None:
                continue
            cand = alive & (pay[:, k] > 0)
            if not cand.any():
                continue
            A = _design(basis, ev.x[cand, k] / K, ev.r[cand, k] / 0.1)
            ex = pay[cand, k] > A @ coefs[k]
            idx = np.nonzero(cand)[0][ex]
            vals[idx] = pay[idx, k] * np.exp(-ev.int_r[idx, k])
            alive[idx] = False
    acc = _Accumulator(cfg.antithetic)
    sizes = np.cumsum([0] + PathSource(model, r0, x0, T, cfg).block_sizes())
    for a, b in zip(sizes[:-1], sizes[1:]):
        acc.add(vals[a:b])
    mean, se, n = acc.result()
    return Estimate(float(mean), float(se), int(n), {"exercise_at_start": bool(stop0),
                                                      "fit_continuation": continuation0})


def dump_paths(path, block: PathBlock):
    """Write paths as a flat little-endian float64 file plus a JSON header.

    Layout: columns t, r, int_r, x one after another, each of shape
    (n_paths, n_steps + 1) in C order; ``t`` holds the step times repeated
    for every path.  The header file ``<path>.json`` records the shape.
    """
    n, m1 = block.r.shape
    cols = [np.broadcast_to(block.times, (n, m1)), block.r, block.int_r, block.x]
    with open(path, "wb") as fh:
        for c in cols:
            fh.write(np.ascontiguousarray(c, dtype="<f8").tobytes())
    with open(f"{path}.json", "w") as fh:
        json.dump({"columns": ["t", "r", "int_r", "x"], "n_paths": n, "n_times": m1, "dtype": "<f8"}, fh)


def load_paths(path) -> PathBlock:
    with open(f"{path}.json") as fh:
        head = json.load(fh)
    n, m1 = head["n_paths"], head["n_times"]
    raw = np.fromfile(path, dtype="<f8").reshape(4, n, m1)
    return PathBlock(raw[0, 0].copy(), raw[1], raw[2], raw[3])
