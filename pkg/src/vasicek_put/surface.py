"""Boundary surface container, grid and the shape-preserving interpolant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    t_nodes: np.ndarray
    r_nodes: np.ndarray
    maturity: float

    def __post_init__(self):
        t = np.asarray(self.t_nodes, dtype=float)
        r = np.asarray(self.r_nodes, dtype=float)
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "r_nodes", r)
        if t.ndim != 1 or r.ndim != 1 or t.size < 2 or r.size < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("grid nodes must be strictly ascending")
        if t[0] < 0 or t[-1] >= self.maturity:
            raise ValueError("time nodes must lie in [0, T)")

    @property
    def shape(self) -> tuple[int, int]:
        return self.t_nodes.size, self.r_nodes.size

    @classmethod
    def default(
        cls,
        maturity: float,
        n_t: int = 50,
        n_r: int = 41,
        r_min: float = -0.05,
        r_max: float = 0.15,
        last_gap: float = 1e-3,
    ) -> "Grid":
        """Time nodes geometric in time-to-maturity, rate nodes uniform.

        The smallest time-to-maturity is ``last_gap * maturity``.  When the
        rate range straddles zero, a node is forced onto r = 0.
        """
        tau = maturity * np.geomspace(1.0, last_gap, n_t)
        t = maturity - tau
        t[0] = 0.0
        r = np.linspace(r_min, r_max, n_r)
        if r_min < 0 < r_max and not np.any(r == 0.0):
            j = int(np.argmin(np.abs(r)))
            r[j] = 0.0
        return cls(t, r, maturity)

    def to_dict(self) -> dict:
        return {
            "t_nodes": self.t_nodes.tolist(),
            "r_nodes": self.r_nodes.tolist(),
            "maturity": self.maturity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(np.array(d["t_nodes"]), np.array(d["r_nodes"]), float(d["maturity"]))


def pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson derivatives along the last axis of ``y``.

    Same construction as scipy's PchipInterpolator: weighted harmonic means
    in the interior, the shape-preserving three-point formula at the ends.
    """
    y = np.asarray(y, dtype=float)
    n = x.size
    if n == 1:
        return np.zeros_like(y)
    h = np.diff(x)
    delta = np.diff(y, axis=-1) / h
    if n == 2:
        return np.repeat(delta, 2, axis=-1)
    d = np.zeros_like(y)
    w1 = 2 * h[1:] + h[:-1]
    w2 = h[1:] + 2 * h[:-1]
    dl, dr = delta[..., :-1], delta[..., 1:]
    same = (np.sign(dl) * np.sign(dr)) > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hm = (w1 + w2) / (w1 / dl + w2 / dr)
    d[..., 1:-1] = np.where(same, hm, 0.0)

    def edge(h0, h1, m0, m1):
        dd = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
        dd = np.where(np.sign(dd) != np.sign(m0), 0.0, dd)
        flip = (np.sign(m0) != np.sign(m1)) & (np.abs(dd) > 3 * np.abs(m0))
        return np.where(flip, 3 * m0, dd)

    d[..., 0] = edge(h[0], h[1], delta[..., 0], delta[..., 1])
    d[..., -1] = edge(h[-1], h[-2], delta[..., -1], delta[..., -2])
    return d


@dataclass
class _Piece:
    """One cubic Hermite piece over a contiguous run of rate nodes."""

    r: np.ndarray
    values: np.ndarray  # (n_t, n)
    slopes: np.ndarray  # (n_t, n)

    def eval(self, i: np.ndarray, rq: np.ndarray) -> np.ndarray:
        r = self.r
        if r.size == 1:
            return self.values[i, 0]
        rc = np.clip(rq, r[0], r[-1])
        j = np.clip(np.searchsorted(r, rc, side="right") - 1, 0, r.size - 2)
        h = r[j + 1] - r[j]
        s = (rc - r[j]) / h
        y0 = self.values[i, j]
        y1 = self.values[i, j + 1]
        m0 = self.slopes[i, j] * h
        m1 = self.slopes[i, j + 1] * h
        s2 = s * s
        s3 = s2 * s
        return (
            (2 * s3 - 3 * s2 + 1) * y0
            + (s3 - 2 * s2 + s) * m0
            + (-2 * s3 + 3 * s2) * y1
            + (s3 - s2) * m1
        )


@dataclass
class BoundarySurface:
    """Exercise boundary b(t_i, r_j) on a grid.

    Interpolation is piecewise-cubic Hermite (monotone) in r on each time
    slice and linear in t between slices.  The rate axis is split at r = 0:
    negative rates use only the nodes with r < 0, nonnegative rates only those
    with r >= 0, so the jump of b at zero is never smoothed over.  On (0, r_1)
    the stored r = 0 node is replaced by the right limit b(t, 0+), taken as the
    linear extrapolation of the first two positive nodes clipped to
    [b(t, 0), b(t, r_1)]; a query at r = 0 itself returns the stored node.
    Queries outside the grid clamp to the edge values.
    """

    grid: Grid
    values: np.ndarray
    converged: bool = False
    _pieces: list = field(default=None, init=False, repr=False, compare=False)
    _zero: int | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        self.values = v
        self._build()

    def _build(self):
        r = self.grid.r_nodes
        neg = r < 0
        pieces = []
        for mask in (neg, ~neg):
            if mask.any():
                vals = self.values[:, mask]
                rm = r[mask]
                if mask is not neg and rm[0] == 0.0 and rm.size >= 3:
                    vals = vals.copy()
                    b1, b2 = vals[:, 1], vals[:, 2]
                    ext = b1 - (b2 - b1) * (rm[1] - rm[0]) / (rm[2] - rm[1])
                    vals[:, 0] = np.clip(ext, np.minimum(vals[:, 0], b1), b1)
                pieces.append(_Piece(rm, vals, pchip_slopes(rm, vals)))
            else:
                pieces.append(None)
        self._pieces = pieces
        zero = np.flatnonzero(r == 0.0)
        self._zero = int(zero[0]) if zero.size else None

    def _time_weights(self, t):
        tn = self.grid.t_nodes
        tc = np.clip(t, tn[0], tn[-1])
        i = np.clip(np.searchsorted(tn, tc, side="right") - 1, 0, tn.size - 2)
        w = (tc - tn[i]) / (tn[i + 1] - tn[i])
        return i, w

    def _eval_slice(self, i, r):
        left, right = self._pieces
        if left is None:
            out = right.eval(i, r)
        elif right is None:
            out = left.eval(i, r)
        else:
            neg = r < 0
            out = np.empty(r.shape)
            out[neg] = left.eval(i[neg], r[neg])
            pos = ~neg
            out[pos] = right.eval(i[pos], r[pos])
        if self._zero is not None:
            at = r == 0.0
            out[at] = self.values[i[at], self._zero]
        return out

    def __call__(self, t, r):
        t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
        shape = t.shape
        t, r = t.ravel(), r.ravel()
        i, w = self._time_weights(t)
        out = (1 - w) * self._eval_slice(i, r) + w * self._eval_slice(i + 1, r)
        out = out.reshape(shape)
        return out[()] if out.ndim == 0 else out

    def with_values(self, values, converged=False) -> "BoundarySurface":
        return BoundarySurface(self.grid, values, converged=converged)


def interpolate(surface: BoundarySurface, t, r):
    return surface(t, r)


def initial_surface(grid: Grid, strike: float) -> BoundarySurface:
    """Seed for the fixed-point iteration: b = K everywhere (unconverged)."""
    return BoundarySurface(grid, np.full(grid.shape, float(strike)), converged=False)


def constant_surface(grid: Grid, level: float, converged: bool = True) -> BoundarySurface:
    return BoundarySurface(grid, np.full(grid.shape, float(level)), converged=converged)


def boundary_inverse(surface: BoundarySurface, t: float, x: float, n_fine: int = 2001) -> float:
    """Generalised inverse c(t, x) = inf{r : b(t, r) >= x} over the grid range.

    Returns +inf when no rate in range reaches x (always for x >= K), and the
    lowest grid rate when the whole slice already lies above x.
    """
    if x <= 0:
        raise ValueError("x must be > 0")
    r_nodes = surface.grid.r_nodes
    rs = np.union1d(np.linspace(r_nodes[0], r_nodes[-1], n_fine), r_nodes)
    b = surface(np.full_like(rs, t), rs)
    hit = np.nonzero(b >= x)[0]
    if hit.size == 0:
        return np.inf
    k = hit[0]
    if k == 0:
        return float(rs[0])
    # refine between rs[k-1] (below) and rs[k] (at or above) by bisection
    lo, hi = rs[k - 1], rs[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if surface(t, mid) >= x:
            hi = mid
        else:
            lo = mid
    return float(hi)
