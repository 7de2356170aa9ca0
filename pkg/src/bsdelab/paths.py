"""Time grids, Brownian increment batches, forward simulation, stopping.

Increments are drawn per fixed-size path block from an independent Philox
stream keyed by (seed, block index).  Because the block size is a constant of
the scheme, path m is a pure function of (seed, n_steps, d, m): enlarging the
batch appends paths without disturbing existing ones, and any contiguous
range of blocks can be generated concurrently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Generator
from .errors import NumericalError, ValidationError

# Fixed block size of the stream-splitting scheme.  Changing it changes every
# sampled path, so it is deliberately not configurable.
PATH_BLOCK = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t_start, t_end] with n_steps intervals.

    Nodes are computed as t_start + i*dt (one multiply per node, no running
    sums) and the final node is pinned to t_end exactly.
    """

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValidationError(
                f"need t_start < t_end, got [{self.t_start}, {self.t_end}]"
            )
        if self.n_steps < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    def times(self) -> np.ndarray:
        t = self.t_start + self.dt * np.arange(self.n_steps + 1)
        t[-1] = self.t_end
        return t


@dataclass(frozen=True)
class BrownianBatch:
    """Increments of M independent d-dimensional Brownian paths on a grid."""

    seed: int
    d: int
    M: int
    grid: TimeGrid
    increments: np.ndarray  # (M, n_steps, d)

    def cumulative(self, start=0.0) -> np.ndarray:
        """Path values (M, n_steps+1, d); start may be scalar or (M, d)."""
        M, N, d = self.increments.shape
        out = np.empty((M, N + 1, d))
        out[:, 0, :] = start
        np.cumsum(self.increments, axis=1, out=out[:, 1:, :])
        out[:, 1:, :] += out[:, :1, :]
        return out


@dataclass(frozen=True)
class ForwardBatch:
    """States of a simulated forward process, shape (M, n_steps+1, n)."""

    grid: TimeGrid
    states: np.ndarray


def _fill_block(incr, b, seed, scale):
    lo = b * PATH_BLOCK
    hi = min(lo + PATH_BLOCK, incr.shape[0])
    _, n_steps, d = incr.shape
    bit = np.random.Philox(key=np.array([seed, b], dtype=np.uint64))
    block = np.random.Generator(bit).standard_normal((PATH_BLOCK, n_steps, d))
    incr[lo:hi] = scale * block[: hi - lo]


def sample_brownian(
    grid: TimeGrid, M: int, d: int, seed: int, threads: int = 1
) -> BrownianBatch:
    """Draw M Brownian paths' increments on the grid, reproducibly.

    The same (seed, n_steps, d) always yields the same path m, regardless of
    M and of threads: blocks are independent streams written to disjoint
    slices, so the parallel schedule cannot affect the result.
    """
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    incr = np.empty((M, grid.n_steps, d))
    scale = np.sqrt(grid.dt)
    n_blocks = (M + PATH_BLOCK - 1) // PATH_BLOCK
    if threads == 1 or n_blocks == 1:
        for b in range(n_blocks):
            _fill_block(incr, b, seed, scale)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: _fill_block(incr, b, seed, scale), range(n_blocks)))
    return BrownianBatch(seed=seed, d=d, M=M, grid=grid, increments=incr)


def euler_maruyama(
    grid: TimeGrid,
    drift: Callable,
    diffusion: Callable,
    x0,
    batch: BrownianBatch,
) -> ForwardBatch:
    """Simulate X_{i+1} = X_i + b(t_i, X_i)*dt + sigma(t_i, X_i)*dB_i.

    drift(t, x) must broadcast to (M, n) for x of shape (M, n); diffusion may
    return a scalar, an (M, n)-shaped array (diagonal n == d case), or a full
    (M, n, d) matrix.  x0 is a scalar or an n-vector.  NaN/Inf in any state is
    reported with the first offending step and path index.
    """
    M, n_steps, d = batch.increments.shape
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    times = grid.times()
    dt = grid.dt
    states = np.empty((M, n_steps + 1, n))
    states[:, 0, :] = x0
    for i in range(n_steps):
        xi = states[:, i, :]
        bi = np.broadcast_to(np.asarray(drift(times[i], xi), dtype=float), (M, n))
        sig = np.asarray(diffusion(times[i], xi), dtype=float)
        dB = batch.increments[:, i, :]
        if sig.ndim == 3:
            inc = np.einsum("mnd,md->mn", sig, dB)
        else:
            if n != d:
                raise ValidationError(
                    f"diagonal diffusion needs n == d, got n={n}, d={d}"
                )
            inc = np.broadcast_to(sig, (M, n)) * dB
        nxt = xi + bi * dt + inc
        if not np.all(np.isfinite(nxt)):
            m_bad = int(np.argmax(~np.isfinite(nxt).all(axis=1)))
            raise NumericalError(
                f"non-finite state at step {i + 1}, path {m_bad}"
            )
        states[:, i + 1, :] = nxt
    return ForwardBatch(grid=grid, states=states)


def stopping_indices(
    batch: BrownianBatch,
    g: Generator,
    grid: TimeGrid | None = None,
    x_path: np.ndarray | None = None,
    barrier: float = 1.0,
) -> np.ndarray:
    """First grid index where |B_{t_k} - B_{t_0}| + sum_{i<k} g0_i^2*dt > barrier.

    g0_i = g(t_i, x_i, 0, 0) with x_i taken from x_path (shape (M, N+1, n))
    or, by default, from the Brownian path itself.  Paths that never exceed
    the barrier return n_steps.  No sub-step interpolation: exceedance is
    detected at grid nodes only.
    """
    if grid is None:
        grid = batch.grid
    if barrier <= 0:
        raise ValidationError(f"barrier must be > 0, got {barrier}")
    M, n_steps, d = batch.increments.shape
    cum = batch.cumulative()
    disp = np.sqrt(np.sum((cum - cum[:, :1, :]) ** 2, axis=2))  # (M, N+1)

    if x_path is None:
        x_path = cum
    times = grid.times()
    g0sq = np.empty((M, n_steps))
    zeros = np.zeros(M)
    for i in range(n_steps):
        g0 = np.broadcast_to(
            np.asarray(g(times[i], x_path[:, i, :], zeros, np.zeros((M, d))), dtype=float),
            (M,),
        )
        g0sq[:, i] = g0 * g0
    level = np.empty((M, n_steps + 1))
    level[:, 0] = 0.0
    np.cumsum(g0sq * grid.dt, axis=1, out=level[:, 1:])

    exceeded = disp + level > barrier
    hit = exceeded.any(axis=1)
    idx = np.where(hit, np.argmax(exceeded, axis=1), n_steps)
    return idx.astype(np.int64)
