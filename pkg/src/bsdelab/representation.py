"""Difference-quotient representation experiments.

The object under study: with terminal data y + <z, B_{(t+eps) ^ tau} - B_t>
and the generator switched off from the stopping index tau on, the rescaled
initial value ((Y_t) - y)/eps converges to g(t, x, y, z) as eps -> 0+, in
L^p over the time-t randomness.  tau is the first grid index where the
Brownian displacement plus the running integral of g(r, x_r, 0, 0)^2 exceeds
a barrier (default 1), which keeps the truncated terminal bounded without
assuming any growth on g.

For a generator without state dependence the limit is deterministic and the
Monte Carlo mean is the estimator.  For a state-dependent generator the
time-t state is realized pathwise (Brownian marginal anchored at x) and the
regression conditions on (initial state, increment) pairs, so the fitted
initial values estimate the conditional quotient path by path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import BSDEProblem, ExperimentConfig, Generator
from .errors import HypothesisError, ValidationError
from .paths import ForwardBatch, TimeGrid, sample_brownian, stopping_indices
from .solver import comparison_check, solve_bsde

# Auxiliary Philox stream offset, disjoint from the path-block keyspace.
AUX_STREAM = np.uint64(1) << np.uint64(63)

# Finest time step relative to the quotient window.
MIN_STEPS_PER_EPS = 50


def _aux_normals(seed: int, shape, stream: int = 0) -> np.ndarray:
    key = np.array([np.uint64(seed), AUX_STREAM + np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(shape)


@dataclass(frozen=True)
class QuotientEstimate:
    """One quotient cell: window eps, M paths.

    per_path holds the conditional (regression-fitted) quotients used for
    L^p errors against the pathwise targets; raw holds the telescoped
    pathwise sums whose spread measures the estimator's Monte Carlo noise.
    """

    eps: float
    mean: float
    se: float
    per_path: np.ndarray
    raw: np.ndarray
    targets: np.ndarray
    frac_stopped: float


def representation_quotient(
    g: Generator,
    t: float,
    x,
    y: float,
    z,
    eps: float,
    config: ExperimentConfig,
    barrier: float = 1.0,
    randomize_base: bool | None = None,
) -> QuotientEstimate:
    """Estimate the difference quotient of g at (t, x, y, z) over window eps.

    Builds the grid on [t, t+eps] (config.n_steps must keep dt <= eps/50),
    realizes the time-t state, applies the per-path stopping index, solves
    the truncated backward problem, and rescales.  randomize_base defaults
    to g.state_dependent: a state-dependent generator is probed at the
    realized Brownian marginal anchored at x, a deterministic one at x
    itself.  If the stop binds on more than 1% of paths a warning is issued
    (the window is then too wide for the barrier).
    """
    if eps <= 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    if config.n_steps < MIN_STEPS_PER_EPS:
        raise ValidationError(
            f"need n_steps >= {MIN_STEPS_PER_EPS} per quotient window, got {config.n_steps}"
        )
    z = np.atleast_1d(np.asarray(z, dtype=float))
    d = z.size
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 1 and d > 1:
        x = np.full(d, x[0])
    if x.size != d:
        raise ValidationError(f"state anchor has size {x.size}, expected {d}")
    if randomize_base is None:
        randomize_base = g.state_dependent

    M = config.n_paths
    grid = TimeGrid(t, t + eps, config.n_steps)
    batch = sample_brownian(grid, M, d, config.seed)

    if randomize_base and t > 0:
        base = x + np.sqrt(t) * _aux_normals(config.seed, (M, d))
    else:
        base = np.broadcast_to(x, (M, d)).copy()

    states = batch.cumulative(start=base)
    stop = stopping_indices(batch, g, grid, x_path=states, barrier=barrier)
    frac_stopped = float(np.mean(stop < config.n_steps))
    if frac_stopped > 0.01:
        warnings.warn(
            f"stopping index binds on {100 * frac_stopped:.2f}% of paths at eps={eps}; "
            "quotient window too wide for the barrier",
            RuntimeWarning,
            stacklevel=2,
        )

    stopped_state = np.take_along_axis(states, stop[:, None, None], axis=1)[:, 0, :]
    xi = y + (stopped_state - base) @ z

    problem = BSDEProblem(
        generator=g, t_start=t, t_end=t + eps, dimension_d=d, terminal=lambda s: xi
    )
    basis = None
    if randomize_base and t > 0:
        basis = np.concatenate(
            [np.broadcast_to(base[:, None, :], states.shape), states - base[:, None, :]],
            axis=2,
        )
    sol = solve_bsde(
        problem,
        ForwardBatch(grid=grid, states=states),
        batch,
        config,
        stop_indices=stop,
        basis_states=basis,
    )

    per_path = (sol.Y[:, 0] - y) / eps

    # Telescoped pathwise sum: same mean as the fitted initial values (least
    # squares preserves target means), but with the genuine per-path noise.
    dt_eff = np.where(np.arange(config.n_steps)[None, :] < stop[:, None], grid.dt, 0.0)
    times = grid.times()
    acc = xi.astype(float).copy()
    for i in range(config.n_steps):
        gv = np.asarray(
            g(times[i], states[:, i, :], sol.Y[:, i], sol.Z[:, i, :]), dtype=float
        )
        acc += gv * dt_eff[:, i]
    raw = (acc - y) / eps

    targets = np.broadcast_to(
        np.asarray(g(t, base, np.full(M, float(y)), np.broadcast_to(z, (M, d))), dtype=float),
        (M,),
    )
    return QuotientEstimate(
        eps=float(eps),
        mean=float(per_path.mean()),
        se=float(raw.std(ddof=1) / np.sqrt(M)) if M > 1 else 0.0,
        per_path=per_path,
        raw=raw,
        targets=np.asarray(targets, dtype=float).copy(),
        frac_stopped=frac_stopped,
    )


@dataclass(frozen=True)
class RepresentationReport:
    """Convergence study of the quotient along a decreasing window schedule."""

    t: float
    x: tuple
    y: float
    z: tuple
    eps_schedule: tuple
    quotient_means: tuple
    quotient_ses: tuple
    lp_errors: dict  # p -> error per eps
    lp_ses: dict  # p -> standard error of that estimate
    fitted_rate: float | None  # slope of log L1 error vs log eps; None if skipped
    target_mean: float
    errors_decreasing: bool
    frac_stopped: tuple


def _lp_error(q, targets, raw_se, p):
    v = np.abs(q - targets) ** p
    m = float(v.mean())
    err = m ** (1.0 / p)
    n = v.size
    se_v = float(v.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    se = se_v / p * m ** (1.0 / p - 1.0) if m > 0 else se_v
    # the mean itself is uncertain even when the conditional quotient collapses
    return err, float(np.hypot(se, raw_se))


def convergence_study(
    g: Generator,
    t: float,
    x,
    y: float,
    z,
    eps_schedule,
    config: ExperimentConfig,
    barrier: float = 1.0,
    horizon: float | None = None,
) -> RepresentationReport:
    """Run representation_quotient along eps_schedule and fit the rate.

    The schedule must be strictly decreasing.  L^p errors (p from
    config.p_norms) are computed pathwise against g evaluated at the
    realized time-t state.  A non-monotone L1 sequence beyond one combined
    standard error is reported via errors_decreasing=False, not raised: the
    caller decides whether that fails the run.  The rate fit is skipped when
    every error is statistically indistinguishable from zero.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule:
        raise ValidationError("eps_schedule must be nonempty")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValidationError("eps_schedule must be strictly decreasing")
    if eps_schedule[-1] <= 0:
        raise ValidationError("eps_schedule entries must be > 0")
    if horizon is not None and t + eps_schedule[0] > horizon + 1e-12:
        raise ValidationError(
            f"window t+eps={t + eps_schedule[0]} exceeds horizon {horizon}"
        )

    cells = [
        representation_quotient(g, t, x, y, z, e, config, barrier=barrier)
        for e in eps_schedule
    ]
    lp_errors: dict[int, list] = {p: [] for p in config.p_norms}
    lp_ses: dict[int, list] = {p: [] for p in config.p_norms}
    for c in cells:
        raw_se = c.se
        for p in config.p_norms:
            err, se = _lp_error(c.per_path, c.targets, raw_se, p)
            lp_errors[p].append(err)
            lp_ses[p].append(se)

    p_lead = min(config.p_norms)
    lead = np.array(lp_errors[p_lead])
    lead_se = np.array(lp_ses[p_lead])
    # quotients divide by eps, so plain float dust sits at eps_machine/eps;
    # comparisons below that scale (or below the noise) carry no information
    dust = 1e-12 * (1.0 + abs(y)) / eps_schedule[-1]
    decreasing = all(
        lead[k + 1] <= lead[k] + np.hypot(lead_se[k], lead_se[k + 1]) + dust
        for k in range(len(lead) - 1)
    )

    if np.all(lead <= 3.0 * lead_se + dust) or np.any(lead <= 0.0):
        rate = None
    else:
        slope, _ = np.polyfit(np.log(eps_schedule), np.log(lead), 1)
        rate = float(slope)

    return RepresentationReport(
        t=float(t),
        x=tuple(np.atleast_1d(np.asarray(x, dtype=float))),
        y=float(y),
        z=tuple(np.atleast_1d(np.asarray(z, dtype=float))),
        eps_schedule=tuple(eps_schedule),
        quotient_means=tuple(c.mean for c in cells),
        quotient_ses=tuple(c.se for c in cells),
        lp_errors={p: tuple(v) for p, v in lp_errors.items()},
        lp_ses={p: tuple(v) for p, v in lp_ses.items()},
        fitted_rate=rate,
        target_mean=float(np.mean(cells[-1].targets)),
        errors_decreasing=bool(decreasing),
        frac_stopped=tuple(c.frac_stopped for c in cells),
    )


@dataclass(frozen=True)
class ConversePointRow:
    t: float
    x: tuple
    y: float
    z: tuple
    mean1: float
    mean2: float
    se_diff: float
    ordered: bool


@dataclass(frozen=True)
class ConverseReport:
    hypothesis_fraction: float
    rows: tuple
    all_ordered: bool


def converse_comparison_probe(
    g1: Generator,
    g2: Generator,
    points,
    eps: float,
    config: ExperimentConfig,
    barrier: float = 1.0,
    hypothesis_threshold: float = 0.999,
) -> ConverseReport:
    """Probe pointwise generator ordering from solution ordering.

    First verifies the forward hypothesis (solution ordering on sampled
    terminal data) via comparison_check; any failure there, including its
    generator-ordering precondition, raises HypothesisError.  Then, at each
    probe point, both quotients are estimated on common random numbers and
    declared ordered when mean1 >= mean2 - 3*SE(diff) - solver slack.
    """
    if not points:
        raise ValidationError("need at least one probe point")
    t0, x0, y0, z0 = points[0]
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    d = z0.size
    grid = TimeGrid(t0, t0 + eps, config.n_steps)
    batch = sample_brownian(grid, config.n_paths, d, config.seed)
    states = batch.cumulative(start=np.atleast_1d(np.asarray(x0, dtype=float)))
    forward = ForwardBatch(grid=grid, states=states)

    def terminal(s):
        return y0 + (s[:, -1, :] - s[:, 0, :]) @ z0

    template = BSDEProblem(
        generator=g1, t_start=t0, t_end=t0 + eps, dimension_d=d, terminal=terminal
    )
    try:
        cmp = comparison_check(g1, g2, template, forward, batch, config)
    except ValidationError as exc:
        if isinstance(exc, HypothesisError):
            raise
        raise HypothesisError(f"generator ordering precheck: {exc}") from exc
    if cmp.fraction < hypothesis_threshold:
        raise HypothesisError(
            f"solution ordering holds on only {100 * cmp.fraction:.3f}% of pairs"
        )

    rows = []
    slack_fp = 2.0 * config.n_steps * config.picard_tol / eps
    for t, x, y, z in points:
        q1 = representation_quotient(g1, t, x, y, z, eps, config, barrier=barrier)
        q2 = representation_quotient(g2, t, x, y, z, eps, config, barrier=barrier)
        diff_raw = q1.raw - q2.raw
        se = float(diff_raw.std(ddof=1) / np.sqrt(diff_raw.size))
        ordered = q1.mean >= q2.mean - 3.0 * se - slack_fp
        rows.append(
            ConversePointRow(
                t=float(t),
                x=tuple(np.atleast_1d(np.asarray(x, dtype=float))),
                y=float(y),
                z=tuple(np.atleast_1d(np.asarray(z, dtype=float))),
                mean1=q1.mean,
                mean2=q2.mean,
                se_diff=se,
                ordered=bool(ordered),
            )
        )
    return ConverseReport(
        hypothesis_fraction=cmp.fraction,
        rows=tuple(rows),
        all_ordered=all(r.ordered for r in rows),
    )
