"""Semilinear parabolic PDE bridge: Monte Carlo vs finite differences.

u(t, x) := Y_t of the backward equation driven by the diffusion started at
(t, x) solves, in the viscosity sense,

    du/dt + (1/2) sigma^2 u_xx + b u_x + g(t, x, u, sigma u_x) = 0,
    u(T, .) = phi,

in one spatial dimension here.  This module estimates u by the path solver,
computes an independent theta-scheme reference on a box, compares the two,
and checks the viscosity inequality at a touching point both directly (via
analytic derivatives of the test function) and through the difference
quotient of the compensated generator built from the test function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .core import BSDEProblem, ExperimentConfig, Generator
from .errors import NumericalError, ValidationError
from .paths import ForwardBatch, TimeGrid, euler_maruyama, sample_brownian, stopping_indices
from .solver import solve_bsde


@dataclass(frozen=True)
class PDEProblem:
    """Terminal-value problem data on a box [x_lo, x_hi] x [0, T].

    drift and sigma follow the forward-simulation convention: called with
    (t, x) where x has shape (M, 1), returning a broadcastable array.  The
    generator receives the spatial state through its x argument.  growth_L
    and growth_p declare |phi(x)| + |g(t,x,0,0)| <= L*(1 + |x|^p), verified
    by sampling before Monte Carlo runs.
    """

    drift: Callable
    sigma: Callable
    generator: Generator
    phi: Callable  # terminal condition, vectorized over x
    growth_L: float
    growth_p: float
    T: float
    x_lo: float
    x_hi: float

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValidationError(f"need x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]")
        if not self.T > 0:
            raise ValidationError(f"need T > 0, got {self.T}")
        if self.growth_L <= 0:
            raise ValidationError(f"growth_L must be > 0, got {self.growth_L}")


def growth_check(problem: PDEProblem, n_samples: int = 512) -> None:
    """Sampled check of the declared growth bound; raises on violation."""
    xs = np.linspace(problem.x_lo, problem.x_hi, n_samples)
    phi_v = np.asarray(problem.phi(xs), dtype=float)
    bound = problem.growth_L * (1.0 + np.abs(xs) ** problem.growth_p)
    for t in np.linspace(0.0, problem.T, 8):
        g0 = np.broadcast_to(
            np.asarray(
                problem.generator(t, xs[:, None], np.zeros(n_samples), np.zeros((n_samples, 1))),
                dtype=float,
            ),
            (n_samples,),
        )
        tot = np.abs(phi_v) + np.abs(g0)
        bad = tot > bound
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValidationError(
                f"growth bound violated at t={t:.3f}, x={xs[i]:.4f}: "
                f"{tot[i]:.4e} > {bound[i]:.4e}"
            )


@dataclass(frozen=True)
class McSolution:
    u: float
    se: float
    solution: object  # SolutionBatch
    forward: ForwardBatch


def mc_solution(problem: PDEProblem, t: float, x: float, config: ExperimentConfig) -> McSolution:
    """Estimate u(t, x) by forward simulation plus the backward sweep.

    The reported standard error comes from the pathwise telescoped sums
    (terminal value plus accumulated generator), whose mean coincides with
    the regression estimate but whose spread is the estimator's real Monte
    Carlo noise.
    """
    if not 0.0 <= t < problem.T:
        raise ValidationError(f"need 0 <= t < T={problem.T}, got t={t}")
    growth_check(problem)
    grid = TimeGrid(t, problem.T, config.n_steps)
    batch = sample_brownian(grid, config.n_paths, 1, config.seed)
    fw = euler_maruyama(grid, problem.drift, problem.sigma, x, batch)
    prob = BSDEProblem(
        generator=problem.generator,
        t_start=t,
        t_end=problem.T,
        dimension_d=1,
        terminal=lambda s: np.asarray(problem.phi(s[:, -1, 0]), dtype=float),
    )
    sol = solve_bsde(prob, fw, batch, config)
    raw = _telescoped(problem.generator, grid, fw.states, sol, None)
    M = config.n_paths
    return McSolution(
        u=float(sol.Y[:, 0].mean()),
        se=float(raw.std(ddof=1) / np.sqrt(M)) if M > 1 else 0.0,
        solution=sol,
        forward=fw,
    )


def _telescoped(g, grid, states, sol, stop):
    """Pathwise xi + sum_i g(t_i, x_i, Y_i, Z_i)*dt_eff; same mean as Y[:,0]."""
    M, n_steps1, _ = states.shape
    n_steps = n_steps1 - 1
    times = grid.times()
    acc = sol.Y[:, -1].astype(float).copy()
    for i in range(n_steps):
        dt_eff = grid.dt if stop is None else np.where(i < stop, grid.dt, 0.0)
        gv = np.asarray(g(times[i], states[:, i, :], sol.Y[:, i], sol.Z[:, i, :]), dtype=float)
        acc += gv * dt_eff
    return acc


@dataclass(frozen=True)
class FlowCheckRow:
    t_mid: float
    x_mid: float
    y_window: float
    y_resolve: float
    se_combined: float


def flow_consistency(
    problem: PDEProblem,
    t: float,
    x: float,
    config: ExperimentConfig,
    quantiles=(0.25, 0.5, 0.75),
) -> list[FlowCheckRow]:
    """Sanity check of the flow property u(t+s, X_{t+s}) = Y_{t+s}.

    Solves once from (t, x), then at the midpoint time compares the solved
    Y values (averaged over a narrow window of paths around a state
    quantile) against a fresh solve started at that quantile.  Windowing
    introduces O(bandwidth^2) smoothing bias, so this is a consistency
    check, not a sharp test.
    """
    mc = mc_solution(problem, t, x, config)
    sol, fw = mc.solution, mc.forward
    k = config.n_steps // 2
    times = fw.grid.times()
    xs_k = fw.states[:, k, 0]
    rows = []
    bw = max(0.05 * xs_k.std(), 1e-6)
    for q in quantiles:
        xq = float(np.quantile(xs_k, q))
        win = np.abs(xs_k - xq) <= bw
        if np.count_nonzero(win) < 30:
            win = np.abs(xs_k - xq) <= 4 * bw
        yw = float(sol.Y[win, k].mean())
        se_w = float(sol.Y[win, k].std(ddof=1) / np.sqrt(np.count_nonzero(win)))
        sub = ExperimentConfig(
            seed=config.seed + 7919,
            n_paths=config.n_paths,
            n_steps=max(config.n_steps - k, 1),
            basis_degree=config.basis_degree,
            picard_max=config.picard_max,
            picard_tol=config.picard_tol,
            p_norms=config.p_norms,
        )
        re = mc_solution(problem, float(times[k]), xq, sub)
        rows.append(
            FlowCheckRow(
                t_mid=float(times[k]),
                x_mid=xq,
                y_window=yw,
                y_resolve=re.u,
                se_combined=float(np.hypot(se_w, re.se)),
            )
        )
    return rows


@dataclass(frozen=True)
class FDField:
    """Space-time table of the theta-scheme reference solution.

    times ascend from 0 to T; u[j] is the row at times[j], u[-1] = phi(xs)
    exactly.  value() interpolates bilinearly.
    """

    times: np.ndarray
    xs: np.ndarray
    u: np.ndarray
    theta: float

    def value(self, t: float, x: float) -> float:
        times, xs, u = self.times, self.xs, self.u
        if not times[0] <= t <= times[-1] + 1e-12:
            raise ValidationError(f"t={t} outside [{times[0]}, {times[-1]}]")
        if not xs[0] <= x <= xs[-1] + 1e-12:
            raise ValidationError(f"x={x} outside [{xs[0]}, {xs[-1]}]")
        j = min(int(np.searchsorted(times, t, side="right")) - 1, times.size - 2)
        j = max(j, 0)
        i = min(int(np.searchsorted(xs, x, side="right")) - 1, xs.size - 2)
        i = max(i, 0)
        wt = (t - times[j]) / (times[j + 1] - times[j])
        wx = (x - xs[i]) / (xs[i + 1] - xs[i])
        row0 = (1 - wx) * u[j, i] + wx * u[j, i + 1]
        row1 = (1 - wx) * u[j + 1, i] + wx * u[j + 1, i + 1]
        return float((1 - wt) * row0 + wt * row1)


def _frozen_boundary(problem, x_b, t):
    """Terminal condition transported by the constant-coefficient heat kernel.

    Coefficients are frozen at the boundary node; the semilinear term is
    dropped.  Valid as a Dirichlet value when the probes of interest sit far
    enough inside the box that the boundary layer cannot reach them.
    """
    tau = problem.T - t
    if tau <= 0:
        return float(problem.phi(np.array([x_b]))[0])
    xb = np.array([[x_b]])
    b_f = float(np.broadcast_to(np.asarray(problem.drift(t, xb), dtype=float), (1, 1))[0, 0])
    s_f = float(np.broadcast_to(np.asarray(problem.sigma(t, xb), dtype=float), (1, 1))[0, 0])
    nodes, weights = np.polynomial.hermite.hermgauss(64)
    pts = x_b + b_f * tau + s_f * math.sqrt(2.0 * tau) * nodes
    vals = np.asarray(problem.phi(pts), dtype=float)
    return float(weights @ vals / math.sqrt(math.pi))


def fd_reference(
    problem: PDEProblem, h: float, k: float, theta: float = 0.5
) -> FDField:
    """Theta-scheme on the linear part, explicit semilinear term.

    Backward march from phi: (I - theta*k*L) u_j = (I + (1-theta)*k*L) u_{j+1}
    + k * g(t_{j+1}, x, u_{j+1}, sigma * D_x u_{j+1}), with L the central
    discretization of (1/2) sigma^2 D_xx + b D_x and Dirichlet boundary
    values from the frozen-coefficient heat kernel.  theta = 1/2 is
    Crank-Nicolson.  For theta < 1/2 the parabolic CFL condition on k is
    enforced.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"theta must be in [0, 1], got {theta}")
    if h <= 0 or k <= 0:
        raise ValidationError(f"need h > 0 and k > 0, got h={h}, k={k}")
    n_x = int(round((problem.x_hi - problem.x_lo) / h))
    if n_x < 3:
        raise ValidationError("fewer than 3 spatial cells; shrink h")
    if abs(problem.x_lo + n_x * h - problem.x_hi) > 1e-9 * max(1.0, abs(problem.x_hi)):
        raise ValidationError("h does not evenly divide the domain width")
    xs = problem.x_lo + h * np.arange(n_x + 1)
    xs[-1] = problem.x_hi
    n_t = max(1, int(round(problem.T / k)))
    k_eff = problem.T / n_t
    times = k_eff * np.arange(n_t + 1)
    times[-1] = problem.T

    sig_grid = np.broadcast_to(
        np.asarray(problem.sigma(0.0, xs[:, None]), dtype=float), (xs.size, 1)
    )[:, 0]
    n_degenerate = int(np.count_nonzero(np.abs(sig_grid) < 1e-8))
    if n_degenerate:
        raise ValidationError(
            f"sigma degenerate on {n_degenerate} grid node(s); FD reference refuses"
        )
    if theta < 0.5:
        k_max = h * h / ((1.0 - 2.0 * theta) * float(np.max(sig_grid**2)))
        if k_eff > k_max:
            raise ValidationError(
                f"CFL violation: k={k_eff:.3e} > {k_max:.3e} for theta={theta}"
            )

    u = np.empty((n_t + 1, n_x + 1))
    u[n_t] = np.asarray(problem.phi(xs), dtype=float)
    xi_int = xs[1:-1]
    g = problem.generator

    def lin_coeffs(t):
        x2 = xi_int[:, None]
        bv = np.broadcast_to(np.asarray(problem.drift(t, x2), dtype=float), x2.shape)[:, 0]
        sv = np.broadcast_to(np.asarray(problem.sigma(t, x2), dtype=float), x2.shape)[:, 0]
        s2 = sv * sv
        lo = s2 / (2 * h * h) - bv / (2 * h)
        di = -s2 / (h * h)
        up = s2 / (2 * h * h) + bv / (2 * h)
        return lo, di, up, sv

    for j in range(n_t - 1, -1, -1):
        t_new, t_old = times[j], times[j + 1]
        v = u[j + 1]
        lo_o, di_o, up_o, sv_o = lin_coeffs(t_old)
        Lv = lo_o * v[:-2] + di_o * v[1:-1] + up_o * v[2:]
        dxv = (v[2:] - v[:-2]) / (2 * h)
        gv = np.broadcast_to(
            np.asarray(
                g(t_old, xi_int[:, None], v[1:-1], (sv_o * dxv)[:, None]), dtype=float
            ),
            xi_int.shape,
        )
        rhs = v[1:-1] + (1 - theta) * k_eff * Lv + k_eff * gv

        lo_n, di_n, up_n, _ = lin_coeffs(t_new)
        ub_lo = _frozen_boundary(problem, xs[0], t_new)
        ub_hi = _frozen_boundary(problem, xs[-1], t_new)
        rhs[0] += theta * k_eff * lo_n[0] * ub_lo
        rhs[-1] += theta * k_eff * up_n[-1] * ub_hi

        m = xi_int.size
        ab = np.zeros((3, m))
        ab[0, 1:] = -theta * k_eff * up_n[:-1]
        ab[1, :] = 1.0 - theta * k_eff * di_n
        ab[2, :-1] = -theta * k_eff * lo_n[1:]
        sol = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericalError(f"non-finite FD row at time index {j}")
        u[j, 1:-1] = sol
        u[j, 0] = ub_lo
        u[j, -1] = ub_hi

    return FDField(times=times, xs=xs, u=u, theta=theta)


@dataclass(frozen=True)
class McFdRow:
    t: float
    x: float
    u_mc: float
    se: float
    u_fd: float
    diff: float
    tol: float

    @property
    def passed(self) -> bool:
        return abs(self.diff) <= self.tol


def mc_vs_fd(
    problem: PDEProblem,
    points,
    config: ExperimentConfig,
    h: float,
    k: float,
    theta: float = 0.5,
    fd_budget: Callable | None = None,
) -> list[McFdRow]:
    """Discrepancy table between the two solvers at probe points.

    Tolerance per point: max(2% relative to the FD value, 3 MC standard
    errors plus the FD truncation budget).  The default budget charges 0.5%
    of scale, matching the reference's own acceptance bar.
    """
    if fd_budget is None:
        fd_budget = lambda u: 0.005 * max(1.0, abs(u))
    field = fd_reference(problem, h, k, theta)
    rows = []
    for i, (t, x) in enumerate(points):
        sub = ExperimentConfig(
            seed=config.seed + i,
            n_paths=config.n_paths,
            n_steps=config.n_steps,
            basis_degree=config.basis_degree,
            picard_max=config.picard_max,
            picard_tol=config.picard_tol,
            p_norms=config.p_norms,
        )
        mc = mc_solution(problem, t, x, sub)
        u_fd = field.value(t, x)
        diff = mc.u - u_fd
        tol = max(0.02 * abs(u_fd), 3.0 * mc.se + fd_budget(u_fd))
        rows.append(
            McFdRow(t=float(t), x=float(x), u_mc=mc.u, se=mc.se, u_fd=u_fd, diff=diff, tol=tol)
        )
    return rows


@dataclass(frozen=True)
class TestFunction:
    """Smooth test function with analytic derivatives, 1-d in space."""

    __test__ = False  # math term, not a pytest fixture

    value: Callable
    dt: Callable
    dx: Callable
    dxx: Callable

    def bumped(self, x0: float, amplitude: float) -> "TestFunction":
        """Add amplitude*(x - x0)^4; derivatives at x0 are unchanged."""
        a = float(amplitude)
        return TestFunction(
            value=lambda t, x, f=self.value: f(t, x) + a * (np.asarray(x) - x0) ** 4,
            dt=self.dt,
            dx=lambda t, x, f=self.dx: f(t, x) + 4 * a * (np.asarray(x) - x0) ** 3,
            dxx=lambda t, x, f=self.dxx: f(t, x) + 12 * a * (np.asarray(x) - x0) ** 2,
        )


def proof_generator(problem: PDEProblem, phi: TestFunction) -> Generator:
    """Compensated generator of the touching argument.

    G(r, x, y, z) = (phi_t + (1/2) sigma^2 phi_xx + b phi_x)(r, x)
                    + g(r, x, y + phi(r, x), z + sigma(r, x) * phi_x(r, x)).

    The backward solution with terminal 0 and this generator is the original
    Y minus phi along the diffusion; its difference quotient at (y, z) =
    (0, 0) recovers G(t, x, 0, 0), the PDE residual of phi against u.
    """
    g = problem.generator

    def ev(t, x, y, z):
        x2 = np.asarray(x, dtype=float)
        if x2.ndim == 0:
            x2 = x2.reshape(1, 1)
        x1 = x2[..., 0]
        bv = np.broadcast_to(np.asarray(problem.drift(t, x2), dtype=float), x2.shape)[..., 0]
        sv = np.broadcast_to(np.asarray(problem.sigma(t, x2), dtype=float), x2.shape)[..., 0]
        lphi = phi.dt(t, x1) + 0.5 * sv * sv * phi.dxx(t, x1) + bv * phi.dx(t, x1)
        z = np.asarray(z, dtype=float)
        shift = sv * phi.dx(t, x1)
        zz = z + (shift[..., None] if z.ndim else shift)
        return lphi + np.asarray(g(t, x2, np.asarray(y, dtype=float) + phi.value(t, x1), zz), dtype=float)

    return Generator(
        name="touch_probe",
        eval=ev,
        lipschitz_z=g.lipschitz_z,
        monotonicity_modulus=g.monotonicity_modulus,
        growth_bound=None,
        deterministic_in_t=g.deterministic_in_t,
        state_dependent=True,
    )


@dataclass(frozen=True)
class TouchReport:
    t: float
    x: float
    mode: str
    residual_direct: float
    residual_quotient: float
    quotient_se: float
    frac_stopped: float
    touch_margin: float  # worst stencil violation of the touching property


def viscosity_touch_check(
    problem: PDEProblem,
    u_source: Callable,
    phi: TestFunction,
    t: float,
    x: float,
    mode: str = "sub",
    eps: float = 0.025,
    config: ExperimentConfig | None = None,
    stencil_h: float = 0.05,
    stencil_k: float = 0.01,
    touch_tol: float = 1e-9,
    barrier: float = 1.0,
) -> TouchReport:
    """Residual of a touching test function, two ways.

    Validates that (t, x) is a local max (mode=sub) or min (mode=super) of
    u - phi over a 5x5 space-time stencil, then evaluates the PDE residual
    of phi at (t, x) directly from its analytic derivatives and, separately,
    as the difference quotient of the compensated generator along the
    simulated diffusion.  Sign conventions: a subsolution touching point
    must give residual >= 0 up to tolerance.
    """
    if mode not in ("sub", "super"):
        raise ValidationError(f"mode must be 'sub' or 'super', got {mode!r}")
    if config is None:
        config = ExperimentConfig(seed=0, n_paths=20_000, n_steps=50)

    center = u_source(t, x) - float(phi.value(t, np.asarray(x)))
    worst = -np.inf
    for dt_off in (-2, -1, 0, 1, 2):
        for dx_off in (-2, -1, 0, 1, 2):
            tt = t + dt_off * stencil_k
            xx = x + dx_off * stencil_h
            if not (0.0 <= tt <= problem.T and problem.x_lo <= xx <= problem.x_hi):
                continue
            s = u_source(tt, xx) - float(phi.value(tt, np.asarray(xx)))
            gap = s - center if mode == "sub" else center - s
            worst = max(worst, gap)
    if worst > touch_tol:
        raise ValidationError(
            f"(t={t}, x={x}) is not a local {'max' if mode == 'sub' else 'min'} "
            f"of u - phi on the stencil (violation {worst:.3e})"
        )

    x_arr = np.asarray(x, dtype=float)
    xs2 = x_arr.reshape(1, 1)
    bv = float(np.broadcast_to(np.asarray(problem.drift(t, xs2), dtype=float), (1, 1))[0, 0])
    sv = float(np.broadcast_to(np.asarray(problem.sigma(t, xs2), dtype=float), (1, 1))[0, 0])
    u_tx = u_source(t, x)
    z_dir = sv * float(phi.dx(t, x_arr))
    direct = (
        float(phi.dt(t, x_arr))
        + 0.5 * sv * sv * float(phi.dxx(t, x_arr))
        + bv * float(phi.dx(t, x_arr))
        + float(np.asarray(problem.generator(t, xs2, np.array([u_tx]), np.array([[z_dir]])), dtype=float)[0])
    )

    G = proof_generator(problem, phi)
    grid = TimeGrid(t, t + eps, config.n_steps)
    batch = sample_brownian(grid, config.n_paths, 1, config.seed)
    fw = euler_maruyama(grid, problem.drift, problem.sigma, x, batch)
    stop = stopping_indices(batch, G, grid, x_path=fw.states, barrier=barrier)
    frac_stopped = float(np.mean(stop < config.n_steps))
    if frac_stopped > 0.01:
        warnings.warn(
            f"stopping index binds on {100 * frac_stopped:.2f}% of paths in touch check",
            RuntimeWarning,
            stacklevel=2,
        )
    zero = np.zeros(config.n_paths)
    prob = BSDEProblem(
        generator=G, t_start=t, t_end=t + eps, dimension_d=1, terminal=lambda s: zero
    )
    sol = solve_bsde(prob, fw, batch, config, stop_indices=stop)
    raw = _telescoped(G, grid, fw.states, sol, stop) / eps
    quotient = float(sol.Y[:, 0].mean()) / eps
    se = float(raw.std(ddof=1) / np.sqrt(config.n_paths)) if config.n_paths > 1 else 0.0

    return TouchReport(
        t=float(t),
        x=float(x),
        mode=mode,
        residual_direct=direct,
        residual_quotient=quotient,
        quotient_se=se,
        frac_stopped=frac_stopped,
        touch_margin=float(worst),
    )


# Built-in problems used by the CLI and the acceptance suite.

def _const(v):
    return lambda t, x: v


def heat_cos_problem(T: float = 1.0, half_width: float = 4 * math.pi) -> PDEProblem:
    """Pure heat equation with cosine terminal data; u(t,x) = e^{-(T-t)/2} cos x."""
    from .core import builtin_generator

    return PDEProblem(
        drift=_const(0.0),
        sigma=_const(1.0),
        generator=builtin_generator("linear"),
        phi=np.cos,
        growth_L=2.0,
        growth_p=1.0,
        T=T,
        x_lo=-half_width,
        x_hi=half_width,
    )


def semilinear_cos_problem(T: float = 1.0, half_width: float = 4 * math.pi) -> PDEProblem:
    """Heat equation with reaction g(u) = -u; u(t,x) = e^{-3(T-t)/2} cos x."""
    from .core import builtin_generator

    return PDEProblem(
        drift=_const(0.0),
        sigma=_const(1.0),
        generator=builtin_generator("negative_exponential"),
        phi=np.cos,
        growth_L=2.0,
        growth_p=1.0,
        T=T,
        x_lo=-half_width,
        x_hi=half_width,
    )


def affine_problem(c0: float, c1: float, T: float = 1.0, half_width: float = 6.0) -> PDEProblem:
    """phi(x) = c0 + c1*x with no reaction: u(t, x) = c0 + c1*x for all t."""
    from .core import builtin_generator

    return PDEProblem(
        drift=_const(0.0),
        sigma=_const(1.0),
        generator=builtin_generator("linear"),
        phi=lambda x: c0 + c1 * np.asarray(x, dtype=float),
        growth_L=max(abs(c0), abs(c1)) + 1.0,
        growth_p=1.0,
        T=T,
        x_lo=-half_width,
        x_hi=half_width,
    )


def square_problem(T: float = 1.0, half_width: float = 6.0) -> PDEProblem:
    """phi(x) = x^2 with no reaction: u(t, x) = x^2 + (T - t)."""
    from .core import builtin_generator

    return PDEProblem(
        drift=_const(0.0),
        sigma=_const(1.0),
        generator=builtin_generator("linear"),
        phi=lambda x: np.asarray(x, dtype=float) ** 2,
        growth_L=2.0,
        growth_p=2.0,
        T=T,
        x_lo=-half_width,
        x_hi=half_width,
    )


def heat_cos_solution(T: float = 1.0) -> TestFunction:
    """Exact solution of heat_cos_problem as a test function."""
    def val(t, x):
        return math.exp(-0.5 * (T - t)) * np.cos(np.asarray(x, dtype=float))

    def d_t(t, x):
        return 0.5 * math.exp(-0.5 * (T - t)) * np.cos(np.asarray(x, dtype=float))

    def d_x(t, x):
        return -math.exp(-0.5 * (T - t)) * np.sin(np.asarray(x, dtype=float))

    def d_xx(t, x):
        return -math.exp(-0.5 * (T - t)) * np.cos(np.asarray(x, dtype=float))

    return TestFunction(value=val, dt=d_t, dx=d_x, dxx=d_xx)


def semilinear_cos_solution(T: float = 1.0) -> TestFunction:
    """Exact solution of semilinear_cos_problem as a test function."""
    def val(t, x):
        return math.exp(-1.5 * (T - t)) * np.cos(np.asarray(x, dtype=float))

    def d_t(t, x):
        return 1.5 * math.exp(-1.5 * (T - t)) * np.cos(np.asarray(x, dtype=float))

    def d_x(t, x):
        return -math.exp(-1.5 * (T - t)) * np.sin(np.asarray(x, dtype=float))

    def d_xx(t, x):
        return -math.exp(-1.5 * (T - t)) * np.cos(np.asarray(x, dtype=float))

    return TestFunction(value=val, dt=d_t, dx=d_x, dxx=d_xx)
