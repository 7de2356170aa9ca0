"""Core types: generators, problems, experiment configuration.

A generator is the driver g(t, x, y, z) of a scalar backward equation.  All
randomness enters through the explicit state argument x (typically the value
of the driving Brownian motion or of a forward diffusion), so evaluation is a
pure function and safe to call concurrently.  Evaluations broadcast over a
leading batch axis: t is a float, x has shape (..., n), y has shape (...),
z has shape (..., d), and the result has shape (...).  For d == 1, z may be
passed as a bare scalar.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

# Exponent cap for the stress generator; exceeding it is loudly flagged
# rather than silently saturating.
EXP_CLAMP = 50.0


def _norm_last(a) -> np.ndarray:
    """Euclidean norm over the last axis; plain abs for scalars."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return np.abs(a)
    return np.sqrt(np.sum(a * a, axis=-1))


def h_entropy(u, delta: float):
    """Entropy-type modulus: -u*ln(u) on [0, delta], linear above.

    The linear branch has slope (-ln(delta) - 1), the one-sided derivative at
    delta, so the function is concave, nondecreasing and C^1 away from 0.
    Defined for u >= 0 only; h(0) = 0.
    """
    delta = float(delta)
    if not 0.0 < delta < 1.0 / math.e:
        raise ValidationError(f"delta must lie in (0, 1/e), got {delta}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValidationError("h_entropy is defined for u >= 0")
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.empty_like(u)
    low = u <= delta
    with np.errstate(divide="ignore", invalid="ignore"):
        out[low] = np.where(u[low] > 0.0, -u[low] * np.log(u[low]), 0.0)
    slope = -math.log(delta) - 1.0
    h_delta = -delta * math.log(delta)
    out[~low] = slope * (u[~low] - delta) + h_delta
    return float(out[0]) if scalar else out


def q_trunc(y, alpha: float):
    """Radial truncation alpha*y/(|y| v alpha); maps everything to 0 if alpha == 0."""
    alpha = float(alpha)
    if alpha < 0:
        raise ValidationError(f"truncation radius must be >= 0, got {alpha}")
    y = np.asarray(y, dtype=float)
    if alpha == 0.0:
        return 0.0 if y.ndim == 0 else np.zeros_like(y)
    out = alpha * y / np.maximum(np.abs(y), alpha)
    return float(out) if y.ndim == 0 else out


@dataclass(frozen=True)
class Generator:
    """Driver of a scalar backward equation, with declared regularity metadata.

    Attributes
    ----------
    name : str
        Identifier used in reports and CSV manifests.
    eval : callable
        g(t, x, y, z) -> array, broadcasting over a leading batch axis.
    lipschitz_z : float
        Constant lambda with |g(t,x,y,z1) - g(t,x,y,z2)| <= lambda*|z1 - z2|.
    monotonicity_modulus : callable or None
        rho with (y1-y2)*(g(..,y1,z) - g(..,y2,z)) <= rho(|y1-y2|^2).  The
        Osgood property of rho (divergent integral of 1/rho at 0+) is a
        documentation-level contract; only the displayed inequality is
        checked numerically.
    growth_bound : callable or None
        psi(alpha, t) dominating sup_{|y|<=alpha} |g(t,x,y,0) - g(t,x,0,0)|
        uniformly in x.  Omitted when no x-uniform bound exists; consumers
        then fall back to an empirical sup over a y-grid.
    deterministic_in_t : bool
        Whether t |-> g(t,x,y,z) is a deterministic continuous map for fixed
        (x, y, z).  True for every built-in.
    state_dependent : bool
        Whether eval actually reads x.
    """

    name: str
    eval: Callable
    lipschitz_z: float
    monotonicity_modulus: Callable | None = None
    growth_bound: Callable | None = None
    deterministic_in_t: bool = True
    state_dependent: bool = False

    def __call__(self, t, x, y, z):
        return self.eval(t, x, y, z)

    @property
    def deterministic(self) -> bool:
        """True when the generator carries no randomness at all."""
        return self.deterministic_in_t and not self.state_dependent


def _linear_generator(a: float, b, c: float) -> Generator:
    a = float(a)
    c = float(c)
    b = np.atleast_1d(np.asarray(b, dtype=float))

    def ev(t, x, y, z):
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            if b.size == 1:
                zb = z * b[0]
            elif float(z) == 0.0:
                zb = 0.0
            else:
                raise ValidationError("scalar z is only valid for d == 1")
        else:
            zb = z @ b
        return a * np.asarray(y, dtype=float) + zb + c

    return Generator(
        name="linear",
        eval=ev,
        lipschitz_z=float(np.linalg.norm(b)),
        monotonicity_modulus=lambda u: abs(a) * np.asarray(u, dtype=float),
        growth_bound=lambda alpha, t: abs(a) * float(alpha),
        deterministic_in_t=True,
        state_dependent=False,
    )


def _z_abs_generator(scale: float) -> Generator:
    scale = float(scale)

    def ev(t, x, y, z):
        return scale * _norm_last(z) + 0.0 * np.asarray(y, dtype=float)

    return Generator(
        name="z_abs",
        eval=ev,
        lipschitz_z=abs(scale),
        monotonicity_modulus=lambda u: np.asarray(u, dtype=float),
        growth_bound=lambda alpha, t: 0.0,
        deterministic_in_t=True,
        state_dependent=False,
    )


def _stress_generator(delta: float) -> Generator:
    # -exp(y|x|) + h(|y|) + |z|: continuous, non-Lipschitz in y at 0,
    # 1-Lipschitz in z, monotone up to the entropy modulus.
    delta = float(delta)
    if not 0.0 < delta < 1.0 / math.e:
        raise ValidationError(f"delta must lie in (0, 1/e), got {delta}")

    def ev(t, x, y, z):
        y = np.asarray(y, dtype=float)
        expo = y * _norm_last(x)
        clipped = np.abs(expo) > EXP_CLAMP
        if np.any(clipped):
            warnings.warn(
                f"stress generator exponent clamped to +-{EXP_CLAMP} on "
                f"{int(np.count_nonzero(clipped))} evaluation(s)",
                RuntimeWarning,
                stacklevel=2,
            )
            expo = np.clip(expo, -EXP_CLAMP, EXP_CLAMP)
        return -np.exp(expo) + h_entropy(np.abs(y), delta) + _norm_last(z)

    def modulus(u):
        # The entropy modulus itself bounds only |h(|y1|)-h(|y2|)|; the
        # product with |y1-y2| needs rho(u) = sqrt(u)*h(sqrt(u)), which is
        # concave, nondecreasing, vanishes at 0 and keeps the divergent
        # 1/rho integral.
        u = np.asarray(u, dtype=float)
        r = np.sqrt(u)
        return r * h_entropy(r, delta)

    return Generator(
        name="stress",
        eval=ev,
        lipschitz_z=1.0,
        monotonicity_modulus=modulus,
        growth_bound=None,
        deterministic_in_t=True,
        state_dependent=True,
    )


def _negative_exponential_generator() -> Generator:
    def ev(t, x, y, z):
        return -np.asarray(y, dtype=float)

    return Generator(
        name="negative_exponential",
        eval=ev,
        lipschitz_z=0.0,
        monotonicity_modulus=lambda u: 0.0 * np.asarray(u, dtype=float),
        growth_bound=lambda alpha, t: float(alpha),
        deterministic_in_t=True,
        state_dependent=False,
    )


def builtin_generator(name: str, **params) -> Generator:
    """Construct one of the built-in generators by name.

    linear(a, b, c)        a*y + <b, z> + c
    z_abs(scale)           scale*|z|
    stress(delta)          -exp(y|x|) + h(|y|) + |z|, h the entropy modulus
    negative_exponential   -y
    """
    if name == "linear":
        a = params.pop("a", 0.0)
        b = params.pop("b", 0.0)
        c = params.pop("c", 0.0)
        _reject_leftover(name, params)
        return _linear_generator(a, b, c)
    if name == "z_abs":
        scale = params.pop("scale", 1.0)
        _reject_leftover(name, params)
        return _z_abs_generator(scale)
    if name == "stress":
        if "delta" not in params:
            raise ValidationError("stress generator requires a delta parameter")
        delta = params.pop("delta")
        _reject_leftover(name, params)
        return _stress_generator(delta)
    if name == "negative_exponential":
        _reject_leftover(name, params)
        return _negative_exponential_generator()
    raise ValidationError(f"unknown generator name {name!r}")


def _reject_leftover(name, params):
    if params:
        raise ValidationError(f"unexpected parameter(s) for {name}: {sorted(params)}")


def check_generator_metadata(
    g: Generator,
    seed: int = 0,
    n_samples: int = 10_000,
    slack: float = 1e-10,
    state_dim: int = 1,
    z_dim: int = 1,
) -> None:
    """Confirm declared metadata on randomized tuples; raise with a witness.

    Samples (t, x, y, z) tuples and checks the z-Lipschitz constant, the
    monotonicity inequality against the declared modulus, and (if present)
    the growth bound.  Raises ValidationError carrying the first offending
    tuple.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, n_samples)
    x = rng.uniform(-3.0, 3.0, (n_samples, state_dim))
    y1 = rng.uniform(-3.0, 3.0, n_samples)
    y2 = rng.uniform(-3.0, 3.0, n_samples)
    z1 = rng.uniform(-3.0, 3.0, (n_samples, z_dim))
    z2 = rng.uniform(-3.0, 3.0, (n_samples, z_dim))

    # evaluations are vectorized over the batch but t is scalar per the
    # signature, so bucket by a few shared times
    for k in range(0, n_samples, 2000):
        sl = slice(k, min(k + 2000, n_samples))
        tk = float(t[sl].mean())
        xa, ya, yb, za, zb = x[sl], y1[sl], y2[sl], z1[sl], z2[sl]

        lhs = np.abs(g(tk, xa, ya, za) - g(tk, xa, ya, zb))
        bound = g.lipschitz_z * _norm_last(za - zb)
        bad = lhs > bound + slack
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValidationError(
                f"{g.name}: z-Lipschitz violated at t={tk}, x={xa[i]}, "
                f"y={ya[i]}, z1={za[i]}, z2={zb[i]}: "
                f"|dg|={lhs[i]:.6e} > {bound[i]:.6e}"
            )

        if g.monotonicity_modulus is not None:
            dg = g(tk, xa, ya, za) - g(tk, xa, yb, za)
            lhs = (ya - yb) * dg
            bound = np.asarray(g.monotonicity_modulus((ya - yb) ** 2), dtype=float)
            bad = lhs > bound + slack
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValidationError(
                    f"{g.name}: monotonicity modulus violated at t={tk}, "
                    f"x={xa[i]}, y1={ya[i]}, y2={yb[i]}, z={za[i]}: "
                    f"lhs={lhs[i]:.6e} > rho={np.atleast_1d(bound)[i]:.6e}"
                )

        if g.growth_bound is not None:
            alpha = 3.0
            z0 = np.zeros_like(za)
            lhs = np.abs(g(tk, xa, ya, z0) - g(tk, xa, np.zeros_like(ya), z0))
            bound = g.growth_bound(alpha, tk)
            bad = lhs > bound + slack
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValidationError(
                    f"{g.name}: growth bound violated at t={tk}, x={xa[i]}, "
                    f"y={ya[i]}: {lhs[i]:.6e} > psi={bound:.6e}"
                )


@dataclass(frozen=True)
class BSDEProblem:
    """A scalar backward problem driven by a d-dimensional Brownian motion.

    terminal maps the full discrete forward path, shape (M, N+1, n), to the
    terminal values, shape (M,).  Path functionals are therefore allowed,
    not just functions of the final state.
    """

    generator: Generator
    t_start: float
    t_end: float
    dimension_d: int
    terminal: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValidationError(
                f"need t_start < t_end, got [{self.t_start}, {self.t_end}]"
            )
        if self.dimension_d < 1:
            raise ValidationError(f"dimension_d must be >= 1, got {self.dimension_d}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs shared by the Monte Carlo experiments."""

    seed: int
    n_paths: int
    n_steps: int
    basis_degree: int = 3
    picard_max: int = 50
    picard_tol: float = 1e-10
    p_norms: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValidationError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.n_steps < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.basis_degree < 0:
            raise ValidationError(f"basis_degree must be >= 0, got {self.basis_degree}")
        if self.picard_max < 1:
            raise ValidationError(f"picard_max must be >= 1, got {self.picard_max}")
        if not self.picard_tol > 0:
            raise ValidationError(f"picard_tol must be > 0, got {self.picard_tol}")
        ps = tuple(self.p_norms)
        if not ps or any(p not in (1, 2) for p in ps):
            raise ValidationError(f"p_norms must be a nonempty subset of (1, 2), got {ps}")
        object.__setattr__(self, "p_norms", ps)
