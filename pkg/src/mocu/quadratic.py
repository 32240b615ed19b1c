"""Two-objective quadratic benchmark.

Each objective is ``f_i(x, y) = alpha_i (x - gamma_i)^2 + beta_i (y - delta_i)^2``
and operators are points ``(x, y)``. Because the combined cost is separable
and quadratic along each axis, both the model-specific and the robust
minimizers have closed forms, which keeps MOCU estimates free of inner
optimizer error.

Models are stored as 8-vectors ``(a1, b1, g1, d1, a2, b2, g2, d2)`` so that a
sampled uncertainty class is simply an ``(N, 8)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_SEED,
    AnalyticOperatorClass,
    CostFunctionSet,
    FiniteUncertaintyClass,
    SampledUncertaintyClass,
    UniformGrid2,
    multi_objective_mocu,
)
from .errors import InvalidArgumentError

A1, B1, G1, D1, A2, B2, G2, D2 = range(8)


@dataclass(frozen=True)
class QuadraticObjective:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta >= 0):
            raise InvalidArgumentError(f"curvatures must be nonnegative, got alpha={self.alpha}, beta={self.beta}")


@dataclass(frozen=True)
class QuadraticModel:
    objectives: tuple[QuadraticObjective, QuadraticObjective]

    def __post_init__(self):
        if len(self.objectives) != 2:
            raise InvalidArgumentError("a quadratic model has exactly two objectives")

    def to_array(self) -> np.ndarray:
        o1, o2 = self.objectives
        return np.array([o1.alpha, o1.beta, o1.gamma, o1.delta, o2.alpha, o2.beta, o2.gamma, o2.delta], dtype=float)

    @classmethod
    def from_array(cls, row) -> "QuadraticModel":
        r = [float(v) for v in row]
        return cls((QuadraticObjective(*r[0:4]), QuadraticObjective(*r[4:8])))


def _as_params(model) -> np.ndarray:
    if isinstance(model, QuadraticModel):
        return model.to_array()
    return np.asarray(model, dtype=float)


def eval_objective(obj: QuadraticObjective, x: float, y: float) -> float:
    return obj.alpha * (x - obj.gamma) ** 2 + obj.beta * (y - obj.delta) ** 2


def objective_values(params, x, y) -> np.ndarray:
    """Both objective values for one parameter vector or a batch of them."""
    p = np.asarray(params, dtype=float)
    f1 = p[..., A1] * (x - p[..., G1]) ** 2 + p[..., B1] * (y - p[..., D1]) ** 2
    f2 = p[..., A2] * (x - p[..., G2]) ** 2 + p[..., B2] * (y - p[..., D2]) ** 2
    return np.stack([f1, f2], axis=-1)


def _axis_minimizer(w1, c1, w2, c2):
    # Minimizer of w1 (t - c1)^2 + w2 (t - c2)^2; 0 when the axis is flat.
    denom = w1 + w2
    return (w1 * c1 + w2 * c2) / denom if denom > 0 else 0.0


def _axis_min_cost(w1, c1, w2, c2):
    denom = w1 + w2
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, w1 * w2 / safe * (c1 - c2) ** 2, 0.0)


def closed_form_optimum(model, lam: float) -> tuple[float, float, float]:
    """Minimizer ``(x, y)`` of ``lam f1 + (1 - lam) f2`` and the minimal cost."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidArgumentError(f"lambda must lie in [0, 1], got {lam}")
    p = _as_params(model)
    u, v = lam, 1.0 - lam
    x = _axis_minimizer(u * p[A1], p[G1], v * p[A2], p[G2])
    y = _axis_minimizer(u * p[B1], p[D1], v * p[B2], p[D2])
    f = objective_values(p, x, y)
    return float(x), float(y), float(u * f[0] + v * f[1])


def closed_form_robust(samples, lam: float, weights=None) -> tuple[float, float]:
    """Minimizer of the weighted sample-average combined cost.

    ``samples`` is an ``(N, 8)`` parameter array or a finite uncertainty class
    over such rows; ``weights`` default to the class prior or uniform.
    """
    if isinstance(samples, FiniteUncertaintyClass):
        weights = samples.weights if weights is None else weights
        samples = samples.models
    p = np.atleast_2d(np.asarray(samples, dtype=float))
    w = np.full(len(p), 1.0 / len(p)) if weights is None else np.asarray(weights, dtype=float)
    u, v = lam, 1.0 - lam

    def mean(col):
        return math.fsum(w * col)

    ax = u * mean(p[:, A1]) + v * mean(p[:, A2])
    ay = u * mean(p[:, B1]) + v * mean(p[:, B2])
    x = (u * mean(p[:, A1] * p[:, G1]) + v * mean(p[:, A2] * p[:, G2])) / ax if ax > 0 else 0.0
    y = (u * mean(p[:, B1] * p[:, D1]) + v * mean(p[:, B2] * p[:, D2])) / ay if ay > 0 else 0.0
    return float(x), float(y)


def optimal_costs(samples, lam: float) -> np.ndarray:
    """Per-model minimal combined cost, vectorized over rows of ``samples``."""
    p = np.atleast_2d(np.asarray(samples, dtype=float))
    u, v = lam, 1.0 - lam
    cx = _axis_min_cost(u * p[:, A1], p[:, G1], v * p[:, A2], p[:, G2])
    cy = _axis_min_cost(u * p[:, B1], p[:, D1], v * p[:, B2], p[:, D2])
    return cx + cy


def quadratic_costs() -> CostFunctionSet:
    return CostFunctionSet(
        costs=(
            lambda m, op: float(objective_values(_as_params(m), op[0], op[1])[0]),
            lambda m, op: float(objective_values(_as_params(m), op[0], op[1])[1]),
        ),
        joint=lambda m, op: objective_values(_as_params(m), op[0], op[1]),
        batch=lambda ms, op: objective_values(np.asarray(ms, dtype=float), op[0], op[1]),
    )


def quadratic_operators() -> AnalyticOperatorClass:
    """Closed-form operator class; weight vectors are ``(lam, 1 - lam)``."""
    return AnalyticOperatorClass(
        minimizer=lambda m, lam: closed_form_optimum(m, float(lam[0]))[:2],
        robust_minimizer=lambda cls, lam: closed_form_robust(cls, float(lam[0])),
        optimal_costs=lambda ms, lam: optimal_costs(ms, float(lam[0])),
    )


# ---------------------------------------------------------------------------
# benchmark cases


CASE_AXES = {1: ("c", "delta"), 2: ("d", "delta"), 3: ("c", "d")}


def case_sampler(case_id: int, c: float = 0.0, d: float = 0.0, delta: float = 0.0):
    """Sampler ``(rng, count) -> (count, 8)`` for one grid point of a case.

    Case 1: gamma2, delta2 ~ U[0, delta]; all curvatures equal ``c``.
    Case 2: all curvatures ~ U[0, delta]; gamma2 = delta2 = ``d``.
    Case 3: curvatures ~ U[0, c]; gamma2, delta2 ~ U[0, d].
    Objective 1 is always centered at the origin.
    """
    if case_id not in CASE_AXES:
        raise InvalidArgumentError(f"case_id must be 1, 2 or 3, got {case_id}")
    if min(c, d, delta) < 0:
        raise InvalidArgumentError("c, d and delta must be nonnegative")

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        p = np.zeros((count, 8))
        if case_id == 1:
            p[:, [A1, B1, A2, B2]] = c
            p[:, [G2, D2]] = rng.uniform(0.0, delta, (count, 2))
        elif case_id == 2:
            p[:, [A1, B1, A2, B2]] = rng.uniform(0.0, delta, (count, 4))
            p[:, [G2, D2]] = d
        else:
            p[:, [A1, B1, A2, B2]] = rng.uniform(0.0, c, (count, 4))
            p[:, [G2, D2]] = rng.uniform(0.0, d, (count, 2))
        return p

    return sample


@dataclass(frozen=True)
class CaseConfig:
    case_id: int
    c: tuple[float, ...] = (1.0,)
    d: tuple[float, ...] = (0.0,)
    delta: tuple[float, ...] = (1.0,)
    theta_samples: int = 10_000
    lambda_grid: int = 100
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.case_id not in CASE_AXES:
            raise InvalidArgumentError(f"case_id must be 1, 2 or 3, got {self.case_id}")
        for name in ("c", "d", "delta"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise InvalidArgumentError(f"grid {name!r} is empty")
            if min(values) < 0:
                raise InvalidArgumentError(f"grid {name!r} has negative entries")
            object.__setattr__(self, name, values)
        if self.theta_samples < 1:
            raise InvalidArgumentError("theta_samples must be at least 1")
        if self.lambda_grid < 1:
            raise InvalidArgumentError("lambda_grid must be at least 1 interval")

    def grid(self) -> list[dict]:
        first, second = CASE_AXES[self.case_id]
        fixed = {"c": self.c[0], "d": self.d[0], "delta": self.delta[0]}
        return [
            {**fixed, first: a, second: b}
            for a in getattr(self, first)
            for b in getattr(self, second)
        ]


def mocu_at_point(case_id: int, c: float, d: float, delta: float, theta_samples: int, lambda_grid: int, seed: int):
    theta = SampledUncertaintyClass(case_sampler(case_id, c=c, d=d, delta=delta), theta_samples)
    return multi_objective_mocu(
        theta, UniformGrid2(lambda_grid + 1), quadratic_operators(), quadratic_costs(), rng=seed
    )


def run_case(config: CaseConfig) -> list[dict]:
    """Two-objective MOCU over the case grid, one row per grid point.

    Rows carry the two grid coordinates of the case, ``eta_multi``, sample
    counts and the derived seed (``config.seed + grid index``).
    """
    first, second = CASE_AXES[config.case_id]
    rows = []
    for index, point in enumerate(config.grid()):
        seed = config.seed + index
        report = mocu_at_point(
            config.case_id, point["c"], point["d"], point["delta"], config.theta_samples, config.lambda_grid, seed
        )
        rows.append(
            {
                first: point[first],
                second: point[second],
                "eta_multi": report.eta_multi,
                "theta_samples": config.theta_samples,
                "lambda_grid": config.lambda_grid,
                "seed": seed,
            }
        )
    return rows


def parameter_measures(case_id: int, c: float = 0.0, d: float = 0.0, delta: float = 0.0) -> dict:
    """Differential entropy and total variance of the uncertain parameters.

    Both depend only on the widths of the uniform intervals, never on the
    fixed parameters, which is what makes them blind to the objective.
    """
    widths = {1: [delta] * 2, 2: [delta] * 4, 3: [c] * 4 + [d] * 2}[case_id]
    entropy = math.fsum(math.log(w) if w > 0 else -math.inf for w in widths)
    variance = math.fsum(w * w / 12.0 for w in widths)
    return {"param_entropy": entropy, "param_variance": variance}


def emit_g_curve(gamma1: float, gamma2: float, alpha1: float, alpha2: float, lambdas, xs) -> list[tuple[float, float, float]]:
    """Samples of ``g(x, lam) = lam a1 (x - g1)^2 + (1 - lam) a2 (x - g2)^2``."""
    xs = np.asarray(xs, dtype=float)
    rows = []
    for lam in lambdas:
        g = lam * alpha1 * (xs - gamma1) ** 2 + (1.0 - lam) * alpha2 * (xs - gamma2) ** 2
        rows.extend((float(lam), float(x), float(v)) for x, v in zip(xs, g))
    return rows
