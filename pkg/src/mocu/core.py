"""Mean objective cost of uncertainty for one or several objectives.

An uncertainty class is a prior-weighted collection of models. An operator
class is either a finite list of candidate operators or a pair of analytic
hooks returning the model-specific and the robust minimizer. Each objective
is a cost procedure ``cost(model, operator) -> float``; a weight vector on the
simplex turns them into one combined cost.

All expectations are reduced in index order with exactly rounded summation
(:func:`math.fsum`), so results do not depend on evaluation schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import EvaluationError, InvalidArgumentError

WEIGHT_TOL = 1e-12
DEFAULT_SEED = 20230517

__all__ = [
    "WEIGHT_TOL",
    "DEFAULT_SEED",
    "as_weight_vector",
    "unit_vector",
    "FiniteUncertaintyClass",
    "SampledUncertaintyClass",
    "FiniteOperatorClass",
    "AnalyticOperatorClass",
    "CostFunctionSet",
    "PointMass",
    "UniformGrid2",
    "FlatDirichlet",
    "WeightedGrid",
    "default_weight_distribution",
    "MocuReport",
    "combined_cost",
    "optimal_operator",
    "robust_operator",
    "mocu_at_lambda",
    "single_objective_mocu",
    "sample_weight",
    "multi_objective_mocu",
]


# ---------------------------------------------------------------------------
# weight vectors


def as_weight_vector(weights, n: int | None = None) -> np.ndarray:
    """Validate ``weights`` as a point of the probability simplex.

    Raises
    ------
    InvalidArgumentError
        On wrong arity, negative or non-finite entries, or a sum that is not 1
        within ``WEIGHT_TOL``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidArgumentError(f"weight vector must be a nonempty 1-D sequence, got shape {w.shape}")
    if n is not None and w.size != n:
        raise InvalidArgumentError(f"weight vector has {w.size} entries but there are {n} objectives")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgumentError(f"weights must be finite and nonnegative: {w.tolist()}")
    if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
        raise InvalidArgumentError(f"weights must sum to 1, got {math.fsum(w)!r}")
    return w


def unit_vector(k: int, n: int) -> np.ndarray:
    if not 0 <= k < n:
        raise InvalidArgumentError(f"objective index {k} out of range for {n} objectives")
    e = np.zeros(n)
    e[k] = 1.0
    return e


def _combine(values: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # Exactly rounded sum of lam_i * xi_i over the last axis. For n <= 2 plain
    # addition already is exactly rounded, so scalar and batched paths agree bitwise.
    terms = np.asarray(values, dtype=float) * lam
    n = terms.shape[-1]
    if n == 1:
        return terms[..., 0]
    if n == 2:
        return terms[..., 0] + terms[..., 1]
    flat = terms.reshape(-1, n)
    return np.array([math.fsum(row) for row in flat]).reshape(terms.shape[:-1])


def _expectation(weights: np.ndarray, values: np.ndarray):
    """Prior-weighted sum along axis 0, exactly rounded per column."""
    prod = weights.reshape((-1,) + (1,) * (values.ndim - 1)) * values
    if prod.ndim == 1:
        return math.fsum(prod)
    flat = prod.reshape(prod.shape[0], -1)
    return np.array([math.fsum(col) for col in flat.T]).reshape(prod.shape[1:])


# ---------------------------------------------------------------------------
# uncertainty classes


@dataclass(frozen=True)
class FiniteUncertaintyClass:
    """Finite set of models with prior probabilities ``weights``.

    ``models`` may be any indexable sequence, including a 2-D numpy array whose
    rows are parameter vectors.
    """

    models: Sequence[Any]
    weights: np.ndarray

    def __post_init__(self):
        if len(self.models) == 0:
            raise InvalidArgumentError("uncertainty class must contain at least one model")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.models),):
            raise InvalidArgumentError(f"{len(self.models)} models but weights have shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgumentError("model weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise InvalidArgumentError(f"model weights must sum to 1, got {math.fsum(w)!r}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, models) -> "FiniteUncertaintyClass":
        m = len(models)
        if m == 0:
            raise InvalidArgumentError("uncertainty class must contain at least one model")
        return cls(models, np.full(m, 1.0 / m))

    def __len__(self) -> int:
        return len(self.models)

    def realize(self, rng=None) -> "FiniteUncertaintyClass":
        return self


@dataclass(frozen=True)
class SampledUncertaintyClass:
    """Continuous uncertainty class represented by a sampler.

    ``sampler(rng, count)`` must return ``count`` models as an indexable
    sequence. A single sample set is drawn per MOCU evaluation and shared by
    every weight vector and operator.
    """

    sampler: Callable[[np.random.Generator, int], Sequence[Any]]
    sample_count: int

    def __post_init__(self):
        if int(self.sample_count) < 1:
            raise InvalidArgumentError("sample_count must be at least 1")

    def realize(self, rng: np.random.Generator) -> FiniteUncertaintyClass:
        models = self.sampler(rng, int(self.sample_count))
        if len(models) != self.sample_count:
            raise InvalidArgumentError(f"sampler returned {len(models)} models, expected {self.sample_count}")
        return FiniteUncertaintyClass.uniform(models)


# ---------------------------------------------------------------------------
# operator classes and costs


@dataclass(frozen=True)
class FiniteOperatorClass:
    operators: Sequence[Any]

    def __post_init__(self):
        if len(self.operators) == 0:
            raise InvalidArgumentError("operator class must contain at least one operator")


@dataclass(frozen=True)
class AnalyticOperatorClass:
    """Operator class searched through closed-form hooks.

    Parameters
    ----------
    minimizer : callable
        ``minimizer(model, lam) -> operator`` minimizing the combined cost of one model.
    robust_minimizer : callable
        ``robust_minimizer(finite_class, lam) -> operator`` minimizing the
        prior-expected combined cost.
    optimal_costs : callable, optional
        Batched shortcut ``optimal_costs(models, lam) -> array`` giving the
        minimal combined cost of every model. Must agree with ``minimizer``.
    """

    minimizer: Callable[[Any, np.ndarray], Any]
    robust_minimizer: Callable[[FiniteUncertaintyClass, np.ndarray], Any]
    optimal_costs: Callable[[Sequence[Any], np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class CostFunctionSet:
    """``n`` cost procedures ``cost(model, operator) -> float``.

    ``joint(model, operator)`` may return all ``n`` costs at once and
    ``batch(models, operator)`` an ``(len(models), n)`` array; both are
    optional fast paths that must agree with ``costs``. Costs are assumed pure.
    """

    costs: Sequence[Callable[[Any, Any], float]]
    joint: Callable[[Any, Any], Sequence[float]] | None = None
    batch: Callable[[Sequence[Any], Any], np.ndarray] | None = None

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if len(self.costs) < 1:
            raise InvalidArgumentError("at least one cost function is required")

    @property
    def n(self) -> int:
        return len(self.costs)

    def evaluate(self, model, operator) -> np.ndarray:
        if self.joint is not None:
            values = np.asarray(self.joint(model, operator), dtype=float)
        else:
            values = np.array([float(c(model, operator)) for c in self.costs])
        _check_costs(values, self.n)
        return values

    def evaluate_many(self, models, operator) -> np.ndarray:
        if self.batch is not None:
            values = np.asarray(self.batch(models, operator), dtype=float)
            _check_costs(values, self.n)
            return values
        return np.array([self.evaluate(m, operator) for m in models]).reshape(len(models), self.n)


def _check_costs(values: np.ndarray, n: int) -> None:
    if values.shape[-1:] != (n,):
        raise EvaluationError(f"expected {n} cost values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise EvaluationError(f"cost procedure returned a non-finite value: {values}")
    if np.any(values < 0):
        raise EvaluationError(f"cost procedure returned a negative value: {values}")


# ---------------------------------------------------------------------------
# weight distributions


@dataclass(frozen=True)
class PointMass:
    weights: tuple[float, ...]
    method = "point-mass"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(as_weight_vector(self.weights).tolist()))

    @property
    def n(self) -> int:
        return len(self.weights)

    def nodes(self, rng=None):
        return np.array([self.weights]), np.ones(1)


@dataclass(frozen=True)
class UniformGrid2:
    """Uniform p(lambda) on [0, 1] for two objectives, integrated by the
    composite trapezoid rule on ``grid_points`` equispaced nodes (endpoints
    included with half weight)."""

    grid_points: int = 101
    method = "trapezoid"
    n = 2

    def __post_init__(self):
        if int(self.grid_points) < 2:
            raise InvalidArgumentError("UniformGrid2 needs at least 2 grid points")

    def nodes(self, rng=None):
        m = int(self.grid_points) - 1
        lam = np.linspace(0.0, 1.0, m + 1)
        lam[0], lam[-1] = 0.0, 1.0
        probs = np.full(m + 1, 1.0 / m)
        probs[0] = probs[-1] = 0.5 / m
        return np.column_stack([lam, 1.0 - lam]), probs


@dataclass(frozen=True)
class FlatDirichlet:
    """Uniform distribution on the (n-1)-simplex, integrated by Monte Carlo."""

    n: int
    sample_count: int = 1000
    method = "monte-carlo"

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidArgumentError("FlatDirichlet needs n >= 1")
        if int(self.sample_count) < 1:
            raise InvalidArgumentError("FlatDirichlet sample_count must be at least 1")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        e = rng.standard_exponential((size, int(self.n)))
        return e / e.sum(axis=1, keepdims=True)

    def nodes(self, rng: np.random.Generator):
        count = int(self.sample_count)
        return self.draw(rng, count), np.full(count, 1.0 / count)


@dataclass(frozen=True)
class WeightedGrid:
    weights: np.ndarray
    probabilities: np.ndarray
    method = "weighted-grid"

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (w.shape[0],):
            raise InvalidArgumentError("one probability per grid weight vector is required")
        for row in w:
            as_weight_vector(row)
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > WEIGHT_TOL:
            raise InvalidArgumentError("grid probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "probabilities", p)

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    def nodes(self, rng=None):
        return self.weights.copy(), self.probabilities.copy()


def default_weight_distribution(n: int):
    """Trapezoid grid with 100 intervals for two objectives, else 1000 flat Dirichlet draws."""
    if n == 2:
        return UniformGrid2(101)
    return FlatDirichlet(n, 1000)


def sample_weight(dist, rng: np.random.Generator) -> np.ndarray:
    """Draw one weight vector from ``dist``.

    Grid distributions draw a node according to its probability; use
    ``dist.nodes()`` to enumerate the grid in order.
    """
    if isinstance(dist, PointMass):
        return np.array(dist.weights)
    if isinstance(dist, FlatDirichlet):
        return dist.draw(rng, 1)[0]
    lams, probs = dist.nodes(rng)
    return lams[rng.choice(len(probs), p=probs)]


# ---------------------------------------------------------------------------
# evaluation


def _resolve_rng(rng):
    if rng is None:
        return np.random.default_rng(DEFAULT_SEED), DEFAULT_SEED
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(int(rng)), int(rng)


def combined_cost(model, operator, lam, costs: CostFunctionSet) -> float:
    lam = as_weight_vector(lam, costs.n)
    return float(_combine(costs.evaluate(model, operator), lam))


def optimal_operator(model, lam, operators, costs: CostFunctionSet):
    """Model-specific optimal operator and its combined cost.

    Finite classes are searched exhaustively; ties go to the lowest index.
    """
    lam = as_weight_vector(lam, costs.n)
    if isinstance(operators, FiniteOperatorClass):
        values = _combine(np.array([costs.evaluate(model, op) for op in operators.operators]), lam)
        i = int(np.argmin(values))
        return operators.operators[i], float(values[i])
    op = operators.minimizer(model, lam)
    return op, combined_cost(model, op, lam, costs)


class _Problem:
    """A realized uncertainty class bound to operators and costs.

    For finite operator classes the whole (model, operator, objective) cost
    tensor is evaluated once and reused for every weight vector.
    """

    def __init__(self, theta: FiniteUncertaintyClass, operators, costs: CostFunctionSet):
        self.theta = theta
        self.operators = operators
        self.costs = costs
        self._tensor = None

    @property
    def tensor(self) -> np.ndarray:
        if self._tensor is None:
            ops = self.operators.operators
            self._tensor = np.array(
                [[self.costs.evaluate(m, op) for op in ops] for m in self.theta.models]
            ).reshape(len(self.theta), len(ops), self.costs.n)
        return self._tensor

    def robust(self, lam):
        w = self.theta.weights
        if isinstance(self.operators, FiniteOperatorClass):
            expected = _expectation(w, _combine(self.tensor, lam))
            i = int(np.argmin(expected))
            return self.operators.operators[i], float(expected[i])
        op = self.operators.robust_minimizer(self.theta, lam)
        values = _combine(self.costs.evaluate_many(self.theta.models, op), lam)
        return op, float(_expectation(w, values))

    def eta(self, lam):
        """Raw MOCU at ``lam`` together with the robust operator."""
        w = self.theta.weights
        if isinstance(self.operators, FiniteOperatorClass):
            combined = _combine(self.tensor, lam)
            expected = _expectation(w, combined)
            i = int(np.argmin(expected))
            excess = combined[:, i] - combined.min(axis=1)
            return float(_expectation(w, excess)), self.operators.operators[i]
        op = self.operators.robust_minimizer(self.theta, lam)
        robust_values = _combine(self.costs.evaluate_many(self.theta.models, op), lam)
        if self.operators.optimal_costs is not None:
            best = np.asarray(self.operators.optimal_costs(self.theta.models, lam), dtype=float)
        else:
            best = np.array([optimal_operator(m, lam, self.operators, self.costs)[1] for m in self.theta.models])
        return float(_expectation(w, robust_values - best)), op


def robust_operator(theta, lam, operators, costs: CostFunctionSet, rng=None):
    """Operator minimizing the prior-expected combined cost, with that expected cost."""
    lam = as_weight_vector(lam, costs.n)
    gen, _ = _resolve_rng(rng)
    return _Problem(theta.realize(gen), operators, costs).robust(lam)


def mocu_at_lambda(theta, lam, operators, costs: CostFunctionSet, rng=None) -> float:
    """MOCU of the combined cost for a fixed weight vector.

    The returned value is not clamped; it is mathematically nonnegative and
    numerically at least ``-1e-12`` for well-behaved costs.
    """
    lam = as_weight_vector(lam, costs.n)
    gen, _ = _resolve_rng(rng)
    eta, _ = _Problem(theta.realize(gen), operators, costs).eta(lam)
    return eta


def single_objective_mocu(theta, k: int, operators, costs: CostFunctionSet, rng=None) -> float:
    """MOCU of objective ``k`` alone (0-based)."""
    return mocu_at_lambda(theta, unit_vector(k, costs.n), operators, costs, rng)


@dataclass
class MocuReport:
    eta_multi: float
    eta_at_lambda: list[tuple[tuple[float, ...], float]]
    robust_operators: list[tuple[tuple[float, ...], Any]]
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, encode_operator: Callable[[Any], Any] = repr) -> dict:
        return {
            "eta_multi": self.eta_multi,
            "eta_at_lambda": [{"lambda": list(lam), "eta": eta} for lam, eta in self.eta_at_lambda],
            "robust_operators": [
                {"lambda": list(lam), "operator": encode_operator(op)} for lam, op in self.robust_operators
            ],
            "diagnostics": self.diagnostics,
        }


def multi_objective_mocu(theta, dist, operators, costs: CostFunctionSet, rng=None) -> MocuReport:
    """Expected MOCU over the weight distribution ``dist``.

    ``rng`` may be a generator or an integer seed. A sampled uncertainty class
    is realized once, before the weight nodes are drawn, and the same model
    sample serves every node.
    """
    if dist.n != costs.n:
        raise InvalidArgumentError(f"weight distribution has arity {dist.n} but there are {costs.n} objectives")
    gen, seed = _resolve_rng(rng)
    realized = theta.realize(gen)
    problem = _Problem(realized, operators, costs)
    lams, probs = dist.nodes(gen)

    raw, etas, robust = [], [], []
    for lam in lams:
        lam = as_weight_vector(lam, costs.n)
        eta, op = problem.eta(lam)
        key = tuple(float(v) for v in lam)
        raw.append(eta)
        etas.append((key, max(eta, 0.0)))
        robust.append((key, op))
    raw_multi = math.fsum(np.asarray(probs) * np.asarray(raw))
    diagnostics = {
        "expectation": "monte-carlo" if isinstance(theta, SampledUncertaintyClass) else "enumeration",
        "integration": dist.method,
        "lambda_nodes": int(len(lams)),
        "theta_samples": len(realized),
        "seed": seed,
        "eta_multi_raw": raw_multi,
        "eta_at_lambda_raw": raw,
        "node_probabilities": [float(p) for p in probs],
    }
    return MocuReport(max(raw_multi, 0.0), etas, robust, diagnostics)
