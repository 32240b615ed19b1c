"""Robust structural intervention in the mammalian cell-cycle BNp.

Two objectives are scored for every (network, intervention) pair: the
steady-state mass of the undesirable states U (CycD, Rb and p27 all off) and
of the phenotypically constrained states P (Cdc20 on, outside U). Edges of
unknown sign generate a uniform uncertainty class over all sign assignments;
the operator class is the set of single-edge blocks.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import bnp
from .bnp import NO_INTERVENTION, GeneNetwork, Intervention, Sign, StateSet
from .core import (
    DEFAULT_SEED,
    CostFunctionSet,
    FiniteOperatorClass,
    FiniteUncertaintyClass,
    MocuReport,
    UniformGrid2,
    multi_objective_mocu,
)
from .errors import InvalidArgumentError, LoadError

CELL_CYCLE_GENES = ("CycD", "Rb", "p27", "E2F", "CycE", "CycA", "Cdc20", "Cdh1", "UbcH10", "CycB")
PERTURBATION = 0.01
DEFAULT_CAP = 12
MODEL_ASSUMPTIONS = (
    "majority vote: a gene whose expressed-regulator sign sum is zero keeps its value",
    "perturbation: genes flip independently with probability p; the Boolean update applies only when none flips",
)


def default_network_path() -> Path:
    return Path(str(resources.files("mocu").joinpath("data/mammalian_cell_cycle.json")))


@dataclass(frozen=True)
class CellCycleSpec:
    path: str | Path | None = None
    expected_genes: int = 10
    expected_edges: int = 35
    gene_order: tuple[str, ...] | None = CELL_CYCLE_GENES
    require_known_signs: bool = True


def load_network(spec: CellCycleSpec | None = None) -> GeneNetwork:
    """Load and validate a cell-cycle network definition.

    Raises
    ------
    LoadError
        With one diagnostic per violated constraint (schema, gene count and
        order, edge count, unknown signs).
    """
    spec = spec or CellCycleSpec()
    path = spec.path or default_network_path()
    network, _ = bnp.read_network_file(path)
    problems = []
    if network.n != spec.expected_genes:
        problems.append(f"expected {spec.expected_genes} genes, found {network.n}")
    if spec.gene_order is not None and network.genes != tuple(spec.gene_order):
        problems.append(f"gene order {list(network.genes)} differs from {list(spec.gene_order)}")
    if len(network.edges) != spec.expected_edges:
        problems.append(f"expected {spec.expected_edges} edges, found {len(network.edges)}")
    if spec.require_known_signs and network.has_unknown:
        problems.append("network file contains edges of unknown sign")
    if problems:
        raise LoadError(f"{path}: " + "; ".join(problems), problems)
    return network


def undesirable_states(n: int = 10) -> StateSet:
    """U: the first three genes (CycD, Rb, p27) all down."""
    if n < 3:
        raise InvalidArgumentError("the undesirable set needs at least 3 genes")
    return StateSet((_bit(n, 0) == 0) & (_bit(n, 1) == 0) & (_bit(n, 2) == 0), "U")


def phenotype_states(n: int = 10) -> StateSet:
    """P: the seventh gene (Cdc20) up, excluding U."""
    if n < 7:
        raise InvalidArgumentError("the phenotype set needs at least 7 genes")
    return StateSet((_bit(n, 6) == 1) & ~undesirable_states(n).mask, "P")


def _bit(n: int, i: int) -> np.ndarray:
    return (np.arange(1 << n) >> i) & 1


# ---------------------------------------------------------------------------
# costs


@dataclass(frozen=True)
class SolverConfig:
    p: float = PERTURBATION
    method: str = "reduced"
    tol: float = bnp.DEFAULT_TOL
    max_iter: int = bnp.DEFAULT_MAX_ITER


def _solve_table(table: np.ndarray, config: SolverConfig, masks: tuple[np.ndarray, ...]) -> tuple[float, ...]:
    ss = bnp.steady_state_from_table(table, config.p, config.method, config.tol, config.max_iter)
    return tuple(math.fsum(ss.pi[m]) for m in masks)


class CostCache:
    """Steady-state masses keyed by the truth-table digest of a network.

    Networks with identical dynamics share one solve. With ``enabled=False``
    every request solves from scratch.
    """

    def __init__(self, config: SolverConfig | None = None, sets: tuple[StateSet, ...] | None = None, enabled=True):
        self.config = config or SolverConfig()
        self.sets = sets
        self.enabled = enabled
        self.hits = 0
        self.solves = 0
        self._values: dict[str, tuple[float, ...]] = {}

    def _masks(self, n: int) -> tuple[np.ndarray, ...]:
        if self.sets is None:
            self.sets = (undesirable_states(n), phenotype_states(n))
        return tuple(s.mask for s in self.sets)

    def __len__(self) -> int:
        return len(self._values)

    def costs_for_table(self, table: np.ndarray) -> tuple[float, ...]:
        n = int(len(table)).bit_length() - 1
        if not self.enabled:
            self.solves += 1
            return _solve_table(table, self.config, self._masks(n))
        key = bnp.table_digest(table)
        value = self._values.get(key)
        if value is None:
            self.solves += 1
            value = _solve_table(table, self.config, self._masks(n))
            self._values[key] = value
        else:
            self.hits += 1
        return value

    def costs(self, network: GeneNetwork) -> tuple[float, ...]:
        return self.costs_for_table(bnp.truth_table(network))

    def prefill(self, networks: Iterable[GeneNetwork], workers: int = 1) -> int:
        """Solve every not-yet-cached network, in a process pool if ``workers > 1``.

        Returns the number of solves performed.
        """
        if not self.enabled:
            return 0
        pending: dict[str, np.ndarray] = {}
        n = None
        for net in networks:
            table = bnp.truth_table(net)
            n = net.n
            key = bnp.table_digest(table)
            if key not in self._values and key not in pending:
                pending[key] = table
        if not pending:
            return 0
        masks = self._masks(n)
        keys = list(pending)
        tables = [pending[k] for k in keys]
        if workers > 1 and len(tables) > 1:
            chunk = max(1, len(tables) // (4 * workers))
            with ProcessPoolExecutor(max_workers=workers) as pool:
                values = list(
                    pool.map(_solve_table, tables, itertools.repeat(self.config), itertools.repeat(masks), chunksize=chunk)
                )
        else:
            values = [_solve_table(t, self.config, masks) for t in tables]
        self._values.update(zip(keys, values))
        self.solves += len(keys)
        return len(keys)

    def stats(self) -> dict:
        return {"entries": len(self._values), "solves": self.solves, "hits": self.hits, "enabled": self.enabled}


def intervention_cost_pair(network: GeneNetwork, iv: Intervention, cache: CostCache | None = None) -> tuple[float, float]:
    """``(pi_U, pi_P)`` in the steady state of the intervened network."""
    if cache is None:
        cache = CostCache()
    u, p = cache.costs(bnp.apply_intervention(network, iv))
    return u, p


# ---------------------------------------------------------------------------
# uncertainty classes


@dataclass(frozen=True)
class NetworkUncertaintyClass:
    """All sign assignments of the ``unknown`` edges of ``base``, equally likely."""

    base: GeneNetwork
    unknown: tuple[int, ...] = ()

    def __post_init__(self):
        unknown = tuple(int(i) for i in self.unknown)
        if len(set(unknown)) != len(unknown):
            raise InvalidArgumentError("unknown edge indices must be distinct")
        if any(not 0 <= i < len(self.base.edges) for i in unknown):
            raise InvalidArgumentError("unknown edge index out of range")
        object.__setattr__(self, "unknown", unknown)

    @property
    def k(self) -> int:
        return len(self.unknown)

    def models(self) -> list[GeneNetwork]:
        signs = (Sign.ACTIVATING, Sign.SUPPRESSING)
        return [
            self.base.with_signs(dict(zip(self.unknown, combo)))
            for combo in itertools.product(signs, repeat=self.k)
        ]

    def uncertainty_class(self) -> FiniteUncertaintyClass:
        return FiniteUncertaintyClass.uniform(self.models())


def single_edge_interventions(network: GeneNetwork, allow_null: bool = False) -> list[Intervention]:
    ivs = [Intervention.block(i) for i in range(len(network.edges))]
    return [NO_INTERVENTION] + ivs if allow_null else ivs


def mocu_for_class(
    cls: NetworkUncertaintyClass,
    dist=None,
    cache: CostCache | None = None,
    allow_null: bool = False,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> MocuReport:
    """Multi-objective MOCU of ``cls`` with costs ``(pi_U, pi_P)``.

    ``dist`` defaults to the trapezoid rule with 100 intervals on the uniform
    weight distribution. Expectations over the class are exact.
    """
    if cls.k > cap:
        raise InvalidArgumentError(f"{cls.k} unknown edges exceed the enumeration cap of {cap}")
    if cache is None:
        cache = CostCache()
    dist = dist or UniformGrid2(101)
    models = cls.models()
    ivs = single_edge_interventions(cls.base, allow_null)
    applied = {(id(m), iv): bnp.apply_intervention(m, iv) for m in models for iv in ivs}
    cache.prefill(applied.values(), workers=workers)

    def joint(model, iv):
        net = applied.get((id(model), iv))
        return cache.costs(net if net is not None else bnp.apply_intervention(model, iv))

    costs = CostFunctionSet(
        costs=(lambda m, iv: joint(m, iv)[0], lambda m, iv: joint(m, iv)[1]),
        joint=joint,
    )
    report = multi_objective_mocu(FiniteUncertaintyClass.uniform(models), dist, FiniteOperatorClass(ivs), costs)
    report.diagnostics.update(
        {
            "unknown_edges": list(cls.unknown),
            "models": len(models),
            "interventions": len(ivs),
            "cache": cache.stats(),
            "solver": asdict(cache.config),
            "assumptions": list(MODEL_ASSUMPTIONS),
        }
    )
    return report


# ---------------------------------------------------------------------------
# experiment


def derive_seed(master: int, k: int, run: int) -> int:
    """64-bit seed of one run, independent of scheduling."""
    words = np.random.SeedSequence([int(master), int(k), int(run)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def sample_unknown_edges(n_edges: int, k: int, seed: int) -> tuple[int, ...]:
    rng = np.random.default_rng(seed)
    return tuple(sorted(int(i) for i in rng.choice(n_edges, size=k, replace=False)))


@dataclass(frozen=True)
class ExperimentConfig:
    k_values: tuple[int, ...] = tuple(range(1, 9))
    runs: int = 500
    lambda_grid: int = 100
    seed: int = DEFAULT_SEED
    workers: int = 1
    allow_null_intervention: bool = False
    method: str = "reduced"
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if not self.k_values:
            raise InvalidArgumentError("at least one k value is required")
        if self.runs < 1:
            raise InvalidArgumentError("runs must be at least 1")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be at least 1")
        if self.lambda_grid < 1:
            raise InvalidArgumentError("lambda_grid must be at least 1 interval")
        if self.method not in bnp.METHODS:
            raise InvalidArgumentError(f"unknown steady-state method {self.method!r}")


@dataclass(frozen=True)
class RunRecord:
    k: int
    run: int
    seed: int
    edges: tuple[int, ...]
    eta_multi: float


@dataclass(frozen=True)
class KStats:
    k: int
    runs: int
    min: float
    median: float
    mean: float
    std: float

    @property
    def mean_plus_std(self) -> float:
        return self.mean + self.std


def summarize(k: int, values) -> KStats:
    """Order statistics of one k; ``std`` is the population standard deviation."""
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / len(v)
    std = math.sqrt(math.fsum((v - mean) ** 2) / len(v))
    return KStats(k, len(v), float(v.min()), float(np.median(v)), mean, std)


@dataclass
class RunStats:
    config: ExperimentConfig
    records: list[RunRecord]
    summary: list[KStats]
    cache: dict = field(default_factory=dict)

    def values(self, k: int) -> np.ndarray:
        return np.array([r.eta_multi for r in self.records if r.k == k])


def _fingerprint(config: ExperimentConfig, network: GeneNetwork) -> dict:
    doc = asdict(config)
    doc.pop("workers")
    doc["network_digest"] = bnp.network_digest(network)
    doc["k_values"] = list(doc["k_values"])
    return doc


def _read_checkpoint(path: Path, fingerprint: dict) -> dict[tuple[int, int], RunRecord]:
    done: dict[tuple[int, int], RunRecord] = {}
    if not path.exists():
        return done
    with path.open() as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        return done
    header = json.loads(lines[0])
    if header.get("config") != fingerprint:
        raise InvalidArgumentError(f"checkpoint {path} was written for a different configuration")
    for line in lines[1:]:
        try:
            doc = json.loads(line)
        except json.JSONDecodeError:
            break  # torn final line from an interrupted write
        rec = RunRecord(doc["k"], doc["run"], doc["seed"], tuple(doc["edges"]), doc["eta_multi"])
        done[(rec.k, rec.run)] = rec
    return done


def _drop_torn_tail(path: Path) -> None:
    # An interrupted append can leave a partial last line; cut it so new
    # records start on a fresh line.
    if not path.exists():
        return
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        with path.open("r+b") as fh:
            fh.truncate(data.rfind(b"\n") + 1)


def run_experiment(
    config: ExperimentConfig,
    network: GeneNetwork | None = None,
    cache: CostCache | None = None,
    checkpoint: str | Path | None = None,
    progress: Callable[[RunRecord], None] | None = None,
) -> RunStats:
    """Sample ``config.runs`` uncertainty classes per k and aggregate their MOCU.

    Runs whose results are already in ``checkpoint`` are not recomputed; each
    finished run is appended to it immediately.
    """
    network = network or load_network()
    n_edges = len(network.edges)
    for k in config.k_values:
        if not 0 <= k <= n_edges:
            raise InvalidArgumentError(f"k = {k} outside 0..{n_edges}")
        if k > config.cap:
            raise InvalidArgumentError(f"k = {k} exceeds the enumeration cap of {config.cap}")
    if cache is None:
        cache = CostCache(SolverConfig(method=config.method))
    dist = UniformGrid2(config.lambda_grid + 1)

    done: dict[tuple[int, int], RunRecord] = {}
    fh = None
    if checkpoint is not None:
        path = Path(checkpoint)
        fingerprint = _fingerprint(config, network)
        done = _read_checkpoint(path, fingerprint)
        _drop_torn_tail(path)
        fresh = not path.exists() or path.stat().st_size == 0
        fh = path.open("a")
        if fresh:
            fh.write(json.dumps({"config": fingerprint}) + "\n")
            fh.flush()

    records: list[RunRecord] = []
    try:
        for k in config.k_values:
            plan = []
            for run in range(config.runs):
                seed = derive_seed(config.seed, k, run)
                plan.append((run, seed, sample_unknown_edges(n_edges, k, seed)))
            todo = [item for item in plan if (k, item[0]) not in done]
            if config.workers > 1 and todo:
                ivs = single_edge_interventions(network, config.allow_null_intervention)
                cache.prefill(
                    (
                        bnp.apply_intervention(m, iv)
                        for _, _, edges in todo
                        for m in NetworkUncertaintyClass(network, edges).models()
                        for iv in ivs
                    ),
                    workers=config.workers,
                )
            for run, seed, edges in plan:
                rec = done.get((k, run))
                if rec is None:
                    report = mocu_for_class(
                        NetworkUncertaintyClass(network, edges),
                        dist,
                        cache,
                        allow_null=config.allow_null_intervention,
                        cap=config.cap,
                    )
                    rec = RunRecord(k, run, seed, edges, report.eta_multi)
                    if fh is not None:
                        fh.write(json.dumps(asdict(rec)) + "\n")
                        fh.flush()
                if progress is not None:
                    progress(rec)
                records.append(rec)
    finally:
        if fh is not None:
            fh.close()

    summary = [summarize(k, [r.eta_multi for r in records if r.k == k]) for k in config.k_values]
    return RunStats(config, records, summary, cache.stats())


def worker_count(requested: int | None) -> int:
    if requested is None or requested < 1:
        return max(1, os.cpu_count() or 1)
    return requested
