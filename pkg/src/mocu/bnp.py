"""Boolean networks with perturbation (BNp).

Genes follow a signed majority vote over their expressed regulators; a gene
whose vote sums to zero keeps its value. At every step each gene flips
independently with probability ``p``; the deterministic update is applied only
when no gene flips. The resulting Markov chain on ``2**n`` states is ergodic
for ``p > 0``.

States are integers: gene ``i`` (in file order) is bit ``i``, so the first
gene is the least significant bit.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError, InvalidModelError, LoadError

MAX_GENES = 20
MAX_DENSE_GENES = 12
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000
METHODS = ("power", "dense", "reduced")


class Sign(IntEnum):
    SUPPRESSING = -1
    UNKNOWN = 0
    ACTIVATING = 1

    @classmethod
    def parse(cls, text: str) -> "Sign":
        try:
            return {"activating": cls.ACTIVATING, "suppressing": cls.SUPPRESSING, "unknown": cls.UNKNOWN}[text]
        except KeyError:
            raise LoadError(f"unrecognized edge sign {text!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    sign: Sign


@dataclass(frozen=True)
class GeneNetwork:
    """Signed regulatory graph. Edge order is significant: interventions and
    uncertainty classes refer to edges by position."""

    genes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        genes = tuple(self.genes)
        edges = tuple(Edge(int(e.source), int(e.target), Sign(e.sign)) for e in self.edges)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "edges", edges)
        if not 1 <= len(genes) <= MAX_GENES:
            raise InvalidArgumentError(f"a network needs 1..{MAX_GENES} genes, got {len(genes)}")
        if len(set(genes)) != len(genes):
            raise InvalidArgumentError("gene names must be unique")
        seen = set()
        for e in edges:
            if not (0 <= e.source < len(genes) and 0 <= e.target < len(genes)):
                raise InvalidArgumentError(f"edge {e} refers to a gene outside the network")
            if (e.source, e.target) in seen:
                raise InvalidArgumentError(
                    f"duplicate edge {genes[e.source]} -> {genes[e.target]}"
                )
            seen.add((e.source, e.target))

    @property
    def n(self) -> int:
        return len(self.genes)

    @property
    def has_unknown(self) -> bool:
        return any(e.sign == Sign.UNKNOWN for e in self.edges)

    def signed_matrix(self) -> np.ndarray:
        """``W[target, source] = sign``; raises if any sign is unknown."""
        if self.has_unknown:
            unknown = [i for i, e in enumerate(self.edges) if e.sign == Sign.UNKNOWN]
            raise InvalidModelError(f"edges {unknown} have unknown sign; the network cannot be simulated")
        w = np.zeros((self.n, self.n), dtype=np.int32)
        for e in self.edges:
            w[e.target, e.source] = int(e.sign)
        return w

    def with_signs(self, assignment: dict[int, int]) -> "GeneNetwork":
        edges = list(self.edges)
        for i, s in assignment.items():
            e = edges[i]
            edges[i] = Edge(e.source, e.target, Sign(s))
        return GeneNetwork(self.genes, tuple(edges))

    def edge_label(self, i: int) -> str:
        e = self.edges[i]
        return f"{self.genes[e.source]}->{self.genes[e.target]}"

    def to_dict(self, perturbation: float | None = None) -> dict:
        doc = {
            "genes": list(self.genes),
            "edges": [
                {"source": self.genes[e.source], "target": self.genes[e.target], "sign": e.sign.label}
                for e in self.edges
            ],
        }
        if perturbation is not None:
            doc["perturbation"] = perturbation
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneNetwork":
        problems = []
        if not isinstance(doc, dict):
            raise LoadError("network document must be a JSON object")
        genes = doc.get("genes")
        raw_edges = doc.get("edges")
        if not isinstance(genes, list) or not all(isinstance(g, str) for g in genes):
            problems.append("'genes' must be a list of strings")
        if not isinstance(raw_edges, list):
            problems.append("'edges' must be a list")
        if problems:
            raise LoadError("; ".join(problems), problems)
        index = {g: i for i, g in enumerate(genes)}
        edges = []
        for k, item in enumerate(raw_edges):
            if not isinstance(item, dict) or not {"source", "target", "sign"} <= set(item):
                problems.append(f"edge {k}: needs 'source', 'target' and 'sign'")
                continue
            for end in ("source", "target"):
                if item[end] not in index:
                    problems.append(f"edge {k}: unknown gene {item[end]!r}")
            if item["source"] in index and item["target"] in index:
                try:
                    edges.append(Edge(index[item["source"]], index[item["target"]], Sign.parse(item["sign"])))
                except LoadError as exc:
                    problems.append(f"edge {k}: {exc}")
        if problems:
            raise LoadError("; ".join(problems), problems)
        try:
            return cls(tuple(genes), tuple(edges))
        except InvalidArgumentError as exc:
            raise LoadError(str(exc), [str(exc)]) from exc

    @functools.cached_property
    def _table(self) -> np.ndarray:
        return _truth_table(self.signed_matrix(), self.n)


@dataclass(frozen=True)
class BnpModel:
    network: GeneNetwork
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise InvalidArgumentError(f"perturbation probability must lie in (0, 1), got {self.p}")


def read_network_file(path) -> tuple[GeneNetwork, float | None]:
    """Load ``{"genes": [...], "edges": [...], "perturbation": p}`` from JSON."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read network file {path}: {exc}", [str(exc)]) from exc
    network = GeneNetwork.from_dict(doc)
    p = doc.get("perturbation")
    if p is not None and not (isinstance(p, (int, float)) and 0 < p < 1):
        raise LoadError(f"'perturbation' must be a number in (0, 1), got {p!r}")
    return network, (float(p) if p is not None else None)


# ---------------------------------------------------------------------------
# states and interventions


def encode_state(bits) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def decode_state(x: int, n: int) -> tuple[int, ...]:
    return tuple((x >> i) & 1 for i in range(n))


@functools.lru_cache(maxsize=None)
def _state_bits(n: int) -> np.ndarray:
    states = np.arange(1 << n, dtype=np.int64)
    bits = ((states[:, None] >> np.arange(n)) & 1).astype(np.int32)
    bits.setflags(write=False)
    return bits


def _truth_table(w: np.ndarray, n: int) -> np.ndarray:
    bits = _state_bits(n)
    vote = bits @ w.T
    nxt = np.where(vote > 0, 1, np.where(vote < 0, 0, bits))
    table = nxt @ (1 << np.arange(n, dtype=np.int64))
    table.setflags(write=False)
    return table


def truth_table(network: GeneNetwork) -> np.ndarray:
    """Deterministic successor of every state, as an integer array of length ``2**n``."""
    return network._table


def next_state(network: GeneNetwork, state: int) -> int:
    w = network.signed_matrix()
    if not 0 <= state < (1 << network.n):
        raise InvalidArgumentError(f"state {state} out of range for {network.n} genes")
    bits = np.array(decode_state(state, network.n))
    vote = w @ bits
    nxt = np.where(vote > 0, 1, np.where(vote < 0, 0, bits))
    return encode_state(nxt)


def table_digest(table: np.ndarray) -> str:
    """Canonical hash of a truth table; equal digests mean identical dynamics."""
    n = int(len(table)).bit_length() - 1
    h = hashlib.blake2b(digest_size=16)
    h.update(n.to_bytes(1, "little"))
    h.update(np.ascontiguousarray(table, dtype="<u4").tobytes())
    return h.hexdigest()


def network_digest(network: GeneNetwork) -> str:
    return table_digest(truth_table(network))


@dataclass(frozen=True)
class Intervention:
    """Structural intervention: ``edge=None`` leaves the network untouched,
    otherwise the regulation at that edge position is blocked."""

    edge: int | None = None

    @classmethod
    def block(cls, edge: int) -> "Intervention":
        return cls(int(edge))

    def __str__(self) -> str:
        return "none" if self.edge is None else f"block:{self.edge}"


NO_INTERVENTION = Intervention()


def apply_intervention(network: GeneNetwork, iv: Intervention) -> GeneNetwork:
    if iv.edge is None:
        return network
    if not 0 <= iv.edge < len(network.edges):
        raise InvalidArgumentError(f"edge index {iv.edge} out of range for {len(network.edges)} edges")
    edges = network.edges[: iv.edge] + network.edges[iv.edge + 1 :]
    return GeneNetwork(network.genes, edges)


# ---------------------------------------------------------------------------
# state sets


@dataclass(frozen=True)
class StateSet:
    mask: np.ndarray
    name: str = ""

    @classmethod
    def from_predicate(cls, n: int, predicate, name: str = "") -> "StateSet":
        mask = np.array([bool(predicate(decode_state(x, n))) for x in range(1 << n)])
        return cls(mask, name)

    def __contains__(self, state: int) -> bool:
        return bool(self.mask[state])

    def __len__(self) -> int:
        return int(self.mask.sum())


def state_mass(pi, states: StateSet) -> float:
    probs = pi.pi if isinstance(pi, SteadyState) else np.asarray(pi, dtype=float)
    if probs.shape != states.mask.shape:
        raise InvalidArgumentError("distribution and state set cover different state spaces")
    return math.fsum(probs[states.mask])


# ---------------------------------------------------------------------------
# transition operator


def _check_distribution(pi: np.ndarray, size: int) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (size,) or not np.all(np.isfinite(pi)) or np.any(pi < -1e-15):
        raise InvalidArgumentError("input is not a distribution over the state space")
    if abs(math.fsum(pi) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"distribution sums to {math.fsum(pi)!r}, expected 1")
    return pi


def _flip_channel(pi: np.ndarray, n: int, p: float) -> np.ndarray:
    # Independent bit flips, one binary symmetric mix per gene, lowest gene first.
    out = pi
    for i in range(n):
        v = out.reshape(1 << (n - 1 - i), 2, 1 << i)
        out = ((1.0 - p) * v + p * v[:, ::-1, :]).reshape(-1)
    return out


def _apply(table: np.ndarray, n: int, p: float, pi: np.ndarray) -> np.ndarray:
    stay = (1.0 - p) ** n
    push = np.bincount(table, weights=pi, minlength=1 << n)
    return _flip_channel(pi, n, p) - stay * pi + stay * push


def transition_apply(model: BnpModel, pi) -> np.ndarray:
    """One step of the chain: ``pi_out = pi_in P`` without forming ``P``."""
    n = model.network.n
    pi = _check_distribution(pi, 1 << n)
    return _apply(truth_table(model.network), n, model.p, pi)


@functools.lru_cache(maxsize=8)
def _flip_kernel(n: int, p: float) -> np.ndarray:
    b = np.array([[1.0 - p, p], [p, 1.0 - p]])
    k = np.ones((1, 1))
    for _ in range(n):
        k = np.kron(b, k)
    k.setflags(write=False)
    return k


def _dense_from_table(table: np.ndarray, n: int, p: float) -> np.ndarray:
    size = 1 << n
    stay = (1.0 - p) ** n
    mat = np.array(_flip_kernel(n, p))
    mat[np.diag_indices(size)] -= stay
    mat[np.arange(size), table] += stay
    return mat


def transition_matrix(model: BnpModel, p: float | None = None) -> np.ndarray:
    """Dense row-stochastic transition matrix (``n <= 12``).

    ``p`` overrides the model's perturbation probability; ``p = 0`` gives the
    deterministic transition indicator.
    """
    n = model.network.n
    if n > MAX_DENSE_GENES:
        raise InvalidArgumentError(f"dense transition matrix limited to {MAX_DENSE_GENES} genes")
    return _dense_from_table(truth_table(model.network), n, model.p if p is None else p)


# ---------------------------------------------------------------------------
# steady state


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray
    residual: float
    iterations: int
    method: str


def _normalize(pi: np.ndarray) -> np.ndarray:
    pi = np.clip(pi, 0.0, None)
    return pi / math.fsum(pi)


def _power(table, n, p, tol, max_iter, start=None):
    size = 1 << n
    pi = np.full(size, 1.0 / size) if start is None else np.asarray(start, dtype=float)
    step = math.inf
    for it in range(1, max_iter + 1):
        nxt = _apply(table, n, p, pi)
        step = float(np.abs(nxt - pi).sum())
        pi = nxt
        if step < tol:
            return _normalize(pi), it
    raise ConvergenceError(f"power iteration did not reach {tol:g} in {max_iter} iterations", step, max_iter)


def _dense_solve(table, n, p):
    size = 1 << n
    a = _dense_from_table(table, n, p).T
    a[np.diag_indices(size)] -= 1.0
    a[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    return _normalize(np.linalg.solve(a, rhs))


@functools.lru_cache(maxsize=8)
def _flip_resolvent(n: int, p: float) -> np.ndarray:
    # a * ((1 + a) I - K)^-1 with a = (1 - p)^n; row-stochastic.
    stay = (1.0 - p) ** n
    m = -np.array(_flip_kernel(n, p))
    m[np.diag_indices(1 << n)] += 1.0 + stay
    r = stay * np.linalg.inv(m)
    r.setflags(write=False)
    return r


def _reduced_solve(table, n, p):
    # Exact solve on the image of the deterministic map. With P = K - aI + aF,
    # pi = a (pi F) ((1 + a) I - K)^-1, and z = pi F lives on image(F), where it
    # is stationary for the chain R F restricted to the image.
    res = _flip_resolvent(n, p)
    image = np.unique(table)
    order = np.argsort(table, kind="stable")
    starts = np.searchsorted(table[order], image)
    rows = res[image]
    q = np.add.reduceat(rows[:, order], starts, axis=1)
    r = len(image)
    a = q.T - np.eye(r)
    a[-1, :] = 1.0
    rhs = np.zeros(r)
    rhs[-1] = 1.0
    z = np.linalg.solve(a, rhs)
    return _normalize(z @ rows)


def steady_state_from_table(
    table: np.ndarray,
    p: float,
    method: str = "power",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    start=None,
) -> SteadyState:
    """Stationary distribution of the BNp chain with deterministic map ``table``.

    ``power`` iterates the structured transition from the uniform
    distribution (or ``start``) until successive iterates differ by less than ``tol`` in L1.
    ``dense`` solves ``pi (P - I) = 0, sum(pi) = 1`` directly and ``reduced``
    solves the equivalent system on the image of the deterministic map; both
    are limited to ``n <= 12``.
    """
    table = np.asarray(table)
    n = int(len(table)).bit_length() - 1
    if len(table) != 1 << n:
        raise InvalidArgumentError("truth table length must be a power of two")
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"perturbation probability must lie in (0, 1), got {p}")
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown steady-state method {method!r}; choose from {METHODS}")
    if method != "power" and n > MAX_DENSE_GENES:
        raise InvalidArgumentError(f"method {method!r} is limited to {MAX_DENSE_GENES} genes")
    iterations = 0
    if method == "power":
        if start is not None:
            start = _check_distribution(np.asarray(start, dtype=float), len(table))
        pi, iterations = _power(table, n, p, tol, max_iter, start)
    elif method == "dense":
        pi = _dense_solve(table, n, p)
    else:
        pi = _reduced_solve(table, n, p)
    residual = float(np.abs(_apply(table, n, p, pi) - pi).sum())
    return SteadyState(pi, residual, iterations, method)


def steady_state(
    model: BnpModel,
    method: str = "power",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    start=None,
) -> SteadyState:
    return steady_state_from_table(truth_table(model.network), model.p, method, tol, max_iter, start)
