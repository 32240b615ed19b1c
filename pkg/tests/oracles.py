"""Independent reference implementations used only by the tests.

Nothing here calls into the package's numerical code: truth tables come from
per-gene loops, transition matrices from the explicit Hamming formula,
stationary distributions from a full linear solve, and MOCU from plain
enumeration.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import integrate, optimize


# ---------------------------------------------------------------------------
# Boolean networks


def loop_truth_table(n, edges):
    """``edges`` is a list of ``(source, target, sign)`` with sign in {-1, +1}."""
    size = 1 << n
    table = np.zeros(size, dtype=np.int64)
    for x in range(size):
        bits = [(x >> i) & 1 for i in range(n)]
        nxt = 0
        for i in range(n):
            s = 0
            for src, tgt, sign in edges:
                if tgt == i and bits[src]:
                    s += sign
            b = 1 if s > 0 else 0 if s < 0 else bits[i]
            nxt |= b << i
        table[x] = nxt
    return table


def hamming_matrix(table, n, p):
    """``P[x, y] = (1-p)^n [f(x) = y] + p^h (1-p)^(n-h) [h > 0]``."""
    size = 1 << n
    xs = np.arange(size)
    xor = xs[:, None] ^ xs[None, :]
    h = np.zeros_like(xor)
    for i in range(n):
        h += (xor >> i) & 1
    P = np.where(h > 0, p ** h * (1.0 - p) ** (n - h), 0.0)
    P[xs, np.asarray(table)] += (1.0 - p) ** n
    return P


def stationary(P):
    """Solve ``(I - P^T + 1 1^T) pi = 1``."""
    size = len(P)
    A = np.eye(size) - P.T + np.ones((size, size))
    return np.linalg.solve(A, np.ones(size))


def edge_tuples(network):
    return [(e.source, e.target, int(e.sign)) for e in network.edges]


def brute_force_network_mocu(network, unknown, u_bits, p_bit, p=0.01, intervals=100, memo=None):
    """Two-objective MOCU over all sign assignments of ``unknown`` edges.

    Costs are the stationary masses of ``U = {bits in u_bits all 0}`` and
    ``P = {p_bit on} \\ U``; operators are the single-edge blocks.
    ``memo`` may be shared between calls with the same sets and ``p``.
    Returns ``(eta_multi, per-lambda list)``.
    """
    n = network.n
    base = edge_tuples(network)
    xs = np.arange(1 << n)
    in_u = np.ones(1 << n, dtype=bool)
    for b in u_bits:
        in_u &= ((xs >> b) & 1) == 0
    in_p = (((xs >> p_bit) & 1) == 1) & ~in_u
    memo = {} if memo is None else memo

    def costs(edges):
        table = loop_truth_table(n, edges)
        key = table.tobytes()
        if key not in memo:
            pi = stationary(hamming_matrix(table, n, p))
            memo[key] = (float(pi[in_u].sum()), float(pi[in_p].sum()))
        return memo[key]

    models = []
    for combo in itertools.product((1, -1), repeat=len(unknown)):
        edges = list(base)
        for idx, sign in zip(unknown, combo):
            s, t, _ = edges[idx]
            edges[idx] = (s, t, sign)
        models.append(edges)
    table = []  # table[m][op] = (cu, cp)
    for edges in models:
        row = []
        for op in range(len(edges)):
            row.append(costs(edges[:op] + edges[op + 1:]))
        table.append(row)

    etas = []
    for j in range(intervals + 1):
        lam = j / intervals
        combined = [[lam * cu + (1 - lam) * cp for cu, cp in row] for row in table]
        expected = [sum(combined[m][op] for m in range(len(models))) / len(models) for op in range(len(base))]
        robust = min(range(len(base)), key=lambda op: (expected[op], op))
        eta = sum(combined[m][robust] - min(combined[m]) for m in range(len(models))) / len(models)
        etas.append(eta)
    total = sum(etas[1:-1]) + 0.5 * (etas[0] + etas[-1])
    return total / intervals, etas


# ---------------------------------------------------------------------------
# finite MOCU


def enumerate_mocu(cost_tensor, weights, lam):
    """``cost_tensor[m, op, i]``; exact enumeration of eta at one weight vector."""
    T = np.asarray(cost_tensor, dtype=float)
    w = np.asarray(weights, dtype=float)
    combined = [[sum(l * c for l, c in zip(lam, T[m, op])) for op in range(T.shape[1])] for m in range(T.shape[0])]
    expected = [sum(w[m] * combined[m][op] for m in range(T.shape[0])) for op in range(T.shape[1])]
    robust = min(range(T.shape[1]), key=lambda op: (expected[op], op))
    return sum(w[m] * (combined[m][robust] - min(combined[m])) for m in range(T.shape[0]))


# ---------------------------------------------------------------------------
# quadratic family


def golden_min(fun, lo, hi):
    res = optimize.minimize_scalar(fun, bracket=(lo, hi), method="golden", tol=1e-12)
    return float(res.x), float(res.fun)


def case1_eta_multi(c, delta):
    # Per axis eta(lam) = c (1 - lam)^2 Var(gamma2), two axes, integrated over lam.
    return c * delta * delta / 18.0


def _case3_inner(u):
    # E[a b / (u a + v b)] for a, b ~ U[0, 1].
    v = 1.0 - u
    if u == 0.0 or v == 0.0:
        return 0.0  # multiplied by u v anyway

    def f(b, a):
        return a * b / (u * a + v * b) if a + b > 0 else 0.0

    val, _ = integrate.dblquad(f, 0.0, 1.0, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10)
    return val


def case3_constant():
    """``K`` with eta_multi(c, d) = c d^2 K for the continuous lambda integral."""

    def eta(u):
        v = 1.0 - u
        robust = 0.5 * (v / 3.0 - v * v / 4.0)
        optimal = u * v / 3.0 * _case3_inner(u)
        return 2.0 * (robust - optimal)

    val, _ = integrate.quad(eta, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val
