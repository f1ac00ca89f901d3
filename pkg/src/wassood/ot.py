"""Exact discrete optimal transport for small instances.

``exact_ot`` solves the transportation linear program with the primal
transportation simplex (northwest-corner start, potentials from the
spanning-tree basis, cycle pivots). It is the reference oracle that the
closed-form and quantile-based Wasserstein routines are checked against.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .distributions import DiscretePmf
from .exceptions import InfeasibleMarginalsError

MAX_CELLS = 2**18
REDUCED_COST_TOL = 1e-9
DUAL_CHECK_TOL = 1e-7
# consecutive degenerate pivots after which Bland's rule takes over
_BLAND_AFTER = 50


@dataclass(frozen=True, eq=False)
class TransportPlan:
    plan: np.ndarray
    cost: float
    u: np.ndarray
    v: np.ndarray
    iterations: int

    def marginal_errors(self, a, b):
        return (
            float(np.abs(self.plan.sum(axis=1) - a).max()),
            float(np.abs(self.plan.sum(axis=0) - b).max()),
        )


def _weights(x):
    if isinstance(x, DiscretePmf):
        return x.weights
    w = np.asarray(x, dtype=float).ravel()
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InfeasibleMarginalsError("marginals must be non-empty, finite and nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise InfeasibleMarginalsError(f"marginal sums to {w.sum()!r}, not 1")
    return w


def _northwest_corner(a, b):
    k1, k2 = a.size, b.size
    plan = np.zeros((k1, k2))
    ra, rb = a.copy(), b.copy()
    basis = []
    i = j = 0
    while True:
        f = min(ra[i], rb[j])
        plan[i, j] = f
        basis.append((i, j))
        ra[i] -= f
        rb[j] -= f
        if i == k1 - 1 and j == k2 - 1:
            break
        if j == k2 - 1 or (i < k1 - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return plan, basis


def _adjacency(basis, k1, k2):
    # nodes 0..k1-1 are rows, k1..k1+k2-1 are columns
    adj = [[] for _ in range(k1 + k2)]
    for i, j in basis:
        adj[i].append(k1 + j)
        adj[k1 + j].append(i)
    return adj


def _potentials(adj, C, k1, k2):
    u = np.full(k1, np.nan)
    v = np.full(k2, np.nan)
    u[0] = 0.0
    seen = np.zeros(k1 + k2, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nxt in adj[node]:
            if seen[nxt]:
                continue
            seen[nxt] = True
            if node < k1:
                v[nxt - k1] = C[node, nxt - k1] - u[node]
            else:
                u[nxt] = C[nxt, node - k1] - v[node - k1]
            queue.append(nxt)
    if not seen.all():
        raise RuntimeError("transport basis is not a spanning tree")
    return u, v


def _tree_path(adj, start, goal):
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt in adj[node]:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path  # goal ... start


def exact_ot(P, Q, cost, max_iter=None):
    """Optimal coupling between two discrete distributions.

    Parameters
    ----------
    P, Q : DiscretePmf or array-like of weights
        Source (rows) and target (columns) marginals, each summing to 1.
    cost : array-like of shape (k1, k2)
        Finite, nonnegative ground costs.

    Returns
    -------
    TransportPlan
        Optimal plan, its cost and dual potentials ``u, v`` with
        ``u_i + v_j <= C_ij`` and equality on the plan's support.
    """
    a, b = _weights(P), _weights(Q)
    C = np.asarray(cost, dtype=float)
    k1, k2 = a.size, b.size
    if C.shape != (k1, k2):
        raise ValueError(f"cost has shape {C.shape}, expected ({k1}, {k2})")
    if k1 * k2 > MAX_CELLS:
        raise ValueError(f"instance has {k1 * k2} cells, limit is {MAX_CELLS}")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost must be finite and nonnegative")
    b = b * (a.sum() / b.sum())

    plan, basis = _northwest_corner(a, b)
    is_basic = np.zeros((k1, k2), dtype=bool)
    for cell in basis:
        is_basic[cell] = True
    tol = REDUCED_COST_TOL * max(1.0, float(C.max()))
    max_iter = max_iter or 50 * (k1 + k2) * max(k1, k2) + 1000
    degenerate_run = 0

    for it in range(max_iter):
        adj = _adjacency(basis, k1, k2)
        u, v = _potentials(adj, C, k1, k2)
        reduced = C - u[:, None] - v[None, :]
        reduced[is_basic] = 0.0
        if degenerate_run < _BLAND_AFTER:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol:
                break
        else:
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                break
            flat = int(candidates[0])
        ei, ej = divmod(flat, k2)

        nodes = _tree_path(adj, ei, k1 + ej)  # column ej ... row ei
        cells = []
        for s, t in zip(nodes[:-1], nodes[1:]):
            cells.append((t, s - k1) if t < k1 else (s, t - k1))
        minus = cells[0::2]
        plus = cells[1::2]
        flows = np.array([plan[c] for c in minus])
        theta = flows.min()
        leave = min(c for c, f in zip(minus, flows) if f == theta)
        for c in minus:
            plan[c] -= theta
        for c in plus:
            plan[c] += theta
        plan[ei, ej] += theta
        plan[leave] = 0.0
        is_basic[leave] = False
        is_basic[ei, ej] = True
        basis[basis.index(leave)] = (ei, ej)
        degenerate_run = degenerate_run + 1 if theta == 0.0 else 0
    else:
        raise RuntimeError(f"transport simplex did not converge in {max_iter} pivots")

    slack = C - u[:, None] - v[None, :]
    if slack.min() < -DUAL_CHECK_TOL * max(1.0, float(C.max())):
        raise RuntimeError("dual feasibility check failed")
    if np.any(np.abs(slack[plan > 0]) > DUAL_CHECK_TOL * max(1.0, float(C.max()))):
        raise RuntimeError("complementary slackness check failed")
    return TransportPlan(plan, float(np.sum(plan * C)), u, v, it)


def wasserstein_discrete(P, Q, p=1.0):
    """p-Wasserstein between two pmfs on the real line, via ``exact_ot``."""
    C = np.abs(P.support[:, None] - Q.support[None, :]) ** p
    return exact_ot(P, Q, C).cost ** (1.0 / p)


def wasserstein_via_assignment(a, b, p=1.0):
    """Exact p-Wasserstein between equal-size 1-D samples by optimal assignment."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"samples must have equal size, got {a.size} and {b.size}")
    if a.size == 0 or a.size > 256:
        raise ValueError("assignment oracle supports 1 <= n <= 256")
    C = np.abs(a[:, None] - b[None, :]) ** p
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].sum() / a.size) ** (1.0 / p)
