"""Independent reference implementations used as test oracles.

Nothing here imports the counting or annealing code under test.
"""

import itertools
import math

import numpy as np


def pair_edges(points, radius):
    """Edges by direct all-pairs distance check."""
    out = []
    for i, j in itertools.combinations(range(len(points)), 2):
        (r1, c1), (r2, c2) = points[i], points[j]
        if math.hypot(r1 - r2, c1 - c2) <= radius + 1e-9:
            out.append((i, j))
    return out


def independent_mask(n, edges):
    """Boolean array over all 2^n subsets (bit i = vertex i) marking independent sets."""
    subsets = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(1 << n, dtype=bool)
    for i, j in edges:
        ok &= ((subsets >> i) & (subsets >> j) & 1) == 0
    return ok


def brute_polynomial(n, edges):
    ok = independent_mask(n, edges)
    sizes = np.bitwise_count(np.arange(1 << n, dtype=np.int64))[ok]
    counts = np.bincount(sizes)
    return [int(c) for c in counts]


def brute_sets_of_size(n, edges, k):
    ok = independent_mask(n, edges)
    subsets = np.arange(1 << n, dtype=np.int64)
    pick = subsets[ok & (np.bitwise_count(subsets) == k)]
    return {tuple(int((s >> i) & 1) for i in range(n)) for s in pick}


def branch_mis(n, edges):
    """Exact MIS size by branching on a maximum-degree vertex."""
    adj = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)

    def solve(alive):
        if not alive:
            return 0
        low = min(alive, key=lambda x: len(adj[x] & alive))
        if len(adj[low] & alive) <= 1:
            # a vertex of degree <= 1 is always in some maximum set
            return 1 + solve(alive - {low} - adj[low])
        v = max(alive, key=lambda x: len(adj[x] & alive))
        return max(solve(alive - {v}), 1 + solve(alive - {v} - adj[v]))

    return solve(frozenset(range(n)))


def code_of(bits):
    return sum(int(b) << i for i, b in enumerate(bits))


def bits_of(code, n):
    return np.array([(code >> i) & 1 for i in range(n)], dtype=np.uint8)


def mis_rule_row(graph, bits, alpha, eps, beta):
    """Outcome probabilities of one MIS update, written out from the update rule."""
    n = graph.n
    x = [int(b) for b in bits]
    energy = lambda y: -sum(y) + alpha * sum(y[i] * y[j] for i, j in graph.edges.tolist())
    acc = lambda de: 1.0 if de <= 0 else math.exp(-beta * de)
    row = {}

    def add(y, p):
        row[code_of(y)] = row.get(code_of(y), 0.0) + p

    for i in range(n):
        pick = 1 / n
        if not x[i]:
            y = x.copy()
            y[i] = 1
            a = acc(energy(y) - energy(x))
            add(y, pick * a)
            add(x, pick * (1 - a))
            continue
        y = x.copy()
        y[i] = 0
        a = acc(energy(y) - energy(x))
        add(y, pick * eps * a)
        add(x, pick * eps * (1 - a))
        nbrs = graph.neighbors[i]
        for j in nbrs:
            p = pick * (1 - eps) / 8
            if x[j]:
                add(x, p)
                continue
            y = x.copy()
            y[i], y[j] = 0, 1
            a = acc(energy(y) - energy(x))
            add(y, p * a)
            add(x, p * (1 - a))
        add(x, pick * (1 - eps) * (8 - len(nbrs)) / 8)
    return row


def rydberg_dense(points, mode, omega, phi, delta, c6=862690.0, a=4.5, cutoff=4.0):
    """Admissible configurations in lexicographic order and the dense Hamiltonian over them.

    Written out from the driven-array Hamiltonian: the drive term Omega/2 e^{i phi}
    takes an excited atom to the ground state, detuning rewards excitations and
    pairs interact through C6 / r^6 (converted from MHz to rad/us).
    """
    n = len(points)
    d2 = [[(points[i][0] - points[j][0]) ** 2 + (points[i][1] - points[j][1]) ** 2 for j in range(n)] for i in range(n)]
    blocked = 2 if mode == "hard_blockade" else 1
    reach = {"hard_blockade": 0, "truncated": 2, "full_tails": cutoff**2 + 1e-9}[mode]
    configs = [
        c for c in itertools.product((0, 1), repeat=n)
        if not any(c[i] and c[j] and d2[i][j] <= blocked for i in range(n) for j in range(i + 1, n))
    ]
    index = {c: k for k, c in enumerate(configs)}
    h = np.zeros((len(configs), len(configs)), dtype=complex)
    for k, c in enumerate(configs):
        e = -delta * sum(c)
        for i in range(n):
            for j in range(i + 1, n):
                if c[i] and c[j] and blocked < d2[i][j] <= reach:
                    e += 2 * math.pi * c6 / (a * math.sqrt(d2[i][j])) ** 6
        h[k, k] = e
        for i in range(n):
            if c[i]:
                lower = c[:i] + (0,) + c[i + 1:]
                h[index[lower], k] += 0.5 * omega * complex(math.cos(phi), math.sin(phi))
                h[k, index[lower]] += 0.5 * omega * complex(math.cos(phi), -math.sin(phi))
    return configs, h
