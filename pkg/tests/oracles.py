"""Independent reference implementations the tests check against.

Everything here is deliberately brute force and shares no code with the
package paths it verifies.
"""

import itertools

import numpy as np

from sdoplan.lp import REL_EQ, REL_GE, REL_LE


def enumerate_vertices(problem):
    """All basic feasible points of an LP by solving n-subsets of the
    active-constraint candidates (rows as equalities plus finite bounds)."""
    A = problem.A.toarray()
    m, n = A.shape
    planes = [(A[i], problem.rhs[i]) for i in range(m)]
    for j in range(n):
        if np.isfinite(problem.lower[j]):
            e = np.zeros(n)
            e[j] = 1.0
            planes.append((e, problem.lower[j]))
        if np.isfinite(problem.upper[j]):
            e = np.zeros(n)
            e[j] = 1.0
            planes.append((e, problem.upper[j]))
    vertices = []
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.vstack([planes[k][0] for k in combo])
        rhs = np.array([planes[k][1] for k in combo])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, rhs)
        if feasible(problem, x, tol=1e-8):
            vertices.append(x)
    return vertices


def feasible(problem, x, tol=1e-8):
    act = problem.A @ x
    for i, rel in enumerate(problem.relations):
        if rel == REL_LE and act[i] > problem.rhs[i] + tol:
            return False
        if rel == REL_GE and act[i] < problem.rhs[i] - tol:
            return False
        if rel == REL_EQ and abs(act[i] - problem.rhs[i]) > tol:
            return False
    return bool(np.all(x >= problem.lower - tol)
                and np.all(x <= problem.upper + tol))


def best_vertex_value(problem):
    """Minimum objective over enumerated vertices (None when infeasible)."""
    vertices = enumerate_vertices(problem)
    if not vertices:
        return None
    return min(float(problem.c @ v) for v in vertices)


def dose_triple_loop(instance, durations):
    """Dose by explicit summation in a different loop order."""
    G = instance.dose_rate
    V, I, S, K = G.shape
    out = np.zeros(V)
    for v in range(V):
        acc = 0.0
        for k in range(K):
            for s in range(S):
                for t in range(I):
                    acc += G[v, t, s, k] * durations[t, s, k]
        out[v] = acc
    return out


def coverage_by_counting(instance, dose, tol=1e-9):
    """Per-tumor coverage via an explicit voxel loop."""
    out = {}
    for s in instance.tumors:
        sl = instance.slice_of(s.name)
        D = instance.prescriptions[s.name]
        hit = 0
        for value in dose[sl]:
            if value >= D - tol:
                hit += 1
        out[s.name] = hit / s.n_voxels
    return out


def pci_by_counting(instance, dose, tol=1e-9):
    tv = sum(s.n_voxels for s in instance.tumors)
    tv_piv = 0
    for s in instance.tumors:
        sl = instance.slice_of(s.name)
        D = instance.prescriptions[s.name]
        tv_piv += sum(1 for value in dose[sl] if value >= D - tol)
    d_min = min(instance.prescriptions.values())
    piv = sum(1 for value in dose if value >= d_min - tol)
    return (tv_piv ** 2 / (tv * piv)) if piv else 0.0


def dvh_by_counting(instance, dose, structure, grid):
    sl = instance.slice_of(structure)
    vals = dose[sl]
    return [sum(1 for v in vals if v >= g) / len(vals) for g in grid]


def nondominated_by_pairs(triples):
    """Indices whose (cov, pci, bot) no other triple weakly improves."""
    keep = []
    for j, (c, p, b) in enumerate(triples):
        dominated = False
        for jj, (c2, p2, b2) in enumerate(triples):
            if jj == j:
                continue
            if c2 >= c and p2 >= p and b2 <= b and \
                    (c2 > c or p2 > p or b2 < b):
                dominated = True
                break
        if not dominated:
            keep.append(j)
    return keep
