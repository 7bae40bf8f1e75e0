"""Independent oracles and the seeded property suite behind ``camnet verify``.

Each oracle takes a different route from the code it checks: brute-force
enumeration for graph quantities, finite differences for the Jacobian,
Riemannian gradient descent for the rotation mean.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import camera as cam
from .graph import CommGraph, compute_W, is_connected
from .se3 import Pose, exp_so3, hat, mean_pose, phi


def random_rotations(rng: np.random.Generator, size: int) -> np.ndarray:
    """Haar-uniform rotations from normalized Gaussian quaternions."""
    q = rng.standard_normal((size, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], axis=1)


def sym_inequality_slacks(R1, R2, R3) -> np.ndarray:
    """Vectorized slack (lhs - rhs) of the trace inequality over stacks of triples."""
    T = np.swapaxes
    A12 = T(R1, 1, 2) @ R2
    A13 = T(R1, 1, 2) @ R3
    A32 = T(R3, 1, 2) @ R2
    tr = lambda M: np.trace(M, axis1=1, axis2=2)
    lhs = 0.5 * tr(A12 - A13 @ T(R2, 1, 2) @ R3)
    lam = np.linalg.eigvalsh(0.5 * (A13 + T(A13, 1, 2)))[:, 0]
    rhs = (3 - tr(A13)) - (3 - tr(A12)) + lam * (3 - tr(A32))
    return lhs - rhs


# graph oracles

def kirchhoff_count(g: CommGraph) -> int:
    """Number of spanning trees from the reduced Laplacian determinant."""
    L = np.zeros((g.n, g.n))
    for i, j in g.edges:
        L[i, i] += 1
        L[j, j] += 1
        L[i, j] -= 1
        L[j, i] -= 1
    if g.n == 1:
        return 1
    return int(round(np.linalg.det(L[1:, 1:])))


def _is_tree(n: int, edges) -> bool:
    comp = list(range(n))

    def find(x):
        while comp[x] != x:
            x = comp[x]
        return x

    for i, j in edges:
        a, b = find(i), find(j)
        if a == b:
            return False
        comp[a] = b
    return True


def _root_path(n: int, edges, root: int, target: int) -> list[tuple[int, int]]:
    """Edges on the unique tree path from root to target, found by DFS."""
    adj = {v: [] for v in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    stack = [(root, [root])]
    while stack:
        v, path = stack.pop()
        if v == target:
            return [tuple(sorted(e)) for e in zip(path, path[1:])]
        for u in adj[v]:
            if u not in path:
                stack.append((u, path + [u]))
    raise ValueError("target unreachable")


def naive_tree_cost(n: int, edges, root: int) -> int:
    paths = {i: _root_path(n, edges, root, i) for i in range(n)}
    depth = {i: len(p) for i, p in paths.items()}
    return max((sum(depth[i] for i in range(n) if tuple(sorted(e)) in paths[i]) for e in edges),
               default=0)


def naive_W(g: CommGraph) -> int:
    """Every (n-1)-edge subset that is a tree, every root, explicit paths."""
    best = math.inf
    for sub in itertools.combinations(g.sorted_edges(), g.n - 1):
        if not _is_tree(g.n, sub):
            continue
        for root in range(g.n):
            best = min(best, naive_tree_cost(g.n, sub, root))
    return int(best)


def random_connected_graph(rng: np.random.Generator, n: int, p: float = 0.5) -> CommGraph:
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        g = CommGraph(n, edges)
        if is_connected(g):
            return g


def brute_force_diameter(g: CommGraph) -> int:
    """Shortest path lengths by enumerating all simple paths."""
    adj = g.adjacency()
    best = 0
    for s in range(g.n):
        for t in range(s + 1, g.n):
            shortest = math.inf
            stack = [(s, (s,))]
            while stack:
                v, path = stack.pop()
                if v == t:
                    shortest = min(shortest, len(path) - 1)
                    continue
                for u in adj[v]:
                    if u not in path:
                        stack.append((u, path + (u,)))
            best = max(best, shortest)
    return int(best)


# geometry oracles

def finite_difference_jacobian(intrinsics, features, g_bar: Pose, h: float = 1e-6) -> np.ndarray:
    cols = []
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        fp = cam.measure(intrinsics, features, g_bar @ cam.perturb(e))
        fm = cam.measure(intrinsics, features, g_bar @ cam.perturb(-e))
        cols.append((fp - fm) / (2 * h))
    return np.stack(cols, axis=1)


def gradient_descent_mean_rotation(rotations, rng: np.random.Generator, starts: int = 20,
                                   tol: float = 1e-13, max_iter: int = 20000) -> np.ndarray:
    """Minimize sum phi(R^T R_j) by steps R <- R exp(eta vee(skew(R^T S)))."""
    Rs = np.asarray(rotations, dtype=float)
    S = Rs.sum(axis=0)
    eta = 1.0 / len(Rs)
    best, best_cost = None, math.inf
    for R in random_rotations(rng, starts):
        for _ in range(max_iter):
            A = R.T @ S
            w = 0.5 * np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])
            if np.linalg.norm(w) < tol:
                break
            R = R @ exp_so3(eta * w)
        cost = sum(phi(R.T @ Rj) for Rj in Rs)
        if cost < best_cost:
            best, best_cost = R, cost
    return best


# suite

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class SuiteReport:
    seed: int
    trials: int
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        lines = [f"seed = {self.seed}", f"trials = {self.trials}"]
        lines += [f"WARNING: {w}" for w in self.warnings]
        lines += [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        lines.append("result = " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def lemma_suite(seed: int = 42, trials: int = 10_000, _corrupt: bool = False) -> SuiteReport:
    """Seeded property sweep. ``_corrupt`` flips the inequality to self-test the harness."""
    rep = SuiteReport(seed, trials)
    if trials <= 0:
        msg = "trials = 0: every check is vacuous"
        rep.warnings.append(msg)
        warnings.warn(msg, stacklevel=2)
        return rep
    rng = np.random.default_rng(seed)

    R = random_rotations(rng, 3 * trials).reshape(trials, 3, 3, 3)
    slack = sym_inequality_slacks(R[:, 0], R[:, 1], R[:, 2])
    if _corrupt:
        slack = -slack
    worst = float(slack.min())
    rep.checks.append(Check("trace inequality on rotation triples", worst >= -1e-9,
                            f"{trials} triples, min slack {worst:.3e}"))

    n_jac = min(trials, 100)
    worst_rel = 0.0
    feats = cam.FeatureModel.tetrahedron()
    intr = cam.CameraIntrinsics(0.03)
    for _ in range(n_jac):
        g = Pose(exp_so3(rng.uniform(-0.5, 0.5, 3)), rng.uniform([-0.3, -0.3, 1.0], [0.3, 0.3, 3.0]))
        J = cam.image_jacobian(intr, feats, g)
        Jfd = finite_difference_jacobian(intr, feats, g)
        worst_rel = max(worst_rel, float(np.linalg.norm(J - Jfd) / np.linalg.norm(J)))
    rep.checks.append(Check("image Jacobian vs central differences", worst_rel <= 1e-5,
                            f"{n_jac} configurations, max relative error {worst_rel:.3e}"))

    n_mean = min(trials, 5)
    worst_gap = 0.0
    for _ in range(n_mean):
        base = random_rotations(rng, 1)[0]
        Rs = [base @ exp_so3(rng.normal(scale=0.5, size=3)) for _ in range(3)]
        poses = [Pose(Rj, rng.normal(size=3)) for Rj in Rs]
        ref = gradient_descent_mean_rotation(Rs, rng)
        worst_gap = max(worst_gap, float(np.linalg.norm(mean_pose(poses).R - ref)))
    rep.checks.append(Check("rotation mean vs gradient descent", worst_gap <= 1e-6,
                            f"{n_mean} sets, max gap {worst_gap:.3e}"))

    n_graph = min(trials, 50)
    mism = 0
    for _ in range(n_graph):
        g = random_connected_graph(rng, int(rng.integers(2, 7)))
        if compute_W(g)[0] != naive_W(g):
            mism += 1
    rep.checks.append(Check("W vs exhaustive evaluation", mism == 0,
                            f"{n_graph} random graphs, {mism} mismatches"))
    return rep
