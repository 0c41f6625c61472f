"""Pairwise shape distances, diversity aggregation, and the planar
point-repulsion demonstration.

The distance between two implicit shapes integrates each field over the
other's boundary samples:

    d(f_i, f_j) = sqrt( mean_{x in bnd_i} f_j(x)^2 + mean_{x in bnd_j} f_i(x)^2 )

It is symmetric and zero for identical zero sets, but deliberately not a
metric. Diversity measures aggregate the pairwise distances; maximizing the
min-aggregation with p=1/2 spreads a solution set apart, while large p
tolerates clusters.
"""

from dataclasses import dataclass

import numpy as np

from .jets import field_jets

DIST_FLOOR = 1e-12  # keeps p<1 powers and quotients finite at zero distance


def boundary_distance_parts(fi, fj, bnd_i, bnd_j, params_i=None,
                            params_j=None, z_i=None, z_j=None):
    """Distance plus the cross-evaluations needed for its gradient:
    (d, f_j values on bnd_i, f_i values on bnd_j)."""
    if bnd_i is None or bnd_j is None or len(bnd_i) == 0 or len(bnd_j) == 0:
        raise ValueError("empty boundary batch")
    ji, _ = field_jets(fj, params_j, bnd_i, z=z_j, order=0)
    ij, _ = field_jets(fi, params_i, bnd_j, z=z_i, order=0)
    fj_on_i = ji.value
    fi_on_j = ij.value
    d = np.sqrt(np.mean(fj_on_i ** 2) + np.mean(fi_on_j ** 2))
    return float(d), fj_on_i, fi_on_j


def boundary_distance(fi, fj, bnd_i, bnd_j, **kw):
    """Symmetric boundary-integral distance between two implicit shapes."""
    return boundary_distance_parts(fi, fj, bnd_i, bnd_j, **kw)[0]


def pairwise_distances(evaluate, boundaries):
    """Distance matrix over N shapes.

    evaluate(k, X) -> f_k values at X; boundaries[k] = boundary samples of
    shape k. Entries are filled symmetrically.
    """
    N = len(boundaries)
    sq = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            a = evaluate(j, boundaries[i])
            b = evaluate(i, boundaries[j])
            sq[i, j] = sq[j, i] = np.mean(a * a) + np.mean(b * b)
    return np.sqrt(sq)


# ---------------------------------------------------------------------------
# aggregation measures

def _check_distances(D):
    D = np.asarray(D, dtype=np.float64)
    if np.any(D < 0):
        raise ValueError("negative distance")
    return D


def diversity_min(D, p=0.5):
    """( sum_i (min_{j!=i} d_ij)^p )^(1/p); one shape has zero diversity."""
    D = _check_distances(D)
    N = D.shape[0]
    if N < 2:
        return 0.0
    M = D + np.diag(np.full(N, np.inf))
    mins = M.min(axis=1)
    return float(np.sum(mins ** p) ** (1.0 / p))


def diversity_min_grad(D, p=0.5):
    """Value and subgradient of diversity_min w.r.t. the distance matrix.

    The min is sub-differentiated at its first (lowest-index) minimizer,
    so the result is deterministic; the gradient entry lands on the
    (i, argmin_j) slot for each row i.
    """
    D = _check_distances(D)
    N = D.shape[0]
    grad = np.zeros_like(D)
    if N < 2:
        return 0.0, grad
    M = D + np.diag(np.full(N, np.inf))
    js = np.argmin(M, axis=1)  # first minimizer on ties
    mins = np.maximum(M[np.arange(N), js], DIST_FLOOR)
    S = np.sum(mins ** p)
    value = S ** (1.0 / p)
    coef = S ** (1.0 / p - 1.0) * mins ** (p - 1.0)
    for i in range(N):
        grad[i, js[i]] += coef[i]
    return float(value), grad


def diversity_sum(D, p=1.0):
    """( sum_i (sum_j d_ij)^p )^(1/p): total aggregation."""
    D = _check_distances(D)
    if D.shape[0] < 2:
        return 0.0
    s = D.sum(axis=1)
    return float(np.sum(s ** p) ** (1.0 / p))


def diversity_sum_grad(D, p=1.0):
    D = _check_distances(D)
    N = D.shape[0]
    grad = np.zeros_like(D)
    if N < 2:
        return 0.0, grad
    s = np.maximum(D.sum(axis=1), DIST_FLOOR)
    S = np.sum(s ** p)
    value = S ** (1.0 / p)
    coef = S ** (1.0 / p - 1.0) * s ** (p - 1.0)
    # d_kl appears in s_k and s_l; fill both ordered slots once
    for k in range(N):
        for l in range(N):
            if k != l:
                grad[k, l] = coef[k]
    return float(value), grad


# ---------------------------------------------------------------------------
# planar point demo on a partial annulus

@dataclass
class PartialAnnulus:
    """Feasible set: radii in [r_in, r_out], angle in [0, span]."""
    r_in: float = 0.5
    r_out: float = 1.0
    span: float = 1.5 * np.pi

    def project(self, P):
        x, y = P[:, 0], P[:, 1]
        r = np.hypot(x, y)
        th = np.mod(np.arctan2(y, x), 2.0 * np.pi)
        # outside the angular wedge: snap to the nearer edge
        over = th > self.span
        gap_hi = th - self.span
        gap_lo = 2.0 * np.pi - th
        th = np.where(over, np.where(gap_hi <= gap_lo, self.span, 0.0), th)
        r = np.clip(r, self.r_in, self.r_out)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])

    def contains(self, P, tol=1e-9):
        r = np.hypot(P[:, 0], P[:, 1])
        th = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2.0 * np.pi)
        return ((r >= self.r_in - tol) & (r <= self.r_out + tol)
                & ((th <= self.span + tol) | (th >= 2 * np.pi - tol)))

    def boundary_gap(self, P):
        """Distance from each point to the boundary of the feasible set
        (0 means on the boundary)."""
        r = np.hypot(P[:, 0], P[:, 1])
        th = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2.0 * np.pi)
        radial = np.minimum(np.abs(r - self.r_in), np.abs(self.r_out - r))
        angular = r * np.minimum(np.abs(th), np.abs(self.span - th))
        return np.minimum(radial, angular)

    def sample(self, n, rng):
        th = rng.uniform(0.0, self.span, n)
        r = np.sqrt(rng.uniform(self.r_in ** 2, self.r_out ** 2, n))
        return np.column_stack([r * np.cos(th), r * np.sin(th)])


@dataclass
class PointSet2D:
    points: np.ndarray
    feasible: PartialAnnulus
    trajectory: np.ndarray = None  # (steps+1, N, 2)


def _point_delta_grad(P, kind, p):
    N = P.shape[0]
    diff = P[:, None, :] - P[None, :, :]
    D = np.linalg.norm(diff, axis=2)
    if kind == "min":
        value, dD = diversity_min_grad(D, p)
    elif kind == "sum":
        value, dD = diversity_sum_grad(D, p)
    else:
        raise ValueError(f"aggregation kind must be min or sum, not {kind!r}")
    Dsafe = np.maximum(D, DIST_FLOOR)
    np.fill_diagonal(Dsafe, 1.0)
    unit = diff / Dsafe[:, :, None]
    # d appears once per ordered slot; each slot differentiates to +unit on
    # the row point and -unit on the column point
    gP = np.einsum("kl,kli->ki", dD, unit) \
        - np.einsum("kl,kli->li", dD, unit)
    return value, gP


def annulus_demo(n_points, kind="min", p=0.5, steps=600, seed=0, lr=2e-3,
                 feasible=None, record_every=1):
    """Projected gradient ascent on point diversity inside a partial
    annulus. Every iterate is projected back to the feasible set."""
    feas = feasible or PartialAnnulus()
    rng = np.random.default_rng(seed)
    P = feas.project(feas.sample(n_points, rng))
    traj = [P.copy()]
    for step in range(steps):
        _, gP = _point_delta_grad(P, kind, p)
        P = feas.project(P + lr * gP)
        if (step + 1) % record_every == 0 or step == steps - 1:
            traj.append(P.copy())
    return PointSet2D(points=P, feasible=feas,
                      trajectory=np.stack(traj, axis=0))


def nn_distance_stats(P):
    """Nearest-neighbor distances and their coefficient of variation."""
    diff = P[:, None, :] - P[None, :, :]
    D = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(D, np.inf)
    nn = D.min(axis=1)
    return nn, float(nn.std() / nn.mean())
