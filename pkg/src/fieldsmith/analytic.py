"""Closed-form scalar fields with exact derivatives.

These serve as oracles: every field returns its value, gradient, and Hessian
analytically and plugs into the same jet-evaluation protocol as a network
(via jet_batch), so loss terms, extraction, and critical-point search can be
tested against exact ground truth.
"""

import numpy as np

from .jets import channels_for


class AnalyticField:
    """Base: subclasses implement jet_parts(X) -> (val, grad, hess)."""

    dim = None

    def jet_parts(self, X):
        raise NotImplementedError

    def jet_batch(self, X, order=2):
        X = np.asarray(X, dtype=np.float64)
        B, d = X.shape
        val, grad, hess = self.jet_parts(X)
        K = channels_for(order, d)
        raw = np.zeros((B, K, 1))
        raw[:, 0, 0] = val
        if order >= 1:
            raw[:, 1:1 + d, 0] = grad
        if order >= 2:
            raw[:, 1 + d:, 0] = hess.reshape(B, d * d)
        return raw

    def value(self, X):
        return self.jet_parts(np.atleast_2d(np.asarray(X, dtype=np.float64)))[0]


class AffineField(AnalyticField):
    """f(x) = a . x + b"""

    def __init__(self, a, b=0.0):
        self.a = np.asarray(a, dtype=np.float64)
        self.b = float(b)
        self.dim = self.a.size

    def jet_parts(self, X):
        B, d = X.shape
        val = X @ self.a + self.b
        grad = np.broadcast_to(self.a, (B, d)).copy()
        hess = np.zeros((B, d, d))
        return val, grad, hess


class QuadraticField(AnalyticField):
    """f(x) = 0.5 (x-c)^T Q (x-c) + lin . (x-c) + const"""

    def __init__(self, Q, center=None, lin=None, const=0.0):
        self.Q = np.asarray(Q, dtype=np.float64)
        self.dim = self.Q.shape[0]
        self.center = (np.zeros(self.dim) if center is None
                       else np.asarray(center, dtype=np.float64))
        self.lin = (np.zeros(self.dim) if lin is None
                    else np.asarray(lin, dtype=np.float64))
        self.const = float(const)

    def jet_parts(self, X):
        B, d = X.shape
        Y = X - self.center
        QY = Y @ self.Q.T
        val = 0.5 * np.einsum("bi,bi->b", Y, QY) + Y @ self.lin + self.const
        grad = QY + self.lin
        hess = np.broadcast_to(self.Q, (B, d, d)).copy()
        return val, grad, hess


def bowl(center):
    """0.5 |x - c|^2: unique minimum at c."""
    center = np.asarray(center, dtype=np.float64)
    return QuadraticField(np.eye(center.size), center=center)


def saddle2d():
    """x1^2 - x2^2."""
    return QuadraticField(np.diag([2.0, -2.0]))


class SphereField(AnalyticField):
    """Signed distance to a sphere/circle: |x - c| - r."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        self.dim = self.center.size

    def jet_parts(self, X):
        B, d = X.shape
        Y = X - self.center
        rho = np.linalg.norm(Y, axis=1)
        rho_safe = np.maximum(rho, 1e-300)
        u = Y / rho_safe[:, None]
        val = rho - self.radius
        outer = u[:, :, None] * u[:, None, :]
        hess = (np.eye(d)[None] - outer) / rho_safe[:, None, None]
        return val, u, hess


class CylinderField(AnalyticField):
    """Signed distance to an infinite cylinder around the x3 axis (3D)."""

    def __init__(self, radius, axis=2):
        self.radius = float(radius)
        self.axis = int(axis)
        self.dim = 3

    def jet_parts(self, X):
        B, d = X.shape
        mask = np.ones(d, dtype=bool)
        mask[self.axis] = False
        Y = X[:, mask]
        rho = np.maximum(np.linalg.norm(Y, axis=1), 1e-300)
        val = rho - self.radius
        grad = np.zeros((B, d))
        grad[:, mask] = Y / rho[:, None]
        hess = np.zeros((B, d, d))
        u = Y / rho[:, None]
        sub = (np.eye(2)[None] - u[:, :, None] * u[:, None, :]) / rho[:, None, None]
        idx = np.where(mask)[0]
        for a in range(2):
            for b in range(2):
                hess[:, idx[a], idx[b]] = sub[:, a, b]
        return val, grad, hess


class SmoothMinField(AnalyticField):
    """Soft minimum of member fields: -(1/k) log sum exp(-k f_i).

    k controls sharpness; the surface sits within log(m)/k of the hard min.
    """

    def __init__(self, members, k=60.0):
        self.members = list(members)
        self.k = float(k)
        self.dim = self.members[0].dim

    def jet_parts(self, X):
        B, d = X.shape
        m = len(self.members)
        vals = np.empty((m, B))
        grads = np.empty((m, B, d))
        hesss = np.empty((m, B, d, d))
        for i, f in enumerate(self.members):
            vals[i], grads[i], hesss[i] = f.jet_parts(X)
        a = -self.k * vals
        amax = a.max(axis=0)
        w = np.exp(a - amax[None, :])
        wsum = w.sum(axis=0)
        w /= wsum[None, :]
        val = -(amax + np.log(wsum)) / self.k
        grad = np.einsum("mb,mbi->bi", w, grads)
        hess = np.einsum("mb,mbij->bij", w, hesss)
        gg = np.einsum("mb,mbi,mbj->bij", w, grads, grads)
        hess -= self.k * (gg - grad[:, :, None] * grad[:, None, :])
        return val, grad, hess


class HardMinField(AnalyticField):
    """Pointwise minimum; derivatives follow the minimizing branch
    (lowest index on ties)."""

    def __init__(self, members):
        self.members = list(members)
        self.dim = self.members[0].dim

    def jet_parts(self, X):
        B, d = X.shape
        parts = [f.jet_parts(X) for f in self.members]
        vals = np.stack([p[0] for p in parts])
        idx = np.argmin(vals, axis=0)
        val = vals[idx, np.arange(B)]
        grad = np.stack([p[1] for p in parts])[idx, np.arange(B)]
        hess = np.stack([p[2] for p in parts])[idx, np.arange(B)]
        return val, grad, hess


def disk_well(center, radius):
    """Smooth disk surrogate (|x-c|^2 - r^2) / (2r): same zero set as the
    disk SDF and unit gradient on it, but with a genuine smooth minimum at
    the center instead of the SDF's cone point."""
    center = np.asarray(center, dtype=np.float64)
    d = center.shape[0]
    return QuadraticField(np.eye(d) / radius, center=center,
                          const=-0.5 * radius)


def disk_union(centers, radii, k=120.0):
    """Soft minimum of smooth disk wells: one minimum per disk, saddles on
    the ridges between them."""
    members = [disk_well(c, r) for c, r in zip(centers, radii)]
    return SmoothMinField(members, k=k)


def two_well(a, b, radius, k=120.0):
    """Smoothed union of two disk wells: two minima plus a connecting
    saddle on the midline."""
    return disk_union([np.asarray(a, dtype=np.float64),
                       np.asarray(b, dtype=np.float64)],
                      [radius, radius], k=k)


REGISTRY = {
    "affine": AffineField,
    "quadratic": QuadraticField,
    "bowl": bowl,
    "saddle": saddle2d,
    "sphere": SphereField,
    "circle": SphereField,
    "cylinder": CylinderField,
    "smooth_min": SmoothMinField,
    "hard_min": HardMinField,
    "disk_well": disk_well,
    "disk_union": disk_union,
    "two_well": two_well,
}


def make(name, *args, **kwargs):
    if name not in REGISTRY:
        raise KeyError(f"no analytic field named {name!r}")
    return REGISTRY[name](*args, **kwargs)
