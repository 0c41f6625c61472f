"""Differentiable constraint losses.

Every integral is realized as the (weighted) Monte-Carlo mean over the
supplied batch, so loss weights stay resolution-independent.

Two layers of API:

* ``*_term(jets, ...)`` functions consume a JetBatch and return
  ``(value, seed)`` where seed is the exact d(value)/d(jet channels),
  ready for the reverse parameter sweep. Terms on the same batch can sum
  their seeds and share one backward pass.
* spec-facing ``*_loss(field, batch, ...)`` wrappers that just evaluate.

The sub-level convention is f <= 0 inside the shape throughout.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .jets import GRAD_CLAMP, field_jets


# ---------------------------------------------------------------------------
# pointwise geometric terms

def interface_term(jets, weights=None):
    """mean of w(x) f(x)^2: pulls the zero set onto the interface."""
    f = jets.value
    B = f.shape[0]
    w = np.ones(B) if weights is None else np.asarray(weights, dtype=np.float64)
    value = float(np.mean(w * f * f))
    seed = jets.zeros_like()
    seed.raw[:, 0, 0] = 2.0 * w * f / B
    return value, seed


def envelope_term(jets):
    """mean of max(0, -f)^2: penalizes shape material outside the design
    region (f must be positive there)."""
    f = jets.value
    B = f.shape[0]
    m = np.maximum(0.0, -f)
    value = float(np.mean(m * m))
    seed = jets.zeros_like()
    seed.raw[:, 0, 0] = -2.0 * m / B
    return value, seed


def normal_term(jets, nbar):
    """mean of |grad f / |grad f| - nbar|^2 on interface points."""
    g = jets.grad
    B = g.shape[0]
    nbar = np.asarray(nbar, dtype=np.float64)
    r = np.maximum(np.linalg.norm(g, axis=1), GRAD_CLAMP)
    u = g / r[:, None]
    diff = u - nbar
    value = float(np.mean(np.sum(diff * diff, axis=1)))
    # d/dg |g/r - nbar|^2 = (2/r) (I - u u^T) (u - nbar) = -(2/r)(nbar - (u.nbar) u)
    un = np.sum(u * nbar, axis=1)
    dgrad = -(2.0 / r)[:, None] * (nbar - un[:, None] * u)
    seed = jets.zeros_like()
    seed.raw[:, 1:1 + jets.d, 0] = dgrad / B
    return value, seed


def eikonal_term(jets):
    """mean of (|grad f| - 1)^2: pushes the field toward a distance field."""
    g = jets.grad
    B = g.shape[0]
    r = np.maximum(np.linalg.norm(g, axis=1), GRAD_CLAMP)
    value = float(np.mean((r - 1.0) ** 2))
    dgrad = (2.0 * (r - 1.0) / r)[:, None] * g
    seed = jets.zeros_like()
    seed.raw[:, 1:1 + jets.d, 0] = dgrad / B
    return value, seed


def mean_curvature_term(jets):
    """mean of (div(grad f / |grad f|))^2 on surface points.

    The divergence of the unit gradient expands analytically to
    (tr H - u^T H u) / |g| with u = g/|g|.
    """
    g = jets.grad
    H = jets.hess
    B, d = g.shape
    r = np.maximum(np.linalg.norm(g, axis=1), GRAD_CLAMP)
    u = g / r[:, None]
    Hg = np.einsum("bij,bj->bi", H, g)
    gHg = np.einsum("bi,bi->b", g, Hg)
    trH = np.einsum("bii->b", H)
    D = (trH - gHg / (r * r)) / r
    value = float(np.mean(D * D))

    r3 = r ** 3
    r5 = r ** 5
    dD_dg = (-trH / r3)[:, None] * g - 2.0 * Hg / r3[:, None] \
        + (3.0 * gHg / r5)[:, None] * g
    eye = np.eye(d)
    dD_dH = eye[None] / r[:, None, None] \
        - (g[:, :, None] * g[:, None, :]) / r3[:, None, None]
    coef = (2.0 * D / B)
    seed = jets.zeros_like()
    seed.raw[:, 1:1 + d, 0] = coef[:, None] * dD_dg
    seed.raw[:, 1 + d:, 0] = (coef[:, None, None] * dD_dH).reshape(B, d * d)
    return value, seed


def strain_term(jets):
    """mean of kappa_1^2 + kappa_2^2: squared principal curvatures, i.e. the
    Frobenius norm of the tangent-projected shape operator P H P / |g|."""
    g = jets.grad
    H = jets.hess
    B, d = g.shape
    r = np.maximum(np.linalg.norm(g, axis=1), GRAD_CLAMP)
    b = np.einsum("bij,bj->bi", H, g)      # H g
    A = np.einsum("bij,bij->b", H, H)      # |H|_F^2
    Bq = np.einsum("bi,bi->b", b, b)       # |Hg|^2
    C = np.einsum("bi,bi->b", g, b)        # g^T H g
    r2 = r * r
    r4 = r2 * r2
    r6 = r4 * r2
    r8 = r4 * r4
    s = A / r2 - 2.0 * Bq / r4 + (C * C) / r6
    value = float(np.mean(s))

    ds_dH = (2.0 / r2)[:, None, None] * H \
        - (4.0 / r4)[:, None, None] * (b[:, :, None] * g[:, None, :]) \
        + (2.0 * C / r6)[:, None, None] * (g[:, :, None] * g[:, None, :])
    Hb = np.einsum("bij,bj->bi", H, b)
    ds_dg = (-2.0 * A / r4)[:, None] * g \
        - (4.0 / r4)[:, None] * Hb \
        + (8.0 * Bq / r6)[:, None] * g \
        + (4.0 * C / r6)[:, None] * b \
        - (6.0 * C * C / r8)[:, None] * g
    seed = jets.zeros_like()
    seed.raw[:, 1:1 + d, 0] = ds_dg / B
    seed.raw[:, 1 + d:, 0] = ds_dH.reshape(B, d * d) / B
    return value, seed


def value_seed_term(coeffs):
    """Generic linear-in-f term: sum_i coeffs[i] * f(x_i). Used by the
    connectedness penalty where the coefficients are the normalized
    saddle penalties."""
    coeffs = np.asarray(coeffs, dtype=np.float64)

    def term(jets):
        value = float(np.dot(coeffs, jets.value))
        seed = jets.zeros_like()
        seed.raw[:, 0, 0] = coeffs
        return value, seed

    return term


# ---------------------------------------------------------------------------
# mirror (1D height field)

def mirror_term(jets, xs, focal):
    """Mean squared distance from the focal point to each reflected ray.

    Vertical rays (0,-1) hit the graph (x, h(x)); the reflected direction is
    r = (-2 h', 1 - h'^2) / (1 + h'^2), a unit vector, so the point-line
    distance is the 2D cross product of (F - P) with r.
    """
    h = jets.value
    hp = jets.grad[:, 0]
    B = h.shape[0]
    Fx, Fy = float(focal[0]), float(focal[1])
    u = Fx - np.asarray(xs, dtype=np.float64)
    w = Fy - h
    q = 1.0 + hp * hp
    N = u * (1.0 - hp * hp) + 2.0 * w * hp
    cross = N / q
    value = float(np.mean(cross * cross))

    dcross_dh = -2.0 * hp / q          # through w
    dN_dhp = -2.0 * u * hp + 2.0 * w
    dcross_dhp = (dN_dhp * q - N * 2.0 * hp) / (q * q)
    coef = 2.0 * cross / B
    seed = jets.zeros_like()
    seed.raw[:, 0, 0] = coef * dcross_dh
    seed.raw[:, 1, 0] = coef * dcross_dhp
    return value, seed


# ---------------------------------------------------------------------------
# reaction-diffusion residuals on a periodic grid

def periodic_laplacian(w, spacing):
    h2 = spacing * spacing
    return (np.roll(w, 1, 0) + np.roll(w, -1, 0)
            + np.roll(w, 1, 1) + np.roll(w, -1, 1) - 4.0 * w) / h2


def periodic_gradient(w, spacing):
    gx = (np.roll(w, -1, 0) - np.roll(w, 1, 0)) / (2.0 * spacing)
    gy = (np.roll(w, -1, 1) - np.roll(w, 1, 1)) / (2.0 * spacing)
    return gx, gy


def _neg_div(gx, gy, spacing):
    # adjoint of periodic central differences: D^T = -D
    return -(np.roll(gx, -1, 0) - np.roll(gx, 1, 0)) / (2.0 * spacing) \
        - (np.roll(gy, -1, 1) - np.roll(gy, 1, 1)) / (2.0 * spacing)


def rd_residual_parts(u, v, constants, spacing):
    """Stationary residual losses and their adjoints w.r.t. grid values.

    Returns (L_u, L_v, dL_du, dL_dv) where L = L_u + L_v is differentiated.
    """
    Du = float(constants["D_u"])
    Dv = float(constants["D_v"])
    alpha = float(constants["alpha"])
    beta = float(constants["beta"])
    B = u.size
    uv2 = u * v * v
    ru = Du * periodic_laplacian(u, spacing) - uv2 + alpha * (1.0 - u)
    rv = Dv * periodic_laplacian(v, spacing) + uv2 - (alpha + beta) * v
    L_u = float(np.mean(ru * ru))
    L_v = float(np.mean(rv * rv))
    # self-adjoint Laplacian; reaction terms differentiate pointwise
    dL_du = (2.0 / B) * (Du * periodic_laplacian(ru, spacing)
                         - v * v * ru - alpha * ru + v * v * rv)
    dL_dv = (2.0 / B) * (Dv * periodic_laplacian(rv, spacing)
                         + 2.0 * u * v * (rv - ru) - (alpha + beta) * rv)
    return L_u, L_v, dL_du, dL_dv


def gradient_floor_parts(u, v, spacing, literal=False):
    """Anti-uniformity term on the mean gradient energy G.

    Default -min(1, G): rewards gradient energy up to 1, then saturates.
    literal=True uses -max(1, G), which is unbounded below.
    Returns (loss, G, dloss_du, dloss_dv).
    """
    B = u.size
    ux, uy = periodic_gradient(u, spacing)
    vx, vy = periodic_gradient(v, spacing)
    G = float(np.mean(ux * ux + uy * uy + vx * vx + vy * vy))
    active = (G > 1.0) if literal else (G < 1.0)
    loss = -max(1.0, G) if literal else -min(1.0, G)
    if active:
        dG_du = (2.0 / B) * _neg_div(ux, uy, spacing)
        dG_dv = (2.0 / B) * _neg_div(vx, vy, spacing)
        return loss, G, -dG_du, -dG_dv
    z = np.zeros_like(u)
    return loss, G, z, z


# ---------------------------------------------------------------------------
# spec-facing wrappers

def interface_loss(instance, points, weights=None, params=None, z=None):
    jets, _ = field_jets(instance, params, points, z=z, order=0)
    return interface_term(jets, weights)[0]


def envelope_loss(instance, points, params=None, z=None):
    jets, _ = field_jets(instance, params, points, z=z, order=0)
    return envelope_term(jets)[0]


def normal_loss(instance, points, normals, params=None, z=None):
    jets, _ = field_jets(instance, params, points, z=z, order=1)
    return normal_term(jets, normals)[0]


def eikonal_loss(instance, points, params=None, z=None):
    jets, _ = field_jets(instance, params, points, z=z, order=1)
    return eikonal_term(jets)[0]


def mean_curvature_loss(instance, points, params=None, z=None):
    jets, _ = field_jets(instance, params, points, z=z, order=2)
    return mean_curvature_term(jets)[0]


def strain_loss(instance, points, params=None, z=None):
    jets, _ = field_jets(instance, params, points, z=z, order=2)
    return strain_term(jets)[0]


def mirror_loss(instance, xs, focal, params=None, z=None):
    xs = np.asarray(xs, dtype=np.float64)
    jets, _ = field_jets(instance, params, xs[:, None], z=z, order=1)
    return mirror_term(jets, xs, focal)[0]


def rd_residual_loss(u_instance, v_instance, grid, constants, z=None,
                     u_values=None, v_values=None):
    """(L_u, L_v) of the stationary reaction-diffusion system on a periodic
    grid; values are evaluated from the fields when not supplied."""
    from .extract import grid_eval
    if u_values is None:
        u_values = grid_eval(u_instance, None, z, grid)
    if v_values is None:
        v_values = grid_eval(v_instance, None, z, grid)
    spacing = grid.spacing[0]
    L_u, L_v, _, _ = rd_residual_parts(u_values, v_values, constants, spacing)
    return L_u, L_v


def gradient_floor_loss(u_instance, v_instance, grid, z=None, literal=False,
                        u_values=None, v_values=None):
    from .extract import grid_eval
    if u_values is None:
        u_values = grid_eval(u_instance, None, z, grid)
    if v_values is None:
        v_values = grid_eval(v_instance, None, z, grid)
    return gradient_floor_parts(u_values, v_values, grid.spacing[0],
                                literal=literal)[0]


# ---------------------------------------------------------------------------
# aggregation

WEIGHT_NAMES = ("interface", "envelope", "obstacle", "normal", "eikonal",
                "connectedness", "diversity", "curvature", "residual",
                "gradient")


@dataclass
class LossWeights:
    interface: float = 0.0
    envelope: float = 0.0
    obstacle: float = 0.0
    normal: float = 0.0
    eikonal: float = 0.0
    connectedness: float = 0.0
    diversity: float = 0.0
    curvature: float = 0.0
    residual: float = 0.0
    gradient: float = 0.0

    def __post_init__(self):
        for name in WEIGHT_NAMES:
            val = float(getattr(self, name))
            if not np.isfinite(val) or val < 0.0:
                raise ValueError(f"weight {name} must be finite and >= 0")
            setattr(self, name, val)

    def get(self, name):
        return getattr(self, name)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(WEIGHT_NAMES)
        if unknown:
            raise ValueError(f"unknown loss weights: {sorted(unknown)}")
        return cls(**d)

    def as_dict(self):
        return {n: getattr(self, n) for n in WEIGHT_NAMES}


@dataclass
class LossReport:
    """Per-term raw and weighted values plus the diversity-adjusted total."""
    terms: dict = dc_field(default_factory=dict)  # name -> (raw, weighted)
    delta: float = 0.0
    lambda_delta: float = 0.0
    total: float = 0.0


def total_loss(term_values, weights, delta=0.0):
    """Combine raw term values with their weights and subtract the weighted
    diversity: total = sum_i lambda_i l_i - lambda_diversity * delta."""
    terms = {}
    total = 0.0
    for name, raw in term_values.items():
        lam = weights.get(name)
        weighted = lam * raw
        terms[name] = (raw, weighted)
        total += weighted
    lam_d = weights.get("diversity")
    total -= lam_d * delta
    return LossReport(terms=terms, delta=delta, lambda_delta=lam_d,
                      total=total)
