"""Problem geometry: domains, design regions, interfaces, and point sampling.

Regions expose contains(P) and sample(n, rng); interface pieces expose
measure(), sample(n, rng) -> (points, normals), and endpoints() for corner
weighting. All sampling is deterministic per seed.
"""

from dataclasses import dataclass, field

import numpy as np


def _rng_of(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class AxisBox:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(l >= h for l, h in zip(lo, hi)):
            raise ValueError("AxisBox needs lo < hi on every axis")

    @property
    def dim(self):
        return len(self.lo)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def diagonal(self):
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, P, pad=0.0):
        P = np.atleast_2d(np.asarray(P, dtype=np.float64))
        lo = np.asarray(self.lo) - pad
        hi = np.asarray(self.hi) + pad
        return np.all((P >= lo) & (P <= hi), axis=1)

    def sample(self, n, rng):
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return rng.uniform(lo, hi, size=(n, self.dim))

    def clip(self, P):
        return np.clip(P, np.asarray(self.lo), np.asarray(self.hi))


@dataclass(frozen=True)
class Ball:
    """Solid ball (disk in 2D); the standard exclusion primitive."""
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center",
                           tuple(float(v) for v in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, P, pad=0.0):
        P = np.atleast_2d(np.asarray(P, dtype=np.float64))
        return np.linalg.norm(P - np.asarray(self.center), axis=1) \
            <= self.radius + pad

    def sample(self, n, rng):
        # uniform in the ball: normal direction, radius by inverse cdf
        d = self.dim
        v = rng.standard_normal((n, d))
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
        r = self.radius * rng.uniform(0.0, 1.0, n) ** (1.0 / d)
        return np.asarray(self.center) + v * r[:, None]


@dataclass(frozen=True)
class AxisCylinder:
    """Solid infinite cylinder along one axis, for 3D exclusions."""
    center: tuple  # point on the axis
    radius: float
    axis: int = 2

    def contains(self, P, pad=0.0):
        P = np.atleast_2d(np.asarray(P, dtype=np.float64))
        mask = np.ones(P.shape[1], dtype=bool)
        mask[self.axis] = False
        c = np.asarray(self.center)[mask]
        return np.linalg.norm(P[:, mask] - c, axis=1) <= self.radius + pad


# ---------------------------------------------------------------------------
# interface pieces

@dataclass(frozen=True)
class Segment:
    """Straight interface piece with one prescribed unit normal."""
    a: tuple
    b: tuple
    normal: tuple = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        object.__setattr__(self, "a", tuple(a))
        object.__setattr__(self, "b", tuple(b))
        if self.normal is not None:
            nrm = np.asarray(self.normal, dtype=np.float64)
            nn = np.linalg.norm(nrm)
            if nn == 0:
                raise ValueError("zero prescribed normal")
            object.__setattr__(self, "normal", tuple(nrm / nn))

    def measure(self):
        return float(np.linalg.norm(np.subtract(self.b, self.a)))

    def sample(self, n, rng):
        t = rng.uniform(0.0, 1.0, n)[:, None]
        P = np.asarray(self.a) + t * np.subtract(self.b, self.a)
        return P, self._normals(n)

    def _normals(self, n):
        if self.normal is None:
            return None
        return np.tile(np.asarray(self.normal), (n, 1))

    def endpoints(self):
        P = np.array([self.a, self.b])
        N = self._normals(2)
        return P, N


@dataclass(frozen=True)
class DiskPatch:
    """Planar disk interface in 3D, normal to a coordinate axis."""
    center: tuple
    radius: float
    axis: int
    normal: tuple = None

    def __post_init__(self):
        if self.normal is not None:
            nrm = np.asarray(self.normal, dtype=np.float64)
            object.__setattr__(self, "normal",
                               tuple(nrm / np.linalg.norm(nrm)))

    def measure(self):
        return float(np.pi * self.radius ** 2)

    def sample(self, n, rng):
        ang = rng.uniform(0.0, 2.0 * np.pi, n)
        r = self.radius * np.sqrt(rng.uniform(0.0, 1.0, n))
        P = np.tile(np.asarray(self.center, dtype=np.float64), (n, 1))
        others = [i for i in range(3) if i != self.axis]
        P[:, others[0]] += r * np.cos(ang)
        P[:, others[1]] += r * np.sin(ang)
        N = None if self.normal is None else np.tile(self.normal, (n, 1))
        return P, N

    def endpoints(self):
        return np.zeros((0, 3)), None


@dataclass(frozen=True)
class CylinderPatch:
    """Side surface of a finite cylinder along a coordinate axis; normals
    point radially outward (bolt / pin attachment interface)."""
    center: tuple
    radius: float
    half_height: float
    axis: int = 2

    def measure(self):
        return float(2.0 * np.pi * self.radius * 2.0 * self.half_height)

    def sample(self, n, rng):
        ang = rng.uniform(0.0, 2.0 * np.pi, n)
        t = rng.uniform(-self.half_height, self.half_height, n)
        P = np.tile(np.asarray(self.center, dtype=np.float64), (n, 1))
        others = [i for i in range(3) if i != self.axis]
        ca, sa = np.cos(ang), np.sin(ang)
        P[:, others[0]] += self.radius * ca
        P[:, others[1]] += self.radius * sa
        P[:, self.axis] += t
        N = np.zeros((n, 3))
        N[:, others[0]] = ca
        N[:, others[1]] = sa
        return P, N

    def endpoints(self):
        return np.zeros((0, 3)), None


@dataclass(frozen=True)
class CircleCurve:
    """Circle curve in an axis-aligned plane (e.g. a boundary loop to span)."""
    center: tuple
    radius: float
    axis: int = 2  # plane normal axis
    normal: tuple = None

    def measure(self):
        return float(2.0 * np.pi * self.radius)

    def sample(self, n, rng):
        ang = rng.uniform(0.0, 2.0 * np.pi, n)
        P = np.tile(np.asarray(self.center, dtype=np.float64), (n, 1))
        others = [i for i in range(len(self.center)) if i != self.axis]
        P[:, others[0]] += self.radius * np.cos(ang)
        P[:, others[1]] += self.radius * np.sin(ang)
        N = None if self.normal is None else np.tile(
            np.asarray(self.normal) / np.linalg.norm(self.normal), (n, 1))
        return P, N

    def endpoints(self):
        return np.zeros((0, len(self.center))), None


# ---------------------------------------------------------------------------
# problem description

@dataclass
class ProblemSpec:
    """Domain X, design region E (box minus exclusions), interface pieces,
    and problem constants (focal point, reaction-diffusion coefficients)."""
    domain: AxisBox
    design_box: AxisBox = None
    exclusions: list = field(default_factory=list)
    interfaces: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.design_box is None:
            self.design_box = self.domain
        # interface pieces must sit inside the closure of the design region
        rng = np.random.default_rng(0)
        for piece in self.interfaces:
            P, _ = piece.sample(16, rng)
            ok = self.design_box.contains(P, pad=1e-9)
            for excl in self.exclusions:
                ok &= ~excl.contains(P, pad=-1e-9)
            if not np.all(ok):
                raise ValueError("interface piece leaves the design region")


def in_design_region(p, spec):
    """True where p lies in the design box and outside every exclusion."""
    P = np.atleast_2d(np.asarray(p, dtype=np.float64))
    ok = spec.design_box.contains(P)
    for excl in spec.exclusions:
        ok &= ~excl.contains(P)
    if np.isscalar(p[0]) and np.asarray(p).ndim == 1:
        return bool(ok[0])
    return ok


def sample_uniform(region, n, seed):
    """i.i.d. uniform points in a region exposing sample(n, rng)."""
    if n < 1:
        raise ValueError("need n >= 1")
    return region.sample(n, _rng_of(seed))


def sample_outside_design(spec, n, rng, max_tries=200, margin=0.0):
    """Uniform points in X beyond the design box (the containment batch).

    Exclusion interiors are not sampled here: they sit inside the box and
    carry their own weight through sample_in_exclusions, so the two batches
    partition X minus E. A positive margin keeps samples at least that far
    from the box boundary; training uses a hair of margin so the one-sided
    containment penalty does not feed on the sub-grid spillover of a shape
    legitimately attached to the boundary, while evaluation uses margin 0.
    """
    rng = _rng_of(rng)
    out = []
    got = 0
    box = spec.design_box
    if margin > 0.0:
        box = AxisBox(tuple(a - margin for a in box.lo),
                      tuple(b + margin for b in box.hi))
    for _ in range(max_tries):
        cand = spec.domain.sample(max(2 * n, 64), rng)
        sel = cand[~box.contains(cand)]
        if sel.shape[0]:
            out.append(sel)
            got += sel.shape[0]
        if got >= n:
            break
    if got < n:
        raise ValueError("design region fills the domain; nothing to sample")
    return np.concatenate(out, axis=0)[:n]


def sample_in_exclusions(spec, n, rng, margin=0.0):
    """Uniform points inside the exclusion primitives (within X).

    A positive margin shrinks each primitive before sampling, leaving a
    collar at the rim where a shape may legally sit flush; as with the
    containment batch, training uses a hair of standoff so one-sided rim
    samples do not erode material attached to the boundary.
    """
    rng = _rng_of(rng)
    samplers = [e for e in spec.exclusions if hasattr(e, "sample")]
    if not samplers:
        raise ValueError("no sampleable exclusions")
    if margin > 0.0:
        samplers = [Ball(e.center, max(e.radius - margin, 1e-6))
                    for e in samplers]
    vols = np.array([e.radius ** e.dim for e in samplers])
    probs = vols / vols.sum()
    counts = rng.multinomial(n, probs)
    parts = [e.sample(c, rng) for e, c in zip(samplers, counts) if c > 0]
    P = np.concatenate(parts, axis=0)
    return P[spec.domain.contains(P)]


def sample_interface(spec, n, corner_weight=1.0, seed=0):
    """Sample interface points with prescribed normals and per-point weights.

    Counts are split across pieces proportionally to their measure. When
    corner_weight differs from 1, piece endpoints are included explicitly
    and carry that weight; all other samples weigh 1.
    """
    if not spec.interfaces:
        raise ValueError("problem has no interface")
    rng = _rng_of(seed)
    measures = np.array([p.measure() for p in spec.interfaces])
    counts = np.maximum(1, np.round(n * measures / measures.sum()).astype(int))
    pts, nrm, wts = [], [], []
    any_normals = any(p.sample(1, np.random.default_rng(0))[1] is not None
                      for p in spec.interfaces)
    for piece, c in zip(spec.interfaces, counts):
        P, N = piece.sample(c, rng)
        pts.append(P)
        wts.append(np.ones(P.shape[0]))
        if any_normals:
            nrm.append(N if N is not None else np.zeros_like(P))
        if corner_weight != 1.0:
            E, EN = piece.endpoints()
            if E.shape[0]:
                pts.append(E)
                wts.append(np.full(E.shape[0], float(corner_weight)))
                if any_normals:
                    nrm.append(EN if EN is not None else np.zeros_like(E))
    points = np.concatenate(pts, axis=0)
    normals = np.concatenate(nrm, axis=0) if any_normals else None
    weights = np.concatenate(wts, axis=0)
    return points, normals, weights
