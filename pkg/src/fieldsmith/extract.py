"""Grid evaluation, sub-level components, boundary extraction, meshing.

The shape convention everywhere: a point belongs to the shape when
f(x) <= 0, and the boundary is the zero level set.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage import measure

from .jets import field_jets


class EmptyShapeError(ValueError):
    """Raised when an operation needs a nonempty sub-level set."""


@dataclass(frozen=True)
class Grid:
    """Rectilinear evaluation grid: per-axis node counts, origin, spacing."""
    resolution: tuple
    origin: tuple
    spacing: tuple

    def __post_init__(self):
        object.__setattr__(self, "resolution",
                           tuple(int(r) for r in self.resolution))
        object.__setattr__(self, "origin",
                           tuple(float(v) for v in self.origin))
        object.__setattr__(self, "spacing",
                           tuple(float(v) for v in self.spacing))
        if any(r < 2 for r in self.resolution):
            raise ValueError("need at least 2 nodes per axis")

    @classmethod
    def cover(cls, box, resolution):
        """Inclusive grid covering an AxisBox exactly."""
        if np.isscalar(resolution):
            resolution = (int(resolution),) * box.dim
        spacing = tuple((h - l) / (r - 1) for l, h, r in
                        zip(box.lo, box.hi, resolution))
        return cls(resolution=tuple(resolution), origin=box.lo,
                   spacing=spacing)

    @classmethod
    def periodic_unit(cls, resolution, offset=None):
        """Grid on the unit torus: spacing 1/res, node 0 at `offset`."""
        if np.isscalar(resolution):
            resolution = (int(resolution),) * 2
        d = len(resolution)
        spacing = tuple(1.0 / r for r in resolution)
        origin = tuple(0.0 for _ in range(d)) if offset is None \
            else tuple(float(o) for o in offset)
        return cls(resolution=tuple(resolution), origin=origin,
                   spacing=spacing)

    @property
    def dim(self):
        return len(self.resolution)

    @property
    def shape(self):
        return self.resolution

    @property
    def node_count(self):
        return int(np.prod(self.resolution))

    def axes(self):
        return [self.origin[i] + np.arange(self.resolution[i]) * self.spacing[i]
                for i in range(self.dim)]

    def nodes(self):
        """All nodes, row-major (last axis fastest), shape (N, d)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def translated(self, offset):
        return Grid(self.resolution,
                    tuple(o + float(t) for o, t in zip(self.origin, offset)),
                    self.spacing)


def grid_eval(field, params, z, grid, batch=16384):
    """Field values at all grid nodes, returned in grid shape (row-major)."""
    nodes = grid.nodes()
    vals = np.empty(nodes.shape[0])
    for i in range(0, nodes.shape[0], batch):
        jb, _ = field_jets(field, params, nodes[i:i + batch], z=z, order=0)
        vals[i:i + batch] = jb.value
    return vals.reshape(grid.shape)


def flood_fill_components(values, grid=None):
    """Count and label face-connected components of the sub-level set
    (values <= 0) on the grid. Returns (count, labels) with labels shaped
    like values (0 = outside)."""
    mask = np.asarray(values) <= 0.0
    labels, count = ndimage.label(mask)  # default structure = face adjacency
    return int(count), labels


def extract_boundary_points(field, params, z, grid, n_target, seed,
                            values=None, f_tol=1e-6, max_bisect=80):
    """Zero-crossing points located on sign-change grid edges and refined by
    bisection until |f| <= f_tol; uniformly subsampled to n_target."""
    rng = np.random.default_rng(seed) if not isinstance(
        seed, np.random.Generator) else seed
    if values is None:
        values = grid_eval(field, params, z, grid)
    inside = values <= 0.0
    if not inside.any() or inside.all():
        raise EmptyShapeError("no zero crossing on the grid")

    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack(mesh, axis=-1)  # (*shape, d)
    lo_pts, hi_pts = [], []
    d = grid.dim
    for ax in range(d):
        sl_a = [slice(None)] * d
        sl_b = [slice(None)] * d
        sl_a[ax] = slice(None, -1)
        sl_b[ax] = slice(1, None)
        a_in = inside[tuple(sl_a)]
        b_in = inside[tuple(sl_b)]
        cross = a_in != b_in
        if not cross.any():
            continue
        ca = coords[tuple(sl_a)][cross]
        cb = coords[tuple(sl_b)][cross]
        swap = ~a_in[cross]  # orient: first point inside (f <= 0)
        ca[swap], cb[swap] = cb[swap].copy(), ca[swap].copy()
        lo_pts.append(ca)
        hi_pts.append(cb)
    if not lo_pts:
        raise EmptyShapeError("no zero crossing on the grid")
    lo = np.concatenate(lo_pts, axis=0)
    hi = np.concatenate(hi_pts, axis=0)

    if lo.shape[0] > 4 * n_target:  # refine only what we might keep
        take = rng.choice(lo.shape[0], 4 * n_target, replace=False)
        lo, hi = lo[take], hi[take]

    def f_of(P):
        jb, _ = field_jets(field, params, P, z=z, order=0)
        return jb.value

    mid = 0.5 * (lo + hi)
    fm = f_of(mid)
    for _ in range(max_bisect):
        if np.all(np.abs(fm) <= f_tol):
            break
        go_lo = fm <= 0.0
        lo[go_lo] = mid[go_lo]
        hi[~go_lo] = mid[~go_lo]
        mid = 0.5 * (lo + hi)
        fm = f_of(mid)
    keep = np.abs(fm) <= f_tol
    pts = mid[keep]
    if pts.shape[0] == 0:
        raise EmptyShapeError("bisection found no boundary points")
    if pts.shape[0] > n_target:
        pts = pts[rng.choice(pts.shape[0], n_target, replace=False)]
    return pts


@dataclass
class Mesh:
    """Vertices (V, d) and faces: triangles (M, 3) in 3D, segments (M, 2)
    in 2D."""
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)

    @property
    def empty(self):
        return self.vertices.shape[0] == 0


def marching_extract(values, grid):
    """Mesh of the zero level set by marching squares/cubes with linear
    interpolation; empty level set gives an empty mesh."""
    values = np.asarray(values, dtype=np.float64)
    d = grid.dim
    if not ((values < 0).any() and (values > 0).any()):
        return Mesh(np.zeros((0, d)), np.zeros((0, 3 if d == 3 else 2),
                                               dtype=np.int64))
    origin = np.asarray(grid.origin)
    spacing = np.asarray(grid.spacing)
    if d == 2:
        verts_all, faces_all = [], []
        off = 0
        for contour in measure.find_contours(values, 0.0):
            V = origin + contour * spacing
            n = V.shape[0]
            if n < 2:
                continue
            seg = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1) + off
            closed = np.allclose(contour[0], contour[-1])
            if closed:  # drop duplicated endpoint, close the loop
                V = V[:-1]
                n -= 1
                seg = np.stack([np.arange(n), (np.arange(n) + 1) % n],
                               axis=1) + off
            verts_all.append(V)
            faces_all.append(seg)
            off += n
        if not verts_all:
            return Mesh(np.zeros((0, 2)), np.zeros((0, 2), dtype=np.int64))
        V = np.concatenate(verts_all, axis=0)
        F = np.concatenate(faces_all, axis=0)
    elif d == 3:
        V, F, _, _ = measure.marching_cubes(values, level=0.0,
                                            spacing=tuple(spacing))
        V = V + origin
    else:
        raise ValueError("marching extraction supports 2D and 3D grids")
    good = np.array([len(set(f.tolist())) == len(f) for f in F], dtype=bool)
    return Mesh(V, F[good])


# ---------------------------------------------------------------------------
# export

def export_mesh(mesh, path):
    """Wavefront-style text: 'v x y z' vertices with 1-based 'f i j k'
    triangles (3D) or 'l i j' segments (2D)."""
    with open(path, "w") as fh:
        fh.write(f"# fieldsmith mesh: {mesh.vertices.shape[0]} vertices, "
                 f"{mesh.faces.shape[0]} elements\n")
        for v in mesh.vertices:
            coords = " ".join(format(c, ".17g") for c in v)
            fh.write(f"v {coords}\n")
        tag = "f" if mesh.vertices.shape[1] == 3 else "l"
        for f in mesh.faces:
            fh.write(tag + " " + " ".join(str(i + 1) for i in f) + "\n")


def parse_mesh(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0] == "#":
                continue
            if parts[0] == "v":
                verts.append([float(c) for c in parts[1:]])
            elif parts[0] in ("f", "l"):
                faces.append([int(i) - 1 for i in parts[1:]])
    d = len(verts[0]) if verts else 2
    k = len(faces[0]) if faces else (3 if d == 3 else 2)
    return Mesh(np.asarray(verts, dtype=np.float64).reshape(-1, d),
                np.asarray(faces, dtype=np.int64).reshape(-1, k))


def export_grid_csv(values, grid, path):
    """CSV with header x1,...,xd,f; one node per row, row-major order."""
    nodes = grid.nodes()
    vals = np.asarray(values).reshape(-1)
    if vals.shape[0] != nodes.shape[0]:
        raise ValueError("value count does not match grid node count")
    header = ",".join(f"x{i + 1}" for i in range(grid.dim)) + ",f"
    data = np.column_stack([nodes, vals])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")
