"""Critical-point machinery for implicit fields: detection, classification,
integral-path tracing, the surface network, sub-level component labeling,
and the connectedness penalty that pulls separated components together.

The penalty works on a small weighted graph, so the expensive part is
finding the critical points. Detection runs a batched Adam descent on
the squared gradient norm followed by a guarded Newton polish; plain
first-order descent plateaus well above the gradient tolerance, the
Newton steps close the remaining gap in a handful of iterations.
"""

import heapq
import logging
from dataclasses import dataclass, field as dc_field

import numpy as np
from sklearn.cluster import DBSCAN

from .jets import field_jets

log = logging.getLogger(__name__)
_empty_warned = False

DEFAULT_G_TOL = 1e-5
DEFAULT_EIG_TOL = 1e-8
DEFAULT_EPS = 1e-6


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    grad_norm: float
    eigvals: np.ndarray   # ascending
    eigvecs: np.ndarray   # columns match eigvals
    index: int            # negative eigenvalue count
    degenerate: bool

    @property
    def dim(self):
        return self.location.shape[0]

    @property
    def is_saddle(self):
        return 0 < self.index < self.dim and not self.degenerate


@dataclass
class NetworkNode:
    kind: str             # "critical" | "candidate" | "exit"
    location: np.ndarray
    value: float
    index: int = -1       # -1 when no Hessian (exit nodes)
    degenerate: bool = False
    cp: CriticalPoint = None

    @property
    def is_saddle(self):
        d = self.location.shape[0]
        return 0 < self.index < d and not self.degenerate


@dataclass
class NetworkEdge:
    a: int                # saddle node id
    b: int                # terminal node id
    polyline: np.ndarray
    euclid: float
    arclength: float


@dataclass
class SurfaceNetwork:
    nodes: list
    edges: list
    unresolved: int = 0   # paths dropped at max_steps


@dataclass
class AugmentedGraph:
    nodes: list
    weights: np.ndarray   # dense (n, n), np.inf where absent
    labels: np.ndarray    # component id per node, -1 for f > 0
    surface_edges: list   # (a, b) pairs
    aug_pairs: list       # (a, b) pairs added between f > 0 nodes

    @property
    def component_count(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass
class ConnectednessReport:
    count: int
    penalties: np.ndarray        # per node, sums to 1 when loss active
    loss: float
    eligible: list               # node ids that could accrue penalty
    pair_routes: list            # (ci, cj, k, via distance)
    skipped_pairs: list          # (ci, cj) with no finite route


@dataclass
class Options:
    """Knobs for the detection/tracing pipeline, resolution-style defaults
    derived from the domain size."""
    n_init: int = None
    g_tol: float = DEFAULT_G_TOL
    eig_tol: float = DEFAULT_EIG_TOL
    max_iters: int = 500
    adam_lr: float = 1e-3
    newton_steps: int = 15
    path_h: float = None
    snap_radius: float = None
    dbscan_eps: float = None
    max_path_steps: int = 800
    eps: float = DEFAULT_EPS
    use_arclength: bool = False
    warm_iters: int = 30
    grid_seed: int = None  # per-axis scan resolution, 0 disables

    @staticmethod
    def for_domain(domain, **overrides):
        opts = Options(**overrides)
        d = domain.dim
        if opts.n_init is None:
            opts.n_init = 1024 if d <= 2 else 4096
        if opts.path_h is None:
            opts.path_h = domain.diagonal / 200.0
        if opts.snap_radius is None:
            opts.snap_radius = 3.0 * opts.path_h
        if opts.dbscan_eps is None:
            opts.dbscan_eps = 2.0 * opts.path_h
        return opts


# ---------------------------------------------------------------------------
# detection

def classify(eigvals, eig_tol=DEFAULT_EIG_TOL):
    """(index, degenerate): count of eigenvalues below -eig_tol, and whether
    any sits inside the tolerance band around zero."""
    ev = np.asarray(eigvals, dtype=np.float64)
    index = int(np.sum(ev < -eig_tol))
    degenerate = bool(np.any(np.abs(ev) <= eig_tol))
    return index, degenerate


def _grad_norms(field, params, z, X):
    jets, _ = field_jets(field, params, X, z=z, order=2)
    g = jets.grad
    return jets, np.linalg.norm(g, axis=1)


def _grid_seeds(field, params, z, domain, res, cap=512):
    """Grid nodes where the gradient norm is a 3^d-neighborhood minimum.

    Saddles of soft-min style fields sit on thin ridges that random
    candidates rarely hit; a coarse scan for local minima of |grad f|
    lands starters on every ridge deterministically.
    """
    from scipy.ndimage import minimum_filter
    from .extract import Grid
    d = domain.dim
    grid = Grid.cover(domain, (res,) * d)
    P = grid.nodes()
    gn = np.empty(P.shape[0])
    chunk = 16384
    for s in range(0, P.shape[0], chunk):
        jets, _ = field_jets(field, params, P[s:s + chunk], z=z, order=1)
        gn[s:s + chunk] = np.linalg.norm(jets.grad, axis=1)
    G = gn.reshape(grid.resolution)
    mask = (G == minimum_filter(G, size=3, mode="nearest")).ravel()
    seeds = P[mask]
    if seeds.shape[0] > cap:
        seeds = seeds[np.argsort(gn[mask], kind="stable")[:cap]]
    return seeds


def _newton_polish(field, params, z, X, domain, g_tol, steps):
    """Damped Newton iterations on grad = 0. A step is kept only when it
    stays inside the domain and strictly shrinks the gradient norm."""
    jets, gn = _grad_norms(field, params, z, X)
    for _ in range(steps):
        live = gn > 1e-13
        if not live.any():
            break
        g = jets.grad[live]
        H = jets.hess[live]
        try:
            dx = np.linalg.solve(H, -g[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            dx = np.array([np.linalg.lstsq(Hi, -gi, rcond=None)[0]
                           for Hi, gi in zip(H, g)])
        idx = np.flatnonzero(live)
        accepted = np.zeros(idx.size, dtype=bool)
        scale = 1.0
        for _try in range(4):
            todo = ~accepted
            if not todo.any():
                break
            trial = X[idx[todo]] + scale * dx[todo]
            inside = domain.contains(trial)
            tj, tgn = _grad_norms(field, params, z,
                                  np.clip(trial, domain.lo, domain.hi))
            ok = inside & (tgn < gn[idx[todo]])
            sel = idx[todo][ok]
            X[sel] = trial[ok]
            gn[sel] = tgn[ok]
            jets.raw[sel] = tj.raw[ok]
            acc = accepted.copy()
            acc[np.flatnonzero(todo)[ok]] = True
            accepted = acc
            scale *= 0.5
        if not accepted.any():
            break
    return X, jets, gn


def find_critical_points(field, params=None, z=None, domain=None,
                         n_init=None, seed=0, g_tol=DEFAULT_G_TOL,
                         max_iters=500, dbscan_eps=None,
                         eig_tol=DEFAULT_EIG_TOL, adam_lr=1e-3,
                         newton_steps=15, init_points=None, grid_seed=None):
    """Detect critical points of the field inside an axis box.

    Batched Adam minimizes the squared gradient norm from n_init random
    starts (or the supplied warm-start locations), a Newton polish drives
    survivors to the tolerance, then DBSCAN merges duplicates and the
    member with the smallest gradient norm represents each cluster. A
    coarse grid scan adds starters at local minima of the gradient norm
    so thin saddle ridges are not missed.
    """
    if domain is None:
        raise ValueError("domain required")
    d = domain.dim
    opts = Options.for_domain(domain, g_tol=g_tol, eig_tol=eig_tol,
                              max_iters=max_iters, adam_lr=adam_lr,
                              newton_steps=newton_steps)
    if dbscan_eps is not None:
        opts.dbscan_eps = dbscan_eps
    if init_points is not None:
        X = np.array(init_points, dtype=np.float64).reshape(-1, d)
    else:
        n = n_init if n_init is not None else opts.n_init
        if n < 1:
            raise ValueError("n_init must be >= 1")
        X = domain.sample(n, np.random.default_rng(seed))
        if grid_seed is None:
            grid_seed = 64 if d <= 2 else 24
        if grid_seed:
            X = np.vstack([X, _grid_seeds(field, params, z, domain,
                                          grid_seed)])
    if X.shape[0] == 0:
        return []

    m = np.zeros_like(X)
    v = np.zeros_like(X)
    b1, b2, ea = 0.9, 0.999, 1e-8
    for t in range(1, opts.max_iters + 1):
        jets, _ = field_jets(field, params, X, z=z, order=2)
        # gradient of |grad f|^2 is 2 H g, batched over candidates
        g = 2.0 * np.einsum("bij,bj->bi", jets.hess, jets.grad)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        X = domain.clip(X - opts.adam_lr * mh / (np.sqrt(vh) + ea))
        if t % 50 == 0:
            gn = np.linalg.norm(jets.grad, axis=1)
            if np.all(gn <= 0.5 * g_tol):
                break

    X, jets, gn = _newton_polish(field, params, z, X, domain, g_tol,
                                 opts.newton_steps)
    keep = (gn <= g_tol) & domain.contains(X, pad=1e-9)
    if not keep.any():
        return []
    X, gn = X[keep], gn[keep]
    H = jets.hess[keep]
    vals = jets.value[keep]

    labels = DBSCAN(eps=opts.dbscan_eps, min_samples=1).fit(X).labels_
    points = []
    for lbl in np.unique(labels):
        members = np.flatnonzero(labels == lbl)
        rep = members[np.argmin(gn[members])]
        ev, evec = np.linalg.eigh(0.5 * (H[rep] + H[rep].T))
        index, degen = classify(ev, eig_tol)
        points.append(CriticalPoint(location=X[rep].copy(),
                                    value=float(vals[rep]),
                                    grad_norm=float(gn[rep]),
                                    eigvals=ev, eigvecs=evec,
                                    index=index, degenerate=degen))
    order = np.lexsort(tuple(np.array([p.location[k] for p in points])
                             for k in reversed(range(d)))
                       + (np.array([p.value for p in points]),))
    return [points[i] for i in order]


# ---------------------------------------------------------------------------
# integral paths

@dataclass
class PathResult:
    saddle: int           # index into the critical-point list
    kind: str             # "node" | "candidate" | "exit" | "unresolved"
    target: int           # known-point index when kind == "node"
    end: np.ndarray
    end_value: float
    polyline: np.ndarray


def _trace_batch(field, params, z, starts, descend, origins, known_locs,
                 domain, h, snap_radius, max_steps, g_tol):
    P, d = starts.shape
    X = starts.copy()
    alive = np.ones(P, dtype=bool)
    escaped = np.zeros(P, dtype=bool)  # left the origin saddle's snap ball
    kind = np.array(["unresolved"] * P, dtype=object)
    target = np.full(P, -1, dtype=np.int64)
    end = starts.copy()
    end_val = np.zeros(P)
    lines = [[starts[i].copy()] for i in range(P)]

    for _step in range(max_steps):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        jets, _ = field_jets(field, params, X[idx], z=z, order=1)
        g = jets.grad
        gn = np.linalg.norm(g, axis=1)
        fv = jets.value

        if known_locs.shape[0]:
            dist = np.linalg.norm(X[idx][:, None, :] - known_locs[None], axis=2)
            dist[np.arange(idx.size), origins[idx]] = np.where(
                escaped[idx], dist[np.arange(idx.size), origins[idx]], np.inf)
            nearest = np.argmin(dist, axis=1)
            snapped = dist[np.arange(idx.size), nearest] <= snap_radius
        else:
            nearest = np.zeros(idx.size, dtype=np.int64)
            snapped = np.zeros(idx.size, dtype=bool)
        flat = (~snapped) & (gn <= g_tol)

        for j, i in enumerate(idx):
            if snapped[j]:
                kind[i] = "node"
                target[i] = nearest[j]
                end[i] = known_locs[nearest[j]]
                end_val[i] = fv[j]
                alive[i] = False
            elif flat[j]:
                kind[i] = "candidate"
                end[i] = X[i].copy()
                end_val[i] = fv[j]
                alive[i] = False
        if not alive.any():
            break

        idx2 = np.flatnonzero(alive)
        sub = np.isin(idx, idx2)
        step = g[sub] / np.maximum(gn[sub], 1e-30)[:, None] * h
        nxt = X[idx2] - np.where(descend[idx2, None], step, -step)
        far = np.linalg.norm(nxt - known_locs[origins[idx2]], axis=1) \
            > snap_radius
        escaped[idx2] |= far
        out = ~domain.contains(nxt)
        for j, i in enumerate(idx2):
            if out[j]:
                kind[i] = "exit"
                end[i] = np.clip(nxt[j], domain.lo, domain.hi)
                end_val[i] = fv[sub][j]
                alive[i] = False
            else:
                X[i] = nxt[j]
                lines[i].append(nxt[j].copy())

    results = []
    for i in range(P):
        results.append(dict(kind=str(kind[i]), target=int(target[i]),
                            end=end[i], end_value=float(end_val[i]),
                            polyline=np.array(lines[i])))
    return results


def trace_integral_path(field, saddle, eig_index, sign, h, max_steps,
                        snap_radius, domain, known, params=None, z=None,
                        g_tol=DEFAULT_G_TOL, saddle_id=0):
    """Trace one path from a saddle along +/- an eigenvector. Descends when
    the eigenvalue is negative, ascends otherwise; terminates on snapping
    to a known point, on a flat spot (new candidate), or on domain exit."""
    vec = saddle.eigvecs[:, eig_index]
    lam = saddle.eigvals[eig_index]
    start = saddle.location + sign * h * vec
    locs = np.array([p.location for p in known])
    res = _trace_batch(field, params, z, start[None], np.array([lam < 0.0]),
                       np.array([saddle_id]), locs, domain, h, snap_radius,
                       max_steps, g_tol)[0]
    return PathResult(saddle=saddle_id, kind=res["kind"], target=res["target"],
                      end=res["end"], end_value=res["end_value"],
                      polyline=res["polyline"])


def trace_all(field, criticals, domain, opts, params=None, z=None):
    """All integral paths from every saddle: one per eigenvector per sign,
    traced as a single batch."""
    starts, descend, origins, meta = [], [], [], []
    for ci, cp in enumerate(criticals):
        if not cp.is_saddle:
            continue
        for k in range(cp.dim):
            for sign in (+1.0, -1.0):
                starts.append(cp.location + sign * opts.path_h
                              * cp.eigvecs[:, k])
                descend.append(cp.eigvals[k] < 0.0)
                origins.append(ci)
                meta.append(ci)
    if not starts:
        return []
    locs = np.array([p.location for p in criticals])
    raw = _trace_batch(field, params, z, np.array(starts),
                       np.array(descend), np.array(origins), locs, domain,
                       opts.path_h, opts.snap_radius, opts.max_path_steps,
                       opts.g_tol)
    return [PathResult(saddle=meta[i], kind=r["kind"], target=r["target"],
                       end=r["end"], end_value=r["end_value"],
                       polyline=r["polyline"])
            for i, r in enumerate(raw)]


# ---------------------------------------------------------------------------
# network assembly

def _greedy_clusters(points, eps):
    reps = []
    assign = []
    for p in points:
        hit = -1
        for r, loc in enumerate(reps):
            if np.linalg.norm(p - loc) <= eps:
                hit = r
                break
        if hit < 0:
            reps.append(p.copy())
            hit = len(reps) - 1
        assign.append(hit)
    return reps, assign


def build_surface_network(criticals, paths, opts, field=None, params=None,
                          z=None):
    """Assemble nodes (critical points, new flat-spot candidates, clustered
    domain exits) and one edge per resolved path."""
    nodes = [NetworkNode(kind="critical", location=cp.location,
                         value=cp.value, index=cp.index,
                         degenerate=cp.degenerate, cp=cp)
             for cp in criticals]
    cand = [p for p in paths if p.kind == "candidate"]
    exits = [p for p in paths if p.kind == "exit"]
    unresolved = sum(1 for p in paths if p.kind == "unresolved")

    cand_ids = {}
    if cand:
        reps, assign = _greedy_clusters([p.end for p in cand],
                                        opts.snap_radius)
        base = len(nodes)
        for r, loc in enumerate(reps):
            first = next(p for i, p in enumerate(cand) if assign[i] == r)
            index, degen = -1, False
            val = first.end_value
            if field is not None:
                jets, _ = field_jets(field, params, loc[None], z=z, order=2)
                val = float(jets.value[0])
                ev = np.linalg.eigh(0.5 * (jets.hess[0] + jets.hess[0].T))[0]
                index, degen = classify(ev, opts.eig_tol)
            nodes.append(NetworkNode(kind="candidate", location=loc,
                                     value=val, index=index,
                                     degenerate=degen))
        for i, p in enumerate(cand):
            cand_ids[id(p)] = base + assign[i]

    exit_ids = {}
    if exits:
        reps, assign = _greedy_clusters([p.end for p in exits],
                                        2.0 * opts.snap_radius)
        base = len(nodes)
        for r, loc in enumerate(reps):
            first = next(p for i, p in enumerate(exits) if assign[i] == r)
            nodes.append(NetworkNode(kind="exit", location=loc,
                                     value=first.end_value))
        for i, p in enumerate(exits):
            exit_ids[id(p)] = base + assign[i]

    edges = []
    for p in paths:
        if p.kind == "node":
            b = p.target
        elif p.kind == "candidate":
            b = cand_ids[id(p)]
        elif p.kind == "exit":
            b = exit_ids[id(p)]
        else:
            continue
        seg = np.diff(p.polyline, axis=0)
        arc = float(np.sum(np.linalg.norm(seg, axis=1))) if len(seg) else 0.0
        euclid = float(np.linalg.norm(nodes[p.saddle].location
                                      - nodes[b].location))
        edges.append(NetworkEdge(a=p.saddle, b=b, polyline=p.polyline,
                                 euclid=euclid, arclength=arc))
    return SurfaceNetwork(nodes=nodes, edges=edges, unresolved=unresolved)


def label_components(network):
    """Connected components of the f <= 0 node subgraph: labels per node
    (-1 where f > 0) and the component count."""
    n = len(network.nodes)
    inside = np.array([nd.value <= 0.0 for nd in network.nodes])
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in network.edges:
        if inside[e.a] and inside[e.b]:
            ra, rb = find(e.a), find(e.b)
            if ra != rb:
                parent[ra] = rb
    labels = np.full(n, -1, dtype=np.int64)
    next_id = 0
    roots = {}
    for i in range(n):
        if not inside[i]:
            continue
        r = find(i)
        if r not in roots:
            roots[r] = next_id
            next_id += 1
        labels[i] = roots[r]
    return labels, next_id


def augment_graph(network, labels, use_arclength=False):
    """Weight the surface edges (0 inside a component, distance otherwise)
    and add a complete Euclidean subgraph over the f > 0 nodes."""
    n = len(network.nodes)
    W = np.full((n, n), np.inf)
    np.fill_diagonal(W, 0.0)
    surface = []
    for e in network.edges:
        same = labels[e.a] >= 0 and labels[e.a] == labels[e.b]
        w = 0.0 if same else (e.arclength if use_arclength else e.euclid)
        if w < W[e.a, e.b]:
            W[e.a, e.b] = W[e.b, e.a] = w
        surface.append((e.a, e.b))
    outside = np.flatnonzero(labels < 0)
    aug = []
    for i_, a in enumerate(outside):
        for b in outside[i_ + 1:]:
            w = float(np.linalg.norm(network.nodes[a].location
                                     - network.nodes[b].location))
            if w < W[a, b]:
                W[a, b] = W[b, a] = w
            aug.append((int(a), int(b)))
    return AugmentedGraph(nodes=network.nodes, weights=W, labels=labels,
                          surface_edges=surface, aug_pairs=aug)


def _dijkstra_multi(W, sources):
    n = W.shape[0]
    dist = np.full(n, np.inf)
    pq = []
    for s in sources:
        dist[s] = 0.0
        heapq.heappush(pq, (0.0, int(s)))
    nbrs = [np.flatnonzero(np.isfinite(W[i]) & (np.arange(n) != i))
            for i in range(n)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist[u]:
            continue
        for v in nbrs[u]:
            nd = d + W[u, v]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(pq, (nd, int(v)))
    return dist


def connectedness_loss(augmented, field=None, params=None, z=None,
                       eps=DEFAULT_EPS):
    """Penalty distribution over saddle/exit nodes sitting between
    sub-level components, inversely proportional to the via-distance of
    each component pair; the loss is the penalty-weighted sum of f there.

    Node positions are constants here; only the field values at them carry
    gradient, which the trainer applies through a value-seeded term.
    """
    labels = augmented.labels
    n = len(augmented.nodes)
    count = augmented.component_count
    penalties = np.zeros(n)
    global _empty_warned
    if n > 0:
        _empty_warned = False
    if count <= 1:
        if n == 0:
            # warn once per transition to empty, then demote to debug
            if not _empty_warned:
                log.warning("connectedness: empty surface network, loss 0")
                _empty_warned = True
            else:
                log.debug("connectedness: empty surface network, loss 0")
        return ConnectednessReport(count=count, penalties=penalties,
                                   loss=0.0, eligible=[], pair_routes=[],
                                   skipped_pairs=[])

    adjacent = np.zeros(n, dtype=bool)
    for a, b in augmented.surface_edges:
        if labels[b] >= 0:
            adjacent[a] = True
        if labels[a] >= 0:
            adjacent[b] = True
    eligible = [k for k in range(n)
                if labels[k] < 0 and adjacent[k]
                and (augmented.nodes[k].kind == "exit"
                     or augmented.nodes[k].is_saddle)]

    dists = [_dijkstra_multi(augmented.weights,
                             np.flatnonzero(labels == c))
             for c in range(count)]
    pair_routes, skipped = [], []
    for ci in range(count):
        for cj in range(ci + 1, count):
            found = False
            for k in eligible:
                d = dists[ci][k] + dists[cj][k]
                if np.isfinite(d):
                    penalties[k] += 1.0 / (d + eps)
                    pair_routes.append((ci, cj, k, float(d)))
                    found = True
            if not found:
                skipped.append((ci, cj))
                log.warning("connectedness: no route between components "
                            "%d and %d", ci, cj)

    total = penalties.sum()
    if total > 0:
        penalties /= total
    if field is not None and total > 0:
        locs = np.array([augmented.nodes[k].location
                         for k in np.flatnonzero(penalties > 0)])
        jets, _ = field_jets(field, params, locs, z=z, order=0)
        vals = jets.value
    else:
        vals = np.array([augmented.nodes[k].value
                         for k in np.flatnonzero(penalties > 0)])
    loss = float(np.dot(penalties[penalties > 0], vals)) if total > 0 else 0.0
    return ConnectednessReport(count=count, penalties=penalties, loss=loss,
                               eligible=eligible, pair_routes=pair_routes,
                               skipped_pairs=skipped)


# ---------------------------------------------------------------------------
# one-call pipeline and the trainer-facing cache

@dataclass
class MorseAnalysis:
    criticals: list
    network: SurfaceNetwork
    labels: np.ndarray
    count: int
    augmented: AugmentedGraph
    report: ConnectednessReport


def analyze_field(field, params=None, z=None, domain=None, opts=None,
                  seed=0, init_points=None, max_iters=None):
    """Full pipeline: critical points -> paths -> network -> labels ->
    augmented graph -> connectedness report."""
    opts = opts or Options.for_domain(domain)
    cps = find_critical_points(
        field, params, z, domain, n_init=opts.n_init, seed=seed,
        g_tol=opts.g_tol, max_iters=max_iters or opts.max_iters,
        dbscan_eps=opts.dbscan_eps, eig_tol=opts.eig_tol,
        adam_lr=opts.adam_lr, newton_steps=opts.newton_steps,
        init_points=init_points, grid_seed=opts.grid_seed)
    paths = trace_all(field, cps, domain, opts, params=params, z=z)
    net = build_surface_network(cps, paths, opts, field=field,
                                params=params, z=z)
    labels, count = label_components(net)
    aug = augment_graph(net, labels, opts.use_arclength)
    report = connectedness_loss(aug, eps=opts.eps)
    return MorseAnalysis(criticals=cps, network=net, labels=labels,
                         count=count, augmented=aug, report=report)


@dataclass
class MorseState:
    points: list = dc_field(default_factory=list)
    last_full: int = -1


def cached_refresh(state, epoch, refresh_period, field, params=None,
                   z=None, domain=None, opts=None, seed=0):
    """Critical points with a warm-start cadence: full re-initialization at
    epochs 0, refresh_period, 2*refresh_period, ...; in between, the
    previous locations are re-descended on a short budget."""
    opts = opts or Options.for_domain(domain)
    state = state or MorseState()
    full = (refresh_period <= 0 or epoch % refresh_period == 0
            or not state.points)
    if full:
        analysis = analyze_field(field, params, z, domain, opts,
                                 seed=seed + epoch)
        state.last_full = epoch
    else:
        init = np.array([p.location for p in state.points])
        analysis = analyze_field(field, params, z, domain, opts,
                                 init_points=init,
                                 max_iters=opts.warm_iters)
    state.points = analysis.criticals
    return state, analysis


def export_network(analysis, outdir):
    """CSV dump of nodes/edges plus a plain-text description, for the
    command-line inspection path."""
    import os
    os.makedirs(outdir, exist_ok=True)
    nodes = analysis.network.nodes
    d = nodes[0].location.shape[0] if nodes else 0
    head = ["id", "kind"] + [f"x{k + 1}" for k in range(d)] \
        + ["f", "index", "label", "penalty"]
    with open(os.path.join(outdir, "nodes.csv"), "w") as fh:
        fh.write(",".join(head) + "\n")
        for i, nd in enumerate(nodes):
            xs = ",".join("%.17g" % v for v in nd.location)
            fh.write(f"{i},{nd.kind},{xs},{nd.value:.17g},{nd.index},"
                     f"{analysis.labels[i]},"
                     f"{analysis.report.penalties[i]:.17g}\n")
    with open(os.path.join(outdir, "edges.csv"), "w") as fh:
        fh.write("a,b,kind,weight\n")
        for e in analysis.network.edges:
            w = analysis.augmented.weights[e.a, e.b]
            fh.write(f"{e.a},{e.b},surface,{w:.17g}\n")
        for a, b in analysis.augmented.aug_pairs:
            fh.write(f"{a},{b},augmentation,"
                     f"{analysis.augmented.weights[a, b]:.17g}\n")
    with open(os.path.join(outdir, "graph.txt"), "w") as fh:
        fh.write(f"nodes: {len(nodes)}\n"
                 f"surface edges: {len(analysis.network.edges)}\n"
                 f"augmentation pairs: {len(analysis.augmented.aug_pairs)}\n"
                 f"components: {analysis.count}\n"
                 f"unresolved paths: {analysis.network.unresolved}\n"
                 f"connectedness loss: {analysis.report.loss:.17g}\n"
                 f"skipped pairs: {len(analysis.report.skipped_pairs)}\n")
