"""Problem registry: geometry, architecture, and training defaults for each
built-in task, plus the final-evaluation helpers the CLI and tests share.

Problems: obstacle2d, plateau3d, mirror1d, grayscott2d, bracket3d_smoke,
annulus_demo (the demo is driven by the diversity module, not the trainer).
"""

from dataclasses import dataclass

import numpy as np

from .geometry import (AxisBox, Ball, Segment, CircleCurve, CylinderPatch,
                       ProblemSpec, sample_interface, sample_outside_design)
from .model import Architecture, init_softplus_mlp, init_siren
from .train import RunConfig
from .jets import field_jets
from .extract import (Grid, grid_eval, flood_fill_components,
                      extract_boundary_points, EmptyShapeError)
from .losses import (interface_loss, envelope_loss, mirror_loss,
                     rd_residual_loss, gradient_floor_parts)
from . import diversity as div_mod


@dataclass
class ProblemBundle:
    name: str
    kind: str                  # "geometric" | "rd" | "demo"
    spec: ProblemSpec
    arch: Architecture
    arch_v: Architecture
    init_fn: object
    config: RunConfig
    constants: dict


# ---------------------------------------------------------------------------
# architecture plumbing

_INIT = {"softplus": init_softplus_mlp, "tanh": init_softplus_mlp,
         "sine": init_siren}


def _arch_from_dict(d):
    act = d.get("activation", "softplus")
    return Architecture(widths=tuple(d["widths"]),
                        activations=act,
                        spatial_dim=int(d["spatial_dim"]),
                        latent_dim=int(d.get("latent_dim", 0)),
                        residual=bool(d.get("residual", False)),
                        omega0=float(d.get("omega0", 1.0)),
                        periodic=bool(d.get("periodic", False)))


def _hidden(spatial, latent, widths_hidden, periodic=False):
    n0 = (2 * spatial if periodic else spatial) + latent
    return [n0] + list(widths_hidden) + [1]


# ---------------------------------------------------------------------------
# problem geometry

def obstacle_spec(literal_normals=False):
    """Domain [-1,1]x[-0.5,0.5]; design box [-0.9,0.9]x[-0.4,0.4] minus the
    r=0.1 disk at the origin; interfaces at x1 = +-0.9 spanning |x2| <= 0.4.

    Prescribed normals default to the outward-facing (+-1, 0); the literal
    flag keeps the (0, +-1) variant for comparison.
    """
    if literal_normals:
        n_left, n_right = (0.0, -1.0), (0.0, 1.0)
    else:
        n_left, n_right = (-1.0, 0.0), (1.0, 0.0)
    return ProblemSpec(
        domain=AxisBox((-1.0, -0.5), (1.0, 0.5)),
        design_box=AxisBox((-0.9, -0.4), (0.9, 0.4)),
        exclusions=[Ball((0.0, 0.0), 0.1)],
        interfaces=[Segment((-0.9, -0.4), (-0.9, 0.4), normal=n_left),
                    Segment((0.9, -0.4), (0.9, 0.4), normal=n_right)])


def plateau_spec():
    """Unit-ball-free variant: span the planar circle of radius 0.5 in the
    x3=0 plane of [-1,1]^3; the minimal surface is the flat disk."""
    box = AxisBox((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    return ProblemSpec(domain=box,
                       interfaces=[CircleCurve((0.0, 0.0, 0.0), 0.5,
                                               axis=2)])


def mirror_spec():
    return ProblemSpec(domain=AxisBox((-1.0,), (1.0,)),
                       constants={"focal": (0.0, 1.5)})


def bracket_smoke_spec():
    """Stand-in bracket geometry: box design region with two cylindrical
    attachment interfaces (the real challenge geometry is external data)."""
    dom = AxisBox((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    design = AxisBox((-0.8, -0.8, -0.8), (0.8, 0.8, 0.8))
    cyl = [CylinderPatch((-0.5, 0.0, 0.0), 0.2, 0.3, axis=2),
           CylinderPatch((0.5, 0.0, 0.0), 0.2, 0.3, axis=2)]
    return ProblemSpec(domain=dom, design_box=design, interfaces=cyl)


def rd_spec():
    return ProblemSpec(domain=AxisBox((0.0, 0.0), (1.0, 1.0)),
                       constants={"D_v": 1.2e-5, "D_u": 2.4e-5,
                                  "alpha": 0.028, "beta": 0.057})


# ---------------------------------------------------------------------------
# defaults

def _obstacle_defaults(latent_count):
    generative = latent_count > 1
    cfg = dict(
        problem="obstacle2d",
        iterations=2000,
        arch={"widths": _hidden(2, 1 if generative else 0, [128] * 4),
              "activation": "softplus", "residual": True,
              "spatial_dim": 2, "latent_dim": 1 if generative else 0},
        weights={"interface": 1.0, "envelope": 1.0, "obstacle": 1e-1,
                 "normal": 1e-2, "eikonal": 1e-2, "connectedness": 1e-5,
                 "diversity": 5e-5 if generative else 0.0},
        base_lr=1e-3, lr_half_life=1000.0, lr_warmup=150,
        latent_count=latent_count,
        # value-fitting terms settle first, then the unit-gradient prior,
        # then the topology repair once saddles exist to dig through
        activation_epochs={"eikonal": 300, "connectedness": 400},
        constants={"sample_margin": 0.02},
        metrics_every=10,
    )
    if generative:
        # per-latent batches shrink: terms run on the stacked latent set
        cfg["batches"] = {"interface": 64, "envelope": 128, "obstacle": 32,
                          "eikonal": 128}
        cfg["morse"] = {"refresh_period": 50, "warm_every": 10, "n_init": 96,
                        "grid_seed": 32, "max_iters": 60}
        cfg["diversity"] = {"kind": "min", "p": 0.5, "refresh_period": 20,
                            "n_boundary": 160, "resolution": 72}
    else:
        cfg["batches"] = {"interface": 256, "envelope": 512, "obstacle": 128,
                          "eikonal": 512}
        cfg["morse"] = {"refresh_period": 50, "warm_every": 10, "n_init": 128,
                        "grid_seed": 48, "max_iters": 80}
    return cfg


_DEFAULTS = {
    "plateau3d": lambda lc: dict(
        problem="plateau3d",
        iterations=10000,
        arch={"widths": [3, 256, 256, 256, 1], "activation": "tanh",
              "spatial_dim": 3},
        weights={"interface": 1.0, "curvature": 1.0, "eikonal": 1.0},
        activation_epochs={"curvature": 1000},
        base_lr=1e-3, lr_half_life=0.0,
        batches={"interface": 160, "eikonal": 192},
        curvature={"n_points": 128, "refresh_period": 40, "resolution": 40},
        constants={"curvature_kind": "mean"},
        metrics_every=20,
    ),
    "mirror1d": lambda lc: dict(
        problem="mirror1d",
        iterations=3000,
        arch={"widths": [1, 40, 40, 1], "activation": "tanh",
              "spatial_dim": 1},
        weights={"residual": 1.0},
        base_lr=1e-3, lr_half_life=0.0,
        batches={"residual": 128},
        constants={"focal": [0.0, 1.5]},
        metrics_every=10,
    ),
    "grayscott2d": lambda lc: dict(
        problem="grayscott2d",
        iterations=20000,
        arch={"widths": _hidden(2, 1, [256, 128], periodic=True),
              "activation": "sine", "omega0": 3.0, "periodic": True,
              "spatial_dim": 2, "latent_dim": 1},
        weights={"residual": 1.0, "gradient": 1e-4, "diversity": 1e-7},
        base_lr=1e-3, lr_half_life=0.0,
        latent_count=lc or 2,
        diversity={"kind": "min", "p": 0.5},
        constants={"D_v": 1.2e-5, "D_u": 2.4e-5, "alpha": 0.028,
                   "beta": 0.057, "grid": 64},
        metrics_every=20,
    ),
    "bracket3d_smoke": lambda lc: dict(
        problem="bracket3d_smoke",
        iterations=500,
        arch={"widths": _hidden(3, 0, [64] * 4), "activation": "sine",
              "omega0": 8.0, "spatial_dim": 3},
        weights={"interface": 1.0, "envelope": 1e-1, "normal": 1e-6,
                 "eikonal": 1e-9, "connectedness": 1e-2,
                 "curvature": 1e-8},
        activation_epochs={"connectedness": 200, "curvature": 200},
        base_lr=1e-3, lr_half_life=1000.0,
        batches={"interface": 256, "envelope": 256, "eikonal": 256},
        curvature={"n_points": 128, "refresh_period": 25, "resolution": 32},
        morse={"refresh_period": 50, "warm_every": 10, "n_init": 512,
               "grid_seed": 16, "max_iters": 60},
        constants={"curvature_kind": "strain"},
        metrics_every=10,
    ),
    "annulus_demo": lambda lc: dict(
        problem="annulus_demo",
        iterations=600,
        constants={"n_points": 20, "kind": "min", "p": 0.5, "lr": 2e-3},
    ),
}


def default_config(problem, **overrides):
    """Problem defaults merged with overrides (dict fields merge one level
    deep). Unknown problem names raise ValueError."""
    lc = overrides.get("latent_count", 0)
    if problem == "obstacle2d":
        base = _obstacle_defaults(lc or 1)
    elif problem in _DEFAULTS:
        base = _DEFAULTS[problem](lc)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    for k, v in overrides.items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            base[k] = {**base[k], **v}
        else:
            base[k] = v
    return RunConfig.from_dict(base)


_SPECS = {
    "obstacle2d": obstacle_spec,
    "plateau3d": plateau_spec,
    "mirror1d": mirror_spec,
    "grayscott2d": rd_spec,
    "bracket3d_smoke": bracket_smoke_spec,
}


def build(config):
    """Resolve a RunConfig into a ProblemBundle ready for a trainer."""
    name = config.problem
    if name == "annulus_demo":
        raise ValueError("annulus_demo is driven by the demo command, "
                         "not the trainer")
    if name not in _SPECS:
        raise ValueError(f"unknown problem {name!r}")
    if config.arch is None:
        config.arch = default_config(
            name, latent_count=config.latent_count).arch
    literal = bool(config.constants.get("literal_normals", False))
    spec = (obstacle_spec(literal) if name == "obstacle2d"
            else _SPECS[name]())
    kind = "rd" if name == "grayscott2d" else "geometric"
    arch = _arch_from_dict(config.arch)
    init_fn = _INIT[arch.activations[0] if arch.activations[0] != "identity"
                    else "softplus"]
    consts = dict(spec.constants)
    consts.update(config.constants or {})
    config.constants = consts
    return ProblemBundle(name=name, kind=kind, spec=spec, arch=arch,
                         arch_v=arch if kind == "rd" else None,
                         init_fn=init_fn, config=config, constants=consts)


# ---------------------------------------------------------------------------
# final evaluation helpers (fresh batches, fixed seeds)

def eval_obstacle(inst, spec, z=None, resolution=(201, 101), n_batch=4096,
                  touch_tol=0.021):
    """Fresh interface/envelope losses, flood-fill component count, and
    whether one component touches both interface walls."""
    rng = np.random.default_rng(987)
    P, _, Wt = sample_interface(spec, n_batch, seed=rng)
    li = interface_loss(inst, P, weights=Wt, z=z)
    le = envelope_loss(inst, sample_outside_design(spec, n_batch, rng), z=z)
    grid = Grid.cover(spec.domain, resolution)
    vals = grid_eval(inst, None, z, grid)
    count, labels = flood_fill_components(vals)
    touch = _touches_both(spec, grid, labels, touch_tol)
    return {"interface": float(li), "envelope": float(le),
            "components": int(count), "touches_both": bool(touch)}


def _touches_both(spec, grid, labels, tol):
    nodes = grid.nodes()
    lab = labels.reshape(-1)
    hit = []
    for seg in spec.interfaces:
        a = np.asarray(seg.a)
        b = np.asarray(seg.b)
        t = np.clip(((nodes - a) @ (b - a)) / ((b - a) @ (b - a)), 0.0, 1.0)
        dist = np.linalg.norm(nodes - (a + t[:, None] * (b - a)), axis=1)
        near = lab[(dist <= tol) & (lab > 0)]
        hit.append(set(near.tolist()))
    if not hit or any(not h for h in hit):
        return False
    common = set.intersection(*hit)
    return len(common) > 0


def eval_mirror(inst, focal=(0.0, 1.5), n=512):
    """Ray loss on a fresh uniform batch plus the R^2 of a least-squares
    quadratic fit of the learned height function."""
    xs = np.linspace(-1.0, 1.0, n)
    loss = mirror_loss(inst, xs, np.asarray(focal, dtype=np.float64))
    jb, _ = field_jets(inst, None, xs[:, None], order=0)
    h = jb.value
    A = np.stack([xs * xs, xs, np.ones_like(xs)], axis=1)
    coef, *_ = np.linalg.lstsq(A, h, rcond=None)
    resid = h - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((h - h.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / max(ss_tot, 1e-300)
    return {"ray_loss": float(loss), "r2": float(r2),
            "quad_coef": [float(c) for c in coef]}


def eval_plateau(inst, spec, resolution=64, n_points=2000):
    """Max |mean curvature| on sampled zero-set points and the max deviation
    of the zero set from the x3=0 plane."""
    grid = Grid.cover(spec.domain, (resolution,) * 3)
    P = extract_boundary_points(inst, None, None, grid, n_points, seed=11)
    jb, _ = field_jets(inst, None, P, order=2)
    g = jb.grad
    H = jb.hess
    gn = np.maximum(np.linalg.norm(g, axis=1), 1e-12)
    tr = np.trace(H, axis1=1, axis2=2)
    ghg = np.einsum("bi,bij,bj->b", g, H, g)
    kH = (tr - ghg / gn ** 2) / gn
    return {"max_abs_kH": float(np.abs(kH).max()),
            "max_plane_dev": float(np.abs(P[:, 2]).max()),
            "n_surface": int(P.shape[0])}


def eval_rd(u_inst, v_inst, z, constants, res=64, render=256):
    """Stationary residual and gradient energy on the canonical (offset 0)
    grid, plus render checks at high resolution: finite, bounded, 1-periodic."""
    grid = Grid.periodic_unit(res)
    L_u, L_v = rd_residual_loss(u_inst, v_inst, grid, constants, z=z)
    u = grid_eval(u_inst, None, z, grid)
    v = grid_eval(v_inst, None, z, grid)
    _, G, _, _ = gradient_floor_parts(u, v, grid.spacing[0])
    big = Grid.periodic_unit(render)
    ub = grid_eval(u_inst, None, z, big)
    vb = grid_eval(v_inst, None, z, big)
    xs = np.linspace(0.0, 1.0, 129)
    line = np.stack([xs, np.zeros_like(xs)], axis=1)
    per = []
    for inst in (u_inst, v_inst):
        a, _ = field_jets(inst, None, line, z=z, order=0)
        b, _ = field_jets(inst, None, line + np.array([1.0, 0.0]), z=z,
                          order=0)
        c, _ = field_jets(inst, None, line[:, ::-1], z=z, order=0)
        d, _ = field_jets(inst, None, line[:, ::-1] + np.array([0.0, 1.0]),
                          z=z, order=0)
        per.append(max(np.abs(a.value - b.value).max(),
                       np.abs(c.value - d.value).max()))
    return {"L_u": float(L_u), "L_v": float(L_v), "G": float(G),
            "finite": bool(np.isfinite(ub).all() and np.isfinite(vb).all()),
            "max_abs": float(max(np.abs(ub).max(), np.abs(vb).max())),
            "periodicity": float(max(per))}


def eval_delta(inst, latents, spec, n_boundary=256, resolution=96, p=0.5):
    """Diversity of the latent solution set, recomputed from scratch the way
    the trainer measures it (boundary extraction + pairwise distances)."""
    grid = Grid.cover(spec.domain, (resolution,) * spec.domain.dim)
    bnds, live = [], []
    for i, z in enumerate(latents):
        try:
            bnds.append(extract_boundary_points(inst, None, float(z), grid,
                                                n_boundary, seed=5 + i))
            live.append(i)
        except EmptyShapeError:
            pass
    if len(live) < 2:
        return {"delta": 0.0, "live": len(live)}
    zs = [float(latents[i]) for i in live]

    def evaluate(k, X):
        jb, _ = field_jets(inst, None, X, z=zs[k], order=0)
        return jb.value

    D = div_mod.pairwise_distances(evaluate, bnds)
    return {"delta": float(div_mod.diversity_min(D, p)), "live": len(live)}


def routes_both_sides(inst, latents, probe=0.25):
    """Is there a latent whose shape passes above the obstacle and one that
    passes below? Checks f(0, +-probe; z) < 0 across the latent set."""
    above = below = False
    for z in latents:
        jb, _ = field_jets(inst, None,
                           np.array([[0.0, probe], [0.0, -probe]]),
                           z=float(z), order=0)
        above |= jb.value[0] < 0
        below |= jb.value[1] < 0
    return bool(above and below)
