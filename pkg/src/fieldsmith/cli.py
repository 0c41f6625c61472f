"""Command-line entry point.

Subcommands: train, mesh, morse, demo, eval. Exit codes: 0 success,
1 configuration error (bad file, unknown problem, refused run directory),
2 runtime failure.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .config import ConfigError, load_config, dump_config
from .train import train_run, RunConfig
from .model import load_checkpoint
from .extract import (Grid, grid_eval, marching_extract, export_mesh,
                      export_grid_csv)
from . import morse as morse_mod
from . import diversity as div_mod
from . import problems

log = logging.getLogger("fieldsmith")


def _build_parser():
    ap = argparse.ArgumentParser(prog="fieldsmith")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a field per a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", default=None,
                   help="run directory (overrides the config)")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--resume", default=None,
                   help="checkpoint file to continue from")

    m = sub.add_parser("mesh", help="zero-set mesh from a checkpoint")
    m.add_argument("checkpoint")
    m.add_argument("--out", default=None, help="output path (.obj text)")
    m.add_argument("--resolution", type=int, default=128)
    m.add_argument("--z", type=float, default=None)
    m.add_argument("--latent-index", type=int, default=None)

    g = sub.add_parser("morse", help="critical-point graph from a checkpoint")
    g.add_argument("checkpoint")
    g.add_argument("--out", default=None, help="output directory")
    g.add_argument("--z", type=float, default=None)
    g.add_argument("--latent-index", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("demo", help="small self-contained demonstrations")
    d.add_argument("which", choices=["annulus", "mirror"])
    d.add_argument("--out", default=None, help="output directory")
    d.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("eval", help="problem metrics for a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--resolution", type=int, default=None)
    e.add_argument("--z", type=float, default=None)
    e.add_argument("--latent-index", type=int, default=None)
    return ap


# ---------------------------------------------------------------------------
# checkpoint plumbing shared by mesh/morse/eval

def _open_checkpoint(path, z_flag, latent_index):
    instances, arrays, extra = load_checkpoint(path)
    cfg = RunConfig.from_dict(extra["config"])
    bundle = problems.build(cfg)
    z = None
    if z_flag is not None:
        z = float(z_flag)
    elif latent_index is not None:
        lat = arrays.get("latents")
        if lat is None:
            raise ConfigError("--latent-index given but the checkpoint "
                              "stores no latents")
        if not 0 <= latent_index < lat.shape[0]:
            raise ConfigError(f"--latent-index {latent_index} out of range "
                              f"(0..{lat.shape[0] - 1})")
        z = float(lat[latent_index])
    elif arrays.get("latents") is not None:
        z = float(arrays["latents"][0])
    return instances, arrays, extra, cfg, bundle, z


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if not cfg.out_dir:
        raise ConfigError("no run directory: set out_dir in the config "
                          "or pass --out")
    result = train_run(cfg, resume_from=args.resume)
    print(f"run directory: {result.out_dir}")
    print(f"final total loss: {result.final['total']:.6g} "
          f"({result.wall_seconds:.1f}s, "
          f"{len(result.records)} metric records)")
    return 0


def cmd_mesh(args):
    instances, arrays, extra, cfg, bundle, z = _open_checkpoint(
        args.checkpoint, args.z, args.latent_index)
    inst = instances[0]
    dim = bundle.spec.domain.dim
    if dim == 1:
        raise ConfigError("mesh extraction needs a 2D or 3D field")
    grid = Grid.cover(bundle.spec.domain, (args.resolution,) * dim)
    vals = grid_eval(inst, None, z, grid)
    mesh = marching_extract(vals, grid)
    if mesh.empty:
        log.warning("zero set is empty at this resolution; writing an "
                    "empty mesh")
    out = args.out or os.path.splitext(args.checkpoint)[0] + ".obj"
    export_mesh(mesh, out)
    print(f"{out}: {mesh.vertices.shape[0]} vertices, "
          f"{mesh.faces.shape[0]} elements")
    return 0


def cmd_morse(args):
    instances, arrays, extra, cfg, bundle, z = _open_checkpoint(
        args.checkpoint, args.z, args.latent_index)
    inst = instances[0]
    mc = cfg.morse or {}
    opts = morse_mod.Options.for_domain(
        bundle.spec.domain, n_init=mc.get("n_init"),
        max_iters=mc.get("max_iters", 150), grid_seed=mc.get("grid_seed"))
    analysis = morse_mod.analyze_field(inst, inst.params, z,
                                       bundle.spec.domain, opts,
                                       seed=args.seed)
    out = args.out or os.path.join(os.path.dirname(args.checkpoint) or ".",
                                   "morse")
    morse_mod.export_network(analysis, out)
    print(f"{out}: {len(analysis.network.nodes)} nodes, "
          f"{len(analysis.network.edges)} edges, "
          f"{analysis.count} components")
    return 0


def _demo_annulus(out, seed):
    os.makedirs(out, exist_ok=True)
    res = div_mod.annulus_demo(20, kind="min", p=0.5, seed=seed)
    with open(os.path.join(out, "points.csv"), "w") as fh:
        fh.write("x,y\n")
        for x, y in res.points:
            fh.write(f"{x:.17g},{y:.17g}\n")
    with open(os.path.join(out, "trajectory.csv"), "w") as fh:
        fh.write("step,point,x,y\n")
        for s, P in enumerate(res.trajectory):
            for i, (x, y) in enumerate(P):
                fh.write(f"{s},{i},{x:.17g},{y:.17g}\n")
    nn, cv = div_mod.nn_distance_stats(res.points)
    print(f"{out}: 20 points, nearest-neighbor CV {cv:.4f}")


def _demo_mirror(out, seed):
    os.makedirs(out, exist_ok=True)
    cfg = problems.default_config("mirror1d", seed=seed)
    result = train_run(cfg)
    inst = result.instances[0]
    ev = problems.eval_mirror(inst)
    xs = np.linspace(-1.0, 1.0, 257)
    from .jets import field_jets
    jb, _ = field_jets(inst, None, xs[:, None], order=0)
    with open(os.path.join(out, "profile.csv"), "w") as fh:
        fh.write("x,height\n")
        for x, h in zip(xs, jb.value):
            fh.write(f"{x:.17g},{h:.17g}\n")
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(ev, fh, indent=2)
    print(f"{out}: ray loss {ev['ray_loss']:.3e}, "
          f"quadratic R^2 {ev['r2']:.6f}")


def cmd_demo(args):
    out = args.out or f"demo_{args.which}"
    if args.which == "annulus":
        _demo_annulus(out, args.seed)
    else:
        _demo_mirror(out, args.seed)
    return 0


def cmd_eval(args):
    instances, arrays, extra, cfg, bundle, z = _open_checkpoint(
        args.checkpoint, args.z, args.latent_index)
    name = cfg.problem
    if name == "obstacle2d":
        res = args.resolution or 201
        out = problems.eval_obstacle(instances[0], bundle.spec, z=z,
                                     resolution=(res, (res + 1) // 2))
    elif name == "mirror1d":
        out = problems.eval_mirror(
            instances[0],
            focal=bundle.constants.get("focal", (0.0, 1.5)))
    elif name == "plateau3d":
        out = problems.eval_plateau(instances[0], bundle.spec,
                                    resolution=args.resolution or 64)
    elif name == "grayscott2d":
        out = problems.eval_rd(instances[0], instances[1], z,
                               bundle.constants,
                               res=args.resolution or 64)
    else:
        grid = Grid.cover(bundle.spec.domain,
                          ((args.resolution or 64),) * bundle.spec.domain.dim)
        from .extract import flood_fill_components
        vals = grid_eval(instances[0], None, z, grid)
        count, _ = flood_fill_components(vals)
        out = {"components": int(count)}
    print(json.dumps(out, indent=2))
    return 0


_COMMANDS = {"train": cmd_train, "mesh": cmd_mesh, "morse": cmd_morse,
             "demo": cmd_demo, "eval": cmd_eval}


def main(argv=None):
    logging.basicConfig(level=logging.INFO,
                        format="%(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileExistsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports and exits
        log.exception("command failed")
        return 2


if __name__ == "__main__":
    sys.exit(main())
