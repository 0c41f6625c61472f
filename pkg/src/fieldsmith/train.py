"""Training loop: Adam, schedules, latent-batch orchestration, metrics,
checkpointing. One trainer drives the geometric problems (interface,
envelope, obstacle, normals, eikonal, curvature, connectedness, ray
focusing, diversity over latents); a second drives the stationary
reaction-diffusion system on a periodic grid.

Metrics go to JSONL, one object per line:
{epoch, terms {name: {raw, weighted}}, delta, total, components, seconds}.
"""

import json
import os
import time
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np

from .jets import loss_and_param_grad, field_jets, backward_jets
from .model import latent_codes, save_checkpoint, load_checkpoint
from .losses import (LossWeights, interface_term, envelope_term, normal_term,
                     eikonal_term, mean_curvature_term, strain_term,
                     mirror_term, value_seed_term, rd_residual_parts,
                     gradient_floor_parts)
from .geometry import (sample_interface, sample_outside_design,
                       sample_in_exclusions)
from .extract import Grid, extract_boundary_points, EmptyShapeError
from . import morse as morse_mod
from .diversity import (diversity_min_grad, diversity_sum_grad, DIST_FLOOR)


# ---------------------------------------------------------------------------
# optimizer and schedules

@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    base_lr: float = 1e-3


def adam_init(n_params, base_lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    return OptimizerState(m=np.zeros(n_params), v=np.zeros(n_params),
                          beta1=betas[0], beta2=betas[1], eps=eps,
                          base_lr=base_lr)


def adam_step(state, params, grad, lr_t=None):
    """One bias-corrected update, in place. Non-finite gradients abort."""
    if not np.isfinite(grad).all():
        raise FloatingPointError("non-finite gradient in adam_step")
    if grad.shape != params.shape:
        raise ValueError("gradient/parameter shape mismatch")
    lr = state.base_lr if lr_t is None else lr_t
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    mh = state.m / (1 - state.beta1 ** state.t)
    vh = state.v / (1 - state.beta2 ** state.t)
    params -= lr * mh / (np.sqrt(vh) + state.eps)
    return state, params


def lr_at(t, base=1e-3, half_life=1000.0, warmup=0):
    """Exponentially decayed rate base * 0.5^(t / half_life), with an
    optional linear ramp over the first `warmup` steps. The ramp keeps the
    opening steps small: a fresh optimizer state plus coherent value-fit
    gradients otherwise throws the whole field far past its targets on the
    first few updates, and the recovery from that overshoot seeds spurious
    geometry."""
    scale = min(1.0, (t + 1.0) / warmup) if warmup > 0 else 1.0
    if half_life <= 0:
        return base * scale
    return base * scale * 0.5 ** (t / half_life)


def loss_active(term, epoch, activation_epochs):
    """Terms switch on at their scheduled epoch; unscheduled terms are
    always on."""
    if not activation_epochs:
        return True
    return epoch >= activation_epochs.get(term, 0)


# ---------------------------------------------------------------------------
# run configuration and metrics

@dataclass
class RunConfig:
    problem: str
    seed: int = 0
    iterations: int = 2000
    arch: dict = None
    weights: dict = None
    activation_epochs: dict = dc_field(default_factory=dict)
    base_lr: float = 1e-3
    lr_half_life: float = 1000.0
    lr_warmup: int = 0
    latent_count: int = 1
    latent_range: tuple = (-1.0, 1.0)
    batches: dict = dc_field(default_factory=dict)
    morse: dict = dc_field(default_factory=dict)
    diversity: dict = dc_field(default_factory=dict)
    curvature: dict = dc_field(default_factory=dict)
    constants: dict = dc_field(default_factory=dict)
    metrics_every: int = 1
    checkpoint_every: int = 0
    out_dir: str = None
    schema: int = 1

    def as_dict(self):
        d = asdict(self)
        d["latent_range"] = list(d["latent_range"])
        return d

    @staticmethod
    def from_dict(d):
        d = dict(d)
        if "latent_range" in d and d["latent_range"] is not None:
            d["latent_range"] = tuple(d["latent_range"])
        return RunConfig(**d)


@dataclass
class MetricsRecord:
    epoch: int
    terms: dict          # name -> {"raw": float, "weighted": float}
    delta: float
    total: float
    components: list
    seconds: float

    def to_json(self):
        return json.dumps({"epoch": self.epoch, "terms": self.terms,
                           "delta": self.delta, "total": self.total,
                           "components": self.components,
                           "seconds": self.seconds})


def read_metrics(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class RunResult:
    out_dir: str
    records: list
    final: dict
    instances: list
    latents: np.ndarray
    wall_seconds: float
    config: RunConfig


# ---------------------------------------------------------------------------
# shared trainer plumbing

def _recorded(records, name, scale, term_fn, rec_scale=1.0):
    """Wrap a term so its raw value lands in the records dict and its seed
    is scaled into the total objective."""
    def wrapped(jets):
        v, seed = term_fn(jets)
        records[name] = records.get(name, 0.0) + rec_scale * v
        seed.raw *= scale
        return scale * v, seed
    wrapped.__name__ = name
    return wrapped


class _TrainerBase:
    def __init__(self, bundle):
        self.bundle = bundle
        self.cfg = bundle.config
        self.rng = np.random.default_rng(self.cfg.seed)
        self.weights = LossWeights.from_dict(self.cfg.weights or {})
        self.start_epoch = 0
        self._wall = 0.0

    def _run_dir(self):
        out = self.cfg.out_dir
        if not out:
            return None
        if os.path.exists(out) and os.listdir(out):
            raise FileExistsError(f"run directory {out!r} is not empty")
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "config.json"), "w") as fh:
            json.dump(self.cfg.as_dict(), fh, indent=2)
        return out

    def run(self):
        out = self._run_dir() if self.start_epoch == 0 else self.cfg.out_dir
        records = []
        mfh = open(os.path.join(out, "metrics.jsonl"),
                   "a" if self.start_epoch else "w") if out else None
        t_run = time.perf_counter()
        try:
            for epoch in range(self.start_epoch, self.cfg.iterations):
                rec = self.step(epoch)
                last = epoch == self.cfg.iterations - 1
                if epoch % self.cfg.metrics_every == 0 or last:
                    records.append(rec)
                    if mfh:
                        mfh.write(rec.to_json() + "\n")
                if out and self.cfg.checkpoint_every and not last \
                        and (epoch + 1) % self.cfg.checkpoint_every == 0:
                    self.save(os.path.join(out, f"ckpt_{epoch + 1:06d}.bin"),
                              epoch + 1)
            if out:
                mfh.flush()
                self.save(os.path.join(out, "final.bin"),
                          self.cfg.iterations)
        finally:
            if mfh:
                mfh.close()
        self._wall += time.perf_counter() - t_run
        return RunResult(out_dir=out, records=records,
                         final=json.loads(records[-1].to_json()),
                         instances=self.instances(),
                         latents=getattr(self, "latents", None),
                         wall_seconds=self._wall, config=self.cfg)


# ---------------------------------------------------------------------------
# geometric problems

class GeometricTrainer(_TrainerBase):
    def __init__(self, bundle):
        super().__init__(bundle)
        cfg = self.cfg
        self.inst = bundle.init_fn(bundle.arch, cfg.seed)
        lat_dim = bundle.arch.latent_dim if bundle.arch is not None else 0
        if lat_dim:
            self.latents = latent_codes(cfg.latent_count,
                                        tuple(cfg.latent_range)).codes
            self.zs = [float(z) for z in self.latents]
        else:
            self.latents = None
            self.zs = [None]
        self.opt = adam_init(self.inst.params.size, cfg.base_lr)
        n = len(self.zs)
        self.morse_states = [None] * n
        self.morse_last = [None] * n
        self.bnd = [None] * n
        self.curv_pts = [None] * n
        mc = dict(cfg.morse or {})
        domain = bundle.spec.domain
        self.morse_opts = morse_mod.Options.for_domain(
            domain,
            n_init=mc.get("n_init"),
            max_iters=mc.get("max_iters", 150),
            warm_iters=mc.get("warm_iters", 30),
            grid_seed=mc.get("grid_seed"),
        )
        self.morse_full_every = mc.get("refresh_period", 10)
        self.morse_warm_every = mc.get("warm_every", 1)

    def instances(self):
        return [self.inst]

    # --- batch assembly ---------------------------------------------------

    def _refresh_boundary(self, cache, i, z, n_target, resolution, seed):
        spec = self.bundle.spec
        grid = Grid.cover(spec.domain, (resolution,) * spec.domain.dim)
        try:
            cache[i] = extract_boundary_points(
                self.inst, self.inst.params, z, grid, n_target, seed=seed)
        except EmptyShapeError:
            cache[i] = None

    def _stack(self, P):
        """Tile a spatial batch across the latent set; returns (X, z) for
        one shared forward. (1/N sum_z of a mean over B points equals the
        mean over the N*B stacked rows.)"""
        if self.latents is None:
            return P, None
        N = len(self.zs)
        return np.tile(P, (N, 1)), np.repeat(self.latents, P.shape[0])

    def _shared_entries(self, epoch, records, requests):
        cfg, spec, w = self.cfg, self.bundle.spec, self.weights
        nb = cfg.batches
        N = len(self.zs)
        act = cfg.activation_epochs
        rng = self.rng

        def on(name):
            return w.get(name) > 0 and loss_active(name, epoch, act)

        if on("interface") or on("normal"):
            P, Nrm, Wt = sample_interface(
                spec, nb.get("interface", 256),
                corner_weight=cfg.constants.get("corner_weight", 1.0),
                seed=rng)
            X, z = self._stack(P)
            order = 1 if on("normal") and Nrm is not None else 0
            if Wt is not None:
                Wt = np.tile(Wt, N)
            if Nrm is not None:
                Nrm = np.tile(Nrm, (N, 1))
            subs = []
            if on("interface"):
                subs.append(("interface", w.get("interface"),
                             lambda jets, Wt=Wt: interface_term(jets, Wt)))
            if on("normal") and Nrm is not None:
                subs.append(("normal", w.get("normal"),
                             lambda jets, Nrm=Nrm: normal_term(jets, Nrm)))
            requests.append((X, z, order, _combine(records, subs)))
        # training batches stand off the containment boundaries a hair so
        # the one-sided penalties do not erode shapes legally sitting flush
        pad = float(self.cfg.constants.get("sample_margin", 0.0))
        if on("envelope"):
            X, z = self._stack(sample_outside_design(
                spec, nb.get("envelope", 512), rng, margin=pad))
            requests.append((X, z, 0,
                             _recorded(records, "envelope",
                                       w.get("envelope"), envelope_term)))
        if on("obstacle") and spec.exclusions:
            X, z = self._stack(sample_in_exclusions(
                spec, nb.get("obstacle", 128), rng, margin=pad))
            requests.append((X, z, 0,
                             _recorded(records, "obstacle",
                                       w.get("obstacle"), envelope_term)))
        if on("eikonal"):
            X, z = self._stack(spec.domain.sample(nb.get("eikonal", 512),
                                                  rng))
            requests.append((X, z, 1,
                             _recorded(records, "eikonal",
                                       w.get("eikonal"), eikonal_term)))
        if on("curvature"):
            self._curvature_entry(epoch, records, requests)
        if on("residual") and "focal" in cfg.constants:
            xs = rng.uniform(-1.0, 1.0, nb.get("residual", 128))
            X, z = self._stack(xs[:, None])
            xs_rep = X[:, 0]
            focal = np.asarray(cfg.constants["focal"], dtype=np.float64)
            requests.append((X, z, 1,
                             _recorded(records, "residual",
                                       w.get("residual"),
                                       lambda jets, xs_rep=xs_rep:
                                       mirror_term(jets, xs_rep, focal))))

    def _curvature_entry(self, epoch, records, requests):
        cfg, w = self.cfg, self.weights
        cc = cfg.curvature
        every = cc.get("refresh_period", 20)
        for i, z in enumerate(self.zs):
            if self.curv_pts[i] is None or epoch % every == 0:
                self._refresh_boundary(self.curv_pts, i, z,
                                       cc.get("n_points", 256),
                                       cc.get("resolution", 96),
                                       seed=cfg.seed * 977 + epoch + 7919 * i)
        live = [i for i in range(len(self.zs))
                if self.curv_pts[i] is not None]
        if not live:
            return
        X = np.concatenate([self.curv_pts[i] for i in live], axis=0)
        z = None if self.latents is None else np.concatenate(
            [np.full(self.curv_pts[i].shape[0], self.zs[i]) for i in live])
        kind = cfg.constants.get("curvature_kind", "mean")
        fn = strain_term if kind == "strain" else mean_curvature_term
        # mean over the stacked rows; blocks are equal-sized in practice
        requests.append((X, z, 2,
                         _recorded(records, "curvature",
                                   w.get("curvature"), fn)))

    def _connectedness_entry(self, epoch, i, z, records, requests):
        w = self.weights
        N = len(self.zs)
        due_full = epoch % self.morse_full_every == 0
        due_warm = epoch % self.morse_warm_every == 0
        if due_full or due_warm or self.morse_last[i] is None:
            self.morse_states[i], analysis = morse_mod.cached_refresh(
                self.morse_states[i], epoch, self.morse_full_every,
                self.inst, params=self.inst.params, z=z,
                domain=self.bundle.spec.domain, opts=self.morse_opts,
                seed=self.cfg.seed)
            self.morse_last[i] = analysis
        analysis = self.morse_last[i]
        rep = analysis.report
        if rep.count > 1 and rep.penalties.sum() > 0:
            sel = np.flatnonzero(rep.penalties > 0)
            locs = np.array([analysis.network.nodes[k].location
                             for k in sel])
            coeffs = rep.penalties[sel]
            requests.append((locs, z, 0,
                             _recorded(records, "connectedness",
                                       w.get("connectedness") / N,
                                       value_seed_term(coeffs),
                                       rec_scale=1.0 / N)))
        else:
            # already connected (or nothing detected): zero by definition
            records["connectedness"] = records.get("connectedness", 0.0)

    # --- diversity over the latent set -------------------------------------

    def _diversity(self, epoch, records, requests):
        cfg, w = self.cfg, self.weights
        lam = w.get("diversity")
        N = len(self.zs)
        if lam <= 0 or N < 2:
            return 0.0
        dc = cfg.diversity
        every = dc.get("refresh_period", 20)
        if epoch % every == 0 or all(b is None for b in self.bnd):
            for i, z in enumerate(self.zs):
                self._refresh_boundary(self.bnd, i, z,
                                       dc.get("n_boundary", 192),
                                       dc.get("resolution", 96),
                                       seed=cfg.seed * 31 + i)
        live = [i for i in range(N) if self.bnd[i] is not None]
        if len(live) < 2:
            return 0.0

        # f_j on every live boundary, one forward per latent j
        stack = np.concatenate([self.bnd[i] for i in live], axis=0)
        splits = np.cumsum([self.bnd[i].shape[0] for i in live])[:-1]
        fvals = {}
        for j in live:
            jets, _ = field_jets(self.inst, self.inst.params, stack,
                                 z=self.zs[j], order=0)
            fvals[j] = dict(zip(live, np.split(jets.value, splits)))
        D = np.zeros((N, N))
        for a, i in enumerate(live):
            for j in live[a + 1:]:
                q = np.mean(fvals[j][i] ** 2) + np.mean(fvals[i][j] ** 2)
                D[i, j] = D[j, i] = np.sqrt(q)
        sub = D[np.ix_(live, live)]
        kind = dc.get("kind", "min")
        p = dc.get("p", 0.5)
        if kind == "min":
            delta, dD = diversity_min_grad(sub, p)
        else:
            delta, dD = diversity_sum_grad(sub, p)

        by_latent = {}
        for a, i in enumerate(live):
            for b, j in enumerate(live):
                c = dD[a, b]
                if i == j or c == 0.0:
                    continue
                d_ij = max(D[i, j], 1e-9)
                Bi = self.bnd[i].shape[0]
                Bj = self.bnd[j].shape[0]
                by_latent.setdefault(j, []).append(
                    (self.bnd[i], c * fvals[j][i] / (Bi * d_ij)))
                by_latent.setdefault(i, []).append(
                    (self.bnd[j], c * fvals[i][j] / (Bj * d_ij)))
        for j, parts in by_latent.items():
            X = np.concatenate([p_[0] for p_ in parts], axis=0)
            coeffs = np.concatenate([p_[1] for p_ in parts])
            requests.append((X, self.zs[j], 0,
                             _scaled_only(-lam, value_seed_term(coeffs))))
        return float(delta)

    # --- the step ----------------------------------------------------------

    def step(self, epoch):
        t0 = time.perf_counter()
        records = {}
        requests = []
        self._shared_entries(epoch, records, requests)
        if self.weights.get("connectedness") > 0 and loss_active(
                "connectedness", epoch, self.cfg.activation_epochs):
            for i, z in enumerate(self.zs):
                self._connectedness_entry(epoch, i, z, records, requests)
        delta = self._diversity(epoch, records, requests)
        _, grad = loss_and_param_grad(self.inst, self.inst.params, requests)
        lr = lr_at(epoch, self.cfg.base_lr, self.cfg.lr_half_life,
                   self.cfg.lr_warmup)
        adam_step(self.opt, self.inst.params, grad, lr)

        N = len(self.zs)
        lamd = self.weights.get("diversity")
        terms = {}
        total = -lamd * delta
        for name, raw in records.items():
            weighted = self.weights.get(name) * raw
            terms[name] = {"raw": raw, "weighted": weighted}
            total += weighted
        comps = [self.morse_last[i].count if self.morse_last[i] else -1
                 for i in range(N)] if any(self.morse_last) else []
        return MetricsRecord(epoch=epoch, terms=terms, delta=delta,
                             total=total, components=comps,
                             seconds=time.perf_counter() - t0)

    # --- persistence --------------------------------------------------------

    def save(self, path, next_epoch):
        extra = {"epoch": next_epoch, "t": self.opt.t,
                 "rng_state": self.rng.bit_generator.state,
                 "config": self.cfg.as_dict(), "kind": "geometric"}
        arrays = {"adam_m": self.opt.m, "adam_v": self.opt.v}
        if self.latents is not None:
            arrays["latents"] = self.latents
        save_checkpoint(path, [self.inst], extra=extra, arrays=arrays)

    def load(self, path):
        insts, arrays, extra = load_checkpoint(path)
        self.inst = insts[0]
        self.opt.m = arrays["adam_m"]
        self.opt.v = arrays["adam_v"]
        self.opt.t = extra["t"]
        self.rng.bit_generator.state = extra["rng_state"]
        self.start_epoch = extra["epoch"]
        self.morse_states = [None] * len(self.zs)
        self.morse_last = [None] * len(self.zs)
        self.bnd = [None] * len(self.zs)
        self.curv_pts = [None] * len(self.zs)


def _combine(records, subs):
    """Several weighted terms over one shared jet batch."""
    def combined(jets):
        total = 0.0
        seed = jets.zeros_like()
        for name, scale, fn in subs:
            v, s = fn(jets)
            records[name] = records.get(name, 0.0) + v
            total += scale * v
            seed.raw += scale * s.raw
        return total, seed
    return combined


def _scaled_only(scale, term_fn):
    """Scale a term's seed without recording it (used by the diversity
    coupling, whose reported value is the aggregated delta, not the
    per-request linearization)."""
    def wrapped(jets):
        v, seed = term_fn(jets)
        seed.raw *= scale
        return scale * v, seed
    return wrapped


# ---------------------------------------------------------------------------
# stationary reaction-diffusion on a periodic grid

class RDTrainer(_TrainerBase):
    def __init__(self, bundle):
        super().__init__(bundle)
        cfg = self.cfg
        self.u_inst = bundle.init_fn(bundle.arch, cfg.seed)
        self.v_inst = bundle.init_fn(bundle.arch_v, cfg.seed + 1)
        self.latents = latent_codes(cfg.latent_count,
                                    tuple(cfg.latent_range)).codes
        self.zs = [float(z) for z in self.latents]
        self.n_u = self.u_inst.params.size
        self.opt = adam_init(self.n_u + self.v_inst.params.size,
                             cfg.base_lr)
        self.res = cfg.constants.get("grid", 64)

    def instances(self):
        return [self.u_inst, self.v_inst]

    def step(self, epoch):
        t0 = time.perf_counter()
        cfg, w = self.cfg, self.weights
        N = len(self.zs)
        const = cfg.constants
        offset = self.rng.uniform(0.0, 1.0, 2)
        grid = Grid.periodic_unit(self.res, offset=offset)
        X = grid.nodes()
        spacing = grid.spacing[0]

        # one recorded forward per field, all latents stacked; every term
        # below is linear in the grid values, so their adjoints share one
        # backward per field
        B = X.shape[0]
        Xs = np.tile(X, (N, 1))
        zvec = np.repeat(self.latents, B)
        jb_u, rec_u = field_jets(self.u_inst, self.u_inst.params, Xs,
                                 z=zvec, order=0, want_record=True)
        jb_v, rec_v = field_jets(self.v_inst, self.v_inst.params, Xs,
                                 z=zvec, order=0, want_record=True)
        U = [jb_u.value[i * B:(i + 1) * B].reshape(grid.shape)
             for i in range(N)]
        V = [jb_v.value[i * B:(i + 1) * B].reshape(grid.shape)
             for i in range(N)]

        records = {}
        cu = [np.zeros(grid.shape) for _ in self.zs]
        cv = [np.zeros(grid.shape) for _ in self.zs]
        lam_res = w.get("residual")
        lam_grad = w.get("gradient")
        act = cfg.activation_epochs
        G_vals = []
        for i in range(N):
            if lam_res > 0 and loss_active("residual", epoch, act):
                L_u, L_v, du, dv = rd_residual_parts(U[i], V[i], const,
                                                     spacing)
                records["residual"] = records.get("residual", 0.0) \
                    + L_u + L_v
                cu[i] += (lam_res / N) * du
                cv[i] += (lam_res / N) * dv
            if lam_grad > 0 and loss_active("gradient", epoch, act):
                gl, G, du, dv = gradient_floor_parts(
                    U[i], V[i], spacing,
                    literal=const.get("literal_floor", False))
                G_vals.append(G)
                records["gradient"] = records.get("gradient", 0.0) + gl
                cu[i] += (lam_grad / N) * du
                cv[i] += (lam_grad / N) * dv

        delta = 0.0
        lam_div = w.get("diversity")
        if lam_div > 0 and N > 1:
            delta = self._diversity(U, V, cu, cv, lam_div)

        seed_u = np.concatenate(cu).reshape(N * B, 1, 1)
        seed_v = np.concatenate(cv).reshape(N * B, 1, 1)
        gu = backward_jets(rec_u, self.u_inst.params, seed_u)
        gv = backward_jets(rec_v, self.v_inst.params, seed_v)
        grad = np.concatenate([gu, gv])
        params = np.concatenate([self.u_inst.params, self.v_inst.params])
        lr = lr_at(epoch, cfg.base_lr, cfg.lr_half_life, cfg.lr_warmup)
        adam_step(self.opt, params, grad, lr)
        self.u_inst.params[:] = params[:self.n_u]
        self.v_inst.params[:] = params[self.n_u:]

        terms = {}
        total = -lam_div * delta
        for name, raw_sum in records.items():
            raw = raw_sum / N
            weighted = w.get(name) * raw
            terms[name] = {"raw": raw, "weighted": weighted}
            total += weighted
        if G_vals:
            terms["gradient"]["G"] = float(np.mean(G_vals))
        return MetricsRecord(epoch=epoch, terms=terms, delta=delta,
                             total=total, components=[],
                             seconds=time.perf_counter() - t0)

    def _diversity(self, U, V, cu, cv, lam):
        """Field-space distance between latent solutions: RMS difference of
        the stacked (u, v) grids, aggregated like the shape diversity.
        Adjoints accumulate into the per-latent seed grids (negated: the
        objective rewards diversity)."""
        N = len(self.zs)
        B = U[0].size
        D = np.zeros((N, N))
        for i in range(N):
            for j in range(i + 1, N):
                q = np.mean((U[i] - U[j]) ** 2 + (V[i] - V[j]) ** 2)
                D[i, j] = D[j, i] = np.sqrt(q)
        p = self.cfg.diversity.get("p", 0.5)
        kind = self.cfg.diversity.get("kind", "min")
        if kind == "min":
            delta, dD = diversity_min_grad(D, p)
        else:
            delta, dD = diversity_sum_grad(D, p)
        for i in range(N):
            for j in range(N):
                c = dD[i, j]
                if i == j or c == 0.0:
                    continue
                d_ij = max(D[i, j], DIST_FLOOR)
                su = -lam * c * (U[i] - U[j]) / (B * d_ij)
                sv = -lam * c * (V[i] - V[j]) / (B * d_ij)
                cu[i] += su
                cu[j] -= su
                cv[i] += sv
                cv[j] -= sv
        return float(delta)

    def save(self, path, next_epoch):
        extra = {"epoch": next_epoch, "t": self.opt.t,
                 "rng_state": self.rng.bit_generator.state,
                 "config": self.cfg.as_dict(), "kind": "rd"}
        arrays = {"adam_m": self.opt.m, "adam_v": self.opt.v,
                  "latents": self.latents}
        save_checkpoint(path, [self.u_inst, self.v_inst], extra=extra,
                        arrays=arrays)

    def load(self, path):
        insts, arrays, extra = load_checkpoint(path)
        self.u_inst, self.v_inst = insts
        self.opt.m = arrays["adam_m"]
        self.opt.v = arrays["adam_v"]
        self.opt.t = extra["t"]
        self.rng.bit_generator.state = extra["rng_state"]
        self.start_epoch = extra["epoch"]


# ---------------------------------------------------------------------------

def make_trainer(config):
    from . import problems
    bundle = problems.build(config)
    cls = RDTrainer if bundle.kind == "rd" else GeometricTrainer
    return cls(bundle)


def train_run(config, resume_from=None):
    """Train per the config; optionally resume from a checkpoint file.
    Returns a RunResult; artifacts land in config.out_dir when set."""
    trainer = make_trainer(config)
    if resume_from:
        trainer.load(resume_from)
    return trainer.run()
