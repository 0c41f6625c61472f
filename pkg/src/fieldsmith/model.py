"""Field model definitions: architectures, initialization, latent
conditioning by input concatenation, and checkpoint serialization.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .trig import sincos

KNOWN_ACTIVATIONS = ("softplus", "sine", "tanh", "identity")

CHECKPOINT_MAGIC = b"FSMJET01"


@dataclass(frozen=True)
class Architecture:
    """Static description of a layered scalar field.

    widths[0] must equal the effective input width: spatial_dim (doubled by
    the periodic encoding) plus latent_dim. The last width is 1: fields are
    scalar. activations has one entry per linear layer; the final entry is
    normally "identity".
    """
    widths: tuple
    activations: tuple
    spatial_dim: int
    latent_dim: int = 0
    residual: bool = False
    omega0: float = 1.0
    periodic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        acts = self.activations
        if isinstance(acts, str):
            acts = (acts,) * (len(self.widths) - 2) + ("identity",)
        object.__setattr__(self, "activations", tuple(acts))
        if len(self.activations) != len(self.widths) - 1:
            raise ValueError("need one activation per linear layer")
        for a in self.activations:
            if a not in KNOWN_ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.widths[-1] != 1:
            raise ValueError("fields are scalar: last width must be 1")
        expected = self.input_width
        if self.widths[0] != expected:
            raise ValueError(
                f"first width {self.widths[0]} != effective input width "
                f"{expected} (spatial {self.spatial_dim}, periodic "
                f"{self.periodic}, latent {self.latent_dim})")
        if self.latent_dim not in (0, 1):
            raise ValueError("latent conditioning is a single scalar code")
        if "sine" in self.activations and self.omega0 <= 0:
            raise ValueError("omega0 must be positive for sine layers")

    @property
    def input_width(self):
        spatial = 2 * self.spatial_dim if self.periodic else self.spatial_dim
        return spatial + self.latent_dim

    @property
    def param_count(self):
        return jets.param_count(self.widths)

    @property
    def slices(self):
        return jets.layer_slices(self.widths)

    def descriptor(self):
        return {
            "widths": list(self.widths),
            "activations": list(self.activations),
            "spatial_dim": self.spatial_dim,
            "latent_dim": self.latent_dim,
            "residual": self.residual,
            "omega0": self.omega0,
            "periodic": self.periodic,
        }

    @classmethod
    def from_descriptor(cls, desc):
        return cls(widths=tuple(desc["widths"]),
                   activations=tuple(desc["activations"]),
                   spatial_dim=desc["spatial_dim"],
                   latent_dim=desc["latent_dim"],
                   residual=desc["residual"],
                   omega0=desc["omega0"],
                   periodic=desc["periodic"])


@dataclass
class FieldInstance:
    arch: Architecture
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.arch.param_count,):
            raise ValueError("parameter count does not match architecture")


# ---------------------------------------------------------------------------
# initialization

def init_softplus_mlp(arch, seed):
    """Fan-in-scaled uniform init for softplus/tanh MLPs.

    Hidden layers W ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)); the final linear
    layer W ~ U(0, 0.1/fan_in), one-sided so the initial field is a small
    positive near-constant (softplus units all output positive values).
    Starting empty matters for shape formation: material then grows inward
    from the value-pinned boundaries and flows around penalized regions,
    instead of nucleating everywhere at once and leaving enclosed junk that
    one-sided penalties must slowly excavate. A symmetric final layer at the
    sqrt(6/fan_in) scale would instead start the field at a large mixed-sign
    offset. Biases zero. Deterministic per seed.
    """
    if "sine" in arch.activations:
        raise ValueError("sine layer present; use init_siren")
    rng = np.random.default_rng(seed)
    params = np.zeros(arch.param_count)
    last = len(arch.slices) - 1
    for l, (w_sl, b_sl, (n_out, n_in)) in enumerate(arch.slices):
        if l == last:
            params[w_sl] = rng.uniform(0.0, 0.1 / n_in, n_out * n_in)
        else:
            bound = np.sqrt(6.0 / n_in)
            params[w_sl] = rng.uniform(-bound, bound, n_out * n_in)
    return FieldInstance(arch, params)


def init_siren(arch, seed):
    """Sinusoidal-network init: first layer W ~ U(+-1/fan_in) with omega0
    applied at evaluation, hidden layers W ~ U(+-sqrt(6/fan_in)), biases
    zero."""
    if arch.activations[0] != "sine":
        raise ValueError("init_siren expects a sine first layer")
    rng = np.random.default_rng(seed)
    params = np.zeros(arch.param_count)
    for l, (w_sl, b_sl, (n_out, n_in)) in enumerate(arch.slices):
        bound = 1.0 / n_in if l == 0 else np.sqrt(6.0 / n_in)
        params[w_sl] = rng.uniform(-bound, bound, n_out * n_in)
    return FieldInstance(arch, params)


# ---------------------------------------------------------------------------
# latent codes

@dataclass(frozen=True)
class LatentSet:
    count: int
    lo: float
    hi: float
    codes: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("need at least one latent code")
        if self.lo > self.hi:
            raise ValueError("latent interval is reversed")
        if self.count == 1:
            codes = np.array([(self.lo + self.hi) / 2.0])
        else:
            codes = np.linspace(self.lo, self.hi, self.count)
        object.__setattr__(self, "codes", codes)


def latent_codes(N, interval):
    """N equally spaced codes spanning [lo, hi] inclusive; N=1 gives the
    midpoint."""
    lo, hi = interval
    return LatentSet(count=N, lo=float(lo), hi=float(hi))


def eval_conditioned(instance, x, z=None):
    """Order-2 jet of the conditioned field; derivatives w.r.t. x only."""
    return jets.eval_jet2(instance, instance.params, np.asarray(x), z=z)


def periodic_encode(x):
    """Map each coordinate to (sin 2 pi x_i, cos 2 pi x_i); composed fields
    become exactly 1-periodic."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        raise ValueError("periodic_encode needs at least one coordinate")
    s, c = sincos(jets.TWO_PI * x)
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],))
    out[..., 0::2] = s
    out[..., 1::2] = c
    return out


# ---------------------------------------------------------------------------
# checkpoints
#
# Little-endian binary. Layout:
#   8 bytes   magic "FSMJET01"
#   uint32    header length in bytes
#   header    UTF-8 JSON: format version, architecture descriptors, array
#             table [{name, shape}] in file order, plus free-form "extra"
#   arrays    raw float64 little-endian, concatenated in table order
# Round-trips are bit-exact.

def save_checkpoint(path, instances, extra=None, arrays=None):
    """Write instances (list of FieldInstance) plus optional named arrays
    (dict of float64 ndarrays) and a JSON-serializable extra dict."""
    arrays = dict(arrays or {})
    table = []
    blobs = []
    for i, inst in enumerate(instances):
        name = f"params/{i}"
        table.append({"name": name, "shape": [int(inst.params.size)]})
        blobs.append(np.ascontiguousarray(inst.params, dtype="<f8"))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        table.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr)
    header = {
        "version": 1,
        "archs": [inst.arch.descriptor() for inst in instances],
        "arrays": table,
        "extra": extra or {},
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for blob in blobs:
            fh.write(blob.tobytes())


def load_checkpoint(path):
    """Returns (instances, arrays dict, extra dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint (bad magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["version"] != 1:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        data = {}
        for entry in header["arrays"]:
            n = int(np.prod(entry["shape"])) if entry["shape"] else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated checkpoint")
            data[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(
                entry["shape"]).copy()
    instances = []
    for i, desc in enumerate(header["archs"]):
        arch = Architecture.from_descriptor(desc)
        instances.append(FieldInstance(arch, data.pop(f"params/{i}")))
    return instances, data, header["extra"]
