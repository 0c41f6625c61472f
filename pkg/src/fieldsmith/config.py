"""Run configuration files: a YAML document with nested sections mirroring
RunConfig, carrying a versioned `schema` field (currently 1). JSON snapshots
load through the same path since YAML is a superset.

A file only has to name the problem; every other field falls back to that
problem's defaults, and mapping fields (weights, batches, ...) merge one
level deep, so a config states just its deviations. Snapshots written by
the trainer carry every field and reproduce exactly.

Example:

    schema: 1
    problem: obstacle2d
    seed: 3
    iterations: 2000
    weights:
      interface: 1.0
      envelope: 1.0
    batches:
      interface: 256
"""

import yaml

from .train import RunConfig

SCHEMA_VERSION = 1

KNOWN_PROBLEMS = ("obstacle2d", "plateau3d", "mirror1d", "grayscott2d",
                  "bracket3d_smoke", "annulus_demo")

_DICT_FIELDS = ("arch", "weights", "activation_epochs", "batches", "morse",
                "diversity", "curvature", "constants")


class ConfigError(ValueError):
    """Raised for unparseable or invalid configuration files."""


def _fail(field, why):
    raise ConfigError(f"config field {field!r}: {why}")


def validate(cfg):
    """Check a RunConfig; raises ConfigError naming the offending field."""
    if cfg.schema != SCHEMA_VERSION:
        _fail("schema", f"expected {SCHEMA_VERSION}, got {cfg.schema!r}")
    if cfg.problem not in KNOWN_PROBLEMS:
        _fail("problem", f"unknown problem {cfg.problem!r}; "
              f"known: {', '.join(KNOWN_PROBLEMS)}")
    if not isinstance(cfg.seed, int):
        _fail("seed", "must be an integer")
    if not isinstance(cfg.iterations, int) or cfg.iterations < 1:
        _fail("iterations", "must be a positive integer")
    for name in _DICT_FIELDS:
        v = getattr(cfg, name)
        if v is not None and not isinstance(v, dict):
            _fail(name, "must be a mapping")
    for k, v in (cfg.weights or {}).items():
        if not isinstance(v, (int, float)) or v < 0:
            _fail(f"weights.{k}", "must be a number >= 0")
    for k, v in (cfg.batches or {}).items():
        if not isinstance(v, int) or v < 1:
            _fail(f"batches.{k}", "must be a positive integer")
    for k, v in (cfg.activation_epochs or {}).items():
        if not isinstance(v, int) or v < 0:
            _fail(f"activation_epochs.{k}", "must be an integer >= 0")
    if cfg.base_lr <= 0:
        _fail("base_lr", "must be positive")
    if cfg.lr_warmup < 0:
        _fail("lr_warmup", "must be >= 0")
    if cfg.latent_count < 1:
        _fail("latent_count", "must be >= 1")
    lr = cfg.latent_range
    if len(lr) != 2 or not lr[0] < lr[1]:
        _fail("latent_range", "must be a (lo, hi) pair with lo < hi")
    if cfg.metrics_every < 1:
        _fail("metrics_every", "must be >= 1")
    if cfg.checkpoint_every < 0:
        _fail("checkpoint_every", "must be >= 0")
    return cfg


def from_mapping(doc, source="<config>"):
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    doc = dict(doc)
    doc.setdefault("schema", SCHEMA_VERSION)
    known = set(RunConfig.__dataclass_fields__)
    extra = set(doc) - known
    if extra:
        _fail(sorted(extra)[0], "unknown field")
    problem = doc.pop("problem", None)
    if problem not in KNOWN_PROBLEMS:
        _fail("problem", f"unknown problem {problem!r}; "
              f"known: {', '.join(KNOWN_PROBLEMS)}")
    from .problems import default_config
    try:
        cfg = default_config(problem, **doc)
    except TypeError as e:
        raise ConfigError(f"{source}: {e}") from e
    return validate(cfg)


def load_config(path):
    """Parse and validate a config file. Parse errors keep the YAML mark
    (line/column); validation errors name the field."""
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: {e}") from e
    return from_mapping(doc, source=str(path))


def dump_config(cfg, path):
    """Write a RunConfig as a YAML snapshot loadable by load_config."""
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.as_dict(), fh, sort_keys=False)
