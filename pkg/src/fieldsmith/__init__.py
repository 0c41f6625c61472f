"""fieldsmith: constraint-driven neural implicit shape synthesis.

Trains scalar neural fields whose sub-level set {f <= 0} is a shape, using
geometric losses (interface, design region, normals, curvature, eikonal),
a Morse-theoretic connectedness penalty, and a diversity objective over a
latent-conditioned solution set. Includes a stationary reaction-diffusion
residual trainer on the same machinery.
"""

__version__ = "0.1.0"

from .model import (Architecture, FieldInstance, LatentSet, init_siren,
                    init_softplus_mlp, latent_codes, eval_conditioned,
                    periodic_encode, save_checkpoint, load_checkpoint)
from .jets import (Jet2, JetBatch, eval_jet2, grad_of_gradnorm,
                   loss_and_param_grad, forward_jets, backward_jets)

__all__ = [
    "Architecture", "FieldInstance", "LatentSet", "init_siren",
    "init_softplus_mlp", "latent_codes", "eval_conditioned",
    "periodic_encode", "save_checkpoint", "load_checkpoint",
    "Jet2", "JetBatch", "eval_jet2", "grad_of_gradnorm",
    "loss_and_param_grad", "forward_jets", "backward_jets",
]
