"""Exact derivative propagation through layered scalar fields.

A "jet" of order 2 at a point x bundles (f(x), grad f(x), hess f(x)). Jets
are pushed through the network layer by layer: linear layers act channel-wise
(one dgemm over the stacked batch), activations combine the chain rule

    value_out   = phi(a)
    grad_out_i  = phi'(a) g_i
    hess_out_ij = phi'(a) h_ij + phi''(a) g_i g_j

on the pre-activation jet (a, g, h). Everything is float64.

Storage: a jet batch is a C-contiguous array of shape (B, K, n) where n is
the layer width and K = 1, 1+d, or 1+d+d*d for derivative orders 0, 1, 2.
Channel 0 is the value, channels 1..d the gradient, the rest the row-major
Hessian. d is the spatial dimension; latent inputs are constants with zero
derivative channels.

Parameter gradients come from a manual reverse sweep over a recorded
forward. Seeding the sweep with d(loss)/d(output jet) yields exact gradients
of losses that depend on values, gradients, and Hessians alike; the
activation adjoints therefore carry third-derivative terms.
"""

from dataclasses import dataclass

import numpy as np

from .trig import sincos

GRAD_CLAMP = 1e-12  # lower clamp on |grad f| wherever a unit gradient is formed

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# parameter layout

def layer_shapes(widths):
    """[(n_out, n_in), ...] for each linear layer."""
    return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]


def param_count(widths):
    return sum(o * i + o for o, i in layer_shapes(widths))


def layer_slices(widths):
    """Per layer: (W slice, b slice, (n_out, n_in)) into the flat vector."""
    out = []
    off = 0
    for n_out, n_in in layer_shapes(widths):
        w = slice(off, off + n_out * n_in)
        off += n_out * n_in
        b = slice(off, off + n_out)
        off += n_out
        out.append((w, b, (n_out, n_in)))
    return out


def channels_for(order, d):
    if order == 0:
        return 1
    if order == 1:
        return 1 + d
    if order == 2:
        return 1 + d + d * d
    raise ValueError(f"derivative order must be 0, 1, or 2, got {order}")


# ---------------------------------------------------------------------------
# activations
#
# Forward returns the output jet plus the cached scalars the reverse sweep
# needs to rebuild phi', phi'', phi''' without recomputing transcendentals.

def _softplus_value(a):
    e = np.exp(-np.abs(a))
    val = np.maximum(a, 0.0) + np.log1p(e)
    sig = np.where(a >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return val, sig


def _softplus_derivs(sig, upto):
    d1 = sig
    d2 = sig * (1.0 - sig) if upto >= 2 else None
    d3 = d2 * (1.0 - 2.0 * sig) if upto >= 3 else None
    return d1, d2, d3


def _sine_derivs(s, c, omega, upto):
    d1 = omega * c
    d2 = -(omega * omega) * s if upto >= 2 else None
    d3 = -(omega ** 3) * c if upto >= 3 else None
    return d1, d2, d3


def _tanh_derivs(t, upto):
    d1 = 1.0 - t * t
    d2 = -2.0 * t * d1 if upto >= 2 else None
    d3 = -2.0 * d1 * (1.0 - 3.0 * t * t) if upto >= 3 else None
    return d1, d2, d3


def _act_forward(A, kind, omega, order, d):
    """Apply an activation to a pre-activation jet batch A (B, K, n).

    Returns (output jets, cached scalars). Identity returns A itself.
    """
    if kind == "identity":
        return A, None
    a = A[:, 0, :]
    if kind == "softplus":
        val, sig = _softplus_value(a)
        cache = sig
    elif kind == "sine":
        s, c = sincos(omega * a)
        val = s
        cache = (s, c)
    elif kind == "tanh":
        t = np.tanh(a)
        val = t
        cache = t
    else:
        raise ValueError(f"unknown activation {kind!r}")
    if order >= 1:
        d1, d2, _ = _act_derivs_from_cache(kind, cache, omega,
                                           upto=2 if order >= 2 else 1)

    V = np.empty_like(A)
    V[:, 0, :] = val
    if order >= 1:
        V[:, 1:1 + d, :] = d1[:, None, :] * A[:, 1:1 + d, :]
    if order >= 2:
        G = A[:, 1:1 + d, :]
        outer = G[:, :, None, :] * G[:, None, :, :]  # (B, d, d, n)
        B = A.shape[0]
        n = A.shape[2]
        V[:, 1 + d:, :] = (d1[:, None, :] * A[:, 1 + d:, :]
                           + d2[:, None, :] * outer.reshape(B, d * d, n))
    return V, cache


def _act_derivs_from_cache(kind, cache, omega, upto):
    if kind == "softplus":
        return _softplus_derivs(cache, upto)
    if kind == "sine":
        s, c = cache
        return _sine_derivs(s, c, omega, upto)
    if kind == "tanh":
        return _tanh_derivs(cache, upto)
    raise ValueError(f"unknown activation {kind!r}")


def _act_backward(Jbar, A, kind, cache, omega, order, d):
    """Adjoint of _act_forward: given d(loss)/d(output jets), return
    d(loss)/d(pre-activation jets)."""
    if kind == "identity":
        return Jbar
    upto = min(order + 1, 3)
    d1, d2, d3 = _act_derivs_from_cache(kind, cache, omega, upto)

    Abar = np.empty_like(Jbar)
    vbar = Jbar[:, 0, :]
    abar = vbar * d1
    if order >= 1:
        g = A[:, 1:1 + d, :]
        gbar_out = Jbar[:, 1:1 + d, :]
        abar = abar + d2 * np.einsum("bin,bin->bn", gbar_out, g)
        gbar_in = d1[:, None, :] * gbar_out
    if order >= 2:
        B, _, n = A.shape
        h = A[:, 1 + d:, :].reshape(B, d, d, n)
        hbar_out = Jbar[:, 1 + d:, :].reshape(B, d, d, n)
        hh = np.einsum("bijn,bijn->bn", hbar_out, h)
        gg = np.einsum("bijn,bin,bjn->bn", hbar_out, g, g)
        abar = abar + d2 * hh + d3 * gg
        # hess term phi'' g_i g_j contributes to the gradient adjoint
        sym = hbar_out + np.transpose(hbar_out, (0, 2, 1, 3))
        gbar_in = gbar_in + d2[:, None, :] * np.einsum("bijn,bjn->bin", sym, g)
        Abar[:, 1 + d:, :] = (d1[:, None, :]
                              * hbar_out.reshape(B, d * d, n))
    Abar[:, 0, :] = abar
    if order >= 1:
        Abar[:, 1:1 + d, :] = gbar_in
    return Abar


# ---------------------------------------------------------------------------
# input construction

def input_jets(X, order, latent=None, periodic=False):
    """Build order-k jets of the network input from spatial points X (B, d).

    latent: scalar or (B,) array appended as a constant extra input.
    periodic: encode each coordinate as (sin 2 pi x_i, cos 2 pi x_i) first;
    the encoding's exact derivatives are folded into the input jets, so
    downstream layers see an ordinary jet batch.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be (batch, spatial_dim)")
    B, d = X.shape
    K = channels_for(order, d)

    if periodic:
        s, c = sincos(TWO_PI * X)  # (B, d) each
        n0 = 2 * d
        J = np.zeros((B, K, n0))
        J[:, 0, 0::2] = s
        J[:, 0, 1::2] = c
        if order >= 1:
            for i in range(d):
                J[:, 1 + i, 2 * i] = TWO_PI * c[:, i]
                J[:, 1 + i, 2 * i + 1] = -TWO_PI * s[:, i]
        if order >= 2:
            for i in range(d):
                diag = 1 + d + i * d + i
                J[:, diag, 2 * i] = -(TWO_PI ** 2) * s[:, i]
                J[:, diag, 2 * i + 1] = -(TWO_PI ** 2) * c[:, i]
    else:
        J = np.zeros((B, K, d))
        J[:, 0, :] = X
        if order >= 1:
            for i in range(d):
                J[:, 1 + i, i] = 1.0

    if latent is not None:
        z = np.broadcast_to(np.asarray(latent, dtype=np.float64), (B,))
        col = np.zeros((B, K, 1))
        col[:, 0, 0] = z
        J = np.concatenate([J, col], axis=2)
    return np.ascontiguousarray(J)


# ---------------------------------------------------------------------------
# forward / backward over an architecture

@dataclass
class ForwardRecord:
    """Everything the reverse sweep needs: per-layer input jets,
    pre-activation jets, activation caches, and the skip-connection map."""
    arch: object
    order: int
    d: int
    inputs: list   # jets entering linear layer l
    pres: list     # pre-activation jets of layer l
    caches: list   # activation scalar caches
    skips: list    # bool per layer: identity skip added at this layer


def _linear_jets(J, W, b):
    B, K, n_in = J.shape
    out = J.reshape(B * K, n_in) @ W.T
    out = out.reshape(B, K, W.shape[0])
    out[:, 0, :] += b
    return out


def forward_jets(arch, params, X, z=None, order=2, want_record=False):
    """Evaluate the field with derivatives w.r.t. the spatial input.

    Returns (J_out, record). J_out has shape (B, K, n_last); record is None
    unless want_record.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ValueError(
            f"parameter vector has length {params.shape}, architecture "
            f"needs {arch.param_count}")
    if not np.all(np.isfinite(params)):
        raise ValueError("non-finite parameter detected")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != arch.spatial_dim:
        raise ValueError(
            f"points have dimension {X.shape[1]}, architecture expects "
            f"spatial dimension {arch.spatial_dim}")
    if arch.latent_dim == 0 and z is not None:
        raise ValueError("latent value supplied to an unconditioned field")
    if arch.latent_dim == 1 and z is None:
        raise ValueError("conditioned field evaluated without a latent value")

    d = arch.spatial_dim
    J = input_jets(X, order, latent=z if arch.latent_dim else None,
                   periodic=arch.periodic)
    inputs, pres, caches, skips = [], [], [], []
    slices = arch.slices
    for l, (w_sl, b_sl, (n_out, n_in)) in enumerate(slices):
        W = params[w_sl].reshape(n_out, n_in)
        b = params[b_sl]
        kind = arch.activations[l]
        omega = arch.omega0 if (kind == "sine" and l == 0) else 1.0
        A = _linear_jets(J, W, b)
        V, cache = _act_forward(A, kind, omega, order, d)
        skip = bool(arch.residual and n_out == n_in)
        if skip:
            V = V + J if V is A else np.add(V, J, out=V)
        if want_record:
            inputs.append(J)
            pres.append(A)
            caches.append(cache)
            skips.append(skip)
        J = V
    record = None
    if want_record:
        record = ForwardRecord(arch=arch, order=order, d=d, inputs=inputs,
                               pres=pres, caches=caches, skips=skips)
    return J, record


def backward_jets(record, params, seed, grad_out=None):
    """Reverse sweep: accumulate d(loss)/d(params) given seed jets
    d(loss)/d(output jets) of shape (B, K, n_last).

    Adds into grad_out when provided, else returns a fresh vector.
    """
    arch = record.arch
    params = np.asarray(params, dtype=np.float64)
    if grad_out is None:
        grad_out = np.zeros(arch.param_count)
    Jbar = np.ascontiguousarray(seed, dtype=np.float64)
    d = record.d
    for l in reversed(range(len(arch.slices))):
        w_sl, b_sl, (n_out, n_in) = arch.slices[l]
        W = params[w_sl].reshape(n_out, n_in)
        kind = arch.activations[l]
        omega = arch.omega0 if (kind == "sine" and l == 0) else 1.0
        Abar = _act_backward(Jbar, record.pres[l], kind, record.caches[l],
                             omega, record.order, d)
        B, K, _ = Abar.shape
        Af = Abar.reshape(B * K, n_out)
        Jin = record.inputs[l]
        grad_out[w_sl] += (Af.T @ Jin.reshape(B * K, n_in)).reshape(-1)
        grad_out[b_sl] += Abar[:, 0, :].sum(axis=0)
        Jnext = (Af @ W).reshape(B, K, n_in)
        if record.skips[l]:
            Jnext += Jbar
        Jbar = Jnext
    return grad_out


# ---------------------------------------------------------------------------
# single-point / convenience API

@dataclass
class Jet2:
    """Value, gradient, and Hessian of a scalar field at one point."""
    value: float
    grad: np.ndarray
    hess: np.ndarray


class JetBatch:
    """Read/write view over a raw scalar-output jet batch (B, K, 1)."""

    def __init__(self, raw, d, order):
        self.raw = raw
        self.d = d
        self.order = order

    @classmethod
    def zeros(cls, B, d, order):
        return cls(np.zeros((B, channels_for(order, d), 1)), d, order)

    @property
    def value(self):
        return self.raw[:, 0, 0]

    @property
    def grad(self):
        if self.order < 1:
            raise ValueError("jet batch carries no gradient channels")
        return self.raw[:, 1:1 + self.d, 0]

    @property
    def hess(self):
        if self.order < 2:
            raise ValueError("jet batch carries no Hessian channels")
        B = self.raw.shape[0]
        return self.raw[:, 1 + self.d:, 0].reshape(B, self.d, self.d)

    def zeros_like(self):
        return JetBatch(np.zeros_like(self.raw), self.d, self.order)


def field_jets(field, params, X, z=None, order=2, want_record=False):
    """Uniform jet evaluation: closed-form fields and networks alike.

    Returns (JetBatch, record); record is always None for closed forms.
    """
    if hasattr(field, "jet_batch"):  # analytic closed form
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        raw = field.jet_batch(X, order)
        return JetBatch(raw, X.shape[1], order), None
    params = field.params if params is None else params
    raw, record = forward_jets(field.arch, params, X, z=z, order=order,
                               want_record=want_record)
    return JetBatch(raw, field.arch.spatial_dim, order), record


def eval_jet2(field, params=None, x=None, z=None):
    """Order-2 jet at a single point; returns a Jet2."""
    x = np.asarray(x, dtype=np.float64)
    jb, _ = field_jets(field, params, x[None, :], z=z, order=2)
    d = x.shape[0]
    return Jet2(value=float(jb.value[0]),
                grad=jb.grad[0].copy(),
                hess=jb.hess[0].reshape(d, d).copy())


def grad_of_gradnorm(field, params=None, x=None, z=None):
    """Gradient of |grad f|^2 at x: exactly 2 H g."""
    j = eval_jet2(field, params, x, z=z)
    return 2.0 * (j.hess @ j.grad)


def loss_and_param_grad(field, params, requests):
    """Evaluate a sum of loss terms and its exact parameter gradient.

    Each request is (X, z, order, term) where term maps a JetBatch to
    (value, seed JetBatch). Returns (total loss, flat gradient). Fields
    without parameters (analytic forms) yield an empty gradient.
    """
    parametric = hasattr(field, "arch")
    if parametric:
        params = field.params if params is None else params
        grad = np.zeros(field.arch.param_count)
    else:
        grad = np.zeros(0)
    total = 0.0
    for X, z, order, term in requests:
        jb, record = field_jets(field, params if parametric else None, X,
                                z=z, order=order, want_record=True)
        value, seed = term(jb)
        if not np.isfinite(value):
            raise FloatingPointError(
                f"non-finite loss from term {getattr(term, '__name__', term)!r}")
        total += value
        if parametric:
            backward_jets(record, params, seed.raw, grad_out=grad)
    return total, grad
