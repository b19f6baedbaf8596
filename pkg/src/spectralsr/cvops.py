"""Complex-valued differentiable operators built on the real autodiff engine.

A complex tensor is a pair of real :class:`~spectralsr.autodiff.Tensor`
objects (real and imaginary parts).  A real loss is then differentiated
with respect to both parts independently, which makes finite-difference
validation straightforward (see :func:`grad_check`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, conv1d, modulus, softmax, where

SOFTMAX_EPS = 1e-12  # below this modulus the phase is defined as 1


@dataclass
class CTensor:
    """A complex tensor as independent real/imaginary real tensors."""

    re: Tensor
    im: Tensor

    @property
    def shape(self):
        return self.re.shape

    @property
    def ndim(self):
        return self.re.ndim

    def numpy(self):
        return self.re.data + 1j * self.im.data

    @staticmethod
    def from_numpy(z, requires_grad=False):
        z = np.asarray(z, dtype=np.complex128)
        return CTensor(Tensor(z.real.copy(), requires_grad), Tensor(z.imag.copy(), requires_grad))

    def __add__(self, other):
        return CTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return CTensor(self.re - other.re, self.im - other.im)

    def __mul__(self, other):
        if isinstance(other, CTensor):
            return CTensor(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        return CTensor(self.re * other, self.im * other)

    def reshape(self, *shape):
        return CTensor(self.re.reshape(*shape), self.im.reshape(*shape))

    def transpose(self, axes):
        return CTensor(self.re.transpose(axes), self.im.transpose(axes))

    def swap_last2(self):
        return CTensor(self.re.swap_last2(), self.im.swap_last2())

    def roll(self, shift, axis):
        return CTensor(self.re.roll(shift, axis), self.im.roll(shift, axis))

    def modulus(self, eps=SOFTMAX_EPS):
        return modulus(self.re, self.im, eps=eps)


def cmatmul(x, w):
    """Complex matrix product via Gauss' three-multiplication trick.

    Re(y) = k1 - k3, Im(y) = k1 + k2 with
    k1 = (Re x + Im x) Re w, k2 = Re x (Im w - Re w), k3 = Im x (Re w + Im w).
    """
    k1 = (x.re + x.im) @ w.re
    k2 = x.re @ (w.im - w.re)
    k3 = x.im @ (w.re + w.im)
    return CTensor(k1 - k3, k1 + k2)


def cv_linear(x, weight, bias=None):
    """y = x W + b for complex x [..., in], W [in, out], b [out]."""
    y = cmatmul(x, weight)
    if bias is not None:
        y = CTensor(y.re + bias.re, y.im + bias.im)
    return y


def cv_conv1d(x, kernel, stride=1, padding=0):
    """Complex 1-D convolution, x [B, Cin, M], kernel [Cout, Cin, k].

    Uses the same three-product decomposition as :func:`cmatmul`; the
    identity holds for any bilinear product.
    """
    k1 = conv1d(x.re + x.im, kernel.re, stride, padding)
    k2 = conv1d(x.re, kernel.im - kernel.re, stride, padding)
    k3 = conv1d(x.im, kernel.re + kernel.im, stride, padding)
    return CTensor(k1 - k3, k1 + k2)


def cv_softmax(x, axis=-1, modulus_bias=None):
    """Softmax on the moduli with phases carried through unchanged.

    Entries with modulus below ``SOFTMAX_EPS`` are treated as having phase 1
    (output is the real weight).  ``modulus_bias`` is an additive constant
    array applied to the moduli before the softmax (used for attention
    masking: large negative bias drives the weight to zero).
    """
    m = x.modulus()
    logits = m if modulus_bias is None else m + np.asarray(modulus_bias, dtype=np.float64)
    w = softmax(logits, axis=axis)
    small = m.data < SOFTMAX_EPS
    scale = w / m.clamp_min(SOFTMAX_EPS)
    out_re = where(small, w, scale * x.re)
    out_im = where(small, Tensor(np.zeros_like(m.data)), scale * x.im)
    return CTensor(out_re, out_im)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Standard layer norm over the last axis for real tensors."""
    mu = x.mean(axis=-1, keepdims=True)
    c = x - mu
    var = (c * c).mean(axis=-1, keepdims=True)
    xhat = c / (var + eps).sqrt()
    return xhat * gamma + beta


@dataclass
class ComplexAffine:
    """Per-channel 2x2 real matrix plus complex shift for complex layer norm."""

    g_rr: Tensor
    g_ri: Tensor
    g_ir: Tensor
    g_ii: Tensor
    b_re: Tensor
    b_im: Tensor


def cv_layer_norm(x, affine=None, eps=1e-5):
    """Whitening layer norm for complex tensors over the last (channel) axis.

    Subtracts the complex mean, then whitens the 2x2 covariance of
    (Re, Im) aggregated over channels with a closed-form inverse matrix
    square root (ridge ``eps`` on the diagonal), then applies the
    optional affine.
    """
    if x.shape[-1] < 2:
        raise ValueError("complex layer norm needs at least 2 channels")
    cr = x.re - x.re.mean(axis=-1, keepdims=True)
    ci = x.im - x.im.mean(axis=-1, keepdims=True)
    vrr = (cr * cr).mean(axis=-1, keepdims=True) + eps
    vii = (ci * ci).mean(axis=-1, keepdims=True) + eps
    vri = (cr * ci).mean(axis=-1, keepdims=True)
    # closed-form inverse sqrt of [[vrr, vri], [vri, vii]]
    s = (vrr * vii - vri * vri).sqrt(eps=1e-12)
    t = (vrr + vii + 2.0 * s).sqrt(eps=1e-12)
    inv = 1.0 / (s * t)
    wr = ((vii + s) * cr - vri * ci) * inv
    wi = (-vri * cr + (vrr + s) * ci) * inv
    if affine is None:
        return CTensor(wr, wi)
    out_re = affine.g_rr * wr + affine.g_ri * wi + affine.b_re
    out_im = affine.g_ir * wr + affine.g_ii * wi + affine.b_im
    return CTensor(out_re, out_im)


def prelu(x, slope):
    """PReLU with a learnable negative slope."""
    neg = x - x.relu()
    return x.relu() + slope * neg


def cprelu(x, slope_re, slope_im):
    """PReLU applied independently to real and imaginary parts."""
    return CTensor(prelu(x.re, slope_re), prelu(x.im, slope_im))


def gelu(x):
    """Exact (erf-based) GELU."""
    return x * 0.5 * ((x * (1.0 / np.sqrt(2.0))).erf() + 1.0)


def window_partition(x, window):
    """[..., M, C] -> [..., M/W, W, C] contiguous non-overlapping windows."""
    m, c = x.shape[-2], x.shape[-1]
    if m % window != 0:
        raise ValueError(f"window size {window} does not divide length {m}")
    lead = x.shape[:-2]
    return x.reshape(*lead, m // window, window, c)


def window_reverse(x, window):
    """Inverse of :func:`window_partition`."""
    lead = x.shape[:-3]
    nw, w, c = x.shape[-3], x.shape[-2], x.shape[-1]
    if w != window:
        raise ValueError("window size mismatch")
    return x.reshape(*lead, nw * w, c)


def cyclic_shift(x, shift):
    """Circular rotation along the sequence axis (second to last)."""
    if shift % x.shape[-2] == 0:
        return x
    return x.roll(shift, axis=x.ndim - 2)


def shift_attention_mask(m, window, shift, neg=-1e9):
    """Additive mask [M/W, W, W] forbidding cross-segment pairs after a
    cyclic shift by ``-shift``: position p in the rolled sequence came from
    original index (p + shift) mod M, and pairs may only attend within a
    contiguous original segment."""
    nw = m // window
    mask = np.zeros((nw, window, window))
    if shift == 0:
        return mask
    p = np.arange(m)
    wrapped = (p + shift) >= m
    wrapped = wrapped.reshape(nw, window)
    cross = wrapped[:, :, None] != wrapped[:, None, :]
    mask[cross] = neg
    return mask


@dataclass
class AttentionParams:
    """Projections and relative positional table for one (CV)W-MSA layer.

    ``wq/wk/wv`` have shape [h, C, d]; ``rpe`` has shape [h, 2W-1] and is
    expanded to per-pair biases by relative offset; ``out_w`` maps the
    h*d concatenation back to C channels.  All tensors are ``Tensor`` for
    the real path or ``CTensor`` for the complex path.
    """

    wq: object
    wk: object
    wv: object
    bq: object
    bk: object
    bv: object
    rpe: object
    out_w: object
    out_b: object
    heads: int
    dim: int


def _rpe_index(window):
    rel = np.arange(window)[:, None] - np.arange(window)[None, :]
    return rel + window - 1


def _expand_rpe(rpe, window):
    idx = _rpe_index(window)
    if isinstance(rpe, CTensor):
        return CTensor(rpe.re.gather_last(idx), rpe.im.gather_last(idx))
    return rpe.gather_last(idx)


def wmsa(x, params, window, shift=0, return_weights=False):
    """Windowed multi-head self-attention with optional shifted partition.

    ``x`` is [..., M, C], real (``Tensor``) or complex (``CTensor``).
    When ``shift`` > 0 the sequence is cyclically rotated by ``-shift``
    before partitioning and cross-segment pairs are masked out; the
    rotation is undone on the way out.
    """
    is_complex = isinstance(x, CTensor)
    m, c = x.shape[-2], x.shape[-1]
    h, d = params.heads, params.dim
    if shift:
        x = cyclic_shift(x, -shift)
    win = window_partition(x, window)  # [..., nw, W, C]
    nw = win.shape[-3]
    lead = win.shape[:-3]
    # insert a head axis so [h, C, d] projections broadcast over windows
    wide = win.reshape(*lead, 1, nw, window, c)

    if is_complex:
        wq = CTensor(params.wq.re.reshape(h, 1, c, d), params.wq.im.reshape(h, 1, c, d))
        wk = CTensor(params.wk.re.reshape(h, 1, c, d), params.wk.im.reshape(h, 1, c, d))
        wv = CTensor(params.wv.re.reshape(h, 1, c, d), params.wv.im.reshape(h, 1, c, d))
        q = cmatmul(wide, wq) + CTensor(params.bq.re.reshape(h, 1, 1, d), params.bq.im.reshape(h, 1, 1, d))
        k = cmatmul(wide, wk) + CTensor(params.bk.re.reshape(h, 1, 1, d), params.bk.im.reshape(h, 1, 1, d))
        v = cmatmul(wide, wv) + CTensor(params.bv.re.reshape(h, 1, 1, d), params.bv.im.reshape(h, 1, 1, d))
        # plain (not conjugate) transpose of K
        logits = cmatmul(q, k.swap_last2()) * (1.0 / np.sqrt(d))
        bias = _expand_rpe(params.rpe, window)
        logits = CTensor(
            logits.re + bias.re.reshape(h, 1, window, window),
            logits.im + bias.im.reshape(h, 1, window, window),
        )
        mask = shift_attention_mask(m, window, shift)
        attn = cv_softmax(logits, axis=-1, modulus_bias=mask[None])
        ctx = cmatmul(attn, v)  # [..., h, nw, W, d]
        perm = tuple(range(ctx.ndim - 4)) + (
            ctx.ndim - 3, ctx.ndim - 2, ctx.ndim - 4, ctx.ndim - 1,
        )
        ctx = ctx.transpose(perm).reshape(*lead, nw, window, h * d)
        out = cv_linear(ctx, params.out_w, params.out_b)
        weights = attn
    else:
        wq = params.wq.reshape(h, 1, c, d)
        wk = params.wk.reshape(h, 1, c, d)
        wv = params.wv.reshape(h, 1, c, d)
        q = wide @ wq + params.bq.reshape(h, 1, 1, d)
        k = wide @ wk + params.bk.reshape(h, 1, 1, d)
        v = wide @ wv + params.bv.reshape(h, 1, 1, d)
        logits = (q @ k.swap_last2()) * (1.0 / np.sqrt(d))
        bias = _expand_rpe(params.rpe, window)
        logits = logits + bias.reshape(h, 1, window, window)
        mask = shift_attention_mask(m, window, shift)
        logits = logits + mask[None]
        attn = softmax(logits, axis=-1)
        ctx = attn @ v
        perm = tuple(range(ctx.ndim - 4)) + (
            ctx.ndim - 3, ctx.ndim - 2, ctx.ndim - 4, ctx.ndim - 1,
        )
        ctx = ctx.transpose(perm).reshape(*lead, nw, window, h * d)
        out = ctx @ params.out_w + params.out_b
        weights = attn
    out = window_reverse(out, window)
    if shift:
        out = cyclic_shift(out, shift)
    if return_weights:
        return out, weights
    return out


def mlp(x, w1, b1, w2, b2, activation=None):
    """Two linear layers with a nonlinearity in between.

    Complex inputs use ``activation`` (a CTensor -> CTensor callable,
    typically CPReLU); real inputs default to GELU.
    """
    if isinstance(x, CTensor):
        hidden = cv_linear(x, w1, b1)
        hidden = activation(hidden)
        return cv_linear(hidden, w2, b2)
    hidden = x @ w1 + b1
    hidden = gelu(hidden) if activation is None else activation(hidden)
    return hidden @ w2 + b2


def init_params(shape, kind, rng):
    """Draw an initial weight tensor.

    ``cv_kaiming_rayleigh``: complex weights with Rayleigh modulus
    (scale 1/sqrt(fan_in)) and uniform phase, returned as a CTensor.
    ``real_kaiming``: zero-mean normal with std 1/sqrt(fan_in).
    fan_in is the second-to-last dimension (or the only one for vectors).
    """
    shape = tuple(shape)
    fan_in = shape[-2] if len(shape) >= 2 else shape[-1]
    if kind == "cv_kaiming_rayleigh":
        sigma = 1.0 / np.sqrt(fan_in)
        mod = sigma * np.sqrt(-2.0 * np.log(rng.uniform(1e-300, 1.0, size=shape)))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
        return CTensor(
            Tensor(mod * np.cos(phase), requires_grad=True),
            Tensor(mod * np.sin(phase), requires_grad=True),
        )
    if kind == "real_kaiming":
        return Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape), requires_grad=True)
    raise ValueError(f"unknown init kind: {kind}")


def _leaf_tensors(leaves):
    flat = []
    for leaf in leaves:
        if isinstance(leaf, CTensor):
            flat.extend([leaf.re, leaf.im])
        else:
            flat.append(leaf)
    return flat


def grad_check(fn, leaves, eps=1e-5):
    """Max relative error between reverse-mode and central-difference grads.

    ``fn`` rebuilds a scalar loss Tensor from the current leaf values;
    real and imaginary parts of complex leaves are perturbed independently.
    """
    flat = _leaf_tensors(leaves)
    for t in flat:
        t.zero_grad()
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in flat]
    worst = 0.0
    for t, ana in zip(flat, analytic):
        it = np.nditer(t.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = t.data[idx]
            t.data[idx] = orig + eps
            hi = fn().item()
            t.data[idx] = orig - eps
            lo = fn().item()
            t.data[idx] = orig
            num = (hi - lo) / (2.0 * eps)
            err = abs(ana[idx] - num) / max(1e-8, abs(num))
            worst = max(worst, err)
    return worst
