"""Minimal reverse-mode autodiff engine over numpy float64 arrays.

Every differentiable quantity is a real-valued ``Tensor``.  Complex
quantities are handled one level up (see :mod:`spectralsr.cvops`) as
pairs of real tensors, so gradients of a real loss with respect to the
real and imaginary parts come out of the same machinery with no special
casing.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

__all__ = ["Tensor", "where", "softmax", "modulus", "conv1d", "conv_transpose1d"]


def _unbroadcast(grad, shape):
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An n-d real array with an optional gradient and a recorded reverse pass."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    # -- bookkeeping ---------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data)

    def backward(self):
        """Reverse pass from a scalar output."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            if node._parents:
                # Interior node: its grad has been fully propagated and no
                # later node in the sweep reads it.  Drop the tape references
                # so large intermediates are freed as the sweep proceeds
                # (closures + parent links form cycles the refcounter can't
                # otherwise break).
                node._parents = ()
                node._backward = None
                if node is not self:
                    node.grad = None

    # -- elementwise arithmetic ---------------------------------------

    @staticmethod
    def _wrap(other):
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data + other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.shape))

        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(-g)

        out._backward = back
        return out

    def __sub__(self, other):
        return self + (-Tensor._wrap(other))

    def __rsub__(self, other):
        return Tensor._wrap(other) + (-self)

    def __mul__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data * other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.shape))

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data / other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-g * self.data / other.data**2, other.shape))

        out._backward = back
        return out

    def __rtruediv__(self, other):
        return Tensor._wrap(other) / self

    def __pow__(self, p):
        p = float(p)
        out = Tensor(self.data**p, _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g * p * self.data ** (p - 1.0))

        out._backward = back
        return out

    # -- transcendental ------------------------------------------------

    def exp(self):
        out = Tensor(np.exp(self.data), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g * out.data)

        out._backward = back
        return out

    def log(self):
        out = Tensor(np.log(self.data), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g / self.data)

        out._backward = back
        return out

    def sqrt(self, eps=0.0):
        """Square root; ``eps`` floors the derivative's denominator near zero."""
        root = np.sqrt(self.data)
        out = Tensor(root, _parents=(self,))

        def back(g):
            if self.requires_grad:
                denom = 2.0 * np.maximum(root, eps) if eps else 2.0 * root
                self._accumulate(g / denom)

        out._backward = back
        return out

    def erf(self):
        out = Tensor(_erf(self.data), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g * (2.0 / np.sqrt(np.pi)) * np.exp(-self.data**2))

        out._backward = back
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g * (self.data > 0.0))

        out._backward = back
        return out

    def clamp_min(self, lo):
        out = Tensor(np.maximum(self.data, lo), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g * (self.data >= lo))

        out._backward = back
        return out

    # -- reductions ----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,))

        def back(g):
            if not self.requires_grad:
                return
            if axis is None:
                self._accumulate(np.broadcast_to(g, self.shape).copy())
                return
            if not keepdims:
                axes = axis if isinstance(axis, tuple) else (axis,)
                g = np.expand_dims(g, axes)
            self._accumulate(np.broadcast_to(g, self.shape).copy())

        out._backward = back
        return out

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- shape manipulation -------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g.reshape(self.shape))

        out._backward = back
        return out

    def transpose(self, axes):
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        out = Tensor(self.data.transpose(axes), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(g.transpose(inv))

        out._backward = back
        return out

    def swap_last2(self):
        axes = tuple(range(self.ndim - 2)) + (self.ndim - 1, self.ndim - 2)
        return self.transpose(axes)

    def roll(self, shift, axis):
        out = Tensor(np.roll(self.data, shift, axis=axis), _parents=(self,))

        def back(g):
            if self.requires_grad:
                self._accumulate(np.roll(g, -shift, axis=axis))

        out._backward = back
        return out

    def __getitem__(self, idx):
        out = Tensor(self.data[idx], _parents=(self,))

        def back(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[idx] += g
                self._accumulate(full)

        out._backward = back
        return out

    def gather_last(self, idx):
        """Fancy-index the last axis with an integer array (duplicates allowed)."""
        idx = np.asarray(idx)
        out = Tensor(self.data[..., idx], _parents=(self,))

        def back(g):
            if not self.requires_grad:
                return
            full = np.zeros_like(self.data)
            flat = full.reshape(-1, self.shape[-1])
            gflat = g.reshape(-1, *idx.shape)
            for i in range(flat.shape[0]):
                np.add.at(flat[i], idx, gflat[i])
            self._accumulate(full)

        out._backward = back
        return out

    # -- linear algebra ------------------------------------------------

    def __matmul__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data @ other.data, _parents=(self, other))

        def back(g):
            if self.requires_grad:
                ga = g @ np.swapaxes(other.data, -1, -2)
                self._accumulate(_unbroadcast(ga, self.shape))
            if other.requires_grad:
                gb = np.swapaxes(self.data, -1, -2) @ g
                other._accumulate(_unbroadcast(gb, other.shape))

        out._backward = back
        return out


def where(mask, a, b):
    """Select elementwise by a constant boolean mask (mask is not differentiated)."""
    mask = np.asarray(mask, dtype=bool)
    a = Tensor._wrap(a)
    b = Tensor._wrap(b)
    out = Tensor(np.where(mask, a.data, b.data), _parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.where(mask, g, 0.0), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.where(mask, 0.0, g), b.shape))

    out._backward = back
    return out


def softmax(x, axis=-1):
    """Numerically stable softmax along ``axis``."""
    shift = np.max(x.data, axis=axis, keepdims=True)
    e = (x - shift).exp()
    return e / e.sum(axis=axis, keepdims=True)


def modulus(re, im, eps=1e-12):
    """sqrt(re^2 + im^2) with gradients floored at ``eps`` to stay bounded at 0."""
    m = np.sqrt(re.data**2 + im.data**2)
    out = Tensor(m, _parents=(re, im))
    denom = np.maximum(m, eps)

    def back(g):
        if re.requires_grad:
            re._accumulate(g * re.data / denom)
        if im.requires_grad:
            im._accumulate(g * im.data / denom)

    out._backward = back
    return out


def conv1d(x, w, stride=1, padding=0):
    """Cross-correlation of ``x`` [B, Cin, M] with kernels ``w`` [Cout, Cin, k]."""
    xd, wd = x.data, w.data
    if xd.ndim != 3 or wd.ndim != 3:
        raise ValueError("conv1d expects x [B, Cin, M] and w [Cout, Cin, k]")
    if xd.shape[1] != wd.shape[1]:
        raise ValueError(f"channel mismatch: input {xd.shape[1]} vs kernel {wd.shape[1]}")
    k = wd.shape[2]
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding))) if padding else xd
    m_out = (xp.shape[2] - k) // stride + 1
    if m_out < 1:
        raise ValueError("kernel longer than padded input")
    patches = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride]
    out = Tensor(np.einsum("bcmk,ock->bom", patches, wd, optimize=True), _parents=(x, w))

    def back(g):
        if w.requires_grad:
            w._accumulate(np.einsum("bom,bcmk->ock", g, patches, optimize=True))
        if x.requires_grad:
            gx = np.zeros_like(xp)
            for t in range(k):
                gx[:, :, t : t + stride * m_out : stride] += np.einsum(
                    "bom,oc->bcm", g, wd[:, :, t], optimize=True
                )
            if padding:
                gx = gx[:, :, padding:-padding]
            x._accumulate(gx)

    out._backward = back
    return out


def conv_transpose1d(x, w, stride, crop=0):
    """Transposed 1-D convolution: x [B, Cin, M], w [Cin, Cout, k].

    Output length is (M-1)*stride + k - 2*crop; ``crop`` trims both ends.
    """
    xd, wd = x.data, w.data
    if xd.shape[1] != wd.shape[0]:
        raise ValueError(f"channel mismatch: input {xd.shape[1]} vs kernel {wd.shape[0]}")
    b, _, m = xd.shape
    _, c_out, k = wd.shape
    full = np.zeros((b, c_out, (m - 1) * stride + k))
    for t in range(k):
        full[:, :, t : t + stride * m : stride] += np.einsum(
            "bcm,co->bom", xd, wd[:, :, t], optimize=True
        )
    data = full[:, :, crop : full.shape[2] - crop] if crop else full
    out = Tensor(data, _parents=(x, w))

    def back(g):
        gf = np.zeros_like(full)
        if crop:
            gf[:, :, crop : full.shape[2] - crop] = g
        else:
            gf = g
        if x.requires_grad:
            gx = np.zeros_like(xd)
            for t in range(k):
                gx += np.einsum(
                    "bom,co->bcm", gf[:, :, t : t + stride * m : stride], wd[:, :, t],
                    optimize=True,
                )
            x._accumulate(gx)
        if w.requires_grad:
            gw = np.zeros_like(wd)
            for t in range(k):
                gw[:, :, t] = np.einsum(
                    "bcm,bom->co", xd, gf[:, :, t : t + stride * m : stride], optimize=True
                )
            w._accumulate(gw)

    out._backward = back
    return out
