import numpy as np
import pytest

from spectralsr.autodiff import Tensor, conv1d, conv_transpose1d, modulus, softmax, where


def numeric_grad(fn, t, eps=1e-6):
    g = np.zeros_like(t.data)
    it = np.nditer(t.data, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = t.data[idx]
        t.data[idx] = orig + eps
        hi = fn().item()
        t.data[idx] = orig - eps
        lo = fn().item()
        t.data[idx] = orig
        g[idx] = (hi - lo) / (2 * eps)
    return g


def check(fn, t, tol=1e-6):
    t.zero_grad()
    fn().backward()
    num = numeric_grad(fn, t)
    assert np.allclose(t.grad, num, rtol=tol, atol=tol)


def test_add_mul_broadcast():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4,)), requires_grad=True)
    check(lambda: ((a + b) * b).sum(), a)
    check(lambda: ((a + b) * b).sum(), b)


def test_div_pow():
    rng = np.random.default_rng(1)
    a = Tensor(rng.uniform(0.5, 2.0, size=(5,)), requires_grad=True)
    check(lambda: (1.0 / a + a**3).sum(), a)


def test_matmul_batched():
    rng = np.random.default_rng(2)
    a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    proj = rng.normal(size=(2, 3, 5))
    check(lambda: ((a @ b) * proj).sum(), a)
    check(lambda: ((a @ b) * proj).sum(), b)


def test_exp_log_sqrt_erf():
    rng = np.random.default_rng(3)
    a = Tensor(rng.uniform(0.2, 2.0, size=(6,)), requires_grad=True)
    check(lambda: (a.exp() + a.log() + a.sqrt() + a.erf()).sum(), a)


def test_reductions_and_reshape():
    rng = np.random.default_rng(4)
    a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    check(lambda: a.mean(axis=(0, 2)).sum(), a)
    check(lambda: (a.reshape(6, 4).sum(axis=0) ** 2).sum(), a)
    check(lambda: a.transpose((2, 0, 1)).sum(axis=-1).mean(), a)


def test_roll_getitem_gather():
    rng = np.random.default_rng(5)
    a = Tensor(rng.normal(size=(3, 7)), requires_grad=True)
    proj = rng.normal(size=(3, 4))
    idx = np.array([0, 2, 2, 6])
    check(lambda: (a.roll(3, axis=1)[:, 1:5] * proj).sum(), a)
    check(lambda: (a.gather_last(idx) * proj).sum(), a)


def test_where_and_relu():
    rng = np.random.default_rng(6)
    a = Tensor(rng.normal(size=(8,)), requires_grad=True)
    b = Tensor(rng.normal(size=(8,)), requires_grad=True)
    mask = rng.normal(size=8) > 0
    check(lambda: (where(mask, a * 2.0, b) + a.relu()).sum(), a)
    check(lambda: where(mask, a * 2.0, b).sum(), b)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(5, 9)) * 10)
    s = softmax(x, axis=-1)
    assert np.allclose(s.data.sum(axis=-1), 1.0, atol=1e-12)
    xg = Tensor(x.data, requires_grad=True)
    proj = rng.normal(size=(5, 9))
    check(lambda: (softmax(xg, axis=-1) * proj).sum(), xg, tol=1e-5)


def test_modulus_matches_abs_and_grad():
    rng = np.random.default_rng(8)
    re = Tensor(rng.normal(size=(6,)), requires_grad=True)
    im = Tensor(rng.normal(size=(6,)), requires_grad=True)
    m = modulus(re, im)
    assert np.allclose(m.data, np.abs(re.data + 1j * im.data))
    check(lambda: modulus(re, im).sum(), re)
    check(lambda: modulus(re, im).sum(), im)


def test_modulus_bounded_gradient_at_origin():
    re = Tensor(np.zeros(3), requires_grad=True)
    im = Tensor(np.zeros(3), requires_grad=True)
    modulus(re, im).sum().backward()
    assert np.all(np.isfinite(re.grad))
    assert np.all(np.isfinite(im.grad))


def test_conv1d_matches_nested_loop_oracle():
    rng = np.random.default_rng(9)
    x = Tensor(rng.normal(size=(2, 3, 10)), requires_grad=True)
    w = Tensor(rng.normal(size=(4, 3, 3)), requires_grad=True)
    y = conv1d(x, w, stride=1, padding=1)
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1)))
    ref = np.zeros_like(y.data)
    for b in range(2):
        for o in range(4):
            for m in range(10):
                for c in range(3):
                    for t in range(3):
                        ref[b, o, m] += xp[b, c, m + t] * w.data[o, c, t]
    assert np.allclose(y.data, ref, atol=1e-12)
    proj = rng.normal(size=y.shape)
    check(lambda: (conv1d(x, w, padding=1) * proj).sum(), x, tol=1e-5)
    check(lambda: (conv1d(x, w, padding=1) * proj).sum(), w, tol=1e-5)


def test_conv1d_rejects_channel_mismatch():
    x = Tensor(np.zeros((1, 2, 8)))
    w = Tensor(np.zeros((3, 4, 3)))
    with pytest.raises(ValueError, match="channel mismatch"):
        conv1d(x, w)


def test_conv_transpose1d_is_adjoint_of_conv():
    # <conv(x), y> == <x, conv_transpose(y)> for matching geometry
    rng = np.random.default_rng(10)
    stride, k = 2, 4
    x = np.random.default_rng(0).normal(size=(1, 3, 9))
    w = rng.normal(size=(2, 3, k))  # [Co, Ci, k] for conv
    xt = Tensor(x)
    fwd = conv1d(xt, Tensor(w), stride=stride, padding=0)
    y = rng.normal(size=fwd.shape)
    lhs = float((fwd.data * y).sum())
    # conv_transpose expects [Cin, Cout, k]; for the adjoint, Cin is the
    # conv's output-channel axis, so the conv kernel is reused unswapped
    back = conv_transpose1d(Tensor(y), Tensor(w), stride=stride)
    # trailing x samples never covered by a conv window contribute nothing,
    # so the adjoint output can be shorter than x; pair up the covered span
    span = back.shape[2]
    rhs = float((back.data * x[:, :, :span]).sum())
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_conv_transpose1d_grad():
    rng = np.random.default_rng(11)
    x = Tensor(rng.normal(size=(2, 3, 5)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 2, 4)), requires_grad=True)
    proj = rng.normal(size=(2, 2, (5 - 1) * 2 + 4 - 2))
    check(lambda: (conv_transpose1d(x, w, stride=2, crop=1) * proj).sum(), x, tol=1e-5)
    check(lambda: (conv_transpose1d(x, w, stride=2, crop=1) * proj).sum(), w, tol=1e-5)


def test_backward_requires_scalar():
    with pytest.raises(ValueError):
        Tensor(np.zeros(3), requires_grad=True).backward()
