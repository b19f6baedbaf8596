"""SwinFreq / CVSwinFreq forward graphs, parameter store, and checkpoints.

Both variants share the complex front end (linear + conv spectral feature
extractor) and the real transposed-convolution head.  The real variant
takes the modulus right after the front end; the complex variant carries
complex features through every block and takes the modulus just before
the head.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, conv1d, conv_transpose1d
from .cvops import (
    AttentionParams,
    ComplexAffine,
    CTensor,
    cprelu,
    cv_conv1d,
    cv_layer_norm,
    cv_linear,
    layer_norm,
    mlp,
    wmsa,
)
from .signals import minmax_normalize

VARIANTS = ("swinfreq", "cvswinfreq")
CHECKPOINT_MAGIC = b"SSRC"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters shared by both variants."""

    variant: str
    n: int = 64          # input samples
    n_sr: int = 4096     # output grid
    channels: int = 32   # feature channels C
    inner: int = 256     # inner feature length M
    window: int = 16     # attention window W
    heads: int = 8
    attn_dim: int = 4    # per-head dimension d
    depth: int = 3       # layers per block D
    blocks: int = 4      # block count B
    mf_mid: int = 2      # front-end intermediate channels
    mlp_ratio: int = 4

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.inner % self.window != 0:
            raise ValueError("window must divide the inner feature length")
        if self.n_sr % self.inner != 0:
            raise ValueError("inner feature length must divide the output grid size")
        if (self.n_sr // self.inner) % 2 != 0:
            raise ValueError("upsampling stride must be even")

    @property
    def stride(self):
        return self.n_sr // self.inner

    @property
    def head_kernel(self):
        return 2 * self.stride

    @property
    def is_complex(self):
        return self.variant == "cvswinfreq"

    def hash(self):
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def default_config(variant):
    """Full-size configs; the complex variant halves the attention
    dimension and MLP ratio so the two models end up a similar size."""
    if variant == "swinfreq":
        return ModelConfig(variant="swinfreq", attn_dim=4, mlp_ratio=4)
    if variant == "cvswinfreq":
        return ModelConfig(variant="cvswinfreq", attn_dim=2, mlp_ratio=2)
    raise ValueError(f"unknown variant {variant!r}")


def micro_config(variant="swinfreq"):
    """Tiny config for gradient checking."""
    return ModelConfig(
        variant=variant, n=8, n_sr=32, channels=2, inner=16, window=4,
        heads=1, attn_dim=2, depth=1, blocks=1, mf_mid=1, mlp_ratio=2,
    )


def toy_config(variant="swinfreq"):
    """Desk-scale config used by the training sanity experiment."""
    return ModelConfig(
        variant=variant, n=64, n_sr=1024, channels=8, inner=64, window=8,
        heads=2, attn_dim=4 if variant == "swinfreq" else 2, depth=2,
        blocks=2, mf_mid=2, mlp_ratio=4 if variant == "swinfreq" else 2,
    )


class ParameterStore:
    """Named flat collection of real learnable tensors.

    Complex parameters are stored as ``<name>.re`` / ``<name>.im`` pairs,
    so the scalar count already counts a complex weight as two.
    """

    def __init__(self, config, params=None, step=0, opt_state=None):
        self.config = config
        self.params: dict[str, Tensor] = params or {}
        self.step = step
        self.opt_state = opt_state or {}

    def add_real(self, name, tensor):
        self.params[name] = tensor

    def add_complex(self, name, ct):
        self.params[name + ".re"] = ct.re
        self.params[name + ".im"] = ct.im

    def real(self, name):
        return self.params[name]

    def complex(self, name):
        return CTensor(self.params[name + ".re"], self.params[name + ".im"])

    def count(self):
        return sum(t.size for t in self.params.values())

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def names(self):
        return sorted(self.params)


def _rayleigh(rng, shape, fan_in):
    sigma = 1.0 / np.sqrt(fan_in)
    mod = sigma * np.sqrt(-2.0 * np.log(rng.uniform(1e-300, 1.0, size=shape)))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return CTensor(
        Tensor(mod * np.cos(phase), requires_grad=True),
        Tensor(mod * np.sin(phase), requires_grad=True),
    )


def _normal(rng, shape, fan_in):
    return Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def _czeros(shape):
    return CTensor(_zeros(shape), _zeros(shape))


def _const(shape, value):
    return Tensor(np.full(shape, float(value)), requires_grad=True)


def _add_norm(store, prefix, c, is_complex):
    if is_complex:
        store.add_real(prefix + ".g_rr", _const(c, 1.0))
        store.add_real(prefix + ".g_ri", _zeros(c))
        store.add_real(prefix + ".g_ir", _zeros(c))
        store.add_real(prefix + ".g_ii", _const(c, 1.0))
        store.add_real(prefix + ".b_re", _zeros(c))
        store.add_real(prefix + ".b_im", _zeros(c))
    else:
        store.add_real(prefix + ".gamma", _const(c, 1.0))
        store.add_real(prefix + ".beta", _zeros(c))


def init_model(cfg, rng):
    """Create a freshly initialized parameter store for ``cfg``."""
    store = ParameterStore(cfg)
    c, w = cfg.channels, cfg.window
    h, d = cfg.heads, cfg.attn_dim
    hidden = cfg.mlp_ratio * c
    cx = cfg.is_complex

    store.add_complex("mf.linear.w", _rayleigh(rng, (cfg.n, cfg.inner * cfg.mf_mid), cfg.n))
    store.add_complex("mf.linear.b", _czeros(cfg.inner * cfg.mf_mid))
    store.add_complex("mf.conv.w", _rayleigh(rng, (c, cfg.mf_mid, 3), cfg.mf_mid * 3))
    store.add_complex("mf.conv.b", _czeros(c))

    def weight(shape, fan_in):
        return _rayleigh(rng, shape, fan_in) if cx else _normal(rng, shape, fan_in)

    def bias(shape):
        return _czeros(shape) if cx else _zeros(shape)

    add = store.add_complex if cx else store.add_real
    for i in range(cfg.blocks):
        for k in range(cfg.depth):
            p = f"blocks.{i}.layers.{k}"
            _add_norm(store, p + ".ln1", c, cx)
            for name in ("wq", "wk", "wv"):
                add(f"{p}.attn.{name}", weight((h, c, d), c))
            for name in ("bq", "bk", "bv"):
                add(f"{p}.attn.{name}", bias((h, d)))
            add(p + ".attn.rpe", bias((h, 2 * w - 1)))
            add(p + ".attn.out_w", weight((h * d, c), h * d))
            add(p + ".attn.out_b", bias(c))
            _add_norm(store, p + ".ln2", c, cx)
            add(p + ".mlp.w1", weight((c, hidden), c))
            add(p + ".mlp.b1", bias(hidden))
            add(p + ".mlp.w2", weight((hidden, c), hidden))
            add(p + ".mlp.b2", bias(c))
            if cx:
                store.add_real(p + ".mlp.slope_re", _const((), 0.25))
                store.add_real(p + ".mlp.slope_im", _const((), 0.25))
        add(f"blocks.{i}.conv.w", weight((c, c, 3), c * 3))
        add(f"blocks.{i}.conv.b", bias(c))

    store.add_real("head.w", _normal(rng, (c, 1, cfg.head_kernel), c * cfg.head_kernel))
    store.add_real("head.b", _zeros(1))
    return store


def param_count(cfg):
    """Total real scalar count for the architecture (complex counts as 2)."""
    return init_model(cfg, np.random.default_rng(0)).count()


# -- forward passes ----------------------------------------------------


def mf_forward(x, store):
    """Complex front end: linear N -> M*mid, reshape, conv to C channels.

    Returns [B, M, C]; real (modulus) for the swinfreq variant.
    """
    cfg = store.config
    if x.shape[-1] != cfg.n:
        raise ValueError(f"expected input length {cfg.n}, got {x.shape[-1]}")
    y = cv_linear(x, store.complex("mf.linear.w"), store.complex("mf.linear.b"))
    batch = y.shape[:-1]
    y = y.reshape(*batch, cfg.mf_mid, cfg.inner)
    if y.ndim == 2:
        y = y.reshape(1, cfg.mf_mid, cfg.inner)
    y = cv_conv1d(y, store.complex("mf.conv.w"), padding=1)
    bias = store.complex("mf.conv.b")
    y = CTensor(y.re + bias.re.reshape(1, cfg.channels, 1), y.im + bias.im.reshape(1, cfg.channels, 1))
    y = y.transpose((0, 2, 1))  # [B, M, C]
    if not batch:
        y = y.reshape(cfg.inner, cfg.channels)
    if cfg.is_complex:
        return y
    return y.modulus()


def _norm(x, store, prefix, is_complex):
    if is_complex:
        affine = ComplexAffine(
            store.real(prefix + ".g_rr"), store.real(prefix + ".g_ri"),
            store.real(prefix + ".g_ir"), store.real(prefix + ".g_ii"),
            store.real(prefix + ".b_re"), store.real(prefix + ".b_im"),
        )
        return cv_layer_norm(x, affine)
    return layer_norm(x, store.real(prefix + ".gamma"), store.real(prefix + ".beta"))


def _attn_params(store, prefix, cfg):
    get = store.complex if cfg.is_complex else store.real
    return AttentionParams(
        wq=get(prefix + ".wq"), wk=get(prefix + ".wk"), wv=get(prefix + ".wv"),
        bq=get(prefix + ".bq"), bk=get(prefix + ".bk"), bv=get(prefix + ".bv"),
        rpe=get(prefix + ".rpe"), out_w=get(prefix + ".out_w"),
        out_b=get(prefix + ".out_b"), heads=cfg.heads, dim=cfg.attn_dim,
    )


def sstl_forward(g, store, prefix, shift):
    """One (CV)SSTL: pre-norm attention and MLP, both with residuals."""
    cfg = store.config
    cx = cfg.is_complex
    attn = wmsa(_norm(g, store, prefix + ".ln1", cx), _attn_params(store, prefix + ".attn", cfg),
                cfg.window, shift=shift)
    g1 = attn + g
    act = None
    if cx:
        sre, sim = store.real(prefix + ".mlp.slope_re"), store.real(prefix + ".mlp.slope_im")
        act = lambda z: cprelu(z, sre, sim)
    get = store.complex if cx else store.real
    out = mlp(_norm(g1, store, prefix + ".ln2", cx),
              get(prefix + ".mlp.w1"), get(prefix + ".mlp.b1"),
              get(prefix + ".mlp.w2"), get(prefix + ".mlp.b2"), activation=act)
    return out + g1


def _channel_conv(x, weight, bias, is_complex):
    """Shape-preserving 3-tap convolution along the sequence axis of [B, M, C]."""
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape(1, *x.shape)
    y = x.transpose((0, 2, 1))
    if is_complex:
        y = cv_conv1d(y, weight, padding=1)
        y = CTensor(y.re + bias.re.reshape(1, -1, 1), y.im + bias.im.reshape(1, -1, 1))
    else:
        y = conv1d(y, weight, padding=1) + bias.reshape(1, -1, 1)
    y = y.transpose((0, 2, 1))
    if squeeze:
        y = y.reshape(*y.shape[1:])
    return y


def sstb_forward(f, store, block_index):
    """One (CV)SSTB: D chained layers, inner residual, closing convolution.

    Layer 1 uses the standard partition (shift 0); even layers shift by
    floor(W/2).
    """
    cfg = store.config
    g = f
    for k in range(cfg.depth):
        shift = 0 if k % 2 == 0 else cfg.window // 2
        g = sstl_forward(g, store, f"blocks.{block_index}.layers.{k}", shift)
    get = store.complex if cfg.is_complex else store.real
    return _channel_conv(f + g, get(f"blocks.{block_index}.conv.w"),
                         get(f"blocks.{block_index}.conv.b"), cfg.is_complex)


def sr_forward(f0, store):
    """Residual block stack plus transposed-convolution reconstruction."""
    cfg = store.config
    f = f0
    for i in range(cfg.blocks):
        f = sstb_forward(f, store, i)
    head_in = f0 + f
    if cfg.is_complex:
        head_in = head_in.modulus()
    squeeze = head_in.ndim == 2
    if squeeze:
        head_in = head_in.reshape(1, *head_in.shape)
    y = head_in.transpose((0, 2, 1))  # [B, C, M]
    crop = (cfg.head_kernel - cfg.stride) // 2
    y = conv_transpose1d(y, store.real("head.w"), stride=cfg.stride, crop=crop)
    y = y + store.real("head.b").reshape(1, 1, 1)
    y = y.relu()
    y = y.reshape(y.shape[0], cfg.n_sr)
    if squeeze:
        y = y.reshape(cfg.n_sr)
    return y


def model_forward_tensor(x_ct, store):
    """Differentiable forward on an already-normalized complex tensor."""
    return sr_forward(mf_forward(x_ct, store), store)


def model_forward(signal, store):
    """Full inference: normalize, run the graph, return numpy spectra."""
    arr = np.atleast_2d(np.asarray(signal, dtype=np.complex128))
    arr = np.stack([minmax_normalize(row) for row in arr])
    out = model_forward_tensor(CTensor.from_numpy(arr), store)
    result = out.data
    return result[0] if np.asarray(signal).ndim == 1 else result


# -- checkpoints -------------------------------------------------------


def save_checkpoint(store, path):
    """Write config, step, parameters, and optimizer state to one file."""
    cfg_json = json.dumps(asdict(store.config), sort_keys=True).encode()
    entries = [(name, store.params[name].data) for name in store.names()]
    for name in sorted(store.opt_state):
        state = store.opt_state[name]
        entries.append(("opt.m." + name, np.asarray(state["m"])))
        entries.append(("opt.v." + name, np.asarray(state["v"])))
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(bytes.fromhex(store.config.hash()))
        fh.write(struct.pack("<QI", store.step, len(cfg_json)))
        fh.write(cfg_json)
        fh.write(struct.pack("<I", len(entries)))
        for name, data in entries:
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(data.astype("<f8").tobytes())


class CheckpointError(RuntimeError):
    pass


def load_checkpoint(path, expected_config=None):
    """Read a checkpoint; verifies the stored config hash and optionally
    that it matches ``expected_config``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        if raw[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        stored_hash = raw[8:40].hex()
        step, cfg_len = struct.unpack_from("<QI", raw, 40)
        off = 52
        cfg_json = raw[off : off + cfg_len]
        off += cfg_len
        cfg = ModelConfig(**json.loads(cfg_json.decode()))
        if cfg.hash() != stored_hash:
            raise CheckpointError(f"{path}: config hash mismatch (corrupt header)")
        if expected_config is not None and expected_config.hash() != stored_hash:
            raise CheckpointError(
                f"{path}: checkpoint was trained with a different config"
            )
        (n_entries,) = struct.unpack_from("<I", raw, off)
        off += 4
        params: dict[str, Tensor] = {}
        opt_state: dict[str, dict] = {}
        for _ in range(n_entries):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off : off + name_len].decode()
            off += name_len
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = []
            for _ in range(ndim):
                (dim,) = struct.unpack_from("<I", raw, off)
                off += 4
                shape.append(dim)
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
            off += count * 8
            data = data.astype(np.float64).reshape(shape)
            if name.startswith("opt.m."):
                opt_state.setdefault(name[6:], {})["m"] = data
            elif name.startswith("opt.v."):
                opt_state.setdefault(name[6:], {})["v"] = data
            else:
                params[name] = Tensor(data, requires_grad=True)
        if off != len(raw):
            raise CheckpointError(f"{path}: trailing bytes after payload")
    except (struct.error, ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint: {exc}") from exc
    return ParameterStore(cfg, params, step=step, opt_state=opt_state)
