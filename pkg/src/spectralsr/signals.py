"""Multisinusoidal scene sampling, signal synthesis, and spectrum targets.

Digital frequencies live on [-0.5, 0.5) cycles/sample and are periodic on
the unit circle; all distances here wrap accordingly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SSR1"
_DTYPE_CODES = {"complex128": 1, "float64": 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def wrapped_distance(f1, f2):
    """Shortest distance between digital frequencies on the unit circle."""
    d = np.abs(np.asarray(f1) - np.asarray(f2)) % 1.0
    return np.minimum(d, 1.0 - d)


@dataclass
class FrequencyScene:
    """Ground truth: component frequencies and complex amplitudes."""

    freqs: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        self.freqs = np.atleast_1d(np.asarray(self.freqs, dtype=np.float64))
        self.amps = np.atleast_1d(np.asarray(self.amps, dtype=np.complex128))
        if self.freqs.shape != self.amps.shape:
            raise ValueError("freqs and amps must have matching lengths")
        if self.count < 1:
            raise ValueError("a scene needs at least one component")

    @property
    def count(self):
        return len(self.freqs)


@dataclass
class SceneConfig:
    """Scene sampler settings; min_separation defaults to 1/(2*n_sr)."""

    l_min: int = 1
    l_max: int = 10
    n_sr: int = 4096
    min_separation: float | None = None
    amp_lo: float = 0.1
    amp_hi: float = 1.0
    max_tries: int = 10000

    def separation(self):
        if self.min_separation is not None:
            return self.min_separation
        return 1.0 / (2.0 * self.n_sr)


def sample_scene(rng, cfg=None):
    """Draw one scene: L uniform on [l_min, l_max], frequencies uniform on
    [-0.5, 0.5) rejected until the wrapped min-spacing constraint holds,
    amplitude moduli log-uniform on [amp_lo, amp_hi] with uniform phase."""
    cfg = cfg or SceneConfig()
    count = int(rng.integers(cfg.l_min, cfg.l_max + 1))
    sep = cfg.separation()
    freqs = []
    for _ in range(cfg.max_tries):
        f = float(rng.uniform(-0.5, 0.5))
        if all(wrapped_distance(f, g) >= sep for g in freqs):
            freqs.append(f)
            if len(freqs) == count:
                break
    else:
        raise RuntimeError(
            f"scene sampling failed: could not place {count} frequencies with "
            f"spacing {sep} in {cfg.max_tries} tries"
        )
    mod = np.exp(rng.uniform(np.log(cfg.amp_lo), np.log(cfg.amp_hi), size=count))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return FrequencyScene(np.array(freqs), mod * np.exp(1j * phase))


def synthesize(scene, n, snr_db=np.inf, rng=None):
    """Render s[t] = sum_l a_l exp(j 2 pi f_l t) plus circular white noise.

    The noise power is set against the empirical power of the noiseless
    samples so the realized SNR matches ``snr_db`` exactly per scene;
    ``snr_db`` of +inf (or None) means noiseless.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    t = np.arange(n)
    clean = (scene.amps[:, None] * np.exp(2j * np.pi * scene.freqs[:, None] * t)).sum(axis=0)
    if snr_db is None or np.isinf(snr_db):
        return clean
    power = np.mean(np.abs(clean) ** 2)
    if power == 0.0:
        raise ValueError("SNR undefined for a zero signal")
    if rng is None:
        raise ValueError("a random stream is required for noisy synthesis")
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0) / 2.0)
    noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return clean + noise


def spectrum_grid(n_sr):
    """Uniform digital-frequency grid f_k = -0.5 + k/n_sr."""
    return -0.5 + np.arange(n_sr) / n_sr


def render_target(scene, n_sr, sigma_f=None):
    """Ground-truth spectrum: sum of wrapped Gaussians of height |amp|."""
    if sigma_f is None:
        sigma_f = 0.12 / n_sr
    if sigma_f <= 0:
        raise ValueError("sigma_f must be positive")
    grid = spectrum_grid(n_sr)
    out = np.zeros(n_sr)
    for f, a in zip(scene.freqs, scene.amps):
        d = wrapped_distance(grid, f)
        out += np.abs(a) * np.exp(-(d**2) / (2.0 * sigma_f**2))
    return out


def minmax_normalize(x):
    """Center by the complex mean and scale so the max modulus is 1.

    A constant signal maps to all zeros; the transform is idempotent.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("cannot normalize an empty signal")
    centered = x - x.mean()
    peak = np.abs(centered).max()
    if peak < 1e-300:
        return np.zeros_like(x)
    return centered / peak


# -- serialization -----------------------------------------------------


def scene_to_dict(scene):
    return {
        "freqs": scene.freqs.tolist(),
        "amps_re": scene.amps.real.tolist(),
        "amps_im": scene.amps.imag.tolist(),
    }


def scene_from_dict(d):
    return FrequencyScene(
        np.asarray(d["freqs"]),
        np.asarray(d["amps_re"]) + 1j * np.asarray(d["amps_im"]),
    )


def scenes_to_json(scenes, **meta):
    payload = {"version": 1, "scenes": [scene_to_dict(s) for s in scenes]}
    payload.update(meta)
    return json.dumps(payload, sort_keys=True)


def scenes_from_json(text):
    payload = json.loads(text)
    if payload.get("version") != 1:
        raise ValueError("unsupported scene file version")
    return [scene_from_dict(d) for d in payload["scenes"]], payload


def write_records(path, array):
    """Write a [count, length] batch of signals or spectra.

    Layout: magic, u8 dtype code, u32 count, u32 length, then raw
    little-endian samples (interleaved re/im for complex).
    """
    array = np.atleast_2d(np.asarray(array))
    if np.iscomplexobj(array):
        array = array.astype(np.complex128)
    else:
        array = array.astype(np.float64)
    code = _DTYPE_CODES[array.dtype.name]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BII", code, array.shape[0], array.shape[1]))
        fh.write(array.astype(array.dtype.newbyteorder("<")).tobytes())


def read_records(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a record file (bad magic)")
        header = fh.read(9)
        if len(header) != 9:
            raise ValueError(f"{path}: truncated header")
        code, count, length = struct.unpack("<BII", header)
        if code not in _CODE_DTYPES:
            raise ValueError(f"{path}: unknown dtype code {code}")
        dtype = np.dtype(_CODE_DTYPES[code]).newbyteorder("<")
        raw = fh.read()
    expected = count * length * dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=dtype).astype(dtype.base).reshape(count, length)


@dataclass
class Dataset:
    """Scenes plus their noisy realizations, bundled in one file."""

    scenes: list
    signals: np.ndarray
    meta: dict = field(default_factory=dict)


DATASET_MAGIC = b"SSRD"


def write_dataset(path, dataset):
    scenes_json = scenes_to_json(dataset.scenes, **dataset.meta).encode()
    sig = np.atleast_2d(dataset.signals).astype(np.complex128)
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<I", len(scenes_json)))
        fh.write(scenes_json)
        fh.write(struct.pack("<II", sig.shape[0], sig.shape[1]))
        fh.write(sig.astype(np.dtype(np.complex128).newbyteorder("<")).tobytes())


def read_dataset(path):
    with open(path, "rb") as fh:
        if fh.read(4) != DATASET_MAGIC:
            raise ValueError(f"{path}: not a dataset file (bad magic)")
        (json_len,) = struct.unpack("<I", fh.read(4))
        scenes, meta = scenes_from_json(fh.read(json_len).decode())
        count, length = struct.unpack("<II", fh.read(8))
        raw = fh.read()
    dtype = np.dtype(np.complex128).newbyteorder("<")
    expected = count * length * dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated dataset payload")
    signals = np.frombuffer(raw, dtype=dtype).astype(np.complex128).reshape(count, length)
    meta = {k: v for k, v in meta.items() if k not in ("version", "scenes")}
    return Dataset(scenes, signals, meta)
