"""Classical line-spectra baselines: periodogram, MUSIC, OMP, AIC/SORTE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import spectrum_grid

_WINDOWS = ("rect", "hann", "hamming")


def periodogram(signal, n_fft=None, window="rect"):
    """Squared-magnitude windowed DFT on an fftshifted grid.

    Normalized by the squared coherent gain so a unit-amplitude on-grid
    tone with a rectangular window peaks at exactly 1.  Index 0 of the
    output corresponds to f = -0.5.
    """
    signal = np.asarray(signal, dtype=np.complex128)
    n = len(signal)
    n_fft = n if n_fft is None else int(n_fft)
    if n_fft < n:
        raise ValueError("n_fft must be at least the signal length")
    if window == "rect":
        taper = np.ones(n)
    elif window == "hann":
        taper = np.hanning(n)
    elif window == "hamming":
        taper = np.hamming(n)
    else:
        raise ValueError(f"unknown window {window!r}; supported: {', '.join(_WINDOWS)}")
    spec = np.fft.fft(taper * signal, n_fft)
    return np.fft.fftshift(np.abs(spec) ** 2) / taper.sum() ** 2


def sample_covariance(signal, m):
    """Forward-backward spatially smoothed covariance from one snapshot.

    Averages x_k x_k^H over all n-m+1 sliding windows together with the
    exchange-conjugated counterpart, divided by 2(n-m+1).
    """
    signal = np.asarray(signal, dtype=np.complex128)
    n = len(signal)
    if not 1 <= m <= n:
        raise ValueError(f"subarray length {m} must be in [1, {n}]")
    windows = np.lib.stride_tricks.sliding_window_view(signal, m)  # [n-m+1, m]
    r_fwd = windows.T @ windows.conj()
    r_bwd = r_fwd[::-1, ::-1].conj()
    return (r_fwd + r_bwd) / (2.0 * windows.shape[0])


def music(signal, order, m=None, n_grid=4096):
    """MUSIC pseudospectrum from the smoothed single-snapshot covariance.

    Scaled to max 1; the denominator carries a 1e-12 ridge so noiseless
    peaks stay finite without shifting the argmax.
    """
    signal = np.asarray(signal, dtype=np.complex128)
    n = len(signal)
    m = n // 2 if m is None else int(m)
    if not 0 <= order < m:
        raise ValueError(f"model order {order} must satisfy 0 <= order < m={m}")
    cov = sample_covariance(signal, m)
    _, vecs = np.linalg.eigh(cov)  # ascending eigenvalues
    noise_basis = vecs[:, : m - order]
    grid = spectrum_grid(n_grid)
    steering = np.exp(2j * np.pi * np.outer(np.arange(m), grid))
    proj = noise_basis.conj().T @ steering
    denom = np.sum(np.abs(proj) ** 2, axis=0)
    pseudo = 1.0 / (denom + 1e-12)
    return pseudo / pseudo.max()


@dataclass
class OmpResult:
    """Selected atoms, least-squares coefficients, and residual history."""

    freqs: np.ndarray
    amps: np.ndarray
    residual_norm: float
    truncated: bool = False
    residual_history: list = field(default_factory=list)


def omp(signal, n_grid, sparsity):
    """Orthogonal matching pursuit over unit-norm complex-exponential atoms.

    Each iteration selects the atom with maximum |correlation| against the
    residual (ties broken toward the lowest grid index), refits all
    selected atoms by least squares, and updates the residual.  Stops
    early with ``truncated=True`` if the selected set goes rank deficient.
    """
    signal = np.asarray(signal, dtype=np.complex128)
    n = len(signal)
    if sparsity < 0 or sparsity > n:
        raise ValueError(f"sparsity {sparsity} must be in [0, {n}]")
    grid = spectrum_grid(n_grid)
    atoms = np.exp(2j * np.pi * np.outer(np.arange(n), grid)) / np.sqrt(n)
    residual = signal.copy()
    selected: list[int] = []
    coeffs = np.zeros(0, dtype=np.complex128)
    history = [float(np.linalg.norm(residual))]
    truncated = False
    for _ in range(sparsity):
        corr = np.abs(atoms.conj().T @ residual)
        best = int(np.argmax(corr))
        if best in selected:
            truncated = True
            break
        selected.append(best)
        sub = atoms[:, selected]
        sol, _, rank, _ = np.linalg.lstsq(sub, signal, rcond=None)
        if rank < len(selected):
            selected.pop()
            truncated = True
            break
        coeffs = sol
        residual = signal - sub @ coeffs
        history.append(float(np.linalg.norm(residual)))
    return OmpResult(
        freqs=grid[selected],
        amps=coeffs,
        residual_norm=history[-1],
        truncated=truncated,
        residual_history=history,
    )


def estimate_order_aic(eigenvalues, n_snapshots):
    """Wax-Kailath AIC order selection from descending eigenvalues."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if len(lam) < 2:
        raise ValueError("need at least 2 eigenvalues")
    if np.any(lam <= 0):
        raise ValueError("eigenvalues must be positive")
    m = len(lam)
    scores = np.empty(m)
    for k in range(m):
        tail = lam[k:]
        geo = np.exp(np.mean(np.log(tail)))
        arith = np.mean(tail)
        scores[k] = -2.0 * n_snapshots * (m - k) * np.log(geo / arith) + 2.0 * k * (2 * m - k)
    return int(np.argmin(scores))


def estimate_order_sorte(eigenvalues):
    """SORTE order selection: ratio of successive gap variances.

    Returns (order, degenerate); degenerate is True when every candidate
    ratio is undefined (all gap variances zero), in which case order is 0.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    m = len(lam)
    if m < 4:
        raise ValueError("SORTE needs at least 4 eigenvalues")
    gaps = lam[:-1] - lam[1:]  # gaps[i] = lambda_i - lambda_{i+1}, i = 0..m-2

    def var(x):
        return float(np.var(x))

    scores = []
    for k in range(1, m - 2):  # k is the candidate order, 1-indexed as in lam
        denom = var(gaps[k - 1 :])
        scores.append(var(gaps[k:]) / denom if denom > 0 else np.inf)
    scores = np.asarray(scores)
    if not np.any(np.isfinite(scores)):
        return 0, True
    return int(np.argmin(scores)) + 1, False
