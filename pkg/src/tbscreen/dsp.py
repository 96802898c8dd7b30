"""Low-level signal kernels: framing, spectra, filterbanks, DCT.

All kernels are pure functions on numpy arrays; FilterBank instances are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

LOG_FLOOR = 1e-10


def frame_signal(samples: np.ndarray, frame_length: int, hop: int | None = None) -> np.ndarray:
    """Split a 1-D signal into consecutive frames.

    Default hop equals `frame_length` (non-overlapping frames). Returns an
    array of shape (n_frames, frame_length). A trailing remainder shorter
    than one frame is dropped. A signal shorter than one frame yields a
    single zero-padded frame rather than nothing, so no input is silently
    discarded.
    """
    if frame_length <= 0:
        raise NumericError(f"frame_length must be positive, got {frame_length}")
    if hop is None:
        hop = frame_length
    if hop <= 0:
        raise NumericError(f"hop must be positive, got {hop}")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise NumericError(f"expected a 1-D signal, got shape {x.shape}")
    if len(x) < frame_length:
        frame = np.zeros(frame_length)
        frame[: len(x)] = x
        return frame[np.newaxis, :]
    n_frames = 1 + (len(x) - frame_length) // hop
    starts = np.arange(n_frames) * hop
    return np.stack([x[s : s + frame_length] for s in starts])


def frame_start_indices(n_samples: int, frame_length: int, hop: int | None = None) -> np.ndarray:
    """Start index of every frame `frame_signal` would emit for this length."""
    if hop is None:
        hop = frame_length
    if n_samples < frame_length:
        return np.array([0])
    n_frames = 1 + (n_samples - frame_length) // hop
    return np.arange(n_frames) * hop


def hamming_window(n: int) -> np.ndarray:
    return np.hamming(n)


def power_spectrum(frame: np.ndarray) -> np.ndarray:
    """One-sided periodogram of a frame: |FFT bin|^2 / N.

    Returns N/2 + 1 bins; DC and Nyquist appear once. The frame length must
    be a power of two.
    """
    x = np.asarray(frame, dtype=np.float64)
    n = len(x)
    if n < 2 or (n & (n - 1)) != 0:
        raise NumericError(f"frame length must be a power of two, got {n}")
    spec = np.abs(np.fft.rfft(x)) ** 2 / n
    return spec


def spectrum_energy(spec: np.ndarray) -> float:
    """Mean-square signal amplitude implied by a one-sided periodogram.

    Interior bins count twice (they fold the negative frequencies), DC and
    Nyquist once; dividing by N once more recovers mean(x^2) exactly.
    """
    n = 2 * (len(spec) - 1)
    return float((spec[0] + 2.0 * spec[1:-1].sum() + spec[-1]) / n)


def mel(f_hz) -> np.ndarray | float:
    """Map frequency in Hz onto the mel scale: 2595 * log10(1 + f/700)."""
    f = np.asarray(f_hz, dtype=np.float64)
    if np.any(f < 0):
        raise NumericError("mel is undefined for negative frequencies")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if np.isscalar(f_hz) else out


def mel_inverse(m) -> np.ndarray | float:
    """Inverse of `mel`: Hz from mel value."""
    m_arr = np.asarray(m, dtype=np.float64)
    out = 700.0 * (10.0 ** (m_arr / 2595.0) - 1.0)
    return float(out) if np.isscalar(m) else out


@dataclass(frozen=True)
class FilterBank:
    """Bank of triangular filters over one-sided FFT bins.

    `weights` has one row per filter; each row is a triangle with unit peak
    at its centre bin, zero outside its band. `band_edges_hz` holds the
    n_filters + 2 nominal (continuous) edge frequencies; `edge_bins` the
    distinct FFT bins they snapped to.
    """

    kind: str  # "mel" or "linear"
    n_filters: int
    frame_length: int
    sample_rate: int
    weights: np.ndarray = field(repr=False)
    band_edges_hz: np.ndarray = field(repr=False)
    edge_bins: np.ndarray = field(repr=False)

    def apply(self, spec: np.ndarray) -> np.ndarray:
        """Filter energies for one spectrum or a (n_frames, bins) batch."""
        return np.asarray(spec) @ self.weights.T

    @property
    def center_frequencies_hz(self) -> np.ndarray:
        return self.band_edges_hz[1:-1]


def build_filterbank(kind: str, n_filters: int, frame_length: int, sample_rate: int) -> FilterBank:
    """Construct a triangular filterbank over the one-sided spectrum.

    "mel" places the n_filters + 2 band edges equally spaced on the mel
    axis, "linear" equally spaced in Hz, both spanning (0, Nyquist). Edges
    snap to FFT bin indices; where the grid is too coarse to keep snapped
    edges distinct they are bumped to the next free bin, so every triangle
    owns a peak bin with weight exactly 1. When more filters are requested
    than distinct bins exist, some filter would span zero bins and the
    construction fails.
    """
    if kind not in ("mel", "linear"):
        raise NumericError(f"unknown filterbank kind: {kind!r}")
    if n_filters < 1:
        raise NumericError("n_filters must be >= 1")
    nyquist = sample_rate / 2.0
    if kind == "mel":
        edges_hz = mel_inverse(np.linspace(mel(0.0), mel(nyquist), n_filters + 2))
    else:
        edges_hz = np.linspace(0.0, nyquist, n_filters + 2)

    n_bins = frame_length // 2 + 1
    edge_bins = np.floor((frame_length + 1) * edges_hz / sample_rate).astype(int)
    edge_bins = np.minimum(edge_bins, n_bins - 1)
    for k in range(1, len(edge_bins)):
        edge_bins[k] = max(edge_bins[k], edge_bins[k - 1] + 1)
    if edge_bins[-1] > n_bins - 1:
        raise NumericError(
            f"some filter spans zero FFT bins: {kind} bank of {n_filters} filters needs "
            f"{n_filters + 2} distinct bins but frame length {frame_length} provides {n_bins}"
        )

    weights = np.zeros((n_filters, n_bins))
    for j in range(n_filters):
        b0, b1, b2 = edge_bins[j], edge_bins[j + 1], edge_bins[j + 2]
        for i in range(b0, b1):
            weights[j, i] = (i - b0) / (b1 - b0)
        for i in range(b1, b2):
            weights[j, i] = (b2 - i) / (b2 - b1)
    weights.flags.writeable = False
    edge_bins.flags.writeable = False
    return FilterBank(
        kind=kind,
        n_filters=n_filters,
        frame_length=frame_length,
        sample_rate=sample_rate,
        weights=weights,
        band_edges_hz=edges_hz,
        edge_bins=edge_bins,
    )


def dct_ii(values: np.ndarray, n_keep: int) -> np.ndarray:
    """Orthonormal DCT-II, keeping the first `n_keep` coefficients.

    Accepts a vector or a (n_frames, n) batch; the transform runs along the
    last axis.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[-1]
    if n_keep > n:
        raise NumericError(f"cannot keep {n_keep} coefficients from {n} inputs")
    return x @ dct_ii_matrix(n)[:n_keep].T


def dct_ii_matrix(n: int) -> np.ndarray:
    """Full n x n orthonormal DCT-II matrix (rows are basis vectors)."""
    k = np.arange(n)[:, np.newaxis]
    m = np.arange(n)[np.newaxis, :]
    mat = np.sqrt(2.0 / n) * np.cos(np.pi * k * (m + 0.5) / n)
    mat[0] /= np.sqrt(2.0)
    return mat
