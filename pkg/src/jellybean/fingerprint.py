"""Activity fingerprinting: CSI trace -> fingerprint bits.

Stages: wavelet denoising, subcarrier ranking by correlation with the centre
subcarrier, moving variance, subcarrier averaging and block downsampling,
threshold detection, run-length encoding, Gray coding and LSB truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
import pywt

from .errors import (EmptyInput, EmptyTrace, RunOverflow, SeriesTooShort,
                     TruncationTooWide, WindowTooLarge)
from .simenv import CsiTrace


@dataclass(frozen=True)
class AfParams:
    window_sec: float = 0.1          # moving-variance window W_m
    downsample: int = 300            # averaging window W_s, in samples
    lsb_count: int = 5               # retained LSBs per block
    threshold_window_sec: float = 1.0
    threshold_guard: float = 3.0
    wavelet: str = "db4"
    wavelet_levels: int = 4

    def __post_init__(self):
        if self.window_sec <= 0:
            raise ValueError("window_sec must be > 0")
        if self.downsample < 1:
            raise ValueError("downsample must be >= 1")
        if self.lsb_count < 1:
            raise ValueError("lsb_count must be >= 1")
        if self.threshold_window_sec <= 0 or self.threshold_guard <= 0:
            raise ValueError("threshold window and guard must be > 0")

    def window_samples(self, rate: float) -> int:
        w = max(3, int(round(self.window_sec * rate)))
        return w if w % 2 else w + 1


ARTIFICIAL = AfParams(window_sec=0.1, downsample=300, lsb_count=5)
DAILY = AfParams(window_sec=0.25, downsample=600, lsb_count=5)


def default_af_params(kind: str) -> AfParams:
    return {"artificial": ARTIFICIAL, "daily": DAILY}[kind]


@dataclass(frozen=True)
class SmoothedSeries:
    values: np.ndarray
    sample_rate: float


@dataclass(frozen=True)
class RunBlock:
    length: int
    bit: int


@dataclass
class Fingerprint:
    bits: np.ndarray
    block_spans: list[tuple[int, int]] = field(default_factory=list)
    event_count: int = 0
    gray_bits: int = 0

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return bits_to_str(self.bits)


def bits_from_str(s: str) -> np.ndarray:
    s = "".join(ch for ch in s if ch in "01")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


# ---------------------------------------------------------------- denoising

def _denoise_rows(x: np.ndarray, wavelet: str, levels: int) -> np.ndarray:
    n = x.shape[-1]
    level = min(levels, pywt.dwt_max_level(n, pywt.Wavelet(wavelet).dec_len))
    if level < 1:
        return x.copy()
    coeffs = pywt.wavedec(x, wavelet, level=level, axis=-1, mode="symmetric")
    # noise level from the finest detail band, universal threshold
    sigma = np.median(np.abs(coeffs[-1]), axis=-1, keepdims=True) / 0.6745
    thr = sigma * math.sqrt(2.0 * math.log(n))
    coeffs[1:] = [pywt.threshold(c, thr, mode="soft") for c in coeffs[1:]]
    return pywt.waverec(coeffs, wavelet, axis=-1, mode="symmetric")[..., :n]


def denoise(trace: CsiTrace, wavelet: str = "db4", levels: int = 4) -> CsiTrace:
    """Wavelet-denoise each subcarrier's amplitude over the valid samples.

    The returned trace carries amplitudes only (zero phase); invalid columns
    and the validity mask are left untouched.
    """
    valid = trace.validity
    if not valid.any():
        return trace
    amp = np.abs(trace.samples[:, valid])
    clean = np.clip(_denoise_rows(amp, wavelet, levels), 0.0, None)
    out = np.zeros(trace.samples.shape, dtype=np.complex64)
    out[:, valid] = clean
    return replace(trace, samples=out)


# ---------------------------------------------------------------- ranking

def subcarrier_correlation(amp: np.ndarray, ref: int) -> np.ndarray:
    """Normalised cross-correlation of every row with row ``ref``.

    Each series is standardised with its own mean and sample standard
    deviation; zero-variance rows get correlation 0.
    """
    n = amp.shape[1]
    dev = amp - amp.mean(axis=1, keepdims=True, dtype=np.float64).astype(amp.dtype)
    sd = np.sqrt(np.einsum("ij,ij->i", dev, dev) / (n - 1))
    rho = (dev @ dev[ref]) / (n - 1)
    ok = (sd > 0) & (sd[ref] > 0)
    rho = np.divide(rho, sd * sd[ref], out=np.zeros_like(rho), where=ok).astype(np.float64)
    return rho


def rank_subcarriers(trace: CsiTrace | np.ndarray) -> list[int]:
    """Indices (0-based) of the K/2 subcarriers most correlated with subcarrier K/2.

    The reference is the K/2-th subcarrier counting from one, i.e. index
    K//2 - 1. Ties are broken towards the lower index.
    """
    if isinstance(trace, CsiTrace):
        amp = np.abs(trace.samples[:, trace.validity])
    else:
        amp = np.asarray(trace)
    K = amp.shape[0]
    if K % 2:
        raise ValueError("subcarrier count must be even")
    rho = subcarrier_correlation(amp, K // 2 - 1)
    order = np.argsort(-rho, kind="stable")
    return [int(i) for i in order[: K // 2]]


# ---------------------------------------------------------------- smoothing

@numba.njit(cache=True)
def _moving_var_rows(x, half):
    rows, n = x.shape
    out = np.empty((rows, n))
    for r in range(rows):
        mu = 0.0
        for j in range(n):
            mu += x[r, j]
        mu /= n
        # prefix sums of the centred series keep cancellation small
        c1 = np.zeros(n + 1)
        c2 = np.zeros(n + 1)
        for j in range(n):
            v = x[r, j] - mu
            c1[j + 1] = c1[j] + v
            c2[j + 1] = c2[j] + v * v
        for j in range(n):
            lo = max(j - half, 0)
            hi = min(j + half + 1, n)
            cnt = hi - lo
            s1 = c1[hi] - c1[lo]
            s2 = c2[hi] - c2[lo]
            out[r, j] = (s2 - s1 * s1 / cnt) / (cnt - 1)
    return out


def moving_variance(series: np.ndarray, window: int) -> np.ndarray:
    """Centred unbiased moving variance; edges use the truncated window.

    Works along the last axis, so a (K, n) matrix is processed row-wise.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[-1]
    if window < 2 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    if window > n:
        raise WindowTooLarge(f"window {window} exceeds series length {n}")
    x2 = np.ascontiguousarray(x.reshape(-1, n))
    var = _moving_var_rows(x2, (window - 1) // 2).reshape(x.shape)
    return np.clip(var, 0.0, None)


def aggregate_and_downsample(per_subcarrier_mv: np.ndarray, downsample: int,
                             sample_rate: float = 3100.0) -> SmoothedSeries:
    """Column mean across subcarriers, then non-overlapping block averages."""
    mv = np.atleast_2d(np.asarray(per_subcarrier_mv, dtype=np.float64))
    T = mv.mean(axis=0)
    m = len(T) // downsample
    gamma = T[: m * downsample].reshape(m, downsample).mean(axis=1)
    return SmoothedSeries(gamma, sample_rate / downsample)


# ---------------------------------------------------------------- detection

def compute_threshold(gamma: SmoothedSeries, window_sec: float = 1.0, guard: float = 3.0) -> float:
    """``guard`` times the mean of the quietest ``window_sec`` worth of samples."""
    ell = int(round(window_sec * gamma.sample_rate))
    if ell < 1 or ell > len(gamma.values):
        raise SeriesTooShort(
            f"threshold window of {ell} samples does not fit {len(gamma.values)} samples")
    quiet = np.partition(gamma.values, ell - 1)[:ell]
    return guard * float(quiet.mean())


def detect_activity(gamma: SmoothedSeries | np.ndarray, tau: float) -> np.ndarray:
    values = gamma.values if isinstance(gamma, SmoothedSeries) else np.asarray(gamma)
    return (values >= tau).astype(np.uint8)


# ---------------------------------------------------------------- encoding

def rle_encode(bits) -> list[RunBlock]:
    b = np.asarray(bits, dtype=np.uint8).ravel()
    if b.size == 0:
        raise EmptyInput("cannot run-length encode an empty sequence")
    edges = np.flatnonzero(np.diff(b)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [b.size]))
    return [RunBlock(int(e - s), int(b[s])) for s, e in zip(starts, ends)]


def rle_decode(runs: list[RunBlock]) -> np.ndarray:
    if not runs:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate([np.full(r.length, r.bit, dtype=np.uint8) for r in runs])


def gray(x: int) -> int:
    return x ^ (x >> 1)


def gray_width(runs: list[RunBlock]) -> int:
    return max(r.length for r in runs).bit_length()


def gray_encode(runs: list[RunBlock], gray_bits: int) -> list[np.ndarray]:
    """Each block is Gray(run length) on ``gray_bits`` bits, MSB first, then the run's bit."""
    blocks = []
    for r in runs:
        if r.length >= 1 << gray_bits:
            raise RunOverflow(f"run of {r.length} does not fit {gray_bits} Gray bits")
        g = gray(r.length)
        word = [(g >> (gray_bits - 1 - i)) & 1 for i in range(gray_bits)] + [r.bit]
        blocks.append(np.array(word, dtype=np.uint8))
    return blocks


def truncate_lsb(blocks: list[np.ndarray], lsb_count: int, runs: list[RunBlock] | None = None) -> Fingerprint:
    if not blocks:
        return Fingerprint(np.zeros(0, dtype=np.uint8))
    width = len(blocks[0])
    if lsb_count > width:
        raise TruncationTooWide(f"cannot keep {lsb_count} bits of {width}-bit blocks")
    bits = np.concatenate([blk[-lsb_count:] for blk in blocks]).astype(np.uint8)
    spans = [(i, lsb_count) for i in range(len(blocks))]
    events = sum(1 for r in runs if r.bit == 1) if runs is not None else sum(int(b[-1]) for b in blocks)
    return Fingerprint(bits, spans, events, width - 1)


def encode_bits(B, lsb_count: int, gray_bits: int | None = None) -> Fingerprint:
    """RLE, Gray code and truncate a detection sequence.

    Without an explicit width the Gray code is sized by the longest run, but
    never narrower than ``lsb_count - 1`` so every block yields ``lsb_count``
    bits; low-order Gray bits do not depend on the width.
    """
    runs = rle_encode(B)
    if gray_bits is None:
        gray_bits = max(gray_width(runs), lsb_count - 1)
    return truncate_lsb(gray_encode(runs, gray_bits), lsb_count, runs)


# ---------------------------------------------------------------- pipeline

@dataclass
class AfStages:
    """Intermediate series of one pipeline run (for plotting and debugging)."""

    subcarriers: list[int]
    T: np.ndarray
    gamma: SmoothedSeries
    tau: float
    B: np.ndarray
    fingerprint: Fingerprint


def _standardise_by_sector(amp: np.ndarray, sectors: np.ndarray) -> np.ndarray:
    """Remove per-sector level and noise scale so samples from different paths are comparable."""
    out = np.empty_like(amp)
    for s in np.unique(sectors):
        cols = sectors == s
        x = amp[:, cols]
        med = np.median(x, axis=1, keepdims=True)
        if x.shape[1] > 1:
            noise = np.median(np.abs(np.diff(x, axis=1)), axis=1, keepdims=True) / (0.6745 * math.sqrt(2))
        else:
            noise = np.ones_like(med)
        noise[noise <= 0] = 1.0
        out[:, cols] = (x - med) / noise
    return out


def valid_amplitude(trace: CsiTrace) -> np.ndarray:
    """Amplitude matrix over valid columns only, sector-standardised when hopping."""
    valid = trace.validity
    if not valid.any():
        raise EmptyTrace(f"trace of {trace.owner!r} has no valid samples")
    amp = np.abs(trace.samples[:, valid])
    if trace.sectors is not None:
        sec = trace.sectors[valid]
        if len(np.unique(sec)) > 1:
            amp = _standardise_by_sector(amp, sec)
    return amp


def fingerprint_stages(trace: CsiTrace, p: AfParams = ARTIFICIAL) -> AfStages:
    amp = valid_amplitude(trace)
    amp = _denoise_rows(amp, p.wavelet, p.wavelet_levels)
    top = rank_subcarriers(amp)
    mv = moving_variance(amp[top], p.window_samples(trace.sample_rate))
    T = mv.mean(axis=0)
    gamma = aggregate_and_downsample(T, p.downsample, trace.sample_rate)
    if len(gamma.values) == 0:
        raise SeriesTooShort("trace shorter than one downsampling window")
    tau = compute_threshold(gamma, p.threshold_window_sec, p.threshold_guard)
    B = detect_activity(gamma, tau)
    return AfStages(top, T, gamma, tau, B, encode_bits(B, p.lsb_count))


def fingerprint(trace: CsiTrace, p: AfParams = ARTIFICIAL) -> Fingerprint:
    return fingerprint_stages(trace, p).fingerprint
