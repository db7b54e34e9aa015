"""Fingerprint quality metrics: bit mismatch rate, secret bit rate, approximate entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import EmptyComparison, LengthMismatch, NoActivity, SequenceTooShort


def _bits(x) -> np.ndarray:
    if hasattr(x, "bits"):
        x = x.bits
    if isinstance(x, str):
        x = [c == "1" for c in x if c in "01"]
    return np.asarray(x, dtype=np.uint8).ravel()


def bmr(f1, f2, mask=None) -> float:
    """Fraction of positions where two fingerprints differ.

    ``mask`` (boolean, same length) restricts the comparison to observed
    positions, as used for the no-fill eavesdropper strategy.
    """
    a, b = _bits(f1), _bits(f2)
    if a.size != b.size:
        raise LengthMismatch(f"fingerprint lengths differ: {a.size} vs {b.size}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.size != a.size:
            raise LengthMismatch("mask length differs from fingerprint length")
        a, b = a[mask], b[mask]
    if a.size == 0:
        raise EmptyComparison("no positions to compare")
    return float(np.count_nonzero(a != b)) / a.size


def bmr_prefix(f1, f2) -> float:
    """BMR over the common prefix of two fingerprints of possibly different length."""
    a, b = _bits(f1), _bits(f2)
    n = min(a.size, b.size)
    return bmr(a[:n], b[:n])


def sbr(f, schedule, window: tuple[float, float] | None = None) -> float:
    """Fingerprint bits per activity event overlapping the sounding window."""
    n_bits = _bits(f).size
    events = list(schedule)
    if window is not None:
        t0, t1 = window
        events = [e for e in events if e.start_time < t1 and e.start_time + e.duration > t0]
    if not events:
        raise NoActivity("no activity events in the window")
    return n_bits / len(events)


def _phi(bits: np.ndarray, m: int) -> float:
    """Sum over all m-bit patterns of C_i log C_i, with wrap-around windows."""
    n = bits.size
    if m == 0:
        return 0.0
    ext = np.concatenate([bits, bits[: m - 1]]).astype(np.int64)
    idx = np.zeros(n, dtype=np.int64)
    for j in range(m):
        idx = (idx << 1) | ext[j: j + n]
    counts = np.bincount(idx, minlength=1 << m)
    c = counts[counts > 0] / n
    return float(np.sum(c * np.log(c)))


def apen(bits, m: int = 2, check_length: bool = True) -> tuple[float, float]:
    """Approximate entropy test of NIST SP 800-22: returns (ApEn, p-value).

    Sequences shorter than 2^(m+1) bits are rejected unless ``check_length``
    is off (the 10-bit NIST worked example needs that).
    """
    b = _bits(bits)
    if m < 1:
        raise ValueError("block length m must be >= 1")
    if b.size == 0 or (check_length and b.size < 2 ** (m + 1)):
        raise SequenceTooShort(f"need at least {2 ** (m + 1)} bits for m={m}, got {b.size}")
    n = b.size
    ap = _phi(b, m) - _phi(b, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - ap)
    p = float(gammaincc(2 ** (m - 1), chi2 / 2.0))
    return ap, min(1.0, max(0.0, p))


@dataclass
class MetricReport:
    bmr: float
    sbr: float | None
    apen: float | None
    apen_p: float | None
    sequence_length: int
    observed_positions: int

    @property
    def nist_pass(self) -> bool | None:
        return None if self.apen_p is None else self.apen_p > 0.01


def report(f_ref, f_other, schedule=(), m: int = 2, mask=None) -> MetricReport:
    a, b = _bits(f_ref), _bits(f_other)
    n = min(a.size, b.size)
    mk = None if mask is None else np.asarray(mask, dtype=bool)[:n]
    try:
        rate = sbr(a, schedule)
    except NoActivity:
        rate = None
    try:
        ap, p = apen(a, m)
    except SequenceTooShort:
        ap, p = None, None
    observed = n if mk is None else int(mk.sum())
    return MetricReport(bmr(a[:n], b[:n], mk), rate, ap, p, int(a.size), observed)
