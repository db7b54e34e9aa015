"""Fuzzy-commitment key agreement between two activity fingerprints.

A hides a Reed-Solomon encoded random key under its fingerprint
(delta = F_A xor ENC(k)) and sends delta with SHA-256(k). D decodes
F_D xor delta and accepts when the hash matches.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DecodeFailure, FingerprintTooShort, LengthMismatch, PairingAbort
from .fingerprint import AfParams, Fingerprint, fingerprint
from .metrics import bmr_prefix
from .rs import RsCode, rs_correct, rs_encode_symbols
from .seeding import rng_for


@lru_cache(maxsize=None)
def _symbol_bits(m: int) -> np.ndarray:
    """Row v holds the m bits of v, most significant first."""
    v = np.arange(1 << m)
    return ((v[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)


@lru_cache(maxsize=None)
def _bit_weights(m: int) -> np.ndarray:
    return 1 << np.arange(m - 1, -1, -1)


@dataclass(frozen=True)
class SecretKey:
    symbols: np.ndarray
    m: int = 8

    @property
    def bytes(self) -> bytes:
        if self.m == 8:
            return self.symbols.astype(np.uint8).tobytes()
        return np.packbits(_symbol_bits(self.m)[self.symbols].ravel()).tobytes()

    def digest(self) -> bytes:
        return hashlib.sha256(self.bytes).digest()

    def __eq__(self, other):
        return (isinstance(other, SecretKey) and self.m == other.m
                and np.array_equal(self.symbols, other.symbols))

    def __hash__(self):
        return hash((self.m, self.symbols.tobytes()))


@dataclass(frozen=True)
class Commitment:
    delta: np.ndarray
    key_hash: bytes
    m: int = 8

    def to_bytes(self) -> bytes:
        """u8 m, u16 n (big-endian), n symbols of ceil(m/8) bytes each, 32-byte digest."""
        width = (self.m + 7) // 8
        body = b"".join(int(s).to_bytes(width, "big") for s in self.delta)
        return struct.pack(">BH", self.m, len(self.delta)) + body + self.key_hash

    @classmethod
    def from_bytes(cls, data: bytes) -> "Commitment":
        if len(data) < 3:
            raise ValueError("commitment too short for its header")
        m, n = struct.unpack(">BH", data[:3])
        width = (m + 7) // 8
        need = 3 + n * width + 32
        if len(data) != need:
            raise ValueError(f"commitment should be {need} bytes, got {len(data)}")
        sym = [int.from_bytes(data[3 + i * width: 3 + (i + 1) * width], "big") for i in range(n)]
        return cls(np.array(sym, dtype=np.int64), data[need - 32:], m)


def fingerprint_symbols(f: Fingerprint | np.ndarray, code: RsCode) -> np.ndarray:
    """First n*m fingerprint bits packed big-endian into n symbols."""
    bits = np.asarray(f.bits if isinstance(f, Fingerprint) else f, dtype=np.uint8)
    need = code.n * code.m
    if bits.size < need:
        raise FingerprintTooShort(
            f"fingerprint has {bits.size} bits, code needs {need}; gather more activity")
    if code.m == 8:
        return np.packbits(bits[:need]).astype(np.int64)
    return bits[:need].reshape(code.n, code.m) @ _bit_weights(code.m)


def random_key(code: RsCode, seed) -> SecretKey:
    rng = rng_for(seed, "key")
    return SecretKey(rng.integers(0, 1 << code.m, code.k, dtype=np.int64), code.m)


def rs_encode(key: SecretKey, code: RsCode) -> np.ndarray:
    return rs_encode_symbols(key.symbols, code)


def rs_decode(word, code: RsCode) -> SecretKey:
    return SecretKey(rs_correct(word, code)[: code.k], code.m)


def commit(f_a, code: RsCode, seed) -> tuple[Commitment, SecretKey]:
    key = random_key(code, seed)
    delta = fingerprint_symbols(f_a, code) ^ rs_encode(key, code)
    return Commitment(delta, key.digest(), code.m), key


def open_commitment(f_d, c: Commitment, code: RsCode) -> SecretKey:
    """Recover the key committed in ``c`` using D's fingerprint, or raise PairingAbort."""
    if len(c.delta) != code.n or c.m != code.m:
        raise LengthMismatch("commitment does not match the code")
    try:
        word = fingerprint_symbols(f_d, code) ^ c.delta
        key = rs_decode(word, code)
    except (DecodeFailure, FingerprintTooShort) as e:
        raise PairingAbort(str(e)) from e
    if key.digest() != c.key_hash:
        raise PairingAbort("key hash mismatch")
    return key


@dataclass
class PairingOutcome:
    accepted: bool
    key: SecretKey | None
    bmr: float
    reason: str = ""
    code: RsCode | None = None
    f_a: Fingerprint | None = None
    f_d: Fingerprint | None = None


def pair_fingerprints(f_a: Fingerprint, f_d: Fingerprint, code: RsCode | None = None,
                      seed=0, tolerance: float = 0.2, m: int = 8) -> PairingOutcome:
    """Commit at A and open at D.

    Without an explicit code, D first announces its fingerprint length and A
    sizes the code to the shorter fingerprint (lengths are public metadata).
    """
    rate = bmr_prefix(f_a, f_d) if len(f_a) and len(f_d) else 1.0
    try:
        code = code or RsCode.fitted(min(len(f_a), len(f_d)), m=m, tolerance=tolerance)
        c, _ = commit(f_a, code, seed)
    except (ValueError, FingerprintTooShort) as e:
        return PairingOutcome(False, None, rate, f"commit failed: {e}", None, f_a, f_d)
    try:
        key = open_commitment(f_d, c, code)
    except PairingAbort as e:
        return PairingOutcome(False, None, rate, str(e), code, f_a, f_d)
    return PairingOutcome(True, key, rate, "", code, f_a, f_d)


def pair(trace_a, trace_d, af_params: AfParams, code: RsCode | None = None, seed=0,
         tolerance: float = 0.2) -> PairingOutcome:
    """Full protocol on two traces: fingerprint both, commit at A, open at D."""
    return pair_fingerprints(fingerprint(trace_a, af_params), fingerprint(trace_d, af_params),
                             code, seed, tolerance)
