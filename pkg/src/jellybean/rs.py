"""Reed-Solomon codes over GF(2^m), systematic, with Berlekamp-Massey decoding.

Field elements are ints in [0, 2^m). The generator polynomial has roots
alpha^0 .. alpha^(2t-1). Codewords are message symbols followed by parity,
highest-degree coefficient first. Shortened codes (n < 2^m - 1) are supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .errors import DecodeFailure, LengthMismatch

PRIMITIVE_POLYS = {3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011, 7: 0b10001001, 8: 0x11D}


@lru_cache(maxsize=None)
def field_tables(m: int) -> tuple[np.ndarray, np.ndarray]:
    """(exp, log) tables for branch-free multiplication.

    exp repeats with period 2^m - 1 so exp[log a + log b] needs no modulo;
    log[0] is a sentinel pointing into a zero tail, so products with 0 are 0.
    """
    if m not in PRIMITIVE_POLYS:
        raise ValueError(f"unsupported symbol size m={m}")
    q = 1 << m
    exp = np.zeros(4 * q + 1, dtype=np.int64)
    log = np.zeros(q, dtype=np.int64)
    x = 1
    for i in range(q - 1):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & q:
            x ^= PRIMITIVE_POLYS[m]
    exp[q - 1: 2 * (q - 1)] = exp[: q - 1]
    log[0] = 2 * q
    return exp, log


def gf_mul(a: int, b: int, m: int = 8) -> int:
    if a == 0 or b == 0:
        return 0
    exp, log = field_tables(m)
    return int(exp[log[a] + log[b]])


def gf_inv(a: int, m: int = 8) -> int:
    if a == 0:
        raise ZeroDivisionError("inverse of 0")
    exp, log = field_tables(m)
    return int(exp[(1 << m) - 1 - log[a]])


@lru_cache(maxsize=None)
def generator_poly(m: int, nsym: int) -> np.ndarray:
    """prod_{i<nsym} (x - alpha^i), highest degree first."""
    exp, _ = field_tables(m)
    g = [1]
    for i in range(nsym):
        root = int(exp[i])
        nxt = g + [0]
        for j, c in enumerate(g):
            nxt[j + 1] ^= gf_mul(c, root, m)
        g = nxt
    return np.array(g, dtype=np.int64)


@dataclass(frozen=True)
class RsCode:
    m: int = 8
    n: int = 255
    k: int = 153

    def __post_init__(self):
        if self.m not in PRIMITIVE_POLYS:
            raise ValueError(f"unsupported symbol size m={self.m}")
        if not 0 < self.k < self.n <= (1 << self.m) - 1:
            raise ValueError(f"need 0 < k < n <= {(1 << self.m) - 1}")
        if (self.n - self.k) % 2:
            raise ValueError("n - k must be even")

    @property
    def t(self) -> int:
        return (self.n - self.k) // 2

    @property
    def nsym(self) -> int:
        return self.n - self.k

    @classmethod
    def fitted(cls, n_bits: int, m: int = 8, tolerance: float = 0.2) -> "RsCode":
        """Largest (possibly shortened) code that fits ``n_bits`` fingerprint bits.

        t is ``floor(tolerance * n)`` symbols, so the code corrects the given
        fraction of symbol errors.
        """
        n = min((1 << m) - 1, n_bits // m)
        t = int(np.floor(tolerance * n))
        if n < 3 or t < 1 or n - 2 * t < 1:
            raise ValueError(f"{n_bits} bits are too few for an m={m} code with {tolerance:.0%} tolerance")
        return cls(m, n, n - 2 * t)


def rs_encode_symbols(msg, code: RsCode) -> np.ndarray:
    msg = np.asarray(msg, dtype=np.int64)
    if msg.shape != (code.k,):
        raise LengthMismatch(f"message must have {code.k} symbols, got {msg.size}")
    if msg.size and (msg.min() < 0 or msg.max() >= 1 << code.m):
        raise ValueError("symbol out of field range")
    exp, log = field_tables(code.m)
    return _encode(msg, generator_poly(code.m, code.nsym), exp, log)


@numba.njit(cache=True)
def _encode(msg, gen, exp, log):
    k = msg.size
    nsym = gen.size - 1
    buf = np.zeros(k + nsym, dtype=np.int64)
    buf[:k] = msg
    for i in range(k):
        coef = buf[i]
        if coef != 0:
            lc = log[coef]
            for j in range(1, gen.size):
                if gen[j] != 0:
                    buf[i + j] ^= exp[lc + log[gen[j]]]
    out = buf.copy()
    out[:k] = msg
    return out


@numba.njit(cache=True)
def _mul(a, b, exp, log):
    return exp[log[a] + log[b]]


@numba.njit(cache=True)
def _poly_eval(p, x, exp, log):
    """Horner evaluation; p highest degree first."""
    y = 0
    for c in p:
        y = _mul(y, x, exp, log) ^ c
    return y


@numba.njit(cache=True)
def _syndromes(word, nsym, exp, log):
    # S_i = sum_j w_j alpha^(i (n-1-j)); each nonzero term's log advances by
    # n-1-j per syndrome, so the terms are independent table lookups
    n = word.size
    q1 = log.size - 1
    acc = np.empty(n, dtype=np.int64)
    step = np.empty(n, dtype=np.int64)
    cnt = 0
    for j in range(n):
        if word[j] != 0:
            acc[cnt] = log[word[j]]
            step[cnt] = (n - 1 - j) % q1
            cnt += 1
    s = np.zeros(nsym, dtype=np.int64)
    for i in range(nsym):
        v = 0
        for j in range(cnt):
            v ^= exp[acc[j]]
            a = acc[j] + step[j]
            if a >= q1:
                a -= q1
            acc[j] = a
        s[i] = v
    return s


@numba.njit(cache=True)
def _decode(word, nsym, q1, exp, log):
    """Returns (corrected word, status); status 0 ok, 1 uncorrectable."""
    n = word.size
    synd = _syndromes(word, nsym, exp, log)
    clean = True
    for v in synd:
        if v != 0:
            clean = False
    if clean:
        return word.copy(), 0
    # Berlekamp-Massey; polynomials lowest degree first here
    C = np.zeros(nsym + 1, dtype=np.int64)
    B = np.zeros(nsym + 1, dtype=np.int64)
    C[0] = 1
    B[0] = 1
    L = 0
    shift = 1
    b = 1
    for r in range(nsym):
        d = synd[r]
        for i in range(1, L + 1):
            d ^= _mul(C[i], synd[r - i], exp, log)
        if d == 0:
            shift += 1
            continue
        coef = _mul(d, exp[q1 - log[b]], exp, log)
        T = C.copy()
        for i in range(nsym + 1 - shift):
            C[i + shift] ^= _mul(coef, B[i], exp, log)
        if 2 * L <= r:
            L = r + 1 - L
            B = T
            b = d
            shift = 1
        else:
            shift += 1
    if 2 * L > nsym:
        return word.copy(), 1
    # Chien search over positions of the (possibly shortened) word.
    # Position p (0 = first symbol) has locator X = alpha^e with e = n-1-p;
    # term i of C(X^-1) has log log(C_i) - i*e, stepped down as e grows.
    lt = np.empty(L + 1, dtype=np.int64)
    deg = np.empty(L + 1, dtype=np.int64)
    terms = 0
    for i in range(L + 1):
        if C[i] != 0:
            lt[terms] = log[C[i]]
            deg[terms] = i
            terms += 1
    pos = np.empty(L, dtype=np.int64)
    found = 0
    for e in range(n):
        acc = 0
        for k in range(terms):
            acc ^= exp[lt[k]]
            a = lt[k] - deg[k]
            if a < 0:
                a += q1
            lt[k] = a
        if acc == 0:
            if found == L:
                return word.copy(), 1
            pos[found] = n - 1 - e
            found += 1
    if found != L:
        return word.copy(), 1
    # error evaluator Omega = S(x) C(x) mod x^nsym, lowest degree first
    omega = np.zeros(nsym, dtype=np.int64)
    for i in range(nsym):
        acc = 0
        for j in range(min(i, L) + 1):
            acc ^= _mul(C[j], synd[i - j], exp, log)
        omega[i] = acc
    out = word.copy()
    for f in range(L):
        e = n - 1 - pos[f]
        X = exp[e % q1]
        xinv = exp[(q1 - e) % q1]
        num = 0
        for i in range(nsym - 1, -1, -1):
            num = _mul(num, xinv, exp, log) ^ omega[i]
        # formal derivative of C evaluated at X^-1 (odd terms only in char 2)
        den = 0
        xinv2 = _mul(xinv, xinv, exp, log)
        for i in range(L - (1 - L % 2), 0, -2):
            den = _mul(den, xinv2, exp, log) ^ C[i]
        if den == 0:
            return word.copy(), 1
        mag = _mul(X, _mul(num, exp[q1 - log[den]], exp, log), exp, log)
        out[pos[f]] ^= mag
    synd2 = _syndromes(out, nsym, exp, log)
    for v in synd2:
        if v != 0:
            return word.copy(), 1
    return out, 0


def rs_correct(word, code: RsCode) -> np.ndarray:
    """Corrected codeword, or DecodeFailure when the decoder gives up."""
    w = np.asarray(word, dtype=np.int64)
    if w.shape != (code.n,):
        raise LengthMismatch(f"word must have {code.n} symbols, got {w.size}")
    exp, log = field_tables(code.m)
    out, status = _decode(w, code.nsym, (1 << code.m) - 1, exp, log)
    if status:
        raise DecodeFailure("too many symbol errors to correct")
    return out


def rs_decode_symbols(word, code: RsCode) -> np.ndarray:
    return rs_correct(word, code)[: code.k]
