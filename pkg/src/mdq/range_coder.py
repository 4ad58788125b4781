"""Bit-exact range coder over bounded integer alphabets.

State is a 64-bit low/range pair with 16-bit probability precision and
byte-wise renormalization whenever range drops below 2^56. Carries ripple
into already-emitted bytes. The final flush emits a single byte: after
renormalization range >= 2^56, so the top byte of a suitably rounded
point inside [low, low + range) pins the message. Per-stream overhead is
therefore at most ~16 bits over the ideal codelength of the quantized
tables, and the byte stream is identical on every platform.

A decoder consumes 8 bytes up front and one byte per renormalization; up
to 7 reads past the end of the stream resolve to zero (the bytes the
1-byte flush never sent). An 8th over-read means the stream was
truncated and raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dist
from .errors import TruncatedStreamError

PRECISION = 16
TOTAL = 1 << PRECISION
_STATE_MASK = (1 << 64) - 1
_RENORM = 1 << 56
_MAX_VIRTUAL_READS = 7


@dataclass
class CdfTable:
    """Cumulative masses over [alphabet_min, alphabet_max], total 2^16."""

    alphabet_min: int
    alphabet_max: int
    cumulative: np.ndarray

    def __post_init__(self):
        size = self.alphabet_max - self.alphabet_min + 1
        if size < 1:
            raise ValueError("alphabet is empty")
        cum = np.asarray(self.cumulative, dtype=np.int64)
        if cum.shape != (size + 1,):
            raise ValueError(f"cumulative must have {size + 1} entries, got {cum.shape}")
        if cum[0] != 0 or cum[-1] != TOTAL:
            raise ValueError("cumulative must run from 0 to 2^16")
        if np.any(np.diff(cum) < 1):
            raise ValueError("every symbol needs mass >= 1")
        self.cumulative = cum

    def mass(self, symbol: int) -> int:
        i = symbol - self.alphabet_min
        return int(self.cumulative[i + 1] - self.cumulative[i])

    def contains(self, symbol: int) -> bool:
        return self.alphabet_min <= symbol <= self.alphabet_max


def build_cdf(mu: float, b: float, alphabet_min: int, alphabet_max: int) -> CdfTable:
    """Quantize Laplace(mu, b) interval probabilities to 16-bit masses.

    Tail mass beyond the alphabet folds into the boundary symbols. Every
    symbol keeps mass >= 1; the remaining budget is distributed by
    largest remainder with ties broken by ascending symbol index.
    """
    if b <= 0:
        raise ValueError("Laplace scale must be positive")
    if alphabet_min >= alphabet_max:
        raise ValueError("alphabet must contain at least two symbols")
    size = alphabet_max - alphabet_min + 1
    if size > TOTAL:
        raise ValueError(f"alphabet of {size} symbols cannot all keep mass >= 1")
    symbols = np.arange(alphabet_min, alphabet_max + 1, dtype=np.float64)
    probs = _dist.interval_prob(symbols, mu, b)
    probs[0] += _dist.cdf(alphabet_min - 0.5, mu, b)
    probs[-1] += 1.0 - _dist.cdf(alphabet_max + 0.5, mu, b)
    scaled = probs / probs.sum() * (TOTAL - size)
    base = np.floor(scaled).astype(np.int64)
    masses = base + 1
    remainder = TOTAL - int(masses.sum())
    if remainder > 0:
        order = np.argsort(-(scaled - base), kind="stable")
        masses[order[:remainder]] += 1
    cumulative = np.concatenate(([0], np.cumsum(masses)))
    return CdfTable(alphabet_min=alphabet_min, alphabet_max=alphabet_max, cumulative=cumulative)


class RangeEncoder:
    def __init__(self):
        self._low = 0
        self._range = _STATE_MASK
        self._out = bytearray()

    def encode(self, cum_lo: int, cum_hi: int) -> None:
        r = self._range >> PRECISION
        self._low += r * cum_lo
        self._range = r * (cum_hi - cum_lo)
        if self._low > _STATE_MASK:
            self._propagate_carry()
            self._low &= _STATE_MASK
        while self._range < _RENORM:
            self._out.append((self._low >> 56) & 0xFF)
            self._low = (self._low << 8) & _STATE_MASK
            self._range <<= 8

    def encode_symbol(self, symbol: int, cdf: CdfTable) -> None:
        i = symbol - cdf.alphabet_min
        self.encode(int(cdf.cumulative[i]), int(cdf.cumulative[i + 1]))

    def _propagate_carry(self) -> None:
        i = len(self._out) - 1
        while i >= 0:
            self._out[i] = (self._out[i] + 1) & 0xFF
            if self._out[i] != 0:
                return
            i -= 1
        raise AssertionError("carry escaped the stream head")

    def finish(self) -> bytes:
        # range >= 2^56, so [low, low + range) contains a multiple of 2^56;
        # its top byte alone identifies a point inside the interval.
        point = ((self._low + _RENORM - 1) >> 56) << 56
        if point > _STATE_MASK:
            self._propagate_carry()
            point &= _STATE_MASK
        self._out.append((point >> 56) & 0xFF)
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._virtual = 0
        self._range = _STATE_MASK
        code = 0
        for _ in range(8):
            code = (code << 8) | self._next_byte()
        self._code = code

    def _next_byte(self) -> int:
        if self._pos < len(self._data):
            b = self._data[self._pos]
            self._pos += 1
            return b
        self._virtual += 1
        if self._virtual > _MAX_VIRTUAL_READS:
            raise TruncatedStreamError("range-coded stream ended prematurely")
        return 0

    def decode(self, cdf: CdfTable) -> int:
        r = self._range >> PRECISION
        target = self._code // r
        if target >= TOTAL:
            target = TOTAL - 1
        i = int(np.searchsorted(cdf.cumulative, target, side="right")) - 1
        cum_lo = int(cdf.cumulative[i])
        cum_hi = int(cdf.cumulative[i + 1])
        self._code -= r * cum_lo
        self._range = r * (cum_hi - cum_lo)
        while self._range < _RENORM:
            self._code = (self._code << 8) | self._next_byte()
            self._range <<= 8
        return i + cdf.alphabet_min


def encode_symbols(symbols, cdf_provider) -> bytes:
    """Range-code a symbol sequence.

    cdf_provider(i, prefix) must return the table for position i reading
    only prefix[:i]; the same provider drives decode_symbols.
    """
    symbols = list(symbols)
    enc = RangeEncoder()
    for i, s in enumerate(symbols):
        table = cdf_provider(i, symbols)
        if not table.contains(s):
            raise ValueError(
                f"symbol {s} at index {i} outside alphabet "
                f"[{table.alphabet_min}, {table.alphabet_max}]"
            )
        enc.encode_symbol(s, table)
    return enc.finish()


def decode_symbols(data: bytes, count: int, cdf_provider) -> list:
    """Exact inverse of encode_symbols for the same (possibly adaptive) provider."""
    if count == 0:
        return []
    dec = RangeDecoder(data)
    out = []
    for i in range(count):
        out.append(dec.decode(cdf_provider(i, out)))
    return out


def static_provider(table: CdfTable):
    """Provider returning one fixed table for every position."""
    return lambda i, prev: table


def ideal_codelength(symbols, cdf_provider) -> float:
    """Bits implied by the quantized tables themselves: sum -log2(mass/2^16)."""
    symbols = list(symbols)
    total = 0.0
    for i, s in enumerate(symbols):
        total += -np.log2(cdf_provider(i, symbols).mass(s) / TOTAL)
    return float(total)
