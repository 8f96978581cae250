"""
Arithmetic coding driven by a strategy's predictive distributions

The coder is a range coder with 62-bit state registers and pending
(underflow) bit handling. Each step quantizes the strategy's predictive
distribution to integer frequencies with a 2^32 scale and a floor of one
count per symbol; encoder and decoder compute the identical table, so the
stream is bit-exact without rational arithmetic. The code length is
within a couple of bits of -log2 q(x^n).
"""
import hashlib
import logging
import math
import struct
from typing import List, Sequence, Tuple

import numpy as np
import orjson

from config import CODER_STATE_BITS, CONTAINER_MAGIC, FREQUENCY_BITS
from exceptions import CoderError, DigestMismatchError, TruncatedStreamError
from mixtures import Strategy, StrategySpec

logger = logging.getLogger(__name__)

HEADER_SIZE = len(CONTAINER_MAGIC) + 4 + 32


def quantize(probs: np.ndarray) -> List[int]:
    """Cumulative integer frequencies [0, f_0, f_0 + f_1, ...] with every f_j >= 1"""
    probs = np.asarray(probs, dtype=float)
    if not np.all(np.isfinite(probs)) or probs.sum() <= 0 or np.any(probs < 0):
        raise CoderError(f"predictive distribution cannot be normalized: {probs.tolist()}")
    scale = 1 << FREQUENCY_BITS
    freqs = [max(1, int(math.floor(p * scale))) for p in probs / probs.sum()]
    cumulative = [0]
    for f in freqs:
        cumulative.append(cumulative[-1] + f)
    return cumulative


class CoderState:
    """Shared range registers; low < high is maintained after every update"""

    def __init__(self, state_bits: int = CODER_STATE_BITS):
        self.state_bits = state_bits
        self.full_range = 1 << state_bits
        self.half_range = self.full_range >> 1
        self.quarter_range = self.half_range >> 1
        self.minimum_range = self.quarter_range + 2
        self.state_mask = self.full_range - 1
        self.low = 0
        self.high = self.state_mask
        self.pending = 0
        self.emitted = 0

    def update(self, cumulative: Sequence[int], symbol: int) -> None:
        width = self.high - self.low + 1
        total = cumulative[-1]
        if total > self.minimum_range:
            raise CoderError(f"frequency total {total} exceeds the coder range")
        new_low = self.low + cumulative[symbol] * width // total
        new_high = self.low + cumulative[symbol + 1] * width // total - 1
        self.low, self.high = new_low, new_high
        while ((self.low ^ self.high) & self.half_range) == 0:
            self.shift()
            self.low = (self.low << 1) & self.state_mask
            self.high = ((self.high << 1) & self.state_mask) | 1
        while (self.low & ~self.high & self.quarter_range) != 0:
            self.underflow()
            self.low = (self.low << 1) ^ self.half_range
            self.high = ((self.high ^ self.half_range) << 1) | self.half_range | 1

    def shift(self) -> None:
        self.emitted += 1 + self.pending
        self.pending = 0

    def underflow(self) -> None:
        self.pending += 1


class ArithmeticEncoder(CoderState):

    def __init__(self, state_bits: int = CODER_STATE_BITS):
        super().__init__(state_bits)
        self.bits: List[int] = []

    def shift(self) -> None:
        bit = self.low >> (self.state_bits - 1)
        self.bits.append(bit)
        self.bits.extend([bit ^ 1] * self.pending)
        super().shift()

    def finish(self) -> List[int]:
        self.bits.append(1)
        return self.bits


class ArithmeticDecoder(CoderState):
    """Reads zeros past the end of the stream; only bits the encoder committed count as used"""

    def __init__(self, bits: Sequence[int], state_bits: int = CODER_STATE_BITS):
        super().__init__(state_bits)
        self.stream = list(bits)
        self.position = 0
        self.code = 0
        for _ in range(state_bits):
            self.code = (self.code << 1) | self._read()

    def _read(self) -> int:
        bit = self.stream[self.position] if self.position < len(self.stream) else 0
        self.position += 1
        return bit

    def decode(self, cumulative: Sequence[int]) -> int:
        total = cumulative[-1]
        width = self.high - self.low + 1
        offset = self.code - self.low
        value = ((offset + 1) * total - 1) // width
        lo, hi = 0, len(cumulative) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if cumulative[mid] > value:
                hi = mid
            else:
                lo = mid
        self.update(cumulative, lo)
        return lo

    def shift(self) -> None:
        self.code = ((self.code << 1) & self.state_mask) | self._read()
        super().shift()

    def underflow(self) -> None:
        self.code = (self.code & self.half_range) | ((self.code << 1) & (self.state_mask >> 1)) | self._read()
        super().underflow()


def encode(strategy: Strategy, xs) -> List[int]:
    """Encode a symbol sequence to a list of bits"""
    family = strategy.family
    if not family.finite:
        raise CoderError("arithmetic coding needs a finite alphabet")
    indices = family.indices(xs)
    counts = np.zeros(family.k, dtype=np.int64)
    encoder = ArithmeticEncoder()
    for symbol in indices:
        encoder.update(quantize(strategy.predictive_counts(counts)), int(symbol))
        counts[symbol] += 1
    bits = encoder.finish()
    logger.debug(f"Encoded {len(indices)} symbols into {len(bits)} bits")
    return bits


def decode(strategy: Strategy, bits: Sequence[int], n: int, exact_length: bool = False) -> list:
    """
    Decode n symbols

    Raises TruncatedStreamError at the first symbol that needs more bits
    than the stream holds. With exact_length, bits must also be no longer
    than the byte-padded encoder output.
    """
    family = strategy.family
    available = len(bits)
    decoder = ArithmeticDecoder(bits)
    counts = np.zeros(family.k, dtype=np.int64)
    out = []
    for i in range(n):
        symbol = decoder.decode(quantize(strategy.predictive_counts(counts)))
        if decoder.emitted > available:
            raise TruncatedStreamError(i)
        counts[symbol] += 1
        out.append(family.alphabet[symbol])
    if decoder.emitted + 1 > available:
        raise TruncatedStreamError(max(0, n - 1))
    if exact_length and available > 8 * math.ceil((decoder.emitted + 1) / 8):
        raise CoderError(f"stream holds {available} bits but the code ends at bit {decoder.emitted + 1}")
    return out


# ---- Container ----

def spec_digest(spec: StrategySpec) -> bytes:
    """SHA-256 of the sorted-key JSON form of a strategy spec"""
    return hashlib.sha256(orjson.dumps(spec.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)).digest()


def pack_container(spec: StrategySpec, n: int, bits: Sequence[int]) -> bytes:
    payload = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
    return CONTAINER_MAGIC + struct.pack(">I", n) + spec_digest(spec) + payload


def unpack_container(data: bytes, spec: StrategySpec) -> Tuple[int, List[int]]:
    if len(data) < HEADER_SIZE or not data.startswith(CONTAINER_MAGIC):
        raise CoderError("not a compressed container (bad magic or short header)")
    offset = len(CONTAINER_MAGIC)
    (n,) = struct.unpack(">I", data[offset:offset + 4])
    digest = data[offset + 4:HEADER_SIZE]
    if digest != spec_digest(spec):
        raise DigestMismatchError("container was written with a different strategy spec")
    bits = np.unpackbits(np.frombuffer(data[HEADER_SIZE:], dtype=np.uint8)).tolist()
    return n, bits


def compress(strategy: Strategy, spec: StrategySpec, xs) -> bytes:
    return pack_container(spec, len(xs), encode(strategy, xs))


def decompress(strategy: Strategy, spec: StrategySpec, data: bytes) -> list:
    n, bits = unpack_container(data, spec)
    return decode(strategy, bits, n, exact_length=True)
