"""Entropy-coded dithered quantization link between Supporter and Seeker.

Both ends derive the dither from a shared session seed with a counter-based
generator, so any step's dither can be regenerated out of order and the
quantization error stays uniform and independent of the signal.

Wire format of one message (little-endian)::

    u32 step | u16 row | u16 col | u32 payload bit-length | payload bytes

The payload is the zigzag + Elias-gamma code of the quantizer integers,
zero-padded to a whole byte.  Steps without communication still send the
12-byte header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gridmap import Cell

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

HEADER = struct.Struct("<IHHI")
K_LIMIT = 2**31


class DecodeError(ValueError):
    """Corrupt or truncated payload / frame."""


def splitmix64(x) -> np.ndarray:
    """SplitMix64 output function applied to ``x`` (uint64, wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def counter_uniform(session_seed: int, step: int, count: int) -> np.ndarray:
    """``count`` uniforms in ``[0, 1)`` for ``(session_seed, step)``.

    Component ``i`` is ``splitmix64(seed ^ splitmix64(step << 32 | i)) >> 11``
    scaled by ``2**-53``.
    """
    if not 0 <= step < 2**32:
        raise ValueError("step must fit in 32 bits")
    seed = np.uint64(int(session_seed) & _MASK64)
    counters = (np.uint64(step) << np.uint64(32)) | np.arange(count, dtype=np.uint64)
    z = splitmix64(seed ^ splitmix64(counters))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class DitherSpec:
    session_seed: int
    step: int
    deltas: np.ndarray

    def __post_init__(self):
        deltas = np.asarray(self.deltas, dtype=float).reshape(-1)
        if np.any(deltas <= 0):
            raise ValueError("quantizer steps must be positive")
        object.__setattr__(self, "deltas", deltas)

    @property
    def count(self) -> int:
        return self.deltas.size


def dither_sequence(ds: DitherSpec) -> np.ndarray:
    """Shared dither ``eta_i = delta_i * (u_i - 1/2)``, uniform on ``[-delta/2, delta/2)``."""
    u = counter_uniform(ds.session_seed, ds.step, ds.count)
    return ds.deltas * (u - 0.5)


def quantize(o, deltas, dither) -> np.ndarray:
    """Integers ``k`` with ``(k - 1/2) delta <= o + eta < (k + 1/2) delta``."""
    o = np.asarray(o, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    dither = np.asarray(dither, dtype=float)
    if not (o.shape == deltas.shape == dither.shape):
        raise ValueError("signal, steps and dither must have the same length")
    k = np.floor((o + dither) / deltas + 0.5)
    if np.any(np.abs(k) >= K_LIMIT):
        raise OverflowError("quantizer index out of range; step size is mis-scaled")
    return k.astype(np.int64)


def reconstruct(k, deltas, dither) -> np.ndarray:
    """``y = k delta - eta``; the error ``y - o`` is uniform on ``[-delta/2, delta/2)``."""
    return np.asarray(k, dtype=float) * np.asarray(deltas, dtype=float) - np.asarray(dither, dtype=float)


# ---------------------------------------------------------------------------
# lossless coding


def zigzag(k: int) -> int:
    """0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ..."""
    return 2 * k if k >= 0 else -2 * k - 1


def unzigzag(z: int) -> int:
    return z // 2 if z % 2 == 0 else -(z + 1) // 2


def gamma_length(n: int) -> int:
    """Length of the Elias-gamma code of ``n >= 1``."""
    return 2 * n.bit_length() - 1


def entropy_code(ks: Iterable[int]) -> str:
    """Prefix-free bitstring for the integers ``ks`` (zigzag, then Elias-gamma of ``z + 1``)."""
    parts = []
    for k in ks:
        k = int(k)
        if abs(k) >= K_LIMIT:
            raise OverflowError(f"integer {k} too large to encode")
        n = zigzag(k) + 1
        nbits = n.bit_length()
        parts.append("0" * (nbits - 1) + format(n, "b"))
    return "".join(parts)


def entropy_decode(bits: str, count: int) -> list[int]:
    """Inverse of :func:`entropy_code`; the bitstring must hold exactly ``count`` codes."""
    out = []
    pos = 0
    n_bits = len(bits)
    for _ in range(count):
        start = pos
        while pos < n_bits and bits[pos] == "0":
            pos += 1
        zeros = pos - start
        if pos + zeros + 1 > n_bits:
            raise DecodeError(f"truncated code starting at bit {start}")
        if zeros > 32:
            raise DecodeError(f"code at bit {start} exceeds the 32-bit range")
        n = int(bits[pos : pos + zeros + 1], 2)
        pos += zeros + 1
        out.append(unzigzag(n - 1))
    if pos != n_bits:
        raise DecodeError(f"{n_bits - pos} unused bits after {count} codes at bit {pos}")
    return out


# ---------------------------------------------------------------------------
# framing


@dataclass(frozen=True)
class WireMessage:
    step: int
    supporter_cell: Cell
    payload_bits: str = ""

    @property
    def payload_length(self) -> int:
        return len(self.payload_bits)


def frame(msg: WireMessage) -> bytes:
    bits = msg.payload_bits
    r, c = msg.supporter_cell
    header = HEADER.pack(msg.step, r, c, len(bits))
    if not bits:
        return header
    padded = bits + "0" * (-len(bits) % 8)
    payload = int(padded, 2).to_bytes(len(padded) // 8, "big")
    return header + payload


def parse(buf: bytes) -> WireMessage:
    if len(buf) < HEADER.size:
        raise DecodeError(f"frame of {len(buf)} bytes is shorter than the header")
    step, r, c, nbits = HEADER.unpack_from(buf)
    nbytes = (nbits + 7) // 8
    if len(buf) < HEADER.size + nbytes:
        raise DecodeError(f"payload truncated: need {nbytes} bytes, got {len(buf) - HEADER.size}")
    if len(buf) > HEADER.size + nbytes:
        raise DecodeError(f"{len(buf) - HEADER.size - nbytes} trailing bytes after payload")
    bits = ""
    if nbits:
        raw = buf[HEADER.size :]
        bits = format(int.from_bytes(raw, "big"), f"0{8 * nbytes}b")
        if "1" in bits[nbits:]:
            raise DecodeError("non-zero padding bits")
        bits = bits[:nbits]
    return WireMessage(step, Cell(r, c), bits)


def split_frames(buf: bytes) -> list[WireMessage]:
    """Parse a concatenation of frames (e.g. a ``messages.bin`` log)."""
    out = []
    pos = 0
    while pos < len(buf):
        if len(buf) - pos < HEADER.size:
            raise DecodeError(f"truncated header at byte {pos}")
        nbits = HEADER.unpack_from(buf, pos)[3]
        end = pos + HEADER.size + (nbits + 7) // 8
        out.append(parse(buf[pos:end]))
        pos = end
    return out


def encode_message(step: int, supporter_cell: Sequence[int], o, deltas, session_seed: int):
    """Quantize ``o`` with the shared dither and frame it.

    Returns ``(frame_bytes, k)``.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        return frame(WireMessage(step, Cell(*supporter_cell))), np.zeros(0, dtype=np.int64)
    eta = dither_sequence(DitherSpec(session_seed, step, deltas))
    k = quantize(np.asarray(o, dtype=float), deltas, eta)
    return frame(WireMessage(step, Cell(*supporter_cell), entropy_code(k))), k


def decode_message(buf: bytes, deltas, session_seed: int) -> tuple[WireMessage, np.ndarray]:
    """Parse a frame and reconstruct ``y = k delta - eta`` for the expected steps."""
    msg = parse(buf)
    deltas = np.asarray(deltas, dtype=float)
    k = np.asarray(entropy_decode(msg.payload_bits, deltas.size), dtype=np.int64)
    if deltas.size == 0:
        return msg, np.zeros(0)
    eta = dither_sequence(DitherSpec(session_seed, msg.step, deltas))
    return msg, reconstruct(k, deltas, eta)


# ---------------------------------------------------------------------------
# Gaussian-surrogate diagnostics


def dither_kl_nats(d: int) -> float:
    """``KL(uniform || Gaussian of equal variance)`` for ``d`` independent components."""
    return 0.5 * d * np.log(2.0 * np.pi * np.e / 12.0)


def dither_kl_monte_carlo(deltas, samples: int, rng: np.random.Generator) -> float:
    """Monte Carlo estimate of ``KL(n || n^G)`` from draws of the uniform noise.

    Averages ``ln f(n) - ln g(n)`` where ``f`` is the uniform density and ``g``
    the Gaussian with the same variance.
    """
    deltas = np.asarray(deltas, dtype=float)
    n = (rng.random((samples, deltas.size)) - 0.5) * deltas
    var = deltas**2 / 12.0
    log_f = -np.sum(np.log(deltas))
    log_g = -0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * np.sum(n**2 / var, axis=1)
    return float(np.mean(log_f - log_g))
