"""Dense float64 fields, deterministic random streams, and scalar metrics.

Every stochastic routine in the package draws from :class:`Rng`, a thin
wrapper around numpy's counter-based Philox (4x64) bit generator keyed by
``(seed, stream)``.  Identical keys reproduce identical byte sequences across
runs and platforms, which the golden test vectors rely on; distinct stream
ids give independent sequences.  Normal variates come from numpy's ziggurat
sampler.
"""

from __future__ import annotations

import math
import struct

import numpy as np

# Finite stand-in for +infinity so metric tables stay portable (CSV/JSON).
PSNR_EXACT_MATCH = 1.0e9


class Field:
    """Immutable dense array of 64-bit reals with an explicit shape.

    Construction copies the input, coerces to float64, and rejects NaN/Inf
    entries.  The wrapped array is marked read-only; use ``.values`` for
    numpy access.
    """

    __slots__ = ("_values",)

    def __init__(self, values, shape=None):
        arr = np.array(values, dtype=np.float64, order="C")
        if shape is not None:
            arr = arr.reshape(tuple(int(n) for n in shape))
        if not np.all(np.isfinite(arr)):
            raise ValueError("field entries must be finite")
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(tuple(int(n) for n in shape)))

    @classmethod
    def full(cls, shape, value):
        return cls(np.full(tuple(int(n) for n in shape), float(value)))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> tuple:
        return self._values.shape

    @property
    def size(self) -> int:
        return self._values.size

    @property
    def ndim(self) -> int:
        return self._values.ndim

    def flat(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self._values.reshape(-1)

    def reshape(self, shape) -> "Field":
        return Field(self._values, shape=shape)

    def allclose(self, other: "Field", rtol=1e-12, atol=1e-12) -> bool:
        return self.shape == other.shape and np.allclose(
            self._values, other._values, rtol=rtol, atol=atol
        )

    def _binary(self, other, op):
        if not isinstance(other, Field):
            return NotImplemented
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")
        return Field(op(self._values, other._values))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        # scalar scale or elementwise (Hadamard) product
        if isinstance(other, (int, float)):
            return Field(self._values * float(other))
        return self._binary(other, np.multiply)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Field(self._values / float(other))
        return self._binary(other, np.divide)

    def __neg__(self):
        return Field(-self._values)

    def __repr__(self):
        return f"Field(shape={self.shape})"


class Rng:
    """Deterministic random source keyed by (seed, stream).

    The two ids form the 128-bit Philox key directly, so any (seed, stream)
    pair names one fixed, platform-independent sequence.  One Rng must not be
    shared across concurrent workers; derive one stream per worker instead.
    """

    def __init__(self, seed: int, stream: int = 0):
        seed = int(seed)
        stream = int(stream)
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = seed
        self.stream = stream
        key = np.array([seed, stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, stream: int) -> "Rng":
        """Fresh Rng on a different stream of the same seed."""
        return Rng(self.seed, stream)

    def standard_normal(self, shape=()) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low=0.0, high=1.0, shape=()) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None):
        """Integers drawn uniformly from [low, high); scalar unless shape given."""
        if shape is None:
            return int(self._gen.integers(low, high))
        return self._gen.integers(low, high, shape)

    def poisson(self, lam: float, shape=()) -> np.ndarray:
        return self._gen.poisson(lam, shape)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"


def randn(shape, rng: Rng) -> Field:
    """Field of i.i.d. standard normal entries; empty extents are allowed."""
    shape = tuple(int(n) for n in shape)
    if any(n < 0 for n in shape):
        raise ValueError("extents must be non-negative")
    return Field(rng.standard_normal(shape))


def psnr(a: Field, b: Field, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; PSNR_EXACT_MATCH when a == b."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    if a.size == 0:
        raise ValueError("psnr is undefined for empty fields")
    mse = float(np.mean((a.values - b.values) ** 2))
    if mse == 0.0:
        return PSNR_EXACT_MATCH
    return 10.0 * math.log10(peak * peak / mse)


def rmse(a: Field, b: Field) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("rmse is undefined for empty fields")
    return float(np.sqrt(np.mean((a.values - b.values) ** 2)))


# ---------------------------------------------------------------------------
# Serialization: little-endian extents header followed by raw doubles, plus a
# PGM dump for eyeballing 2-D fields.

def field_to_bytes(f: Field) -> bytes:
    head = struct.pack("<Q", f.ndim) + struct.pack(f"<{f.ndim}Q", *f.shape)
    return head + f.values.astype("<f8").tobytes()


def field_from_bytes(buf: bytes) -> Field:
    if len(buf) < 8:
        raise ValueError("truncated field header")
    (ndim,) = struct.unpack_from("<Q", buf, 0)
    off = 8 + 8 * ndim
    if len(buf) < off:
        raise ValueError("truncated extents header")
    shape = struct.unpack_from(f"<{ndim}Q", buf, 8)
    count = 1
    for n in shape:
        count *= n
    if len(buf) != off + 8 * count:
        raise ValueError("field payload size does not match extents")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    return Field(data, shape=shape)


def write_field(f: Field, path) -> None:
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(f))


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def write_pgm(f: Field, path) -> None:
    """8-bit binary PGM with the value range rescaled to 0..255."""
    if f.ndim != 2:
        raise ValueError("PGM dump requires a 2-D field")
    v = f.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        q = np.round((v - lo) / (hi - lo) * 255.0)
    else:
        q = np.full(v.shape, 127.0)
    header = f"P5\n{v.shape[1]} {v.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + q.astype(np.uint8).tobytes())
