"""Uniform scalar quantizer, uniform dithering, and the frozen quantized map.

Codes are kept as integer bin indices; the bin width delta is reapplied only
when distances are computed, so code comparisons stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ensembles import Ensemble, InvalidArgument, SensingMatrix, sample_matrix

VARIANTS = ("floor", "round")

BOUNDARY_TOL = 1e-12


class InternalConsistencyError(RuntimeError):
    """Two internal evaluation paths disagreed away from a bin boundary."""


@dataclass(frozen=True)
class QuantizerConfig:
    delta: float
    variant: str = "floor"

    def __post_init__(self):
        if not (self.delta > 0):
            raise InvalidArgument("delta must be positive")
        if self.variant not in VARIANTS:
            raise InvalidArgument(f"unknown quantizer variant: {self.variant!r}")


@dataclass(frozen=True)
class Dither:
    """Per-coordinate additive shifts; the uniform sampler keeps them in [0, delta)."""

    values: np.ndarray
    seed: Optional[int] = None

    @classmethod
    def uniform(cls, delta: float, m: int, seed) -> "Dither":
        if not (delta > 0):
            raise InvalidArgument("delta must be positive")
        if m < 1:
            raise InvalidArgument("m must be >= 1")
        rng = np.random.default_rng(seed)
        vals = rng.random(m) * delta
        vals.setflags(write=False)
        base = seed if isinstance(seed, int) else None
        return cls(values=vals, seed=base)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("dither values must be finite")
        object.__setattr__(self, "values", v)


def _floor_index(t: np.ndarray, delta: float) -> np.ndarray:
    """Largest integer k with k*delta <= t, exact on representable lattice points.

    A bare floor(t/delta) can land one bin off when t/delta rounds across an
    integer (delta = 0.1 exhibits this); the fix-up loops restore the bracket
    k*delta <= t < (k+1)*delta using correctly rounded products.
    """
    k = np.floor(t / delta)
    for _ in range(3):
        up = (k + 1.0) * delta <= t
        if not np.any(up):
            break
        k = np.where(up, k + 1.0, k)
    for _ in range(3):
        down = k * delta > t
        if not np.any(down):
            break
        k = np.where(down, k - 1.0, k)
    return k.astype(np.int64)


def quantize_array(cfg: QuantizerConfig, t) -> np.ndarray:
    """Bin indices for an array of finite inputs (value = delta * index)."""
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise InvalidArgument("quantizer input must be finite")
    if cfg.variant == "floor":
        return _floor_index(t, cfg.delta)
    # round half-up: floor(t/delta + 1/2)
    return _floor_index(t + 0.5 * cfg.delta, cfg.delta)


def quantize(cfg: QuantizerConfig, t: float) -> int:
    """Scalar bin index: floor(t/delta) or floor(t/delta + 1/2) for round."""
    return int(quantize_array(cfg, np.asarray([t]))[0])


def boundary_flags(t, delta: float, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """True where t sits within tol*delta of a quantization threshold."""
    t = np.asarray(t, dtype=np.float64)
    r = t - np.round(t / delta) * delta
    return np.abs(r) <= tol * delta


@dataclass(frozen=True)
class QuantizedCode:
    values: np.ndarray  # int64 bin indices, A(x)/delta

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.issubdtype(v.dtype, np.integer):
            raise InvalidArgument("codes must be integers")
        object.__setattr__(self, "values", v.astype(np.int64))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class QuantizedMap:
    """A frozen instance of the dithered quantized mapping x -> Q(Phi x + xi)."""

    matrix: SensingMatrix
    dither: Optional[Dither]
    quantizer: QuantizerConfig

    def __post_init__(self):
        if self.dither is not None and len(self.dither.values) != self.matrix.rows:
            raise InvalidArgument("dither length must equal the matrix row count")

    @property
    def m(self) -> int:
        return self.matrix.rows

    @property
    def n(self) -> int:
        return self.matrix.cols

    @property
    def delta(self) -> float:
        return self.quantizer.delta

    def project(self, x: np.ndarray) -> np.ndarray:
        """Phi x + xi (xi = 0 for undithered maps)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise InvalidArgument(f"expected a vector of dimension {self.n}, got shape {x.shape}")
        z = self.matrix.entries @ x
        if self.dither is not None:
            z = z + self.dither.values
        return z

    def project_many(self, xs: np.ndarray) -> np.ndarray:
        """Column-stacked projections for a batch of vectors (n, count) -> (m, count)."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[0] != self.n:
            raise InvalidArgument(f"expected shape ({self.n}, count), got {xs.shape}")
        z = self.matrix.entries @ xs
        if self.dither is not None:
            z = z + self.dither.values[:, None]
        return z


def make_map(ensemble: Ensemble, m: int, n: int, delta: float, seed,
             dithered: bool = True, variant: str = "floor") -> QuantizedMap:
    """Draw a frozen map: matrix and dither from seeds derived from one root."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    mat_seed, dither_seed = root.spawn(2)
    matrix = sample_matrix(ensemble, m, n, mat_seed)
    cfg = QuantizerConfig(delta=delta, variant=variant)
    dither = Dither.uniform(delta, m, dither_seed) if dithered else None
    return QuantizedMap(matrix=matrix, dither=dither, quantizer=cfg)


def apply(qmap: QuantizedMap, x: np.ndarray) -> QuantizedCode:
    """A(x)/delta as integer codes."""
    return QuantizedCode(values=quantize_array(qmap.quantizer, qmap.project(x)))


def apply_many(qmap: QuantizedMap, xs: np.ndarray) -> np.ndarray:
    """Codes for a batch of column vectors, shape (m, count)."""
    return quantize_array(qmap.quantizer, qmap.project_many(xs))


def dithered_floor_mean(x: float, y: float, samples: int, seed) -> tuple[float, float]:
    """Monte Carlo (estimate, stderr) of E|floor(x+xi) - floor(y+xi)|, xi ~ U[0,1)."""
    if samples < 1:
        raise InvalidArgument("samples must be >= 1")
    rng = np.random.default_rng(seed)
    xi = rng.random(samples)
    vals = np.abs(np.floor(x + xi) - np.floor(y + xi))
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("inf")
    return est, stderr


def dithered_floor_exact(x: float, y: float) -> float:
    """Exact piecewise integral of |floor(x+xi) - floor(y+xi)| over xi in [0,1]."""
    fx = x - math.floor(x)
    fy = y - math.floor(y)
    cuts = sorted({0.0, 1.0 - fx, 1.0 - fy, 1.0})
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        total += (hi - lo) * abs(math.floor(x + mid) - math.floor(y + mid))
    return total


def serialize_codes(codes) -> str:
    """One code per line, space-separated signed integers."""
    lines = []
    for code in codes:
        vals = code.values if isinstance(code, QuantizedCode) else np.asarray(code)
        lines.append(" ".join(str(int(v)) for v in vals))
    return "\n".join(lines) + "\n"


def parse_codes(text: str) -> list[np.ndarray]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        out.append(np.array([int(tok) for tok in line.split()], dtype=np.int64))
    return out
