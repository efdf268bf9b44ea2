"""Sectioned Gaussian dictionaries for the fixed-rate vector quantizer.

A dictionary is an N x (M*L) matrix; section m owns columns m*L .. (m+1)*L-1
(0-based) and a codeword is the sum of one column from every section.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, RateOverflow

L_CAP = 2 ** 24
MAGIC = b"NCSQDICT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIIIdQ")


class Family(enum.IntEnum):
    IID = 0
    GR = 1
    GSR = 2
    GR2 = 3
    GSR2 = 4

    @property
    def section_scaled(self) -> bool:
        return self in (Family.GSR, Family.GSR2)


@dataclass(frozen=True)
class RateSpec:
    N: int
    M: int
    L: int

    @property
    def rate(self) -> float:
        return self.M * math.log2(self.L) / self.N


@dataclass(frozen=True, eq=False)
class Dictionary:
    D: np.ndarray
    M: int
    L: int
    family: Family
    scale: float
    seed: int

    def __post_init__(self):
        if self.D.shape[1] != self.M * self.L:
            raise ConfigInvalid("dictionary must have M*L columns")
        self.D.setflags(write=False)

    @property
    def N(self) -> int:
        return self.D.shape[0]

    @property
    def rate(self) -> float:
        return RateSpec(self.N, self.M, self.L).rate

    def section(self, m: int) -> np.ndarray:
        return self.D[:, m * self.L:(m + 1) * self.L]


def codewords_per_section(N: int, M: int, target_rate: float, cap: int = L_CAP) -> int:
    """Smallest L with M log2(L) / N >= target_rate."""
    if not target_rate > 0:
        raise ConfigInvalid("target rate must be positive")
    exponent = N * target_rate / M
    if exponent > math.log2(cap):
        raise RateOverflow(f"L = 2^{exponent:g} exceeds cap {cap}")
    L = math.ceil(2.0 ** exponent)
    # 2**x for integral-valued x is exact; guard the ceil against one-ulp overshoot
    if L > 1 and math.isclose(2.0 ** exponent, L - 1, rel_tol=1e-12):
        L -= 1
    if L > cap:
        raise RateOverflow(f"L = {L} exceeds cap {cap}")
    return max(L, 1)


def achieved_rate(N: int, M: int, L: int) -> float:
    return RateSpec(N, M, L).rate


def section_scales(M: int) -> np.ndarray:
    """Per-section multipliers c_m = (1/M)^(m/M)."""
    if M < 1:
        raise ConfigInvalid("M must be positive")
    m = np.arange(M)
    return (1.0 / M) ** (m / M)


def covariance_factor(Q) -> np.ndarray:
    """S with S S' = Q from the symmetric eigendecomposition, negatives clipped."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return V * np.sqrt(np.clip(w, 0, None))


def _normals(rng, count: int, N: int) -> np.ndarray:
    # one column's N variates are consecutive in the stream
    return rng.standard_normal((count, N)).T


def sample_shaped_columns(Q_u, count: int, rng) -> np.ndarray:
    S = covariance_factor(Q_u)
    return S @ _normals(rng, count, S.shape[0])


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def build_dictionary(family, N: int, M: int, L: int, shape_input, scale: float = 1.0,
                     seed: int = 0) -> Dictionary:
    """Draw a dictionary of the given family.

    ``shape_input`` is the target covariance Q_u (N x N) for the shaped
    families and the per-entry variance for IID.
    """
    family = Family[family] if isinstance(family, str) else Family(family)
    if not scale > 0:
        raise ConfigInvalid("scale must be positive")
    rng = make_rng(seed)
    if family is Family.IID:
        var = float(np.asarray(shape_input))
        if var < 0:
            raise ConfigInvalid("IID variance must be nonnegative")
        D = math.sqrt(var) * _normals(rng, M * L, N)
    else:
        Q_u = np.atleast_2d(np.asarray(shape_input, dtype=float))
        if Q_u.shape != (N, N):
            raise ConfigInvalid(f"Q_u must be {N}x{N}")
        D = sample_shaped_columns(Q_u, M * L, rng)
        if family.section_scaled:
            D = D * np.repeat(section_scales(M), L)
    D = np.ascontiguousarray(D * scale)
    return Dictionary(D=D, M=M, L=L, family=family, scale=float(scale), seed=int(seed))


def dump_dictionary(dictionary: Dictionary, path) -> None:
    """Write header + column-major little-endian float64 entries."""
    N = dictionary.N
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, N, dictionary.M, dictionary.L,
                          int(dictionary.family), dictionary.scale,
                          dictionary.seed & 0xFFFFFFFFFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(dictionary.D.T, dtype="<f8").tobytes())


def load_dictionary(path) -> Dictionary:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigInvalid("truncated dictionary file")
    magic, version, N, M, L, fam, scale, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ConfigInvalid("not an ncsq dictionary file")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != N * M * L:
        raise ConfigInvalid("dictionary payload size does not match header")
    D = body.reshape(M * L, N).T.astype(float)
    return Dictionary(D=np.ascontiguousarray(D), M=M, L=L, family=Family(fam), scale=scale, seed=seed)
