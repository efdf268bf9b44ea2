"""Quantized predictive control: pick one dictionary column per section.

The encoder minimizes the reduced cost J(u) = u'Wu + 2x'Fu over codewords
u = sum of one column per section. Column indices are 0-based throughout;
section m owns columns m*L .. (m+1)*L - 1.

For a running sum s and candidate column d the cost splits as

    J(s + d) = J(s) + d'Wd + 2 (Ws + F'x)'d

so each candidate costs O(N) once d'Wd is cached per dictionary.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .errors import IndexOutOfSection, MalformedBitstring, TooLarge

EXHAUSTIVE_CAP = 2 ** 20


@dataclass(frozen=True)
class CodewordIndex:
    indices: tuple

    def offsets(self, L: int) -> tuple:
        return tuple(int(i) - m * L for m, i in enumerate(self.indices))

    @classmethod
    def from_offsets(cls, offsets, L: int) -> "CodewordIndex":
        return cls(tuple(m * L + int(o) for m, o in enumerate(offsets)))

    def validate(self, M: int, L: int) -> None:
        if len(self.indices) != M:
            raise IndexOutOfSection(f"expected {M} indices, got {len(self.indices)}")
        for m, i in enumerate(self.indices):
            if not m * L <= i < (m + 1) * L:
                raise IndexOutOfSection(f"index {i} outside section {m}")

    def beta(self, M: int, L: int) -> np.ndarray:
        b = np.zeros(M * L)
        b[list(self.indices)] = 1.0
        return b


class EncoderWorkspace:
    """Per-(dictionary, W, F) cache: g_i = d_i'W d_i and contiguous section blocks."""

    def __init__(self, dictionary: Dictionary, W, F):
        self.dictionary = dictionary
        self.W = np.asarray(W, dtype=float)
        self.F = np.asarray(F, dtype=float)
        D = dictionary.D
        L = dictionary.L
        self.g = np.einsum("ij,ij->j", D, self.W @ D)
        self.sections = [np.ascontiguousarray(D[:, m * L:(m + 1) * L]) for m in range(dictionary.M)]
        self.g_sections = [self.g[m * L:(m + 1) * L] for m in range(dictionary.M)]
        self._buf = np.empty(L)

    @property
    def FD(self) -> np.ndarray:
        return self.F @ self.dictionary.D

    def section_costs(self, m: int, s, x) -> np.ndarray:
        """Cost increments J(s + d_i) - J(s) for all columns of section m."""
        h = self.W @ s + self.F.T @ x
        return self.g_sections[m] + (2.0 * h) @ self.sections[m]

    def encode(self, x):
        """Greedy search returning (global column indices, u_bar)."""
        L = self.dictionary.L
        Ftx = self.F.T @ x
        h = Ftx
        s = np.zeros(self.dictionary.N)
        buf = self._buf
        chosen = []
        for m, sec in enumerate(self.sections):
            np.matmul(2.0 * h, sec, out=buf)
            np.add(buf, self.g_sections[m], out=buf)
            j = int(buf.argmin())
            chosen.append(m * L + j)
            s = s + sec[:, j]
            if m + 1 < len(self.sections):
                h = self.W @ s + Ftx
        return chosen, s


def quantized_cost(u_bar, x, W, F) -> float:
    u_bar = np.asarray(u_bar, dtype=float)
    return float(u_bar @ W @ u_bar + 2.0 * (x @ F @ u_bar))


def decode(dictionary: Dictionary, index: CodewordIndex) -> np.ndarray:
    index.validate(dictionary.M, dictionary.L)
    u = np.zeros(dictionary.N)
    for i in index.indices:
        u = u + dictionary.D[:, i]
    return u


def greedy_encode(dictionary: Dictionary, W, F, x, workspace: EncoderWorkspace | None = None):
    """Section-by-section greedy search; returns (index, u_bar, cost)."""
    ws = workspace if workspace is not None else EncoderWorkspace(dictionary, W, F)
    x = np.asarray(x, dtype=float)
    chosen, s = ws.encode(x)
    return CodewordIndex(tuple(chosen)), s, quantized_cost(s, x, ws.W, ws.F)


def greedy_encode_switched(dict1: Dictionary, dict2: Dictionary, xi: int, W, F, x,
                           workspaces=None):
    """Greedy search with the dictionary of the current network state xi in {1, 2}."""
    if (dict1.N, dict1.M, dict1.L) != (dict2.N, dict2.M, dict2.L):
        raise ValueError("switched dictionaries must share (N, M, L)")
    if xi not in (1, 2):
        raise ValueError("network state must be 1 or 2")
    dictionary = dict1 if xi == 1 else dict2
    ws = workspaces[xi - 1] if workspaces is not None else None
    index, u, cost = greedy_encode(dictionary, W, F, x, ws)
    return index, u, cost, xi


def greedy_encode_reuse(dictionary: Dictionary, W, F, x, workspace: EncoderWorkspace | None = None):
    """Offer every unused section each round and retire the section that wins."""
    ws = workspace if workspace is not None else EncoderWorkspace(dictionary, W, F)
    x = np.asarray(x, dtype=float)
    M, L = dictionary.M, dictionary.L
    s = np.zeros(dictionary.N)
    chosen = [None] * M
    remaining = list(range(M))
    for _ in range(M):
        best_cost, best_col = math.inf, None
        for m in remaining:
            costs = ws.section_costs(m, s, x)
            j = int(np.argmin(costs))
            if costs[j] < best_cost:
                best_cost, best_col = costs[j], m * L + j
        m = best_col // L
        chosen[m] = best_col
        remaining.remove(m)
        s = s + dictionary.D[:, best_col]
    return CodewordIndex(tuple(chosen)), s, quantized_cost(s, x, ws.W, ws.F)


def exhaustive_encode(dictionary: Dictionary, W, F, x, cap: int = EXHAUSTIVE_CAP):
    """Global minimizer over all L^M codewords; ties go to the lexicographically smallest."""
    M, L = dictionary.M, dictionary.L
    if L ** M > cap:
        raise TooLarge(f"{L}^{M} codewords exceed the cap {cap}")
    x = np.asarray(x, dtype=float)
    W = np.asarray(W, dtype=float)
    # sums[c] for c enumerated with section 0 as the most significant digit
    sums = np.zeros((1, dictionary.N))
    for m in range(M):
        sec = dictionary.section(m).T
        sums = (sums[:, None, :] + sec[None, :, :]).reshape(-1, dictionary.N)
    lin = 2.0 * (sums @ (F.T @ x))
    costs = np.einsum("ij,jk,ik->i", sums, W, sums) + lin
    flat = int(np.argmin(costs))
    offsets = np.unravel_index(flat, (L,) * M)
    index = CodewordIndex.from_offsets(offsets, L)
    return index, quantized_cost(sums[flat], x, W, F)


def bits_per_section(L: int) -> int:
    return (L - 1).bit_length()


def pack_indices(index: CodewordIndex, L: int) -> str:
    """Offsets as fixed-width big-endian bit fields, section 0 first."""
    width = bits_per_section(L)
    out = []
    for m, off in enumerate(index.offsets(L)):
        if not 0 <= off < L:
            raise IndexOutOfSection(f"offset {off} outside section {m}")
        out.append(format(off, f"0{width}b") if width else "")
    return "".join(out)


def unpack_indices(bits: str, M: int, L: int) -> CodewordIndex:
    width = bits_per_section(L)
    if len(bits) != M * width or set(bits) - {"0", "1"}:
        raise MalformedBitstring(f"expected {M * width} bits")
    offsets = []
    for m in range(M):
        field = bits[m * width:(m + 1) * width]
        off = int(field, 2) if width else 0
        if off >= L:
            raise MalformedBitstring(f"offset {off} >= L in section {m}")
        offsets.append(off)
    return CodewordIndex.from_offsets(offsets, L)


def all_codewords(M: int, L: int):
    return (CodewordIndex.from_offsets(o, L) for o in itertools.product(range(L), repeat=M))
