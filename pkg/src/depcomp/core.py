"""Core types and tensor operations for dependent component systems.

A dependent component system couples a hidden distribution ``p`` over the
alphabet ``{1, ..., L}`` with ``K`` column-stochastic channels.  Each channel
independently garbles the *same* hidden draw, and the observable object is the
joint distribution of the ``K`` outputs.  This module provides validated
containers for the pieces (`Distribution`, `Channel`, `Permutation`,
`JointTensor`, `DCSystem`) and the linear-algebraic operations that connect
them: the forward map from a system to its joint output law, marginalisation,
divergences, and the relabeling action that makes recovery ambiguous.

Symbols and axis labels are 1-based at the API surface (they name alphabet
letters and agents); storage is ordinary 0-based numpy underneath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Tolerance for "sums to one" checks on distributions and channel columns.
STOCHASTIC_ATOL = 1e-12
# Joint tensors accumulate more float error (products over K factors).
TENSOR_MASS_ATOL = 1e-10
# Default relative singular-value cutoff used by invertibility tests.
SINGULAR_RTOL = 1e-9


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    """Copy ``values`` into a read-only ndarray so containers stay immutable."""
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Distribution:
    """A probability vector over the alphabet ``{1, ..., L}``.

    Rejects (never repairs) inputs that are not finite, contain negative
    entries, or whose mass deviates from one by more than ``STOCHASTIC_ATOL``.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("distribution must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("distribution entries must be finite")
        if np.any(arr < 0.0):
            raise ValueError("distribution entries must be nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > STOCHASTIC_ATOL:
            raise ValueError(f"distribution mass {total!r} is not 1 within {STOCHASTIC_ATOL}")
        object.__setattr__(self, "probs", _frozen_array(arr))

    @property
    def size(self) -> int:
        return int(self.probs.size)

    def prob(self, symbol: int) -> float:
        """Mass assigned to 1-based ``symbol``."""
        if not 1 <= symbol <= self.size:
            raise ValueError(f"symbol {symbol} outside alphabet of size {self.size}")
        return float(self.probs[symbol - 1])

    def strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0.0))

    def strictly_descending(self) -> bool:
        return bool(np.all(np.diff(self.probs) < 0.0))


@dataclass(frozen=True)
class Channel:
    """A column-stochastic matrix.

    ``entries[i, j]`` is the probability of emitting output ``i + 1`` when the
    hidden input is ``j + 1``, so every column is a distribution over outputs.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("channel must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("channel entries must be finite")
        if np.any(arr < 0.0) or np.any(arr > 1.0 + STOCHASTIC_ATOL):
            raise ValueError("channel entries must lie in [0, 1]")
        colsums = arr.sum(axis=0)
        bad = np.abs(colsums - 1.0) > STOCHASTIC_ATOL
        if np.any(bad):
            j = int(np.nonzero(bad)[0][0])
            raise ValueError(
                f"channel column {j + 1} sums to {float(colsums[j])!r}, not 1 within {STOCHASTIC_ATOL}"
            )
        object.__setattr__(self, "entries", _frozen_array(arr))

    @property
    def outputs(self) -> int:
        """Number of output symbols (rows)."""
        return int(self.entries.shape[0])

    @property
    def inputs(self) -> int:
        """Number of input symbols (columns)."""
        return int(self.entries.shape[1])

    def column(self, j: int) -> np.ndarray:
        """Output distribution for 1-based input symbol ``j``."""
        if not 1 <= j <= self.inputs:
            raise ValueError(f"input symbol {j} outside alphabet of size {self.inputs}")
        return self.entries[:, j - 1]

    @classmethod
    def identity(cls, L: int) -> "Channel":
        return cls(np.eye(L))


@dataclass(frozen=True)
class Permutation:
    """A bijection of ``{1, ..., L}``; ``mapping[i - 1]`` is the image of ``i``."""

    mapping: tuple

    def __post_init__(self):
        mapping = tuple(int(v) for v in self.mapping)
        if len(mapping) == 0 or sorted(mapping) != list(range(1, len(mapping) + 1)):
            raise ValueError(f"{mapping!r} is not a permutation of 1..{len(mapping)}")
        object.__setattr__(self, "mapping", mapping)

    @property
    def size(self) -> int:
        return len(self.mapping)

    @classmethod
    def identity(cls, L: int) -> "Permutation":
        return cls(tuple(range(1, L + 1)))

    def __call__(self, i: int) -> int:
        if not 1 <= i <= self.size:
            raise ValueError(f"symbol {i} outside domain of size {self.size}")
        return self.mapping[i - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.size
        for i, image in enumerate(self.mapping, start=1):
            inv[image - 1] = i
        return Permutation(tuple(inv))

    def source_indices(self) -> np.ndarray:
        """0-based gather indices: position ``i`` of the result pulls from
        position ``source_indices()[i]`` of the original, i.e. the action on a
        distribution is ``new[i] = old[inverse(i)]``."""
        return np.array([im - 1 for im in self.inverse().mapping], dtype=np.intp)


@dataclass(frozen=True)
class JointTensor:
    """A joint distribution over a product alphabet, stored flat.

    ``values`` is laid out in row-major (C) order over ``shape``: the last
    coordinate varies fastest.  ``shape[a]`` is the alphabet size of axis
    ``a + 1``.
    """

    shape: tuple
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) == 0 or any(s < 1 for s in shape):
            raise ValueError(f"invalid tensor shape {shape!r}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size != math.prod(shape):
            raise ValueError(
                f"flat tensor of length {arr.size} does not match shape {shape!r}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor values must be finite")
        if np.any(arr < 0.0):
            raise ValueError("tensor values must be nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > TENSOR_MASS_ATOL:
            raise ValueError(f"tensor mass {total!r} is not 1 within {TENSOR_MASS_ATOL}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", _frozen_array(arr))

    @property
    def axes(self) -> int:
        return len(self.shape)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "JointTensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(tuple(arr.shape), arr.reshape(-1))

    def prob(self, symbols: Sequence[int]) -> float:
        """Mass of the outcome tuple ``symbols`` (1-based per axis)."""
        if len(symbols) != self.axes:
            raise ValueError(f"expected {self.axes} symbols, got {len(symbols)}")
        idx = []
        for axis, (s, size) in enumerate(zip(symbols, self.shape), start=1):
            if not 1 <= s <= size:
                raise ValueError(f"symbol {s} outside axis {axis} of size {size}")
            idx.append(s - 1)
        return float(self.as_array()[tuple(idx)])


@dataclass(frozen=True)
class DCSystem:
    """A hidden distribution together with the channels observing it.

    All channels read the same hidden symbol, so each must have ``p.size``
    input columns; they must also share a common output alphabet.
    """

    p: Distribution
    channels: tuple

    def __post_init__(self):
        channels = tuple(self.channels)
        if len(channels) == 0:
            raise ValueError("a system needs at least one channel")
        for k, ch in enumerate(channels, start=1):
            if not isinstance(ch, Channel):
                raise ValueError(f"channel {k} is not a Channel")
            if ch.inputs != self.p.size:
                raise ValueError(
                    f"channel {k} has {ch.inputs} input columns, expected {self.p.size}"
                )
        outs = {ch.outputs for ch in channels}
        if len(outs) != 1:
            raise ValueError(f"channels disagree on output alphabet size: {sorted(outs)}")
        object.__setattr__(self, "channels", channels)

    @property
    def hidden_size(self) -> int:
        return self.p.size

    @property
    def output_size(self) -> int:
        return self.channels[0].outputs

    @property
    def num_channels(self) -> int:
        return len(self.channels)


def dirac(i: int, L: int) -> Distribution:
    """Point mass at symbol ``i`` in an alphabet of size ``L``."""
    if L < 1:
        raise ValueError("alphabet size must be at least 1")
    if not 1 <= i <= L:
        raise ValueError(f"symbol {i} outside alphabet of size {L}")
    v = np.zeros(L)
    v[i - 1] = 1.0
    return Distribution(v)


def diag_embed(p: Distribution, K: int) -> JointTensor:
    """Embed ``p`` on the diagonal of the K-fold product alphabet.

    The result puts mass ``p(i)`` on the tuple ``(i, ..., i)`` and zero
    elsewhere: the joint law of ``K`` perfect copies of one hidden draw.
    """
    if K < 1:
        raise ValueError("need at least one axis")
    L = p.size
    out = np.zeros((L,) * K)
    out[(np.arange(L),) * K] = p.probs
    return JointTensor.from_array(out)


def khatri_rao(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product of matrices with a common column count.

    Column ``j`` of the result is the Kronecker product of the ``j``-th
    columns of the inputs, with earlier matrices varying slowest -- matching
    the row-major flat layout of `JointTensor`.
    """
    mats = [np.asarray(m, dtype=np.float64) for m in mats]
    if len(mats) == 0:
        raise ValueError("need at least one matrix")
    cols = {m.shape[1] for m in mats}
    if len(cols) != 1:
        raise ValueError(f"column counts differ: {sorted(cols)}")
    acc = mats[0]
    for m in mats[1:]:
        acc = (acc[:, None, :] * m[None, :, :]).reshape(-1, acc.shape[1])
    return acc


def _joint_output_flat(p: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Flat joint output law for raw arrays; shared with the solver."""
    return khatri_rao(mats) @ p


def output_distribution(system: DCSystem) -> JointTensor:
    """Joint law of the K channel outputs given one hidden draw.

    Entry ``(y_1, ..., y_K)`` equals ``sum_x p(x) * prod_k w_k(y_k | x)``:
    the tensor product of the channels applied to the diagonal embedding
    of ``p``.
    """
    mats = [ch.entries for ch in system.channels]
    flat = _joint_output_flat(system.p.probs, mats)
    shape = tuple(ch.outputs for ch in system.channels)
    return JointTensor(shape, flat)


def partial_trace(t: JointTensor, keep: Iterable[int]) -> JointTensor:
    """Marginalise onto the 1-based axes in ``keep`` (ascending axis order)."""
    keep_set = {int(a) for a in keep}
    if not keep_set:
        raise ValueError("keep must name at least one axis")
    bad = [a for a in keep_set if not 1 <= a <= t.axes]
    if bad:
        raise ValueError(f"axes {sorted(bad)} outside 1..{t.axes}")
    drop = tuple(a - 1 for a in range(1, t.axes + 1) if a not in keep_set)
    arr = t.as_array()
    if drop:
        arr = arr.sum(axis=drop)
    return JointTensor.from_array(arr)


def kl_divergence(a: JointTensor, b: JointTensor) -> float:
    """Relative entropy ``D(a || b)`` in bits; ``inf`` if supp(a) ⊄ supp(b)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    av, bv = a.values, b.values
    mask = av > 0.0
    if np.any(bv[mask] == 0.0):
        return math.inf
    return float(np.sum(av[mask] * np.log2(av[mask] / bv[mask])))


def lp_distance(a: JointTensor, b: JointTensor, k: int) -> float:
    """L1 or L2 distance between joint tensors over the same alphabet."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if k == 1:
        return float(np.abs(a.values - b.values).sum())
    if k == 2:
        d = a.values - b.values
        return float(math.sqrt(d @ d))
    raise ValueError("k must be 1 or 2")


def permute_system(tau: Permutation, system: DCSystem) -> DCSystem:
    """Relabel the hidden alphabet by ``tau`` without changing the output law.

    The hidden mass moves with its label -- ``p'(i) = p(tau^{-1}(i))`` -- and
    every channel's columns are gathered the same way, so the joint output
    distribution of the relabeled system is identical.
    """
    if tau.size != system.hidden_size:
        raise ValueError(
            f"permutation of size {tau.size} does not act on alphabet of size "
            f"{system.hidden_size}"
        )
    src = tau.source_indices()
    p_new = Distribution(system.p.probs[src])
    chans = tuple(Channel(ch.entries[:, src]) for ch in system.channels)
    return DCSystem(p_new, chans)


def channel_invertible(W: Channel, tol: float | None = None) -> bool:
    """Whether a square channel is numerically invertible.

    True iff the smallest singular value exceeds ``tol``; when ``tol`` is
    omitted it defaults to ``SINGULAR_RTOL`` times the largest singular value.
    """
    if W.outputs != W.inputs:
        raise ValueError(f"invertibility needs a square channel, got {W.outputs}x{W.inputs}")
    s = np.linalg.svd(W.entries, compute_uv=False)
    cutoff = SINGULAR_RTOL * float(s[0]) if tol is None else float(tol)
    return bool(s[-1] > cutoff)
