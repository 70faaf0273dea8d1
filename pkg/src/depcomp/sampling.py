"""Observation generation and empirical estimation for dependent systems.

Sampling is deterministic and order-independent: record ``t`` is a pure
function of ``(system, seed, t)``.  Each record consumes its own aligned block
of a Philox counter-based stream, so generating records in chunks (or in
parallel, chunk by chunk) yields byte-identical output to a single sequential
pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .core import Channel, DCSystem, Distribution, JointTensor, kl_divergence

# Philox-4x64 emits 4 64-bit words (4 doubles) per counter increment, so
# per-record layouts are padded to a multiple of 4 draws to keep records
# aligned with counter blocks.
_PHILOX_BLOCK = 4
_MAX_SEED = 2**64


@dataclass(frozen=True)
class SampleBatch:
    """``n`` observation records of ``K`` symbols each, 1-based.

    ``records[t - 1, k - 1]`` is the output of channel ``k`` in record ``t``.
    """

    output_size: int
    records: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.records, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("records must be a non-empty (n, K) integer array")
        if self.output_size < 1:
            raise ValueError("output alphabet size must be at least 1")
        if np.any(arr < 1) or np.any(arr > self.output_size):
            raise ValueError(f"symbols must lie in 1..{self.output_size}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "records", arr)

    @property
    def n(self) -> int:
        return int(self.records.shape[0])

    @property
    def num_channels(self) -> int:
        return int(self.records.shape[1])


@dataclass(frozen=True)
class EmpiricalCounts:
    """Occurrence counts of output tuples, flat in the same layout as tensors."""

    shape: tuple
    counts: np.ndarray
    n: int

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) == 0 or any(s < 1 for s in shape):
            raise ValueError(f"invalid shape {shape!r}")
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 1 or arr.size != math.prod(shape):
            raise ValueError(f"flat counts of length {arr.size} do not match shape {shape!r}")
        if np.any(arr < 0):
            raise ValueError("counts must be nonnegative")
        if int(arr.sum()) != int(self.n):
            raise ValueError(f"counts sum to {int(arr.sum())}, expected n={self.n}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "n", int(self.n))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


def _record_width(K: int) -> int:
    """Uniform draws reserved per record: 1 hidden + K outputs, block-aligned."""
    return _PHILOX_BLOCK * ((K + 1 + _PHILOX_BLOCK - 1) // _PHILOX_BLOCK)


def _uniform_rows(seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the per-record uniform table for ``seed``.

    Because ``width`` is a multiple of the Philox block, the stream can be
    fast-forwarded to any record boundary with ``advance``; which chunk a row
    is generated in cannot affect its value.
    """
    bits = Philox(key=seed)
    bits.advance(start * (width // _PHILOX_BLOCK))
    flat = Generator(bits).random((stop - start) * width)
    return flat.reshape(stop - start, width)


def _inverse_cdf(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """0-based symbols via inverse CDF: smallest ``i`` with ``u < cum[i]``.

    ``cum`` has the cumulative masses down axis 0 with the final row pinned to
    exactly 1.0, so every ``u`` in [0, 1) lands on a valid symbol.
    """
    return (cum <= u[None, :]).sum(axis=0)


def _cumulative_columns(matrix: np.ndarray) -> np.ndarray:
    cum = np.cumsum(matrix, axis=0)
    cum[-1, :] = 1.0
    return cum


def sample_dcs(system: DCSystem, n: int, seed: int, _chunk: int = 1 << 15) -> SampleBatch:
    """Draw ``n`` i.i.d. records from the system's joint output law.

    Record ``t`` (1-based) draws one hidden symbol from ``p`` and passes it
    through each channel, using uniforms ``t``'s own stream block, so the
    result is reproducible bit-for-bit for a given ``(system, n, seed)`` and
    independent of chunking.
    """
    if int(n) < 1:
        raise ValueError("need at least one record")
    n = int(n)
    seed = _check_seed(seed)
    K = system.num_channels
    width = _record_width(K)
    cum_p = _cumulative_columns(system.p.probs[:, None])  # (L, 1)
    cum_w = [_cumulative_columns(ch.entries) for ch in system.channels]
    records = np.empty((n, K), dtype=np.int64)
    for start in range(0, n, _chunk):
        stop = min(start + _chunk, n)
        u = _uniform_rows(seed, start, stop, width)
        hidden = _inverse_cdf(cum_p, u[:, 0])  # 0-based hidden symbols
        for k in range(K):
            cum_cols = cum_w[k][:, hidden]  # (L', m): CDF of each record's input
            records[start:stop, k] = _inverse_cdf(cum_cols, u[:, k + 1]) + 1
    return SampleBatch(system.output_size, records)


def type_counts(batch: SampleBatch) -> EmpiricalCounts:
    """Count occurrences of each output tuple (order-invariant)."""
    shape = (batch.output_size,) * batch.num_channels
    flat_idx = np.ravel_multi_index(tuple((batch.records - 1).T), shape)
    counts = np.bincount(flat_idx, minlength=math.prod(shape)).astype(np.int64)
    return EmpiricalCounts(shape, counts, batch.n)


def ml_estimate(counts: EmpiricalCounts) -> JointTensor:
    """Maximum-likelihood (empirical frequency) estimate of the joint law."""
    if counts.n < 1:
        raise ValueError("cannot estimate from zero records")
    return JointTensor(counts.shape, counts.counts / counts.n)


def typicality_test(q_hat: JointTensor, q: JointTensor, n: int) -> bool:
    """Whether ``q_hat`` is within the concentration radius of ``q``.

    Accepts iff ``D(q_hat || q) <= 1/sqrt(n)`` (bits); the radius shrinks
    slowly enough that true samples pass with probability -> 1.
    """
    if int(n) < 1:
        raise ValueError("sample size must be at least 1")
    return kl_divergence(q_hat, q) <= 1.0 / math.sqrt(int(n))


def random_channel(
    rng: Generator, outputs: int, inputs: int, *, min_column_gap: float = 1e-3
) -> Channel:
    """Dirichlet-column channel with pairwise-distinct columns.

    Rejects draws until every pair of columns is at least ``min_column_gap``
    apart in L1, so downstream rank tests are well-conditioned.
    """
    for _ in range(1000):
        cols = rng.dirichlet(np.ones(outputs), size=inputs).T
        ok = True
        for a in range(inputs):
            for b in range(a + 1, inputs):
                if np.abs(cols[:, a] - cols[:, b]).sum() < min_column_gap:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return Channel(cols)
    raise RuntimeError("failed to draw a channel with distinct columns")


def random_system(
    L: int,
    Lprime: int,
    K: int,
    seed: int,
    *,
    noise_weight: float = 0.3,
    min_mass: float = 0.0,
    min_gap: float = 0.0,
    min_column_gap: float = 1e-3,
) -> DCSystem:
    """Seeded random system with a strictly descending, strictly positive ``p``.

    Square channels are identity/noise mixtures ``(1 - w) I + w N`` with
    Dirichlet noise ``N`` (invertible for moderate ``w``); rectangular ones
    get independent Dirichlet columns.  ``min_mass`` and ``min_gap`` impose a
    floor on the smallest hidden mass and on gaps between sorted masses.
    """
    if L < 1 or Lprime < 1 or K < 1:
        raise ValueError("alphabet sizes and channel count must be at least 1")
    if not 0.0 <= noise_weight <= 1.0:
        raise ValueError("noise weight must lie in [0, 1]")
    rng = Generator(Philox(key=_check_seed(seed)))
    p = None
    for _ in range(1000):
        cand = np.sort(rng.dirichlet(np.ones(L)))[::-1]
        gaps_ok = L == 1 or np.all(-np.diff(cand) > min_gap)
        if cand[-1] > min_mass and gaps_ok:
            p = Distribution(cand)
            break
    if p is None:
        raise RuntimeError("failed to draw a hidden distribution meeting the floors")
    channels = []
    for _ in range(K):
        if L == Lprime:
            noise = rng.dirichlet(np.ones(Lprime), size=L).T
            channels.append(Channel((1.0 - noise_weight) * np.eye(L) + noise_weight * noise))
        else:
            channels.append(random_channel(rng, Lprime, L, min_column_gap=min_column_gap))
    return DCSystem(p, tuple(channels))
