"""The four changepoint-vector proposal kernels and their exact densities.

Every kernel returns a :class:`Proposal` carrying the proposed vector plus
the log transition densities in both directions *under that kernel*, branch
selection included.  Impossible selections (deleting from an empty vector,
inserting into a vector with no room, a segment-insertion draw that straddles
an existing changepoint) return a null proposal whose forward density is
minus infinity; the sampler counts such steps as rejections.  Recording true
per-target densities this way keeps every kernel's outcome masses summing to
one and makes the Metropolis acceptance rule satisfy detailed balance
exactly.

Kernels (log densities for a current vector with ``c`` changepoints out of
``n - 1`` slots):

1. ``propose_new`` - independent redraw: every slot set i.i.d. with
   probability ``1 - exp(-lam*dt)``; density depends only on the proposed
   vector's count.
2. ``propose_birth_death`` - fair coin between deleting one existing
   changepoint (per-target ``1/(2c)``) and adding one at an empty slot
   (per-target ``1/(2(n-1-c))``).
3. ``propose_segment_bd`` - fair coin between deleting a pair of
   changepoints adjacent in the sorted index list (per-pair ``1/(2c)``, with
   the last list position acting as a null selection) and inserting two new
   changepoints into a single segment (per unordered pair ``1/A`` with
   ``A = (n-1-c)(n-2-c)``; draws landing in different segments are null).
4. ``propose_shift`` - move one changepoint to a random empty slot;
   symmetric with density ``1/(c(n-1-c))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .model import ChangepointVector

__all__ = [
    "ProposalType",
    "Proposal",
    "propose_new",
    "propose_birth_death",
    "propose_segment_bd",
    "propose_shift",
    "make_proposal",
    "new_vector_log_density",
]

NEG_INF = float("-inf")


class ProposalType(IntEnum):
    INITIAL = 0
    NEW = 1
    BIRTH_DEATH = 2
    SEGMENT_BD = 3
    SHIFT = 4


@dataclass(frozen=True)
class Proposal:
    kind: ProposalType
    r_prop: ChangepointVector
    forward_log_density: float
    reverse_log_density: float

    @property
    def is_null(self) -> bool:
        return self.forward_log_density == NEG_INF


def _null(kind: ProposalType, r_cur: ChangepointVector) -> Proposal:
    return Proposal(kind, r_cur, NEG_INF, NEG_INF)


def new_vector_log_density(count: int, n: int, lam: float, dt: float) -> float:
    """Log density of any vector with ``count`` set bits under the
    independent-redraw kernel."""
    rate = lam * dt
    log_p = math.log(-math.expm1(-rate))
    out = -(n - 1 - count) * rate
    if count:
        out += count * log_p
    return out


def propose_new(rng: np.random.Generator, r_cur: ChangepointVector,
                lam: float, dt: float) -> Proposal:
    """Independent redraw of the whole vector (type 1)."""
    n = r_cur.n
    p = -math.expm1(-lam * dt)
    bits = rng.random(n - 1) < p
    r_prop = ChangepointVector(bits, n)
    return Proposal(
        ProposalType.NEW,
        r_prop,
        new_vector_log_density(r_prop.count, n, lam, dt),
        new_vector_log_density(r_cur.count, n, lam, dt),
    )


def propose_birth_death(rng: np.random.Generator, r_cur: ChangepointVector) -> Proposal:
    """Add or delete a single changepoint with equal branch probability (type 2)."""
    n, c = r_cur.n, r_cur.count
    kind = ProposalType.BIRTH_DEATH
    if rng.random() < 0.5:
        if c == 0:
            return _null(kind, r_cur)
        victim = int(rng.choice(r_cur.indices))
        r_prop = r_cur.with_flipped(victim)
        forward = -math.log(2 * c)
        reverse = -math.log(2 * (n - 1 - (c - 1)))
    else:
        if c == n - 1:
            return _null(kind, r_cur)
        empty = np.flatnonzero(~r_cur.bits) + 1
        slot = int(rng.choice(empty))
        r_prop = r_cur.with_flipped(slot)
        forward = -math.log(2 * (n - 1 - c))
        reverse = -math.log(2 * (c + 1))
    return Proposal(kind, r_prop, forward, reverse)


def propose_segment_bd(rng: np.random.Generator, r_cur: ChangepointVector) -> Proposal:
    """Delete or insert a pair of changepoints bounding one segment (type 3)."""
    n, c = r_cur.n, r_cur.count
    kind = ProposalType.SEGMENT_BD
    if rng.random() < 0.5:
        # Delete two list-adjacent changepoints.  The selector is uniform over
        # c list positions; the last one has no successor and is a null draw,
        # so each deletable pair carries probability 1/(2c) exactly.
        if c == 0:
            return _null(kind, r_cur)
        j = int(rng.integers(c))
        if j == c - 1:
            return _null(kind, r_cur)
        idx = r_cur.indices
        lo, hi = int(idx[j]), int(idx[j + 1])
        r_prop = r_cur.with_flipped(lo, hi)
        avail_after = n - 1 - (c - 2)
        forward = -math.log(2 * c)
        reverse = -(math.log(avail_after) + math.log(avail_after - 1))
    else:
        # Insert: draw an ordered pair of distinct empty slots uniformly; the
        # draw is null when a changepoint separates them.  Each unordered
        # in-segment pair carries probability 1/((n-1-c)(n-2-c)) overall.
        avail = n - 1 - c
        if avail < 2:
            return _null(kind, r_cur)
        empty = np.flatnonzero(~r_cur.bits) + 1
        s, s2 = rng.choice(empty, size=2, replace=False)
        lo, hi = (int(s), int(s2)) if s < s2 else (int(s2), int(s))
        idx = r_cur.indices
        if np.any((idx > lo) & (idx < hi)):
            return _null(kind, r_cur)
        r_prop = r_cur.with_flipped(lo, hi)
        forward = -(math.log(avail) + math.log(avail - 1))
        reverse = -math.log(2 * (c + 2))
    return Proposal(kind, r_prop, forward, reverse)


def propose_shift(rng: np.random.Generator, r_cur: ChangepointVector) -> Proposal:
    """Relocate one changepoint to a random empty slot (type 4, symmetric)."""
    n, c = r_cur.n, r_cur.count
    kind = ProposalType.SHIFT
    if c == 0 or c == n - 1:
        return _null(kind, r_cur)
    src = int(rng.choice(r_cur.indices))
    empty = np.flatnonzero(~r_cur.bits) + 1
    dst = int(rng.choice(empty))
    r_prop = r_cur.with_flipped(src, dst)
    log_density = -(math.log(c) + math.log(n - 1 - c))
    return Proposal(kind, r_prop, log_density, log_density)


def make_proposal(kind: ProposalType, rng: np.random.Generator,
                  r_cur: ChangepointVector, lam: float, dt: float) -> Proposal:
    """Dispatch to one kernel by type."""
    if kind == ProposalType.NEW:
        return propose_new(rng, r_cur, lam, dt)
    if kind == ProposalType.BIRTH_DEATH:
        return propose_birth_death(rng, r_cur)
    if kind == ProposalType.SEGMENT_BD:
        return propose_segment_bd(rng, r_cur)
    if kind == ProposalType.SHIFT:
        return propose_shift(rng, r_cur)
    raise ValueError(f"not a proposal kernel: {kind!r}")
