"""Backend-neutral bilinear group abstraction.

Two interchangeable backends implement this interface: a production
supersingular-curve backend and an exact small-prime oracle for exhaustive
testing.  Both are symmetric pairings, but elements carry source-group tags
so code written here also holds on an asymmetric (type-3) backend where the
two source groups are genuinely distinct.

The source group is written additively (``add``, ``scalar_mul``) and the
target group abstractly (``gt_combine`` / ``gt_uncombine`` / ``gt_scale``),
which keeps one vocabulary across the multiplicative curve target group and
the additive oracle.
"""

from __future__ import annotations

import enum
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Optional

from agencid.errors import TagMismatchError

__all__ = [
    "Backend",
    "EngineConfig",
    "GroupTag",
    "OpCounters",
    "PairingEngine",
    "Scalar",
    "SourceElement",
    "TargetElement",
    "make_rng",
    "rand_below",
    "rand_nonzero",
]


class Backend(str, enum.Enum):
    """Engine backend selector; the value doubles as the CLI spelling."""

    PRODUCTION = "production"
    SYMBOLIC = "symbolic"

    @property
    def wire_id(self) -> int:
        return _WIRE_IDS[self]

    @classmethod
    def from_wire_id(cls, wire_id: int) -> "Backend":
        for backend, wid in _WIRE_IDS.items():
            if wid == wire_id:
                return backend
        raise ValueError(f"unknown backend wire id {wire_id:#x}")


_WIRE_IDS = {Backend.SYMBOLIC: 0x01, Backend.PRODUCTION: 0x02}

# High bit of the container backend byte marks baseline (per-board) packages.
IEID_WIRE_FLAG = 0x80


class GroupTag(enum.Enum):
    """Which pairing argument slot a source element may occupy.

    Symmetric backends mint ``BOTH`` elements; explicitly narrowed tags are
    honored everywhere so tag discipline is enforceable (and testable) even
    when the underlying groups coincide.
    """

    FIRST = "first"
    SECOND = "second"
    BOTH = "both"

    def admits(self, slot: "GroupTag") -> bool:
        return self is GroupTag.BOTH or self is slot

    def meet(self, other: "GroupTag") -> Optional["GroupTag"]:
        """Intersection of capabilities; None when incompatible."""
        if self is other:
            return self
        if self is GroupTag.BOTH:
            return other
        if other is GroupTag.BOTH:
            return self
        return None


@dataclass(frozen=True)
class Scalar:
    """Residue modulo the group order; arithmetic stays closed mod ``order``."""

    value: int
    order: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.order:
            raise ValueError(f"scalar {self.value} outside [0, {self.order})")

    def add(self, other: "Scalar") -> "Scalar":
        self._check(other)
        return Scalar((self.value + other.value) % self.order, self.order)

    def mul(self, other: "Scalar") -> "Scalar":
        self._check(other)
        return Scalar((self.value * other.value) % self.order, self.order)

    def neg(self) -> "Scalar":
        return Scalar(-self.value % self.order, self.order)

    def inverse(self) -> "Scalar":
        if self.value == 0:
            raise ZeroDivisionError("zero scalar has no inverse")
        return Scalar(pow(self.value, -1, self.order), self.order)

    def _check(self, other: "Scalar") -> None:
        if self.order != other.order:
            raise ValueError("scalars from different orders")


@dataclass(frozen=True)
class SourceElement:
    """Opaque element of a source group; ``data`` is backend-specific."""

    backend: Backend
    tag: GroupTag
    data: Any


@dataclass(frozen=True)
class TargetElement:
    """Opaque element of the target group."""

    backend: Backend
    data: Any


@dataclass
class OpCounters:
    """Mutable operation counters, one instance per engine.

    The pairing/add/mul counts are bumped by the engine itself; ``seals``
    and ``wraps`` are bumped by the payload-sealing and key-encapsulation
    layers, which accept this object so one meter covers a whole run.
    """

    pairings: int = 0
    group_adds: int = 0
    scalar_muls: int = 0
    seals: int = 0
    wraps: int = 0

    def reset(self) -> None:
        self.pairings = self.group_adds = self.scalar_muls = 0
        self.seals = self.wraps = 0

    def snapshot(self) -> "OpCounters":
        return replace(self)

    def delta(self, before: "OpCounters") -> "OpCounters":
        return OpCounters(
            pairings=self.pairings - before.pairings,
            group_adds=self.group_adds - before.group_adds,
            scalar_muls=self.scalar_muls - before.scalar_muls,
            seals=self.seals - before.seals,
            wraps=self.wraps - before.wraps,
        )


@dataclass(frozen=True)
class EngineConfig:
    """Backend selection plus the knobs each backend needs.

    ``rng_seed`` makes every random draw reproducible, which is part of the
    public contract so golden-file tests stay bit-stable.  Seeded mode is
    for tests and benchmarks only; leave it ``None`` for real key material.
    """

    backend: Backend = Backend.PRODUCTION
    security_level: int = 80
    oracle_modulus: int = 101
    rng_seed: Optional[int] = None
    # Unlocks fixture constructors that retain transient secrets (test suites only).
    testing_hooks: bool = False

    def __post_init__(self) -> None:
        if self.backend is Backend.SYMBOLIC:
            q = self.oracle_modulus
            if q < 3 or not _is_prime(q):
                raise ValueError(f"oracle modulus {q} is not prime")

    def make_rng(self) -> random.Random:
        return make_rng(self.rng_seed)


def _is_prime(n: int) -> bool:
    # Deterministic Miller-Rabin; oracle moduli are tiny, curve params are frozen.
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def make_rng(seed: Optional[int] = None) -> random.Random:
    """Seeded deterministic generator, or the OS entropy source when unseeded."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)


def rand_below(rng: random.Random, bound: int) -> int:
    """Uniform draw from [0, bound) via rejection on getrandbits.

    Implemented here (rather than ``rng.randrange``) so the byte stream is
    pinned by this package, independent of stdlib internals.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    bits = bound.bit_length()
    while True:
        v = rng.getrandbits(bits)
        if v < bound:
            return v


def rand_nonzero(rng: random.Random, bound: int) -> int:
    while True:
        v = rand_below(rng, bound)
        if v != 0:
            return v


class PairingEngine(ABC):
    """Operations over one bilinear group pair (source groups, target group).

    All element types are immutable; the engine's only mutable state is its
    ``counters`` meter, so share engines across threads only with external
    coordination or use one engine per thread.
    """

    config: EngineConfig
    counters: OpCounters

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.counters = OpCounters()

    # -- identification ----------------------------------------------------

    @property
    def backend(self) -> Backend:
        return self.config.backend

    @property
    @abstractmethod
    def scalar_order(self) -> int:
        """Prime order of the groups (and of the scalar field)."""

    @property
    def symmetric(self) -> bool:
        """True when the two source groups coincide (both current backends)."""
        return True

    # -- constructors ------------------------------------------------------

    def scalar(self, value: int) -> Scalar:
        return Scalar(value % self.scalar_order, self.scalar_order)

    @abstractmethod
    def generator(self, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        ...

    @abstractmethod
    def identity(self, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        ...

    @abstractmethod
    def gt_identity(self) -> TargetElement:
        ...

    # -- source-group operations -------------------------------------------

    def add(self, x: SourceElement, y: SourceElement) -> SourceElement:
        tag = x.tag.meet(y.tag)
        if tag is None:
            raise TagMismatchError(f"cannot add {x.tag.value} and {y.tag.value} elements")
        self.counters.group_adds += 1
        return SourceElement(self.backend, tag, self._add(x.data, y.data))

    def neg(self, x: SourceElement) -> SourceElement:
        return SourceElement(self.backend, x.tag, self._neg(x.data))

    def sub(self, x: SourceElement, y: SourceElement) -> SourceElement:
        return self.add(x, self.neg(y))

    def scalar_mul(self, k: Scalar, x: SourceElement) -> SourceElement:
        self.counters.scalar_muls += 1
        return SourceElement(self.backend, x.tag, self._scalar_mul(k.value, x.data))

    # -- pairing -----------------------------------------------------------

    def pair(self, a: SourceElement, b: SourceElement) -> TargetElement:
        if not a.tag.admits(GroupTag.FIRST):
            raise TagMismatchError("first pairing argument is not a first-group element")
        if not b.tag.admits(GroupTag.SECOND):
            raise TagMismatchError("second pairing argument is not a second-group element")
        self.counters.pairings += 1
        return TargetElement(self.backend, self._pair(a.data, b.data))

    def pair_unmetered(self, a: SourceElement, b: SourceElement) -> TargetElement:
        """Pairing without counter updates, for deserialization cross-checks.

        Counters meter scheme algebra; input validation is not part of any
        operation-count claim.  Never call this from scheme code paths.
        """
        return TargetElement(self.backend, self._pair(a.data, b.data))

    # -- target-group operations -------------------------------------------

    def gt_combine(self, x: TargetElement, y: TargetElement) -> TargetElement:
        return TargetElement(self.backend, self._gt_combine(x.data, y.data))

    def gt_uncombine(self, x: TargetElement, y: TargetElement) -> TargetElement:
        """Inverse of combine: gt_uncombine(gt_combine(m, y), y) == m."""
        return TargetElement(self.backend, self._gt_uncombine(x.data, y.data))

    def gt_scale(self, k: Scalar, x: TargetElement) -> TargetElement:
        """k-fold combine of x with itself (exponentiation on the curve backend)."""
        return TargetElement(self.backend, self._gt_scale(k.value, x.data))

    # -- randomness --------------------------------------------------------

    def random_scalar(self, rng: random.Random) -> Scalar:
        return Scalar(rand_below(rng, self.scalar_order), self.scalar_order)

    def random_nonzero_scalar(self, rng: random.Random) -> Scalar:
        return Scalar(rand_nonzero(rng, self.scalar_order), self.scalar_order)

    @abstractmethod
    def random_gt(self, rng: random.Random) -> TargetElement:
        ...

    # -- serialization -----------------------------------------------------

    @property
    @abstractmethod
    def source_size(self) -> int:
        """Fixed byte length of a serialized source element."""

    @property
    @abstractmethod
    def gt_size(self) -> int:
        """Fixed byte length of a serialized target element."""

    @property
    @abstractmethod
    def scalar_size(self) -> int:
        ...

    @abstractmethod
    def serialize_source(self, x: SourceElement) -> bytes:
        ...

    @abstractmethod
    def deserialize_source(self, raw: bytes, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        ...

    @abstractmethod
    def serialize_gt(self, x: TargetElement) -> bytes:
        ...

    @abstractmethod
    def deserialize_gt(self, raw: bytes) -> TargetElement:
        ...

    def serialize_scalar(self, k: Scalar) -> bytes:
        return k.value.to_bytes(self.scalar_size, "big")

    def deserialize_scalar(self, raw: bytes) -> Scalar:
        if len(raw) != self.scalar_size:
            raise ValueError(f"scalar encoding must be {self.scalar_size} bytes")
        return self.scalar(int.from_bytes(raw, "big"))

    # -- backend hooks (raw element data, no tag/counter concerns) ----------

    @abstractmethod
    def _add(self, x: Any, y: Any) -> Any:
        ...

    @abstractmethod
    def _neg(self, x: Any) -> Any:
        ...

    @abstractmethod
    def _scalar_mul(self, k: int, x: Any) -> Any:
        ...

    @abstractmethod
    def _pair(self, a: Any, b: Any) -> Any:
        ...

    @abstractmethod
    def _gt_combine(self, x: Any, y: Any) -> Any:
        ...

    @abstractmethod
    def _gt_uncombine(self, x: Any, y: Any) -> Any:
        ...

    @abstractmethod
    def _gt_scale(self, k: int, x: Any) -> Any:
        ...
