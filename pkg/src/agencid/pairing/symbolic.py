"""Exact-arithmetic oracle backend over a small prime field.

Both source groups and the target group are (Z_q, +) with generator 1, and
the pairing is plain modular multiplication: e(a, b) = a * b mod q.  That
map is bilinear and non-degenerate, so every identity the scheme relies on
can be checked exhaustively with exact integers, no curve code involved.

Useless cryptographically (discrete logs are free); exists so correctness
tests are independent of the production backend's implementation.
"""

from __future__ import annotations

import random
from typing import Any

from agencid.pairing.base import (
    Backend,
    EngineConfig,
    GroupTag,
    PairingEngine,
    SourceElement,
    TargetElement,
    rand_below,
)

__all__ = ["SymbolicEngine"]

_ELEMENT_SIZE = 8


class SymbolicEngine(PairingEngine):
    """Z_q oracle; element data is the residue as a plain int."""

    def __init__(self, config: EngineConfig) -> None:
        if config.backend is not Backend.SYMBOLIC:
            raise ValueError("SymbolicEngine requires the symbolic backend config")
        super().__init__(config)
        self._q = config.oracle_modulus

    @property
    def scalar_order(self) -> int:
        return self._q

    def generator(self, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        return SourceElement(self.backend, tag, 1)

    def identity(self, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        return SourceElement(self.backend, tag, 0)

    def gt_identity(self) -> TargetElement:
        return TargetElement(self.backend, 0)

    def random_gt(self, rng: random.Random) -> TargetElement:
        return TargetElement(self.backend, rand_below(rng, self._q))

    # -- serialization -----------------------------------------------------

    @property
    def source_size(self) -> int:
        return _ELEMENT_SIZE

    @property
    def gt_size(self) -> int:
        return _ELEMENT_SIZE

    @property
    def scalar_size(self) -> int:
        return _ELEMENT_SIZE

    def serialize_source(self, x: SourceElement) -> bytes:
        return int(x.data).to_bytes(_ELEMENT_SIZE, "big")

    def deserialize_source(self, raw: bytes, tag: GroupTag = GroupTag.BOTH) -> SourceElement:
        return SourceElement(self.backend, tag, self._decode(raw))

    def serialize_gt(self, x: TargetElement) -> bytes:
        return int(x.data).to_bytes(_ELEMENT_SIZE, "big")

    def deserialize_gt(self, raw: bytes) -> TargetElement:
        return TargetElement(self.backend, self._decode(raw))

    def _decode(self, raw: bytes) -> int:
        if len(raw) != _ELEMENT_SIZE:
            raise ValueError(f"element encoding must be {_ELEMENT_SIZE} bytes")
        value = int.from_bytes(raw, "big")
        if value >= self._q:
            raise ValueError(f"residue {value} outside field of order {self._q}")
        return value

    # -- raw ops -----------------------------------------------------------

    def _add(self, x: Any, y: Any) -> Any:
        return (x + y) % self._q

    def _neg(self, x: Any) -> Any:
        return -x % self._q

    def _scalar_mul(self, k: int, x: Any) -> Any:
        return k * x % self._q

    def _pair(self, a: Any, b: Any) -> Any:
        return a * b % self._q

    def _gt_combine(self, x: Any, y: Any) -> Any:
        return (x + y) % self._q

    def _gt_uncombine(self, x: Any, y: Any) -> Any:
        return (x - y) % self._q

    def _gt_scale(self, k: int, x: Any) -> Any:
        return k * x % self._q
