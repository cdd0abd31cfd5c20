"""Fixture constructors that retain transient secrets.

Production setup discards alpha by design; these helpers accept explicit
(alpha, gamma) so tests can cross-check both derivations of a board key
(gamma * g_i versus alpha^i * v) and replay hand-traced examples.  They
refuse to run unless the engine config opted in via ``testing_hooks``.
"""

from __future__ import annotations

import random
from typing import Optional, Tuple

from agencid.errors import InvalidCapacityError
from agencid.kac import (
    BoardPrivateKey,
    MasterSecretKey,
    PublicKey,
    SystemParams,
)
from agencid.pairing.base import PairingEngine

__all__ = ["fixture_keygen", "fixture_setup", "fixture_system"]


def _require_hooks(engine: PairingEngine) -> None:
    if not engine.config.testing_hooks:
        raise RuntimeError(
            "fixture constructors need EngineConfig(testing_hooks=True); "
            "production setups must not retain alpha"
        )


def fixture_setup(engine: PairingEngine, n: int, alpha: int) -> SystemParams:
    """Deterministic setup from a known alpha (same hole-skipping chain)."""
    _require_hooks(engine)
    if n < 1:
        raise InvalidCapacityError("capacity must be at least 1")
    a = engine.scalar(alpha)
    if a.value == 0:
        raise ValueError("alpha reduces to zero")
    g = engine.generator()
    elements = {}
    acc = g
    for i in range(1, n + 1):
        acc = engine.scalar_mul(a, acc)
        elements[i] = acc
    if n >= 2:
        acc = engine.scalar_mul(a.mul(a), elements[n])
        elements[n + 2] = acc
        for i in range(n + 3, 2 * n + 1):
            acc = engine.scalar_mul(a, acc)
            elements[i] = acc
    base = engine.pair(elements[n], elements[1])
    return SystemParams(n=n, generator=g, elements=elements, precomputed_base=base)


def fixture_keygen(
    engine: PairingEngine, params: SystemParams, gamma: int
) -> Tuple[PublicKey, MasterSecretKey, Tuple[BoardPrivateKey, ...]]:
    """Key generation from a known gamma."""
    _require_hooks(engine)
    c = engine.scalar(gamma)
    if c.value == 0:
        raise ValueError("gamma reduces to zero")
    v = engine.scalar_mul(c, params.generator)
    boards = tuple(
        BoardPrivateKey(index=i, d=engine.scalar_mul(c, params.element(i)), n=params.n)
        for i in range(1, params.n + 1)
    )
    return PublicKey(params=params, v=v), MasterSecretKey(gamma=c), boards


def fixture_system(
    engine: PairingEngine,
    n: int,
    alpha: Optional[int] = None,
    gamma: Optional[int] = None,
    rng: Optional[random.Random] = None,
):
    """Full system in one call; random draws fill in whatever is omitted."""
    _require_hooks(engine)
    if alpha is None or gamma is None:
        if rng is None:
            raise ValueError("rng required when alpha or gamma is omitted")
        if alpha is None:
            alpha = engine.random_nonzero_scalar(rng).value
        if gamma is None:
            gamma = engine.random_nonzero_scalar(rng).value
    params = fixture_setup(engine, n, alpha)
    pk, msk, boards = fixture_keygen(engine, params, gamma)
    return params, pk, msk, boards
