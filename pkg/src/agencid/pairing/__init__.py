"""Bilinear pairing engines (production curve and exact test oracle)."""

from agencid.pairing.base import (
    Backend,
    EngineConfig,
    GroupTag,
    OpCounters,
    PairingEngine,
    Scalar,
    SourceElement,
    TargetElement,
    make_rng,
    rand_below,
    rand_nonzero,
)

__all__ = [
    "Backend",
    "EngineConfig",
    "GroupTag",
    "OpCounters",
    "PairingEngine",
    "Scalar",
    "SourceElement",
    "TargetElement",
    "make_engine",
    "make_rng",
    "rand_below",
    "rand_nonzero",
]


def make_engine(config: EngineConfig | None = None) -> PairingEngine:
    """Instantiate the engine named by ``config.backend``."""
    if config is None:
        config = EngineConfig()
    if config.backend is Backend.SYMBOLIC:
        from agencid.pairing.symbolic import SymbolicEngine

        return SymbolicEngine(config)
    from agencid.pairing.supersingular import SupersingularEngine

    return SupersingularEngine(config)
