import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agencid.pairing import make_engine
from agencid.pairing.base import Backend, EngineConfig


def sym_config(q: int = 101, seed: int = 1234, hooks: bool = True) -> EngineConfig:
    return EngineConfig(
        backend=Backend.SYMBOLIC,
        oracle_modulus=q,
        rng_seed=seed,
        testing_hooks=hooks,
    )


@pytest.fixture
def sym_engine():
    """Fresh seeded symbolic engine per test; q = 101, hooks unlocked."""
    return make_engine(sym_config())


@pytest.fixture
def prod_engine():
    """Fresh seeded production engine per test (construction is cheap)."""
    return make_engine(
        EngineConfig(backend=Backend.PRODUCTION, rng_seed=1234, testing_hooks=True)
    )


@pytest.fixture(params=["symbolic", "production"])
def any_engine(request):
    if request.param == "symbolic":
        return make_engine(sym_config())
    return make_engine(
        EngineConfig(backend=Backend.PRODUCTION, rng_seed=1234, testing_hooks=True)
    )
