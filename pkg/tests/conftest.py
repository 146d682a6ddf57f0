"""Fixtures compartilhadas: cenários sintéticos pequenos e configs de permutação rápidas."""

import pytest

from app.models.schemas import AttributeSchema, PermutationConfig, ScenarioSpec
from app.services.synthgen_service import gen_biased


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Roda os experimentos marcados como slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="experimento longo: use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def gender() -> AttributeSchema:
    return AttributeSchema(name="gender", groups=("F", "M"))


@pytest.fixture
def race() -> AttributeSchema:
    return AttributeSchema(name="race", groups=("White", "Black", "Indian", "Asian"))


@pytest.fixture
def fast_cfg() -> PermutationConfig:
    return PermutationConfig(b=200, alpha=0.05, seed=7, exact_threshold=0)


@pytest.fixture
def small_spec(gender) -> ScenarioSpec:
    return ScenarioSpec(
        dim=8,
        expressions=("neutral", "happiness", "anger"),
        groups=gender,
        target_expression="anger",
        tilted_group="M",
        tilt=1.0,
        expression_size=30,
        group_size=40,
        seed=11,
    )


@pytest.fixture
def small_scenario(small_spec):
    return gen_biased(small_spec)
