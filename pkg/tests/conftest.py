"""Shared fixtures: model sources, parsed models, repo paths."""

from pathlib import Path

import pytest

from cuspflow import parse_model

REPO = Path(__file__).resolve().parent.parent
MODELS_DIR = REPO / "models"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

RAY_Q2 = "q 2\nray R1 attach V\n"
RAY_Q3 = "q 3\nray R1 attach V\n"
RAY_Q2_DELTA = "q 2\ndelta 0.8664339756999316\nray R1 attach V\n"
STAR2 = "q 2\nray R1 attach V\nray R2 attach V\n"
STAR_WEIGHTED = (
    "q 3\n"
    "ray R1 attach ROOT\n"
    "ray R2 attach ROOT\n"
    "exit ROOT R1 2/3\n"
    "exit ROOT R2 1/3\n"
)
TWOSTATE = (
    "q 2\n"
    "ray R1 attach A\n"
    "compact matrix\n"
    "state A\n"
    "state B\n"
    "entry R1 A 1\n"
    "trans A B 1\n"
    "exit B R1 1\n"
)
# stochastic gaps: sojourn lengths vary, exact mean gap is 5/7
BRANCHY = (
    "q 2\n"
    "ray R1 attach A\n"
    "compact matrix\n"
    "state A\n"
    "state B\n"
    "entry R1 A 1\n"
    "trans A B 1/2\n"
    "exit A R1 1/2\n"
    "trans B A 1/4\n"
    "exit B R1 3/4\n"
)


@pytest.fixture(scope="session")
def ray_q2():
    return parse_model(RAY_Q2)


@pytest.fixture(scope="session")
def ray_q3():
    return parse_model(RAY_Q3)


@pytest.fixture(scope="session")
def ray_q2_delta():
    return parse_model(RAY_Q2_DELTA)


@pytest.fixture(scope="session")
def star2():
    return parse_model(STAR2)


@pytest.fixture(scope="session")
def star_weighted():
    return parse_model(STAR_WEIGHTED)


@pytest.fixture(scope="session")
def twostate():
    return parse_model(TWOSTATE)


@pytest.fixture(scope="session")
def branchy():
    return parse_model(BRANCHY)
