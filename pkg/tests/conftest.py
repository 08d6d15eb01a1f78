import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracle / pinned imports

from cassure import (
    bind_constants, build_dtmc, check_properties, parse_model, parse_properties,
)

CASE_STUDY = Path(__file__).parent.parent / "case_study"


@pytest.fixture(scope="session")
def model_path():
    return CASE_STUDY / "nuclear.prism"


@pytest.fixture(scope="session")
def props_path():
    return CASE_STUDY / "nuclear.props"


@pytest.fixture(scope="session")
def model_text(model_path):
    return model_path.read_text()


@pytest.fixture(scope="session")
def model_ast(model_text):
    return parse_model(model_text, file="nuclear.prism")


@pytest.fixture(scope="session")
def bound(model_ast):
    return bind_constants(model_ast)


@pytest.fixture(scope="session")
def space(bound):
    return build_dtmc(bound)


@pytest.fixture(scope="session")
def props(props_path):
    return parse_properties(props_path.read_text(), file="nuclear.props")


@pytest.fixture(scope="session")
def results(space, props):
    return check_properties(space, props)
