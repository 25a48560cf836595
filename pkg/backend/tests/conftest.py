"""Pytest configuration and shared fixtures for the toolkit tests."""

import sys
from pathlib import Path

import pytest
import sympy as sp

# Add backend directory to path for imports
backend_dir = Path(__file__).parent.parent
sys.path.insert(0, str(backend_dir))

from config import Config  # noqa: E402
from geometry import ControlSystem  # noqa: E402
from probes import reset_session  # noqa: E402

CORPUS_DIR = backend_dir.parent / "corpus"


@pytest.fixture(autouse=True)
def fresh_probe_session():
    """Every test starts from the same seeded probe session."""
    return reset_session(20240517)


@pytest.fixture
def corpus_dir():
    return CORPUS_DIR


@pytest.fixture
def test_config(tmp_path):
    """Configuration pointing at the bundled corpus, with a fixed seed."""
    cfg = Config()
    cfg.SEED = 20240517
    cfg.DEGREE_BUDGET = 4
    cfg.MODE = "exact"
    cfg.CORPUS_PATH = str(CORPUS_DIR)
    return cfg


@pytest.fixture
def toolkit(test_config):
    from toolkit import Toolkit

    return Toolkit(test_config)


@pytest.fixture
def chained_integrator():
    """x1' = x2, x2' = u: one chain of order two."""
    x1, x2, u = sp.symbols("x1 x2 u")
    return ControlSystem.from_equations([x1, x2], [u], [x2, u], name="double integrator")


@pytest.fixture
def hsm_system():
    """Five states, two controls, static feedback linearizable."""
    x1, x2, x3, x4, x5, u1, u2 = sp.symbols("x1 x2 x3 x4 x5 u1 u2")
    return ControlSystem.from_equations(
        [x1, x2, x3, x4, x5],
        [u1, u2],
        [sp.sin(x2), sp.sin(x3), x4**3 + u1, x5 + x4**3 - x1**10, u2],
        name="hsm",
    )


@pytest.fixture
def charlet_system():
    """x4' = x3 (1 - u1): not static feedback linearizable."""
    x1, x2, x3, x4, u1, u2 = sp.symbols("x1 x2 x3 x4 u1 u2")
    return ControlSystem.from_equations(
        [x1, x2, x3, x4], [u1, u2], [x2, u1, u2, x3 * (1 - u1)], name="charlet"
    )


@pytest.fixture
def sample_system_text():
    return """
# two chains
system sample
constants h
states x1 x2 x3
controls u1 u2

dynamics
  x1' = x2
  x2' = u1 + h*x3^2
  x3' = u2
end

options
  mode = bound
  seed = 7
end
"""
