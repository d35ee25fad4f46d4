"""Fixtures for asteroid GNC tests."""
from __future__ import annotations

import copy
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from asteroid_gnc.const import DEFAULT_MU, DEFAULT_POINT_MASSES, DEFAULT_REFERENCE_RADIUS_M, DEFAULT_SPIN_PERIOD_S
from asteroid_gnc.constellation import ConstellationResult, run_constellation
from asteroid_gnc.datafiles import synthetic_gravity_model, synthetic_landmarks
from asteroid_gnc.dynamics import IntegratorSettings, SpacecraftConfig
from asteroid_gnc.elements import ClassicalElements, classical_to_mee
from asteroid_gnc.gravity import AsteroidModel, GravityModel, MassDistribution, SolarModel
from asteroid_gnc.scenario import Scenario, build_scenario
from asteroid_gnc.sensors import LandmarkCatalog

SMALL_SCENARIO: dict[str, Any] = {
    "name": "unit",
    "seed": 3,
    "duration_s": 72.0,
    "asteroid": {"synthetic": {"degree": 3}, "landmark_count": 60},
    "navigation": {"orbit_degree": 3, "attitude_degree": 2},
    "control": {
        "orbit_horizon_s": 3600.0,
        "orbit_intervals": 10,
        "attitude_horizon_s": 36.0,
        "attitude_intervals": 2,
    },
    "satellites": [{"id": "polar", "a_target_m": 34000.0, "inclination_deg": 90.0}],
}


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(20240611)


@pytest.fixture
def eros_gravity() -> GravityModel:
    """Return a synthetic 4x4 field with Eros-scale degree-2 terms."""
    return synthetic_gravity_model(
        DEFAULT_MU, DEFAULT_REFERENCE_RADIUS_M, 4, np.random.default_rng(5), high_degree_sigma=0.005
    )


@pytest.fixture
def asteroid(eros_gravity: GravityModel) -> AsteroidModel:
    """Return the rotating asteroid with the synthetic field."""
    return AsteroidModel(gravity=eros_gravity, spin_rate=2.0 * np.pi / DEFAULT_SPIN_PERIOD_S)


@pytest.fixture
def point_mass_asteroid() -> AsteroidModel:
    """Return a rotating asteroid with no harmonics."""
    return AsteroidModel(
        gravity=GravityModel.point_mass(DEFAULT_MU, DEFAULT_REFERENCE_RADIUS_M, 4),
        spin_rate=2.0 * np.pi / DEFAULT_SPIN_PERIOD_S,
    )


@pytest.fixture
def masses() -> MassDistribution:
    """Return the five-point spacecraft mass distribution."""
    return MassDistribution(
        offsets=[offset for offset, _ in DEFAULT_POINT_MASSES],
        masses=[mass for _, mass in DEFAULT_POINT_MASSES],
    )


@pytest.fixture
def spacecraft(masses: MassDistribution) -> SpacecraftConfig:
    """Return the default spacecraft."""
    return SpacecraftConfig.from_masses(masses)


@pytest.fixture
def no_sun() -> SolarModel:
    """Return a disabled solar model."""
    return SolarModel(enabled=False)


@pytest.fixture
def settings() -> IntegratorSettings:
    """Return the default integrator settings."""
    return IntegratorSettings()


@pytest.fixture
def polar_orbit() -> np.ndarray:
    """Return a 34 km circular polar orbit."""
    return classical_to_mee(ClassicalElements(a=34.0e3, e=0.0, i=np.pi / 2.0, raan=0.0, argp=0.0, nu=0.0))


@pytest.fixture
def catalog() -> LandmarkCatalog:
    """Return a synthetic landmark catalog."""
    return synthetic_landmarks(np.random.default_rng(9), 200)


@pytest.fixture
def scenario_config() -> Callable[..., dict[str, Any]]:
    """Return a factory for small scenario mappings with top-level overrides."""

    def _factory(**overrides: Any) -> dict[str, Any]:
        config = {key: (dict(value) if isinstance(value, dict) else value) for key, value in SMALL_SCENARIO.items()}
        config["satellites"] = [dict(sat) for sat in SMALL_SCENARIO["satellites"]]
        config.update(overrides)
        return config

    return _factory


@pytest.fixture
def make_scenario(scenario_config: Callable[..., dict[str, Any]], tmp_path: Path) -> Callable[..., Scenario]:
    """Return a factory building small scenarios."""

    def _factory(**overrides: Any) -> Scenario:
        return build_scenario(scenario_config(**overrides), tmp_path)

    return _factory


@pytest.fixture(scope="session")
def small_run(tmp_path_factory: pytest.TempPathFactory) -> tuple[Scenario, ConstellationResult]:
    """Return the small scenario and one completed run of it, shared across tests."""
    scenario = build_scenario(copy.deepcopy(SMALL_SCENARIO), tmp_path_factory.mktemp("small"))
    return scenario, run_constellation(scenario)
