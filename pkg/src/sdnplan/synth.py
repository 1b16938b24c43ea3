"""Random desk-scale instances for oracle cross-checks and fuzzing."""

from __future__ import annotations

import numpy as np

from .instance import ProblemInstance
from .topology import haversine_km


def random_coordinates(rng: np.random.Generator, n: int, spread: float = 10.0):
    lat = rng.uniform(-spread, spread, n)
    lon = rng.uniform(-spread, spread, n)
    return lat, lon


def geodesic_from(lat, lon) -> np.ndarray:
    n = len(lat)
    iu, ju = np.triu_indices(n, k=1)
    d = np.zeros((n, n))
    d[iu, ju] = haversine_km(lat[iu], lon[iu], lat[ju], lon[ju])
    d[ju, iu] = d[iu, ju]
    return d


def random_instance(rng: np.random.Generator, n_range=(3, 6), r_range=(1, 9), a_range=(5, 15),
                    gamma_range=(1, 4)) -> ProblemInstance:
    """N, R_i, A, gamma uniform on the given inclusive ranges; M uniform on gamma+1..gamma*N+N."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    r = rng.integers(r_range[0], r_range[1] + 1, n)
    capacity = int(rng.integers(a_range[0], a_range[1] + 1))
    gamma = int(rng.integers(gamma_range[0], gamma_range[1] + 1))
    budget = int(rng.integers(gamma + 1, gamma * n + n + 1))
    d = geodesic_from(*random_coordinates(rng, n))
    return ProblemInstance.create(r, d, capacity, budget, gamma)


def oracle_suite(seed: int = 2024, count: int = 200, **kwargs) -> list[ProblemInstance]:
    rng = np.random.default_rng(seed)
    return [random_instance(rng, **kwargs) for _ in range(count)]


def single_switch_instance(rng: np.random.Generator, n_range=(2, 6), gamma_range=(1, 4)) -> ProblemInstance:
    """Instance where no controller can serve two switches: every R_i in (A/2, A]."""
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    capacity = int(rng.integers(6, 16))
    r = rng.integers(capacity // 2 + 1, capacity + 1, n)
    gamma = int(rng.integers(gamma_range[0], gamma_range[1] + 1))
    budget = int(rng.integers(gamma + 1, (gamma + 1) * n + 2))
    d = geodesic_from(*random_coordinates(rng, n))
    return ProblemInstance.create(r, d, capacity, budget, gamma)
