import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfatopo import GridData, MfaModel, fit  # noqa: E402


def sample_grid(fn, domain, nx, ny):
    x1_min, x1_max, x2_min, x2_max = domain
    xs = np.linspace(x1_min, x1_max, nx)
    ys = np.linspace(x2_min, x2_max, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return GridData(fn(X, Y), x1_min, x1_max, x2_min, x2_max)


def fit_function(fn, domain, degree=4, spans=(8, 8), samples_per_span=8):
    nx = spans[0] * samples_per_span + 1
    ny = spans[1] * samples_per_span + 1
    grid = sample_grid(fn, domain, nx, ny)
    return fit(grid, degree, spans[0] + degree, spans[1] + degree)


def random_model(rng, degree=4, spans=(6, 5),
                 domain=(-1.0, 2.0, 0.5, 3.0), scale=1.0) -> MfaModel:
    from mfatopo import KnotVector
    kv_u = KnotVector.clamped_uniform(degree, spans[0] + degree)
    kv_v = KnotVector.clamped_uniform(degree, spans[1] + degree)
    ctrl = rng.normal(size=(kv_u.n_ctrl, kv_v.n_ctrl)) * scale
    return MfaModel(kv_u, kv_v, ctrl, *domain)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def paraboloid_model():
    """Exact representation of x1^2 + x2^2 on [-1.5, 1.5]^2 (one span)."""
    return fit_function(lambda x, y: x ** 2 + y ** 2,
                        (-1.5, 1.5, -1.5, 1.5), spans=(1, 1),
                        samples_per_span=12)


@pytest.fixture(scope="session")
def saddle_model():
    return fit_function(lambda x, y: x ** 2 - y ** 2,
                        (-1.0, 1.0, -1.0, 1.0), spans=(2, 2))


@pytest.fixture(scope="session")
def sinc_model():
    from mfatopo.synthetic import AnalyticField, fitted_model
    return fitted_model(AnalyticField.named("sinc"))


@pytest.fixture(scope="session")
def schwefel_model():
    from mfatopo.synthetic import AnalyticField, fitted_model
    return fitted_model(AnalyticField.named("schwefel"))


@pytest.fixture(scope="session")
def gaussian_pair_models():
    from mfatopo.synthetic import AnalyticField, fitted_model
    return (fitted_model(AnalyticField.named("gaussian_pair_f")),
            fitted_model(AnalyticField.named("gaussian_pair_g")))


@pytest.fixture(scope="session")
def gaussian_mixture_model():
    from mfatopo.synthetic import AnalyticField, fitted_model
    return fitted_model(AnalyticField.named("gaussian_mixture"))
