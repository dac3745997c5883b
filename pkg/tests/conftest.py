import pytest

from polarport.model import ModelParams, critical_quantities


@pytest.fixture(scope="session")
def params5():
    """Parameter set used throughout the experiment suite."""
    return ModelParams(r=0.03, alpha=0.10, sigma=0.25, gamma=0.5,
                       lam=0.08, mu=0.02, T=4.0)


@pytest.fixture(scope="session")
def domain5(params5):
    return critical_quantities(params5)
