import numpy as np
import pytest

import xolfreq as xf


@pytest.fixture(scope="session")
def portfolio_a() -> xf.TrianglePair:
    return xf.load_portfolio("a")


@pytest.fixture(scope="session")
def portfolio_b() -> xf.TrianglePair:
    return xf.load_portfolio("b")


@pytest.fixture(scope="session")
def fit_a(portfolio_a) -> xf.PoissonFit:
    return xf.fit_poisson(portfolio_a)


@pytest.fixture(scope="session")
def fit_b(portfolio_b) -> xf.PoissonFit:
    return xf.fit_poisson(portfolio_b)


@pytest.fixture(scope="session")
def negbin_b(portfolio_b) -> xf.NegBinFit:
    return xf.fit_negbin(portfolio_b)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240613)


def zero_pair(n: int = 4) -> xf.TrianglePair:
    rows = [[0] * (n - i) for i in range(n)]
    return xf.TrianglePair.build(
        xf.ClaimTriangle.from_rows(rows),
        xf.ClaimTriangle.from_rows(rows),
        xf.ExposureVector(values=tuple(10.0 + i for i in range(n))),
    )


@pytest.fixture
def zeros4() -> xf.TrianglePair:
    return zero_pair(4)
