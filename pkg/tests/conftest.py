import numpy as np
import pytest

from czpatch import DomainFamily, SamplingConfig, build_domain, norms


@pytest.fixture(scope="session")
def ball():
    return build_domain(DomainFamily("sphere"))


@pytest.fixture(scope="session")
def ellipsoid():
    return build_domain(DomainFamily("ellipsoid", radii=(1.0, 1.0, 2.0)))


@pytest.fixture(scope="session")
def bumped():
    return build_domain(DomainFamily("bumped_sphere", bump_amplitude=0.05,
                                     bump_frequency=3))


@pytest.fixture(scope="session")
def disk():
    return build_domain(DomainFamily("disk"))


@pytest.fixture(scope="session")
def bumped_disk():
    return build_domain(DomainFamily("bumped_disk", bump_amplitude=0.05,
                                     bump_frequency=3))


_FAST = SamplingConfig(points_per_chart=1024, pairs_per_chart=8192)


@pytest.fixture(scope="session")
def ball_norms(ball):
    return norms(ball, 0.5, _FAST)


@pytest.fixture(scope="session")
def ellipsoid_norms(ellipsoid):
    return norms(ellipsoid, 0.5, _FAST)


@pytest.fixture(scope="session")
def bumped_norms(bumped):
    return norms(bumped, 0.5, _FAST)


@pytest.fixture(scope="session")
def disk_norms(disk):
    return norms(disk, 0.5, _FAST)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
