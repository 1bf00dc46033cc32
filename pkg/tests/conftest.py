import numpy as np
import pytest

from ldhull import dist


def catalogue():
    """One model of every kind, keyed by a readable id."""
    return {
        "gaussian": dist.Gaussian([1.0, 0.0], np.eye(2)),
        "gaussian-aniso": dist.Gaussian([0.3, -0.2], [[2.0, 0.4], [0.4, 0.7]]),
        "atoms-two-point": dist.two_atom_line(),
        "atoms-triangle": dist.DiscreteAtoms([[1, 0], [-0.5, 0.8], [-0.4, -1.1]], [0.5, 0.3, 0.2]),
        "disk": dist.RotationallyInvariant("uniform-disk", 1.5, (0.2, 0.1)),
        "circle-shifted": dist.RotationallyInvariant("uniform-circle", 1.0, (3.0, 0.0)),
        "rotinv-gauss-mapped": dist.RotationallyInvariant("isotropic-gaussian", 1.0, (0.0, 0.5),
                                                          [[1.0, 0.3], [0.0, 0.6]]),
        "mixture": dist.Mixture([(0.6, dist.Gaussian([1, 0], np.eye(2))),
                                 (0.4, dist.Gaussian([-1, 1], 0.5 * np.eye(2)))]),
        "line-atoms": dist.skewed_three_atom_line(),
        "line-gauss": dist.OneDimensional((0.6, 0.8), (0.1, 0.0), gauss_mean=0.2, gauss_var=1.5),
    }


MODELS = catalogue()


@pytest.fixture(params=sorted(MODELS))
def model(request):
    return MODELS[request.param]


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.REPORT, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
