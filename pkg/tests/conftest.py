import pytest

from ampalias.activations import ActivationSpec, Kind, parse_spec
from ampalias.nn import TcnConfig, gradient_check


def tiny_config(label="False_CustomTanh_1", **kw):
    base = dict(channels=2, kernel_size=2, dilations=(1, 2), activation=parse_spec(label))
    base.update(kw)
    return TcnConfig(**base)


def fd_gradient_check(model, x, y, h=1e-6, warmup=None):
    """Worst violation of |analytic - fd| <= max(1e-8, 1e-5 * |fd|) over all parameters."""
    return gradient_check(model, x, y, h, 1e-5, 1e-8, warmup)


@pytest.fixture
def identity_spec():
    return ActivationSpec(Kind.Identity)


# filled by test_acceptance, echoed once at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
