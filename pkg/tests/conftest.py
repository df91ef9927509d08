import math

import pytest

from backstep.coefficients import FunctionDescriptor, ProblemSpec

D = FunctionDescriptor


def bessel_spec(lambda0=1.0):
    return ProblemSpec(lambda0=lambda0)


def stv_spec():
    """Space-time-varying plant used by the closed-loop checks."""
    return ProblemSpec(
        lambda0=3.0,
        c1=D.of(("sine", 1.0, 1.0)),
        c2=D.of(("cosine", 0.2, 1.0)),
        c3_L=D.of(("exponential", 1.0, -1.0)),
        c3_shape=D.of(("monomial", 1.0, 1.0)),
        f=D.constant(0.1, arity=2),
    )


def spec_suite():
    """Twelve assorted specs with lambda0 in {0.5, 1, 2, 5}."""
    f_choices = [
        D.zero(2),
        D.constant(0.3, 2),
        D.of(("cosine", 0.5, 2.0), ("monomial", -0.4, 1.0, 1), arity=2),
        D(((D.of(("sine", 1.0, 3.0)).products[0][0], D.of(("exponential", 1.0, -1.0, 1), arity=2).products[0][0]),),
          2),
    ]
    c1_choices = [
        D.zero(1),
        D.of(("monomial", 1.0, 2.0)),
        D.of(("sine", 2.0, 3.0)),
    ]
    specs = []
    for lam in (0.5, 1.0, 2.0, 5.0):
        for j in range(3):
            specs.append(ProblemSpec(lambda0=lam, c1=c1_choices[j],
                                     f=f_choices[(j + int(lam * 2)) % len(f_choices)]))
    return specs


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name="run.ini"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


BESSEL_INI = """\
[problem]
lambda0 = 1.0

[solver]
n = {n}

[simulation]
nx = 100
dt = 1e-3
t_end = {t_end}
"""

STV_INI = """\
[problem]
lambda0 = 3.0
c1 = "sine:1.0:1.0"
c2 = "cosine:0.2:1.0"
c3_L = "exponential:1.0:-1.0"
c3_shape = "monomial:1.0:1"
f = "constant:0.1:0"

[solver]
n = {n}

[simulation]
nx = 100
dt = 1e-3
t_end = {t_end}
"""

PI = math.pi
