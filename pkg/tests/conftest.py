import numpy as np
import pytest

from qmor.pauli import LindbladModel, PauliPolynomial, PauliString

LETTERS = "IXYZ"


def two_spin_model(g, gamma, w1, w2):
    """H = (w1/2) Z1 + (w2/2) Z2 + g X1X2 with phase damping on spin 2."""
    h = PauliPolynomial(
        2,
        {
            PauliString.from_letters("ZI"): 0.5 * w1,
            PauliString.from_letters("IZ"): 0.5 * w2,
            PauliString.from_letters("XX"): g,
        },
    )
    return LindbladModel(2, h, ((gamma, PauliPolynomial.from_string("IZ")),))


def independent_flip_model(n, gamma):
    diss = tuple(
        (gamma, PauliPolynomial.from_pauli(PauliString.single(n, i, "X")))
        for i in range(n)
    )
    return LindbladModel(n, PauliPolynomial.zero(n), diss)


def collective_flip_model(n, gamma):
    op = PauliPolynomial(n, {PauliString.single(n, i, "X"): 1.0 for i in range(n)})
    return LindbladModel(n, PauliPolynomial.zero(n), ((gamma, op),))


def random_string(rng, n):
    return PauliString.from_letters(
        "".join(LETTERS[i] for i in rng.integers(0, 4, size=n))
    )


def random_model(rng, n, hermitian_collapse=True):
    h_terms = {}
    for _ in range(rng.integers(1, 4)):
        s = random_string(rng, n)
        if not s.is_identity:
            h_terms[s] = h_terms.get(s, 0.0) + rng.normal()
    diss = []
    for _ in range(rng.integers(1, 3)):
        if hermitian_collapse:
            op = PauliPolynomial.from_pauli(random_string(rng, n))
        else:
            terms = {
                random_string(rng, n): complex(rng.normal(), rng.normal())
                for _ in range(2)
            }
            op = PauliPolynomial(n, terms)
            if not op:
                op = PauliPolynomial.from_pauli(random_string(rng, n))
        diss.append((float(rng.uniform(0.1, 2.0)), op))
    return LindbladModel(n, PauliPolynomial(n, h_terms), tuple(diss))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def regime_model():
    """Strong-coupling regime used by the bundled scenarios."""
    return two_spin_model(10.0, 2.0, 0.1, 0.1)


@pytest.fixture
def generic_two_spin():
    """Two-spin model with incommensurate coefficients, for symbolic checks."""
    return two_spin_model(0.83, 0.59, 0.31, 0.47)
