"""Exact multi-qubit Pauli string algebra and the Heisenberg-picture
Lindblad generator.

Strings are packed two bits per site (an X bit and a Z bit held in two
integer masks), so products and commutation checks cost a few popcounts
regardless of weight.  Site 0 is the leftmost letter of the text form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .exceptions import AlgebraError, DimensionMismatchError

__all__ = [
    "PauliString",
    "ScaledPauli",
    "PauliPolynomial",
    "LindbladModel",
    "multiply",
    "commutator",
    "adjoint_generator",
    "identity_coefficient",
]

# letter <-> (x bit, z bit)
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_PHASES = (1 + 0j, 1j, -1 + 0j, -1j)  # i**k

# relative magnitude below which polynomial coefficients are dropped
COEFF_DROP_TOL = 1e-14
# imaginary part (relative) above which a supposedly real result is a bug
REALITY_TOL = 1e-12


@dataclass(frozen=True, order=True)
class PauliString:
    """A tensor product of single-site Pauli operators."""

    n_sites: int
    x_bits: int
    z_bits: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise DimensionMismatchError("PauliString needs at least one site")
        mask = (1 << self.n_sites) - 1
        if self.x_bits & ~mask or self.z_bits & ~mask:
            raise DimensionMismatchError("bit mask exceeds n_sites")

    @classmethod
    def from_letters(cls, letters: str) -> "PauliString":
        x = z = 0
        for i, ch in enumerate(letters.upper()):
            try:
                xb, zb = _LETTER_BITS[ch]
            except KeyError:
                raise ValueError(f"unknown Pauli letter {ch!r}") from None
            x |= xb << i
            z |= zb << i
        return cls(len(letters), x, z)

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0)

    @classmethod
    def single(cls, n_sites: int, site: int, letter: str) -> "PauliString":
        """A single non-identity letter at ``site`` (0-based)."""
        if not 0 <= site < n_sites:
            raise DimensionMismatchError(f"site {site} out of range")
        xb, zb = _LETTER_BITS[letter.upper()]
        return cls(n_sites, xb << site, zb << site)

    @property
    def letters(self) -> str:
        return "".join(
            _BITS_LETTER[((self.x_bits >> i) & 1, (self.z_bits >> i) & 1)]
            for i in range(self.n_sites)
        )

    @property
    def weight(self) -> int:
        return (self.x_bits | self.z_bits).bit_count()

    @property
    def is_identity(self) -> bool:
        return self.x_bits == 0 and self.z_bits == 0

    def letter(self, site: int) -> str:
        return _BITS_LETTER[((self.x_bits >> site) & 1, (self.z_bits >> site) & 1)]

    def commutes_with(self, other: "PauliString") -> bool:
        _check_sites(self, other)
        sym = (self.x_bits & other.z_bits).bit_count() + (
            self.z_bits & other.x_bits
        ).bit_count()
        return sym % 2 == 0

    def __mul__(self, other: "PauliString") -> "ScaledPauli":
        return multiply(self, other)

    def __str__(self) -> str:
        return self.letters

    def __repr__(self) -> str:
        return f"PauliString({self.letters!r})"


@dataclass(frozen=True)
class ScaledPauli:
    """A Pauli string times a complex scalar (phase times magnitude)."""

    phase: complex
    string: PauliString


def _check_sites(p, q):
    if p.n_sites != q.n_sites:
        raise DimensionMismatchError(
            f"operands act on {p.n_sites} and {q.n_sites} sites"
        )


def multiply(p: PauliString, q: PauliString) -> ScaledPauli:
    """Sitewise product p*q with the accumulated phase from {1, i, -1, -i}.

    Site convention: W(x,z) = i**(x z) X**x Z**z, so multiplication reduces
    to XORing the bit masks and counting phase contributions.
    """
    _check_sites(p, q)
    x = p.x_bits ^ q.x_bits
    z = p.z_bits ^ q.z_bits
    k = (
        (p.x_bits & p.z_bits).bit_count()
        + (q.x_bits & q.z_bits).bit_count()
        - (x & z).bit_count()
        + 2 * (p.z_bits & q.x_bits).bit_count()
    ) % 4
    return ScaledPauli(_PHASES[k], PauliString(p.n_sites, x, z))


def commutator(p: PauliString, q: PauliString) -> "PauliPolynomial":
    """pq - qp: zero when the strings commute, 2*(pq) when they anticommute."""
    _check_sites(p, q)
    if p.commutes_with(q):
        return PauliPolynomial.zero(p.n_sites)
    prod = multiply(p, q)
    return PauliPolynomial(p.n_sites, {prod.string: 2 * prod.phase})


class PauliPolynomial:
    """A finite complex combination of Pauli strings on a fixed register.

    Immutable; construction canonicalizes by dropping coefficients smaller
    than COEFF_DROP_TOL relative to the largest one.
    """

    __slots__ = ("n_sites", "_terms")

    def __init__(self, n_sites: int, terms: Mapping[PauliString, complex] | None = None):
        self.n_sites = n_sites
        cleaned: dict[PauliString, complex] = {}
        if terms:
            top = max(abs(c) for c in terms.values()) if terms else 0.0
            cutoff = COEFF_DROP_TOL * top
            for s, c in terms.items():
                if s.n_sites != n_sites:
                    raise DimensionMismatchError(
                        f"term {s} has {s.n_sites} sites, expected {n_sites}"
                    )
                if abs(c) > cutoff and c != 0:
                    cleaned[s] = complex(c)
        self._terms = cleaned

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, n_sites: int) -> "PauliPolynomial":
        return cls(n_sites, {})

    @classmethod
    def identity(cls, n_sites: int, coeff: complex = 1.0) -> "PauliPolynomial":
        return cls(n_sites, {PauliString.identity(n_sites): coeff})

    @classmethod
    def from_string(cls, letters: str, coeff: complex = 1.0) -> "PauliPolynomial":
        s = PauliString.from_letters(letters)
        return cls(s.n_sites, {s: coeff})

    @classmethod
    def from_pauli(cls, s: PauliString, coeff: complex = 1.0) -> "PauliPolynomial":
        return cls(s.n_sites, {s: coeff})

    # -- inspection ---------------------------------------------------
    def coefficient(self, s: PauliString | str) -> complex:
        if isinstance(s, str):
            s = PauliString.from_letters(s)
        return self._terms.get(s, 0j)

    def identity_coefficient(self) -> complex:
        return self._terms.get(PauliString.identity(self.n_sites), 0j)

    def support(self) -> tuple[PauliString, ...]:
        return tuple(self._terms)

    def items(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- algebra ------------------------------------------------------
    def __add__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        _check_sites(self, other)
        out = dict(self._terms)
        for s, c in other._terms.items():
            out[s] = out.get(s, 0j) + c
        return PauliPolynomial(self.n_sites, out)

    def __sub__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        return self + (-1.0) * other

    def __rmul__(self, scalar: complex) -> "PauliPolynomial":
        return PauliPolynomial(
            self.n_sites, {s: scalar * c for s, c in self._terms.items()}
        )

    def __neg__(self) -> "PauliPolynomial":
        return (-1.0) * self

    def __mul__(self, other: "PauliPolynomial") -> "PauliPolynomial":
        """Operator product, expanded term by term."""
        if not isinstance(other, PauliPolynomial):
            return NotImplemented
        _check_sites(self, other)
        out: dict[PauliString, complex] = {}
        for s1, c1 in self._terms.items():
            for s2, c2 in other._terms.items():
                prod = multiply(s1, s2)
                key = prod.string
                out[key] = out.get(key, 0j) + c1 * c2 * prod.phase
        return PauliPolynomial(self.n_sites, out)

    def dagger(self) -> "PauliPolynomial":
        """Hermitian conjugate (strings are self-adjoint)."""
        return PauliPolynomial(
            self.n_sites, {s: c.conjugate() for s, c in self._terms.items()}
        )

    def is_hermitian(self, tol: float = REALITY_TOL) -> bool:
        top = self.max_abs()
        if top == 0.0:
            return True
        return all(abs(c.imag) <= tol * top for c in self._terms.values())

    def real_coefficients(self, tol: float = REALITY_TOL) -> "PauliPolynomial":
        """Drop numerically-zero imaginary parts; error if they are large."""
        top = self.max_abs()
        if top == 0.0:
            return self
        bad = max((abs(c.imag) for c in self._terms.values()), default=0.0)
        if bad > tol * top:
            raise AlgebraError(
                f"expected real coefficients, found imaginary part {bad:.3e} "
                f"(largest coefficient {top:.3e})"
            )
        return PauliPolynomial(
            self.n_sites, {s: complex(c.real, 0.0) for s, c in self._terms.items()}
        )

    def tensor(self, other: "PauliPolynomial") -> "PauliPolynomial":
        """Tensor product, self on the leading sites."""
        n = self.n_sites + other.n_sites
        out: dict[PauliString, complex] = {}
        for s1, c1 in self._terms.items():
            for s2, c2 in other._terms.items():
                s = PauliString(
                    n,
                    s1.x_bits | (s2.x_bits << self.n_sites),
                    s1.z_bits | (s2.z_bits << self.n_sites),
                )
                out[s] = out.get(s, 0j) + c1 * c2
        return PauliPolynomial(n, out)

    # -- serialization ------------------------------------------------
    def to_json(self) -> list[dict]:
        return [
            {"pauli": s.letters, "re": c.real, "im": c.imag}
            for s, c in sorted(self._terms.items(), key=lambda kv: kv[0].letters)
        ]

    @classmethod
    def from_json(cls, n_sites: int, entries: Iterable[Mapping]) -> "PauliPolynomial":
        terms: dict[PauliString, complex] = {}
        for e in entries:
            s = PauliString.from_letters(e["pauli"])
            terms[s] = terms.get(s, 0j) + complex(float(e.get("re", 0.0)), float(e.get("im", 0.0)))
        return cls(n_sites, terms)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"{s.letters}: {c:.6g}" for s, c in list(self._terms.items())[:6]
        )
        more = ", ..." if len(self._terms) > 6 else ""
        return f"PauliPolynomial({self.n_sites}, {{{parts}{more}}})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliPolynomial):
            return NotImplemented
        return self.n_sites == other.n_sites and self._terms == other._terms


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus a list of (rate, collapse operator) dissipators.

    Collapse operators may be arbitrary complex polynomials; the adjoint
    generator uses c-dagger explicitly.  Products c-dagger*c are cached at
    construction since the model is immutable.
    """

    n_sites: int
    hamiltonian: PauliPolynomial
    dissipators: tuple[tuple[float, PauliPolynomial], ...] = ()
    _prepared: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.hamiltonian.n_sites != self.n_sites:
            raise DimensionMismatchError("hamiltonian register size mismatch")
        if not self.hamiltonian.is_hermitian():
            raise AlgebraError("hamiltonian must be hermitian")
        prepared = []
        for rate, c in self.dissipators:
            if rate < 0:
                raise ValueError(f"dissipator rate {rate} must be non-negative")
            if c.n_sites != self.n_sites:
                raise DimensionMismatchError("collapse operator register size mismatch")
            cd = c.dagger()
            prepared.append((float(rate), c, cd, cd * c))
        object.__setattr__(self, "dissipators", tuple((r, c) for r, c, _, _ in prepared))
        object.__setattr__(self, "_prepared", tuple(prepared))

    @property
    def max_rate(self) -> float:
        """Crude magnitude scale of the generator, used for step control."""
        scale = 2.0 * sum(abs(c) for _, c in self.hamiltonian.items())
        for rate, c, _, _ in self._prepared:
            strength = sum(abs(co) for _, co in c.items())
            scale += 2.0 * rate * strength * strength
        return scale


def adjoint_generator(p: PauliString, m: LindbladModel) -> PauliPolynomial:
    """d<P>/dt as a polynomial: i[H,P] + sum rate*(c† P c - {c†c, P}/2).

    The result of a hermitian input must be real; imaginary residue above
    REALITY_TOL (relative) indicates an algebra bug and raises.
    """
    if p.n_sites != m.n_sites:
        raise DimensionMismatchError(
            f"string acts on {p.n_sites} sites, model on {m.n_sites}"
        )
    poly = PauliPolynomial.from_pauli(p)
    out = 1j * (m.hamiltonian * poly - poly * m.hamiltonian)
    for rate, c, cd, cdc in m._prepared:
        out = out + rate * (cd * poly * c - 0.5 * (cdc * poly + poly * cdc))
    return out.real_coefficients()


def identity_coefficient(poly: PauliPolynomial) -> complex:
    """Stored coefficient of the all-identity string (trace functional up
    to the 2**n normalization)."""
    return poly.identity_coefficient()
