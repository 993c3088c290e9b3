"""Vacuum correlators and region covariance matrices of the 1D lattice field.

The free scalar on an infinite lattice with unit spacing has dispersion
``ω(k) = sqrt(m² + 4 sin²(k/2))``. Its equal-time correlators

    G(n) = (1/2π) ∫ cos(kn) / (2ω) dk,     H(n) = (1/2π) ∫ ω cos(kn) / 2 dk

are evaluated in closed form: ``2π G(n)`` is the Legendre function
``Q_{n-1/2}(z)`` with ``z = 1 + m²/2``, seeded by complete elliptic
integrals (computed by AGM) and propagated by the three-term recurrence.
``H`` follows from the lattice equation of motion,
``H(n) = 2z G(n) - G(n+1) - G(n-1)``. An adaptive-quadrature route is kept
for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpfr

from . import mpnum
from .errors import ConvergenceError, NotBonafideError
from .mpnum import PrecisionContext

FIG3_MASS_NUMERATOR = Fraction(3, 1000)


def as_mass(m) -> Fraction:
    """Exact rational mass from a str, int, float or Fraction.

    Floats are read through their shortest repr, so ``0.003`` means
    exactly ``3/1000``.
    """
    if isinstance(m, Fraction):
        out = m
    elif isinstance(m, float):
        out = Fraction(repr(m))
    else:
        out = Fraction(str(m).strip())
    if out <= 0:
        raise ValueError(f"mass must be positive, got {m}")
    return out


def mass_rule(d: int) -> Fraction:
    """Mass scaled with region size, ``m = 3e-3 / d``."""
    return FIG3_MASS_NUMERATOR / d


@dataclass(frozen=True)
class RegionSpec:
    """Two regions of ``d`` sites separated by ``sep`` empty sites.

    Region A occupies sites ``0..d-1`` and region B sites
    ``d+sep..2d+sep-1``.
    """

    d: int
    sep: int
    mass: Fraction

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.sep < 0:
            raise ValueError(f"sep must be >= 0, got {self.sep}")
        object.__setattr__(self, "mass", as_mass(self.mass))

    @classmethod
    def with_mass_rule(cls, d: int, sep: int) -> "RegionSpec":
        return cls(d, sep, mass_rule(d))

    @property
    def sites(self) -> list[int]:
        return list(range(self.d)) + [self.d + self.sep + i for i in range(self.d)]


@dataclass(frozen=True)
class CovarianceMatrix:
    """Covariance matrix in the interleaved ``(φ₁, π₁, φ₂, π₂, …)`` basis.

    Attributes
    ----------
    matrix : numpy.ndarray
        ``2n × 2n`` object array of ``mpfr``.
    layout : tuple of (str, int)
        Region label and lattice site of each mode.
    spec : RegionSpec or None
        Construction parameters when built from the vacuum.
    """

    matrix: np.ndarray
    layout: tuple[tuple[str, int], ...]
    spec: RegionSpec | None = field(default=None, compare=False)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def modes(self, region: str) -> list[int]:
        return [i for i, (r, _) in enumerate(self.layout) if r == region]

    @property
    def modes_a(self) -> list[int]:
        return self.modes("A")

    @property
    def modes_b(self) -> list[int]:
        return self.modes("B")


def dispersion(k, m, ctx: PrecisionContext | None = None) -> mpfr:
    """Lattice dispersion ``sqrt(m² + 4 sin²(k/2))``."""
    ctx = ctx or PrecisionContext()
    with ctx.activate():
        k = mpnum.scalar(k, ctx)
        m = mpnum.scalar(as_mass(m) if not isinstance(m, mpfr) else m, ctx)
        s = gmpy2.sin(k / 2)
        return gmpy2.sqrt(m * m + 4 * s * s)


def _guard_bits(z: mpfr, n_max: int) -> int:
    # forward recurrence for the decaying Legendre solution loses
    # about 2 n acosh(z) nats relative to the growing one
    mu = float(gmpy2.acosh(mpfr(z, 64)))
    return int(2 * n_max * mu / math.log(2)) + 32


def _elliptic_ke(kp2: mpfr) -> tuple[mpfr, mpfr]:
    """Complete elliptic integrals ``K`` and ``E`` from the complementary parameter."""
    one = mpfr(1)
    a, b = one, gmpy2.sqrt(kp2)
    csum = (one - kp2) / 2
    power = mpfr(1)
    eps = gmpy2.mul_2exp(one, -gmpy2.get_context().precision - 8)
    while True:
        a, b, c = (a + b) / 2, gmpy2.sqrt(a * b), (a - b) / 2
        term = power * c * c
        csum += term
        power *= 2
        if abs(term) <= eps:
            break
    K = gmpy2.const_pi() / (2 * a)
    return K, K * (one - csum)


@lru_cache(maxsize=256)
def _g_table(mass: Fraction, bits: int, n_max: int) -> tuple[mpfr, ...]:
    """``G(0..n_max)`` at ``bits`` of precision (cached, immutable)."""
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        m = mpfr(gmpy2.mpq(mass.numerator, mass.denominator))
        z = 1 + m * m / 2
    work = bits + _guard_bits(z, n_max)
    with gmpy2.context(gmpy2.get_context(), precision=work):
        m = mpfr(gmpy2.mpq(mass.numerator, mass.denominator))
        half_m2 = m * m / 2
        z = 1 + half_m2
        kp2 = half_m2 / (2 + half_m2)
        k = gmpy2.sqrt(2 / (z + 1))
        K, E = _elliptic_ke(kp2)
        two_pi = 2 * gmpy2.const_pi()
        q_prev = k * K
        q_cur = z * k * K - gmpy2.sqrt(2 * (z + 1)) * E
        qs = [q_prev, q_cur]
        for n in range(1, n_max):
            nu = mpfr(n) - mpfr(1) / 2
            q_next = ((2 * nu + 1) * z * q_cur - nu * q_prev) / (nu + 1)
            qs.append(q_next)
            q_prev, q_cur = q_cur, q_next
        table = [q / two_pi for q in qs[: n_max + 1]]
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        return tuple(mpfr(g) for g in table)


def _correlators_quadrature(offsets: Sequence[int], mass: Fraction, ctx: PrecisionContext):
    dps = ctx.decimal_digits + 5
    with mpmath.workdps(dps):
        m = mpmath.mpf(mass.numerator) / mass.denominator
        # split the interval geometrically so the small-k peak is resolved
        points = [mpmath.mpf(0)]
        x = m
        while x < mpmath.pi:
            points.append(x)
            x *= 4
        points.append(mpmath.pi)
        tol = mpmath.mpf(10) ** (-(ctx.convergence_exponent))

        def integrate(f):
            total, err = mpmath.quad(f, points, error=True, maxdegree=12)
            if err > tol * max(abs(total), mpmath.mpf(10) ** -(dps // 2)):
                raise ConvergenceError("correlator quadrature did not converge", residual=float(err))
            return total / mpmath.pi

        gs, hs = [], []
        for n in offsets:
            w = lambda k: mpmath.sqrt(m * m + 4 * mpmath.sin(k / 2) ** 2)
            gs.append(integrate(lambda k: mpmath.cos(k * n) / (2 * w(k))))
            hs.append(integrate(lambda k: w(k) * mpmath.cos(k * n) / 2))
    return [mpnum.from_mpmath(g, ctx) for g in gs], [mpnum.from_mpmath(h, ctx) for h in hs]


def correlators(offsets: Sequence[int], m, ctx: PrecisionContext | None = None, method: str = "closed_form"):
    """Field and momentum correlators at the given site offsets.

    Parameters
    ----------
    offsets : sequence of int
        Nonnegative site distances.
    m : str, float or Fraction
        Mass in lattice units.
    ctx : PrecisionContext, optional
    method : {"closed_form", "quadrature"}
        ``closed_form`` uses the elliptic/Legendre evaluation;
        ``quadrature`` integrates numerically (slow at high precision or
        small mass, kept as an independent check).

    Returns
    -------
    G, H : list of mpfr
        ``⟨φ_0 φ_n⟩`` and ``⟨π_0 π_n⟩`` for each offset.
    """
    ctx = ctx or PrecisionContext()
    offsets = [int(n) for n in offsets]
    if any(n < 0 for n in offsets):
        raise ValueError("offsets must be nonnegative")
    mass = as_mass(m)
    if method == "quadrature":
        return _correlators_quadrature(offsets, mass, ctx)
    if method != "closed_form":
        raise ValueError(f"unknown correlator method {method!r}")
    n_max = max(offsets, default=0) + 1
    table = _g_table(mass, ctx.bits, n_max)
    with ctx.activate():
        m_ = mpfr(gmpy2.mpq(mass.numerator, mass.denominator))
        two_z = 2 + m_ * m_
        G = [table[n] for n in offsets]
        H = [two_z * table[n] - table[n + 1] - table[abs(n - 1)] for n in offsets]
    return G, H


def build_region_cm(spec: RegionSpec, ctx: PrecisionContext | None = None, check: bool = True) -> CovarianceMatrix:
    """Vacuum covariance matrix of the two regions described by ``spec``.

    Entries are ``σ_{φ_i φ_j} = 2G(|x_i - x_j|)`` and
    ``σ_{π_i π_j} = 2H(|x_i - x_j|)``; mixed entries vanish.

    Raises
    ------
    NotBonafideError
        If ``check`` is set and the result violates the uncertainty
        relation (signals a precision fault).
    """
    ctx = ctx or PrecisionContext()
    sites = spec.sites
    n = len(sites)
    span = sites[-1] - sites[0]
    G, H = correlators(range(span + 1), spec.mass, ctx)
    sigma = mpnum.zeros(2 * n, 2 * n, ctx)
    with ctx.activate():
        for i, xi in enumerate(sites):
            for j, xj in enumerate(sites):
                dist = abs(xi - xj)
                sigma[2 * i, 2 * j] = 2 * G[dist]
                sigma[2 * i + 1, 2 * j + 1] = 2 * H[dist]
    layout = tuple(("A" if i < spec.d else "B", x) for i, x in enumerate(sites))
    cm = CovarianceMatrix(sigma, layout, spec)
    if check:
        from .symplectic import check_bonafide

        ok, margin = check_bonafide(cm, ctx, cross_check=False)
        if not ok:
            raise NotBonafideError(f"vacuum CM for {spec} is not bonafide (margin {float(margin):.3e})")
    return cm
