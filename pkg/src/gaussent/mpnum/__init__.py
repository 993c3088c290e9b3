"""Arbitrary-precision dense real linear algebra.

Matrices are ``numpy`` object arrays holding ``gmpy2.mpfr`` scalars. All
public routines take a :class:`PrecisionContext` and compute at its
working precision plus guard bits. The inner loops (products, symmetric
eigen-decomposition, inversion, Cholesky) run in a compiled MPFR kernel
when available; otherwise an equivalent pure-Python kernel is used.
``KERNEL`` reports which one was selected at import.

Set ``GAUSSENT_KERNELS=python`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import mpmath
import numpy as np
from gmpy2 import mpfr

from ..errors import ComplexSpectrumError, ConvergenceError, NotPositiveDefiniteError, SingularMatrixError
from . import _pykernels


def _select_kernels():
    if os.environ.get("GAUSSENT_KERNELS", "").strip().lower() == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_kern, KERNEL = _select_kernels()

GUARD_BITS = 24
DEFAULT_DIGITS = 64
FLOW_DIGITS = 320


def kernel_module(name: str):
    """Return a specific kernel backend (``"cython"`` or ``"python"``)."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision and tolerance exponents.

    Parameters
    ----------
    decimal_digits : int
        Working precision in decimal digits (at least 32).
    psd_tol_exponent : int, optional
        PSD slack is ``10**-psd_tol_exponent`` relative to the matrix
        norm. Defaults to half the working digits.
    convergence_exponent : int, optional
        Iterative stop / residual threshold exponent. Defaults to
        ``decimal_digits - 10``.
    """

    decimal_digits: int = DEFAULT_DIGITS
    psd_tol_exponent: int | None = None
    convergence_exponent: int | None = None
    bits: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        digits = int(self.decimal_digits)
        if digits < 32:
            raise ValueError(f"decimal_digits must be >= 32, got {digits}")
        psd = digits // 2 if self.psd_tol_exponent is None else int(self.psd_tol_exponent)
        conv = digits - 10 if self.convergence_exponent is None else int(self.convergence_exponent)
        if psd >= digits or conv >= digits:
            raise ValueError("tolerance exponents must be smaller than decimal_digits")
        object.__setattr__(self, "decimal_digits", digits)
        object.__setattr__(self, "psd_tol_exponent", psd)
        object.__setattr__(self, "convergence_exponent", conv)
        object.__setattr__(self, "bits", math.ceil(digits * math.log2(10)) + GUARD_BITS)

    @classmethod
    def from_env(cls, default: int = DEFAULT_DIGITS) -> "PrecisionContext":
        """Build a context honouring ``GAUSSENT_PRECISION`` when set."""
        raw = os.environ.get("GAUSSENT_PRECISION")
        return cls(int(raw) if raw else default)

    def with_digits(self, digits: int) -> "PrecisionContext":
        """Same tolerance policy at a different precision."""
        return PrecisionContext(digits)

    def activate(self):
        """Context manager switching gmpy2 to this working precision."""
        return gmpy2.context(gmpy2.get_context(), precision=self.bits)

    def tol(self, exponent: int) -> mpfr:
        return mpfr(10, self.bits) ** (-exponent)

    @property
    def psd_tol(self) -> mpfr:
        return self.tol(self.psd_tol_exponent)

    @property
    def conv_tol(self) -> mpfr:
        return self.tol(self.convergence_exponent)

    @property
    def half_tol(self) -> mpfr:
        """``10**-(digits/2)``, the cross-route agreement threshold."""
        return self.tol(self.decimal_digits // 2)


Matrix = np.ndarray


# ---------------------------------------------------------------- conversion


def scalar(x, ctx: PrecisionContext) -> mpfr:
    """Convert an int, float, str, Fraction, mpq or mpfr to ``mpfr``."""
    if isinstance(x, Fraction):
        x = gmpy2.mpq(x.numerator, x.denominator)
    elif isinstance(x, mpmath.mpf):
        return from_mpmath(x, ctx)
    elif isinstance(x, np.generic):
        x = x.item()
    elif isinstance(x, str) and "/" in x:
        x = gmpy2.mpq(x)
    return mpfr(x, ctx.bits)


def matrix(data, ctx: PrecisionContext) -> Matrix:
    """Object array of ``mpfr`` from any 2-D nested sequence."""
    arr = np.asarray(data, dtype=object)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    out = np.empty(arr.shape, dtype=object)
    for idx, x in np.ndenumerate(arr):
        out[idx] = scalar(x, ctx)
    return out


def vector(data, ctx: PrecisionContext) -> np.ndarray:
    arr = np.asarray(data, dtype=object).ravel()
    return np.array([scalar(x, ctx) for x in arr], dtype=object)


def zeros(n: int, m: int | None, ctx: PrecisionContext) -> Matrix:
    m = n if m is None else m
    out = np.empty((n, m), dtype=object)
    zero = mpfr(0, ctx.bits)
    out.fill(zero)
    return out


def eye(n: int, ctx: PrecisionContext) -> Matrix:
    out = zeros(n, n, ctx)
    one = mpfr(1, ctx.bits)
    for i in range(n):
        out[i, i] = one
    return out


def diag(values: Iterable, ctx: PrecisionContext) -> Matrix:
    vals = [scalar(v, ctx) for v in values]
    out = zeros(len(vals), len(vals), ctx)
    for i, v in enumerate(vals):
        out[i, i] = v
    return out


def block_diag(*blocks: Matrix, ctx: PrecisionContext) -> Matrix:
    n = sum(b.shape[0] for b in blocks)
    m = sum(b.shape[1] for b in blocks)
    out = zeros(n, m, ctx)
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def to_float(A) -> np.ndarray:
    return np.vectorize(float, otypes=[float])(np.asarray(A, dtype=object))


def to_mpmath(x) -> mpmath.mpf:
    """Exact conversion that ignores mpmath's global precision."""
    man, exp = x.as_mantissa_exp()
    return mpmath.mp.make_mpf(mpmath.libmp.from_man_exp(int(man), int(exp)))


def from_mpmath(x, ctx: PrecisionContext) -> mpfr:
    """Exact (then rounded) conversion that ignores mpmath's global precision."""
    if not isinstance(x, mpmath.mpf):
        x = mpmath.mpf(x)
    sign, man, exp, _ = x._mpf_
    if not man:
        return mpfr(0, ctx.bits)
    with ctx.activate():
        val = gmpy2.mul_2exp(mpfr(int(man)), int(exp))
        return -val if sign else val


def decimal_string(x, digits: int) -> str:
    """Scientific-notation decimal string with ``digits`` significant digits."""
    if not isinstance(x, mpfr):
        x = mpfr(x)
    if gmpy2.is_zero(x):
        return "0"
    if not gmpy2.is_finite(x):
        return str(x)
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return f"{sign}{body}e{exp - 1:+d}"


def matrix_strings(A, digits: int) -> list[list[str]]:
    return [[decimal_string(x, digits) for x in row] for row in np.asarray(A, dtype=object)]


# ------------------------------------------------------------------- basics


def matmul(A: Matrix, B: Matrix, ctx: PrecisionContext) -> Matrix:
    A = np.asarray(A, dtype=object)
    B = np.asarray(B, dtype=object)
    squeeze = B.ndim == 1
    if squeeze:
        B = B.reshape(-1, 1)
    out = _kern.matmul(A, B, ctx.bits)
    return out[:, 0] if squeeze else out


def mdot(*mats: Matrix, ctx: PrecisionContext) -> Matrix:
    """Chained product ``mats[0] @ mats[1] @ ...``."""
    out = mats[0]
    for M in mats[1:]:
        out = matmul(out, M, ctx)
    return out


def congruence(S: Matrix, A: Matrix, ctx: PrecisionContext) -> Matrix:
    """``S A Sᵀ``, symmetrized."""
    return symmetrize(matmul(matmul(S, A, ctx), S.T, ctx), ctx)


def symmetrize(A: Matrix, ctx: PrecisionContext) -> Matrix:
    with ctx.activate():
        return (A + A.T) / 2


def inverse(A: Matrix, ctx: PrecisionContext) -> Matrix:
    return _kern.inverse(A, ctx.bits)


def cholesky(A: Matrix, ctx: PrecisionContext) -> Matrix:
    return _kern.cholesky(A, ctx.bits)


def negate(x):
    """Exact negation that keeps the operand's own precision."""
    if isinstance(x, mpfr):
        with gmpy2.context(gmpy2.get_context(), precision=x.precision):
            return -x
    return -x


def max_abs(A) -> mpfr:
    arr = np.asarray(A, dtype=object).ravel()
    return max((abs(x) for x in arr), default=mpfr(0))


def dot(u, v, ctx: PrecisionContext) -> mpfr:
    with ctx.activate():
        return gmpy2.fsum([a * b for a, b in zip(u, v)])


def norm2(u, ctx: PrecisionContext) -> mpfr:
    with ctx.activate():
        return gmpy2.sqrt(dot(u, u, ctx))


def is_symmetric(A: Matrix, ctx: PrecisionContext, exponent: int | None = None) -> bool:
    """Relative asymmetry below ``10**-(digits-5)`` (or ``10**-exponent``)."""
    A = np.asarray(A, dtype=object)
    if A.shape[0] != A.shape[1]:
        return False
    exponent = ctx.decimal_digits - 5 if exponent is None else exponent
    with ctx.activate():
        scale = max_abs(A)
        return max_abs(A - A.T) <= ctx.tol(exponent) * max(scale, mpfr(1) if scale == 0 else scale)


def _require_symmetric(A: Matrix, ctx: PrecisionContext) -> Matrix:
    A = np.asarray(A, dtype=object)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not is_symmetric(A, ctx):
        raise ValueError("matrix is not symmetric within 10^-(digits-5) relative asymmetry")
    return symmetrize(A, ctx)


# ------------------------------------------------------------------ spectra


def sym_eig(A: Matrix, ctx: PrecisionContext, vectors: bool = True):
    """Eigen-decomposition of a symmetric matrix.

    Parameters
    ----------
    A : Matrix
        Symmetric square matrix.
    ctx : PrecisionContext
    vectors : bool
        Also return eigenvectors.

    Returns
    -------
    eigenvalues : list of mpfr
        Descending.
    eigenvectors : Matrix or None
        Orthonormal columns matching ``eigenvalues``.

    Raises
    ------
    ValueError
        If ``A`` is not symmetric to working precision.
    ConvergenceError
        If the QL sweep cap is reached; carries the residual.
    """
    A = _require_symmetric(A, ctx)
    w, V = _kern.sym_eig(A, ctx.bits, vectors)
    w = w[::-1]
    if V is not None:
        V = V[:, ::-1]
    return w, V


def eigvalsh(A: Matrix, ctx: PrecisionContext) -> list:
    """Ascending eigenvalues of a symmetric matrix."""
    return sym_eig(A, ctx, vectors=False)[0][::-1]


def _jordan_wielandt(A: Matrix, ctx: PrecisionContext) -> Matrix:
    n, m = A.shape
    J = zeros(n + m, n + m, ctx)
    J[:n, n:] = A
    J[n:, :n] = A.T
    return J


def op_norm(A: Matrix, ctx: PrecisionContext) -> mpfr:
    """Largest singular value.

    Symmetric input uses its own spectrum; otherwise the symmetric
    embedding ``[[0, A], [Aᵀ, 0]]`` (eigenvalues ``±σ``) avoids squaring.
    """
    A = np.asarray(A, dtype=object)
    if A.size == 0:
        return mpfr(0, ctx.bits)
    if A.shape[0] == A.shape[1] and is_symmetric(A, ctx):
        w = eigvalsh(A, ctx)
        return max(abs(w[0]), abs(w[-1]))
    return eigvalsh(_jordan_wielandt(A, ctx), ctx)[-1]


def pinv(A: Matrix, ctx: PrecisionContext) -> Matrix:
    """Moore-Penrose pseudo-inverse.

    Singular values at or below ``10**-(digits/2) * σ_max`` are treated as
    zero.
    """
    A = np.asarray(A, dtype=object)
    n, m = A.shape
    if A.size == 0:
        return zeros(m, n, ctx)
    with ctx.activate():
        if n == m and is_symmetric(A, ctx):
            w, V = sym_eig(A, ctx)
            smax = max(abs(x) for x in w)
            thr = ctx.half_tol * smax
            keep = [i for i, x in enumerate(w) if abs(x) > thr]
            Vk = V[:, keep]
            scaled = Vk * np.array([1 / w[i] for i in keep], dtype=object)
            return symmetrize(matmul(scaled, Vk.T, ctx), ctx) if keep else zeros(n, n, ctx)
        w, V = sym_eig(_jordan_wielandt(A, ctx), ctx)
        smax = w[0]
        thr = ctx.half_tol * smax
        keep = [i for i, x in enumerate(w) if x > thr]
        if not keep:
            return zeros(m, n, ctx)
        top = V[:n, keep]
        bottom = V[n:, keep]
        scaled = bottom * np.array([2 / w[i] for i in keep], dtype=object)
        return matmul(scaled, top.T, ctx)


def is_psd(A: Matrix, ctx: PrecisionContext) -> tuple[bool, mpfr]:
    """PSD test with slack ``10**-psd_tol_exponent * ‖A‖``.

    Returns
    -------
    verdict : bool
    min_eigenvalue : mpfr
        The margin, returned regardless of the verdict.
    """
    w = eigvalsh(A, ctx)
    lo = w[0]
    with ctx.activate():
        scale = max(abs(w[0]), abs(w[-1]))
        return bool(lo >= -ctx.psd_tol * scale), lo


def sqrt_psd(A: Matrix, ctx: PrecisionContext) -> Matrix:
    """Symmetric PSD square root."""
    w, V = sym_eig(A, ctx)
    with ctx.activate():
        scale = max(abs(w[0]), abs(w[-1]))
        if w[-1] < -ctx.psd_tol * scale:
            raise NotPositiveDefiniteError(f"matrix has negative eigenvalue {float(w[-1]):.3e}")
        roots = np.array([gmpy2.sqrt(x) if x > 0 else mpfr(0) for x in w], dtype=object)
        return symmetrize(matmul(V * roots, V.T, ctx), ctx)


def inv_sqrt_pd(A: Matrix, ctx: PrecisionContext) -> Matrix:
    """Symmetric inverse square root of a positive-definite matrix."""
    w, V = sym_eig(A, ctx)
    if not w[-1] > 0:
        raise NotPositiveDefiniteError(f"matrix has non-positive eigenvalue {float(w[-1]):.3e}")
    with ctx.activate():
        roots = np.array([1 / gmpy2.sqrt(x) for x in w], dtype=object)
        return symmetrize(matmul(V * roots, V.T, ctx), ctx)


def gen_eig(A: Matrix, ctx: PrecisionContext):
    """Eigen-decomposition of a general square matrix with real spectrum.

    Parameters
    ----------
    A : Matrix
    ctx : PrecisionContext

    Returns
    -------
    eigenvalues : list of mpfr
        Descending.
    right : Matrix
        Unit-norm right eigenvectors as columns, each phased so its
        largest-magnitude entry is positive.
    left : Matrix
        Left eigenvectors as columns, scaled so ``leftᵀ right = I``.

    Raises
    ------
    ComplexSpectrumError
        If an eigenvalue or eigenvector has an imaginary part above the
        PSD tolerance relative to the spectral scale.
    """
    A = np.asarray(A, dtype=object)
    n = A.shape[0]
    with mpmath.workdps(ctx.decimal_digits + 10):
        M = mpmath.matrix([[to_mpmath(x) for x in row] for row in A])
        E, EL, ER = mpmath.eig(M, left=True, right=True)
        scale = max((abs(x) for x in E), default=mpmath.mpf(1)) or mpmath.mpf(1)
        tol = mpmath.mpf(10) ** (-ctx.psd_tol_exponent)
        for lam in E:
            if abs(mpmath.im(lam)) > tol * scale:
                raise ComplexSpectrumError(f"eigenvalue {mpmath.nstr(lam, 8)} is not real")
        order = sorted(range(n), key=lambda i: -mpmath.re(E[i]))
        vals = [from_mpmath(mpmath.re(E[i]), ctx) for i in order]
        right = zeros(n, n, ctx)
        left = zeros(n, n, ctx)
        for col, i in enumerate(order):
            r = [ER[k, i] for k in range(n)]
            piv = max(r, key=abs)
            phase = piv / abs(piv)
            r = [x / phase for x in r]
            norm = mpmath.sqrt(mpmath.fsum(abs(x) ** 2 for x in r))
            r = [x / norm for x in r]
            l = [EL[i, k] for k in range(n)]
            s = mpmath.fsum(a * b for a, b in zip(l, r))
            l = [x / s for x in l]
            for vec in (r, l):
                if max(abs(mpmath.im(x)) for x in vec) > tol:
                    raise ComplexSpectrumError("eigenvector cannot be made real")
            for k in range(n):
                right[k, col] = from_mpmath(mpmath.re(r[k]), ctx)
                left[k, col] = from_mpmath(mpmath.re(l[k]), ctx)
    return vals, right, left


__all__ = [
    "KERNEL",
    "PrecisionContext",
    "Matrix",
    "ConvergenceError",
    "SingularMatrixError",
    "NotPositiveDefiniteError",
    "scalar",
    "matrix",
    "vector",
    "zeros",
    "eye",
    "diag",
    "block_diag",
    "to_float",
    "decimal_string",
    "matrix_strings",
    "matmul",
    "mdot",
    "congruence",
    "symmetrize",
    "inverse",
    "cholesky",
    "sym_eig",
    "eigvalsh",
    "gen_eig",
    "pinv",
    "is_psd",
    "op_norm",
    "sqrt_psd",
    "inv_sqrt_pd",
]
