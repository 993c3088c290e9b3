"""Symplectic form, partial transpose, symplectic spectra and Williamson form.

Covariance matrices use the interleaved ``(x₁, p₁, x₂, p₂, …)`` ordering,
so the symplectic form is ``Ω = ⊕ [[0, 1], [-1, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from . import mpnum
from .errors import NotPositiveDefiniteError, PrecisionError
from .mpnum import PrecisionContext


def raw(sigma) -> np.ndarray:
    """Underlying matrix of a ``CovarianceMatrix`` or a plain array."""
    return getattr(sigma, "matrix", sigma)


def omega(n_modes: int, ctx: PrecisionContext) -> np.ndarray:
    """Symplectic form on ``n_modes`` modes."""
    Om = mpnum.zeros(2 * n_modes, 2 * n_modes, ctx)
    one = mpfr(1, ctx.bits)
    for j in range(n_modes):
        Om[2 * j, 2 * j + 1] = one
        Om[2 * j + 1, 2 * j] = -one
    return Om


def mode_indices(modes: Iterable[int]) -> list[int]:
    """Interleaved coordinate indices of the given modes."""
    out = []
    for j in modes:
        out += [2 * j, 2 * j + 1]
    return out


def reduce_modes(sigma, modes: Sequence[int]) -> np.ndarray:
    """Sub-matrix on ``modes`` in the given order."""
    idx = mode_indices(modes)
    return raw(sigma)[np.ix_(idx, idx)]


@dataclass(frozen=True)
class SymplecticTransform:
    """Real matrix certified to preserve the symplectic form.

    Attributes
    ----------
    matrix : numpy.ndarray
    certified_tolerance : float
        Bound on ``max|S Ω Sᵀ - Ω|`` met at certification.
    residual : float
        The measured ``max|S Ω Sᵀ - Ω|``.
    """

    matrix: np.ndarray
    certified_tolerance: float
    residual: float


def certification_tolerance(ctx: PrecisionContext) -> mpfr:
    return ctx.tol(ctx.decimal_digits - 10)


def symplectic_residual(S: np.ndarray, ctx: PrecisionContext) -> mpfr:
    Om = omega(S.shape[0] // 2, ctx)
    with ctx.activate():
        return mpnum.max_abs(mpnum.mdot(S, Om, S.T, ctx=ctx) - Om)


def certify(S: np.ndarray, ctx: PrecisionContext, tolerance=None) -> SymplecticTransform:
    """Wrap ``S`` after checking ``S Ω Sᵀ = Ω``.

    Raises
    ------
    PrecisionError
        If the residual exceeds ``10**-(digits-10)`` (or ``tolerance``).
    """
    tol = certification_tolerance(ctx) if tolerance is None else mpnum.scalar(tolerance, ctx)
    res = symplectic_residual(S, ctx)
    if res > tol:
        raise PrecisionError(f"matrix is not symplectic: residual {float(res):.3e} > {float(tol):.3e}")
    return SymplecticTransform(S, float(tol), float(res))


def partial_transpose(sigma, flip_modes: Sequence[int] | None = None):
    """Negate the momenta of ``flip_modes`` (region B by default).

    Returns an object of the same kind as the input: a
    ``CovarianceMatrix`` stays one, a plain array stays an array.
    """
    M = raw(sigma)
    if flip_modes is None:
        flip_modes = sigma.modes_b
    signs = np.ones(M.shape[0], dtype=int)
    for j in flip_modes:
        signs[2 * j + 1] = -1
    out = np.empty_like(M)
    for i in range(M.shape[0]):
        for k in range(M.shape[1]):
            x = M[i, k]
            out[i, k] = mpnum.negate(x) if signs[i] * signs[k] < 0 else x
    if hasattr(sigma, "layout"):
        from dataclasses import replace

        return replace(sigma, matrix=out)
    return out


def xp_coupling(sigma) -> mpfr:
    """Largest ``|⟨x_i p_j⟩|`` entry."""
    M = raw(sigma)
    return mpnum.max_abs(M[0::2, 1::2])


def is_xp_separated(sigma, ctx: PrecisionContext) -> bool:
    M = raw(sigma)
    with ctx.activate():
        return xp_coupling(M) <= ctx.conv_tol * max(mpnum.max_abs(M), mpfr(1))


def _paired_spectrum(K: np.ndarray, ctx: PrecisionContext) -> list[mpfr]:
    """Symplectic eigenvalues from an antisymmetric ``K`` similar to ``Ωσ``.

    ``-K² = KᵀK`` carries each ``ν²`` twice; pairs are averaged.
    """
    w = mpnum.sym_eig(mpnum.matmul(K.T, K, ctx), ctx, vectors=False)[0]
    with ctx.activate():
        return [gmpy2.sqrt(max((w[2 * j] + w[2 * j + 1]) / 2, mpfr(0))) for j in range(len(w) // 2)]


def _spectrum_cholesky(M: np.ndarray, ctx: PrecisionContext) -> list[mpfr]:
    L = mpnum.cholesky(M, ctx)
    K = mpnum.mdot(L.T, omega(M.shape[0] // 2, ctx), L, ctx=ctx)
    return _paired_spectrum(K, ctx)


def _spectrum_sqrt(M: np.ndarray, ctx: PrecisionContext) -> list[mpfr]:
    R = mpnum.sqrt_psd(M, ctx)
    K = mpnum.mdot(R, omega(M.shape[0] // 2, ctx), R, ctx=ctx)
    return _paired_spectrum(K, ctx)


def _spectrum_xp(M: np.ndarray, ctx: PrecisionContext) -> list[mpfr]:
    # ν² = spec(G H) computed as spec(Lᵀ H L) with G = L Lᵀ
    G = M[0::2, 0::2]
    H = M[1::2, 1::2]
    L = mpnum.cholesky(G, ctx)
    w = mpnum.sym_eig(mpnum.mdot(L.T, H, L, ctx=ctx), ctx, vectors=False)[0]
    with ctx.activate():
        return [gmpy2.sqrt(max(x, mpfr(0))) for x in w]


def symplectic_spectrum(sigma, ctx: PrecisionContext | None = None, cross_check: bool = True) -> list[mpfr]:
    """Symplectic eigenvalues, one per mode, descending.

    Parameters
    ----------
    sigma : CovarianceMatrix or array
        Positive-definite symmetric matrix (a CM or a partial transpose).
    ctx : PrecisionContext, optional
    cross_check : bool
        Compute a second, independent route and require agreement to
        ``10**-(digits/2)``. Inputs without ``x-p`` coupling use the
        ``spec sqrt(G H)`` route; others use a symmetric square root.

    Raises
    ------
    PrecisionError
        If the two routes disagree.
    NotPositiveDefiniteError
        If ``sigma`` is not positive definite.
    """
    ctx = ctx or PrecisionContext()
    M = mpnum.symmetrize(raw(sigma), ctx)
    xp = is_xp_separated(M, ctx)
    primary = _spectrum_xp(M, ctx) if xp else _spectrum_cholesky(M, ctx)
    primary = sorted(primary, reverse=True)
    if cross_check:
        second = _spectrum_cholesky(M, ctx) if xp else _spectrum_sqrt(M, ctx)
        second = sorted(second, reverse=True)
        with ctx.activate():
            tol = ctx.half_tol * max(primary[0], mpfr(1))
            gap = max(abs(a - b) for a, b in zip(primary, second))
        if gap > tol:
            raise PrecisionError(f"symplectic spectrum routes disagree by {float(gap):.3e}")
    return primary


def check_bonafide(sigma, ctx: PrecisionContext | None = None, cross_check: bool = True) -> tuple[bool, mpfr]:
    """Uncertainty-relation test ``σ - iΩ ≥ 0``.

    Returns
    -------
    verdict : bool
        True iff every symplectic eigenvalue is at least ``1 - tol``
        with ``tol = 10**-psd_tol_exponent``.
    margin : mpfr
        ``min ν - 1``.
    """
    ctx = ctx or PrecisionContext()
    try:
        nu = symplectic_spectrum(sigma, ctx, cross_check=cross_check)
    except NotPositiveDefiniteError:
        w = mpnum.eigvalsh(raw(sigma), ctx)
        with ctx.activate():
            return False, w[0] - 1
    with ctx.activate():
        margin = nu[-1] - 1
        return bool(margin >= -ctx.psd_tol), margin


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """``σ = S_W diag(ν ⊗ I₂) S_Wᵀ`` with ``ν`` descending."""

    S_W: SymplecticTransform
    nu: list


# Cholesky of an ill-conditioned CM and nearly coincident symplectic
# eigenvalues both lose digits; the normal form is computed with extra
# digits (doubled on certification failure) and rounded back.
WILLIAMSON_GUARD_DIGITS = 30
WILLIAMSON_MAX_GUARD_DIGITS = 480


def williamson(sigma, ctx: PrecisionContext | None = None) -> WilliamsonDecomposition:
    """Williamson normal form.

    With ``σ = L Lᵀ`` the antisymmetric ``K = Lᵀ Ω L`` is brought to
    canonical 2×2 blocks ``ν_j [[0, 1], [-1, 0]]`` by an orthogonal ``O``
    built from eigenvectors of ``-K²``; then ``S_W = L O D^{-1/2}``.
    Degenerate ``ν`` clusters are resolved deterministically by taking,
    within each cluster, the eigenvector with the largest component outside
    the pairs already chosen.

    Raises
    ------
    NotPositiveDefiniteError
        If ``σ`` is not positive definite (message carries the smallest
        eigenvalue as conditioning diagnostic).
    """
    ctx = ctx or PrecisionContext()
    guard = WILLIAMSON_GUARD_DIGITS
    while True:
        work = ctx.with_digits(ctx.decimal_digits + guard)
        S, nus = _williamson_raw(mpnum.symmetrize(raw(sigma), work), work)
        with ctx.activate():
            S = np.vectorize(lambda x: mpfr(x, ctx.bits), otypes=[object])(S)
            nus = [mpfr(x, ctx.bits) for x in nus]
        try:
            return WilliamsonDecomposition(certify(S, ctx), nus)
        except PrecisionError:
            # nearly coincident ν (distinct but close) cost digits in the
            # eigenvectors; retry with more guard digits
            if guard >= WILLIAMSON_MAX_GUARD_DIGITS:
                raise
            guard *= 2


def _williamson_raw(M: np.ndarray, ctx: PrecisionContext) -> tuple[np.ndarray, list]:
    dim = M.shape[0]
    n = dim // 2
    try:
        L = mpnum.cholesky(M, ctx)
    except NotPositiveDefiniteError as exc:
        w = mpnum.eigvalsh(M, ctx)
        raise NotPositiveDefiniteError(
            f"σ is not positive definite: eigenvalues span [{float(w[0]):.3e}, {float(w[-1]):.3e}]"
        ) from exc
    K = mpnum.mdot(L.T, omega(n, ctx), L, ctx=ctx)
    w, U = mpnum.sym_eig(mpnum.matmul(K.T, K, ctx), ctx)
    with ctx.activate():
        scale = max(w[0], mpfr(1))
        tol = ctx.half_tol * scale
        clusters: list[list[int]] = []
        for i, x in enumerate(w):
            if clusters and abs(w[clusters[-1][0]] - x) <= tol:
                clusters[-1].append(i)
            else:
                clusters.append([i])
        columns: list[np.ndarray] = []
        nus: list[mpfr] = []
        for cl in clusters:
            if len(cl) % 2:
                raise PrecisionError(f"odd multiplicity {len(cl)} in the spectrum of -K²")
            nu = gmpy2.sqrt(sum(w[i] for i in cl) / len(cl))
            chosen: list[np.ndarray] = []
            for _ in range(len(cl) // 2):
                best, best_norm = None, mpfr(-1)
                for i in cl:
                    u = U[:, i].copy()
                    for c in chosen:
                        u = u - mpnum.dot(c, u, ctx) * c
                    nrm = mpnum.norm2(u, ctx)
                    if nrm > best_norm:
                        best, best_norm = u, nrm
                e1 = best / best_norm
                e2 = -mpnum.matmul(K, e1, ctx) / nu
                for c in chosen + [e1]:
                    e2 = e2 - mpnum.dot(c, e2, ctx) * c
                e2 = e2 / mpnum.norm2(e2, ctx)
                chosen += [e1, e2]
                columns += [e1, e2]
                nus.append(nu)
        O = np.empty((dim, dim), dtype=object)
        for j, col in enumerate(columns):
            O[:, j] = col
        scale_cols = np.array([1 / gmpy2.sqrt(nus[j // 2]) for j in range(dim)], dtype=object)
        S = mpnum.matmul(L, O, ctx) * scale_cols
    return S, nus


def purify_split(sigma, ctx: PrecisionContext | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split ``σ`` into a pure CM plus PSD classical noise.

    Returns
    -------
    pure : numpy.ndarray
        ``S_W S_Wᵀ`` (all symplectic eigenvalues 1).
    noise : numpy.ndarray
        ``S_W (Σ - I) S_Wᵀ``, positive semidefinite.
    """
    ctx = ctx or PrecisionContext()
    wd = williamson(sigma, ctx)
    S = wd.S_W.matrix
    with ctx.activate():
        excess = np.array([wd.nu[j // 2] - 1 for j in range(S.shape[0])], dtype=object)
        pure = mpnum.symmetrize(mpnum.matmul(S, S.T, ctx), ctx)
        noise = mpnum.symmetrize(mpnum.matmul(S * excess, S.T, ctx), ctx)
    return pure, noise
