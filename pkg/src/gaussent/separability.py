"""Gaussian separability flow, constructive decompositions and core splitting.

A bipartite CM ``σ = [[A, C], [Cᵀ, B]]`` is mapped to a symmetric CM on
two copies of side ``a``:

    X = C (B - iΩ)⁻¹ Cᵀ,    A₁ = B₁ = A - Re X,    C₁ = -Im X.

After ``k`` steps the state is separable if ``A_k - ‖C_k‖ I ≥ iΩ`` and
inseparable if ``A_k - iΩ`` is not positive semidefinite. A depth-1
separable verdict yields the explicit split

    σ_a = A₁ - ‖C₁‖ I,    σ_b = B - Cᵀ (A - σ_a)⁺ C,    Y = σ - σ_a ⊕ σ_b ≥ 0.

Complex Hermitian matrices ``R + iI`` are handled through the real
symmetric embedding ``[[R, -I], [I, R]]``, whose spectrum is that of the
Hermitian matrix with every eigenvalue doubled.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np
import sympy
from gmpy2 import mpfr

from . import mpnum
from .errors import PrecisionError
from .mpnum import PrecisionContext
from .negativity import log_negativity
from .symplectic import check_bonafide, mode_indices, omega, raw

DEFAULT_MAX_DEPTH = 10
MAX_SPLIT_SEQUENCES = 4096


# ---------------------------------------------------------------- complex helpers


def _embed(R: np.ndarray, I: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    n = R.shape[0]
    E = mpnum.zeros(2 * n, 2 * n, ctx)
    with ctx.activate():
        E[:n, :n] = R
        E[n:, n:] = R
        E[:n, n:] = -I
        E[n:, :n] = I
    return E


def hermitian_min_eig(R: np.ndarray, I: np.ndarray, ctx: PrecisionContext) -> tuple[mpfr, mpfr]:
    """Smallest eigenvalue and spectral scale of the Hermitian ``R + iI``."""
    w = mpnum.eigvalsh(_embed(R, I, ctx), ctx)
    with ctx.activate():
        return w[0], max(abs(w[0]), abs(w[-1]), mpfr(1))


def hermitian_pinv(R: np.ndarray, I: np.ndarray, ctx: PrecisionContext) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse of the Hermitian ``R + iI`` as ``(Re, Im)`` parts."""
    n = R.shape[0]
    P = mpnum.pinv(_embed(R, I, ctx), ctx)
    with ctx.activate():
        re = (P[:n, :n] + P[n:, n:]) / 2
        im = (P[n:, :n] - P[:n, n:]) / 2
    return re, im


def _hermitian_psd(R: np.ndarray, I: np.ndarray, ctx: PrecisionContext) -> tuple[bool, mpfr]:
    lo, scale = hermitian_min_eig(R, I, ctx)
    with ctx.activate():
        return bool(lo >= -ctx.psd_tol * scale), lo


# ---------------------------------------------------------------- types


class Verdict(str, enum.Enum):
    SEPARABLE = "separable"
    INSEPARABLE = "inseparable"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class SeparableDecomposition:
    """``σ = σ_a ⊕ σ_b + Y`` in the ordering ``modes_a + modes_b``.

    Attributes
    ----------
    sigma_a, sigma_b : numpy.ndarray
        Bonafide CMs of the two sides.
    Y : numpy.ndarray
        Positive semidefinite classical noise.
    flow_depth : int
    residual : mpfr
        ``max|σ - σ_a ⊕ σ_b - Y|``.
    margins : dict
        ``sigma_a``/``sigma_b``: bonafide margins (min ν - 1);
        ``Y``: smallest eigenvalue of ``Y``.
    modes_a, modes_b : list of int
        Original mode indices of each side.
    """

    sigma_a: np.ndarray
    sigma_b: np.ndarray
    Y: np.ndarray
    flow_depth: int
    residual: mpfr
    margins: dict
    modes_a: list
    modes_b: list


@dataclass(frozen=True)
class FlowVerdict:
    """Outcome of :func:`flow_decide`.

    Attributes
    ----------
    verdict : Verdict
    depth : int
        Flow step at which the decision was reached (``max_depth`` when
        undecided).
    decomposition : SeparableDecomposition or None
        Present for separable verdicts reached at depth 1.
    witness : mpfr or None
        Smallest eigenvalue of ``A_k - iΩ`` for inseparable verdicts.
    margins : list of tuple
        Per depth ``(sep_margin, insep_margin)``: smallest eigenvalues of
        ``A_k - ‖C_k‖ I - iΩ`` and ``A_k - iΩ``.
    """

    verdict: Verdict
    depth: int
    decomposition: SeparableDecomposition | None = None
    witness: mpfr | None = None
    margins: list = field(default_factory=list)

    @property
    def separable(self) -> bool:
        return self.verdict is Verdict.SEPARABLE

    @property
    def inseparable(self) -> bool:
        return self.verdict is Verdict.INSEPARABLE


# ---------------------------------------------------------------- flow


def _blocks(M: np.ndarray, n_a: int):
    k = 2 * n_a
    return M[:k, :k], M[k:, k:], M[:k, k:]


def _reorder(sigma, cut: Sequence[int]) -> tuple[np.ndarray, list[int], list[int]]:
    M = raw(sigma)
    n = M.shape[0] // 2
    side_a = list(cut)
    if len(set(side_a)) != len(side_a) or any(not 0 <= j < n for j in side_a):
        raise ValueError(f"invalid cut {side_a} for {n} modes")
    side_b = [j for j in range(n) if j not in set(side_a)]
    if not side_a or not side_b:
        raise ValueError("cut must split the modes into two nonempty sets")
    idx = mode_indices(side_a + side_b)
    return M[np.ix_(idx, idx)], side_a, side_b


def flow_step(A: np.ndarray, B: np.ndarray, C: np.ndarray, ctx: PrecisionContext) -> tuple[np.ndarray, np.ndarray]:
    """One flow step; returns ``(A - Re X, -Im X)``.

    ``(B - iΩ)`` is pseudo-inverted, which is exact on the range of
    ``Cᵀ`` for bonafide input even when side ``b`` has pure modes.
    """
    n_b = B.shape[0] // 2
    with ctx.activate():
        neg_omega = -omega(n_b, ctx)
    inv_re, inv_im = hermitian_pinv(B, neg_omega, ctx)
    re_x = mpnum.mdot(C, inv_re, C.T, ctx=ctx)
    im_x = mpnum.mdot(C, inv_im, C.T, ctx=ctx)
    with ctx.activate():
        A1 = mpnum.symmetrize(A - re_x, ctx)
        C1 = (im_x.T - im_x) / 2
    return A1, C1


def _depth_one_decomposition(M: np.ndarray, n_a: int, A1: np.ndarray, c_norm: mpfr,
                             ctx: PrecisionContext, modes_a: list, modes_b: list) -> SeparableDecomposition:
    A, B, C = _blocks(M, n_a)
    with ctx.activate():
        sigma_a = mpnum.symmetrize(A1 - c_norm * mpnum.eye(A1.shape[0], ctx), ctx)
        gap = mpnum.symmetrize(A - sigma_a, ctx)
    gap_inv = mpnum.pinv(gap, ctx)
    with ctx.activate():
        sigma_b = mpnum.symmetrize(B - mpnum.mdot(C.T, gap_inv, C, ctx=ctx), ctx)
        Y = mpnum.symmetrize(M - mpnum.block_diag(sigma_a, sigma_b, ctx=ctx), ctx)
    ok_a, m_a = check_bonafide(sigma_a, ctx, cross_check=False)
    ok_b, m_b = check_bonafide(sigma_b, ctx, cross_check=False)
    ok_y, m_y = mpnum.is_psd(Y, ctx)
    with ctx.activate():
        residual = mpnum.max_abs(M - mpnum.block_diag(sigma_a, sigma_b, ctx=ctx) - Y)
    if not (ok_a and ok_b and ok_y):
        raise PrecisionError(
            "depth-1 decomposition failed verification "
            f"(σ_a margin {float(m_a):.3e}, σ_b margin {float(m_b):.3e}, Y min eig {float(m_y):.3e}); "
            "raise the working precision"
        )
    return SeparableDecomposition(sigma_a, sigma_b, Y, 1, residual,
                                  {"sigma_a": m_a, "sigma_b": m_b, "Y": m_y}, modes_a, modes_b)


def flow_decide(sigma, cut: Sequence[int], ctx: PrecisionContext | None = None,
                max_depth: int = DEFAULT_MAX_DEPTH, constructive: bool = True) -> FlowVerdict:
    """Decide separability of ``cut`` versus the remaining modes.

    Parameters
    ----------
    sigma : CovarianceMatrix or array
    cut : sequence of int
        Modes of side ``a``. Sides may differ in size; the flow then lives
        on copies of side ``a``.
    ctx : PrecisionContext, optional
        Defaults to :data:`mpnum.FLOW_DIGITS` digits.
    max_depth : int
        Number of flow steps before giving up with ``Undecided``.
    constructive : bool
        Build and verify the decomposition for depth-1 separable verdicts.

    Raises
    ------
    PrecisionError
        A depth-1 decomposition fails its bonafide/PSD verification.
    """
    ctx = ctx or PrecisionContext(mpnum.FLOW_DIGITS)
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    M, modes_a, modes_b = _reorder(sigma, cut)
    M = mpnum.symmetrize(M, ctx)
    n_a = len(modes_a)
    A, B, C = _blocks(M, n_a)
    with ctx.activate():
        omega_a = omega(n_a, ctx)
        neg_omega_a = -omega_a
    margins = []
    for depth in range(1, max_depth + 1):
        A, C = flow_step(A, B, C, ctx)
        B = A
        c_norm = mpnum.op_norm(C, ctx)
        with ctx.activate():
            shifted = A - c_norm * mpnum.eye(A.shape[0], ctx)
        sep_ok, sep_margin = _hermitian_psd(shifted, neg_omega_a, ctx)
        phys_ok, phys_margin = _hermitian_psd(A, neg_omega_a, ctx)
        margins.append((sep_margin, phys_margin))
        if not phys_ok:
            return FlowVerdict(Verdict.INSEPARABLE, depth, witness=phys_margin, margins=margins)
        if sep_ok:
            dec = None
            if depth == 1 and constructive:
                dec = _depth_one_decomposition(M, n_a, A, c_norm, ctx, modes_a, modes_b)
            return FlowVerdict(Verdict.SEPARABLE, depth, decomposition=dec, margins=margins)
    return FlowVerdict(Verdict.UNDECIDED, max_depth, margins=margins)


def pad_with_vacuum(sigma, n_extra: int, ctx: PrecisionContext) -> np.ndarray:
    """Append ``n_extra`` decoupled vacuum modes (identity blocks)."""
    M = raw(sigma)
    if n_extra <= 0:
        return M
    return mpnum.block_diag(M, mpnum.eye(2 * n_extra, ctx), ctx=ctx)


# ---------------------------------------------------------------- simultaneity


def yprime(Y: np.ndarray, Y_h: np.ndarray, delta: np.ndarray | None = None,
           ctx: PrecisionContext | None = None) -> np.ndarray:
    """``Y' = Y - 0 ⊕ δ + 0 ⊕ Y_h`` with the halo block trailing.

    ``δ`` defaults to the trailing block of ``Y`` of the size of ``Y_h``.
    """
    ctx = ctx or PrecisionContext()
    Y = raw(Y)
    n, h = Y.shape[0], Y_h.shape[0]
    if h > n or Y_h.shape[0] != Y_h.shape[1]:
        raise ValueError(f"halo noise of size {Y_h.shape} does not fit in Y of size {Y.shape}")
    if delta is None:
        delta = Y[n - h:, n - h:]
    if delta.shape != Y_h.shape:
        raise ValueError(f"δ shape {delta.shape} differs from Y_h shape {Y_h.shape}")
    out = Y.copy()
    with ctx.activate():
        out[n - h:, n - h:] = Y[n - h:, n - h:] - delta + Y_h
    return mpnum.symmetrize(out, ctx)


def simultaneous_check(Y: np.ndarray, Y_h: np.ndarray, delta: np.ndarray | None = None,
                       ctx: PrecisionContext | None = None) -> tuple[bool, mpfr]:
    """PSD test of ``Y'``; returns ``(verdict, smallest eigenvalue)``."""
    ctx = ctx or PrecisionContext()
    return mpnum.is_psd(yprime(Y, Y_h, delta, ctx), ctx)


# ---------------------------------------------------------------- core splitting


@dataclass
class CoreSplit:
    """Result of :func:`core_split_search`.

    Attributes
    ----------
    success : bool
    pair_cms : list of numpy.ndarray
        One two-mode CM per core pair (order ``a_j, b_j``) on success.
    noises : list of (tuple, numpy.ndarray)
        Pair group and the noise ``Y_i`` of each split, in the group's
        local ordering ``a-modes + b-modes``.
    sequence : list of (tuple, tuple)
        The successful splits, outermost first.
    attempts : list of dict
        Every flow evaluation with its outcome and margin.
    """

    success: bool
    pair_cms: list = field(default_factory=list)
    noises: list = field(default_factory=list)
    sequence: list = field(default_factory=list)
    attempts: list = field(default_factory=list)

    def recompose(self, n_c: int, ctx: PrecisionContext) -> np.ndarray:
        """``⊕ σ_{c,i} + Σ Y_i`` in the ordering ``core_a + core_b``."""
        out = mpnum.zeros(4 * n_c, 4 * n_c, ctx)
        with ctx.activate():
            for j, P in enumerate(self.pair_cms):
                idx = mode_indices([j, n_c + j])
                out[np.ix_(idx, idx)] += P
            for group, Yi in self.noises:
                idx = mode_indices(list(group) + [n_c + j for j in group])
                out[np.ix_(idx, idx)] += Yi
        return out


class _Budget:
    def __init__(self, cap: int):
        self.left = cap


def _group_splits(group: tuple) -> list[tuple[tuple, tuple]]:
    g = len(group)
    out = []
    for r in range(1, g):
        for left in itertools.combinations(group, r):
            right = tuple(j for j in group if j not in left)
            out.append((left, right))
    out.sort(key=lambda s: (abs(len(s[0]) - len(s[1])), s))
    return out


def _group_cm(M: np.ndarray, group: tuple, members: tuple) -> np.ndarray:
    # M is in local order a-modes(members) + b-modes(members)
    k = len(members)
    pos = {j: i for i, j in enumerate(members)}
    modes = [pos[j] for j in group] + [k + pos[j] for j in group]
    idx = mode_indices(modes)
    return M[np.ix_(idx, idx)]


def _search(M: np.ndarray, members: tuple, ctx: PrecisionContext, budget: _Budget, result: CoreSplit):
    """Split the CM of ``members`` into single pairs; returns (pairs, noises, seq) or None."""
    if len(members) == 1:
        N, _ = log_negativity(M, [0], ctx, cross_check=False)
        ok = N > ctx.psd_tol
        result.attempts.append({"split": (members, ()), "verdict": "leaf", "margin": N})
        return ({members[0]: M}, [], []) if ok else None
    k = len(members)
    for left, right in _group_splits(members):
        if budget.left <= 0:
            return None
        budget.left -= 1
        local = [members.index(j) for j in left]
        cut = local + [k + i for i in local]
        verdict = flow_decide(M, cut, ctx, max_depth=1)
        margin = verdict.margins[-1][0] if verdict.margins else None
        result.attempts.append({"split": (left, right), "verdict": verdict.verdict.value, "margin": margin})
        if not (verdict.separable and verdict.decomposition is not None):
            continue
        dec = verdict.decomposition
        sub_left = _search(dec.sigma_a, left, ctx, budget, result)
        if sub_left is None:
            continue
        sub_right = _search(dec.sigma_b, right, ctx, budget, result)
        if sub_right is None:
            continue
        # decomposition order is a(left), b(left), a(right), b(right); map to a(members), b(members)
        n_l = len(left)
        dec_modes = []
        for j in members:
            if j in left:
                dec_modes.append(left.index(j))
            else:
                dec_modes.append(2 * n_l + right.index(j))
        for j in members:
            if j in left:
                dec_modes.append(n_l + left.index(j))
            else:
                dec_modes.append(2 * n_l + len(right) + right.index(j))
        idx = mode_indices(dec_modes)
        Yi = dec.Y[np.ix_(idx, idx)]
        pairs = {**sub_left[0], **sub_right[0]}
        noises = [(members, Yi)] + sub_left[1] + sub_right[1]
        seq = [(left, right)] + sub_left[2] + sub_right[2]
        return pairs, noises, seq
    return None


def core_split_search(sigma_core, n_c: int | None = None, ctx: PrecisionContext | None = None,
                      max_sequences: int = MAX_SPLIT_SEQUENCES) -> CoreSplit:
    """Sequential bipartition of the core into separable single pairs.

    Parameters
    ----------
    sigma_core : array
        CM on ``2 n_c`` modes in the ordering ``core_a + core_b`` (pair
        ``j`` is modes ``j`` and ``n_c + j``).
    n_c : int, optional
        Number of core pairs; inferred from the size.
    ctx : PrecisionContext, optional
        Defaults to :data:`mpnum.FLOW_DIGITS` digits.
    max_sequences : int
        Cap on flow evaluations.

    Returns
    -------
    CoreSplit
        Depth-first over ordered bipartitions, balanced splits first; the
        first success in that order is returned. On failure
        ``attempts`` lists every evaluated split.
    """
    ctx = ctx or PrecisionContext(mpnum.FLOW_DIGITS)
    M = mpnum.symmetrize(raw(sigma_core), ctx)
    total = M.shape[0] // 2
    n_c = total // 2 if n_c is None else n_c
    if 2 * n_c != total:
        raise ValueError(f"expected a CM on {2 * n_c} modes, got {total}")
    result = CoreSplit(False)
    if n_c == 0:
        result.success = True
        return result
    found = _search(M, tuple(range(n_c)), ctx, _Budget(max_sequences), result)
    if found is not None:
        pairs, noises, seq = found
        result.success = True
        result.pair_cms = [pairs[j] for j in range(n_c)]
        result.noises = noises
        result.sequence = seq
    return result


# ---------------------------------------------------------------- two-qubit demo


@dataclass(frozen=True)
class IsotropicReport:
    """Exact analysis of the Bell/maximally-mixed mixture at weight ``eta``.

    Attributes
    ----------
    eta : sympy.Rational
    rho : sympy.Matrix
    pt_eigenvalues : list
        Eigenvalues of the partial transpose.
    negativity : sympy expression
        ``log2 ‖ρ^Γ‖₁``.
    weights : dict
        Weight of each product state in the tensor-product decomposition.
    convex : bool
        All weights nonnegative.
    reconstruction_exact : bool
        Weighted product states sum exactly to ``rho``.
    """

    eta: sympy.Rational
    rho: sympy.Matrix
    pt_eigenvalues: list
    negativity: sympy.Expr
    weights: dict
    convex: bool
    reconstruction_exact: bool


def _ket(a, b):
    return sympy.kronecker_product(a, b)


def _proj(v):
    return v * v.H


def isotropic_qubit_demo(eta) -> IsotropicReport:
    """Negativity and product-state decomposition of ``η|Φ⁺⟩⟨Φ⁺| + (1-η) I/4``.

    ``eta`` is converted to an exact rational (floats through their
    shortest repr).
    """
    if isinstance(eta, float):
        eta = Fraction(repr(eta))
    eta = sympy.Rational(str(eta)) if not isinstance(eta, sympy.Rational) else eta
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    zero = sympy.Matrix([1, 0])
    one = sympy.Matrix([0, 1])
    r2 = sympy.sqrt(2)
    bell = (_ket(zero, zero) + _ket(one, one)) / r2
    rho = eta * _proj(bell) + (1 - eta) * sympy.eye(4) / 4
    # partial transpose on the second qubit: (i j, k l) -> (i l, k j)
    pt = sympy.zeros(4, 4)
    for i, j, k, l in itertools.product(range(2), repeat=4):
        pt[2 * i + l, 2 * k + j] = rho[2 * i + j, 2 * k + l]
    eig = [sympy.Rational(e) for e, mult in pt.eigenvals().items() for _ in range(mult)]
    eig.sort(key=lambda e: sympy.Rational(e))
    trace_norm = sum(abs(e) for e in eig)
    negativity = sympy.simplify(sympy.log(trace_norm, 2))
    plus_x, minus_x = (zero + one) / r2, (zero - one) / r2
    plus_y, minus_y = (zero + sympy.I * one) / r2, (zero - sympy.I * one) / r2
    states = {
        "++x": _ket(plus_x, plus_x), "--x": _ket(minus_x, minus_x),
        "+-y": _ket(plus_y, minus_y), "-+y": _ket(minus_y, plus_y),
        "00": _ket(zero, zero), "11": _ket(one, one),
        "01": _ket(zero, one), "10": _ket(one, zero),
    }
    weights = {
        "++x": eta / 2, "--x": eta / 2, "+-y": eta / 2, "-+y": eta / 2,
        "00": (1 - eta) / 4, "11": (1 - eta) / 4,
        "01": (1 - 3 * eta) / 4, "10": (1 - 3 * eta) / 4,
    }
    recon = sympy.zeros(4, 4)
    for name, v in states.items():
        recon += weights[name] * _proj(v)
    exact = sympy.simplify(recon - rho) == sympy.zeros(4, 4)
    convex = all(w >= 0 for w in weights.values())
    return IsotropicReport(eta, rho, eig, negativity, weights, bool(convex), bool(exact))
