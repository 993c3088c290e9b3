import random

import gmpy2
import mpmath
import numpy as np
import pytest
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussent import mpnum
from gaussent.errors import ComplexSpectrumError, NotPositiveDefiniteError
from gaussent.mpnum import PrecisionContext


def rand_sym(n, ctx, seed):
    rng = random.Random(seed)
    A = mpnum.matrix([[rng.uniform(-1, 1) for _ in range(n)] for _ in range(n)], ctx)
    return mpnum.symmetrize(A, ctx)


def floats(vals):
    return [float(x) for x in vals]


def test_precision_context_bits_and_tolerances():
    ctx = PrecisionContext(64)
    assert ctx.bits == int(np.ceil(64 * np.log2(10))) + mpnum.GUARD_BITS
    assert float(ctx.psd_tol) == pytest.approx(1e-32)
    assert float(ctx.conv_tol) == pytest.approx(1e-54)


def test_precision_from_env(monkeypatch):
    monkeypatch.setenv("GAUSSENT_PRECISION", "99")
    assert PrecisionContext.from_env().decimal_digits == 99
    monkeypatch.delenv("GAUSSENT_PRECISION")
    assert PrecisionContext.from_env(77).decimal_digits == 77


def test_scalar_accepts_fraction_strings(ctx64):
    with ctx64.activate():
        assert mpnum.scalar("4/3", ctx64) * 3 == 4


def test_negate_keeps_precision(ctx64):
    x = mpnum.scalar("0.1", ctx64)
    y = mpnum.negate(x)
    assert y.precision == x.precision
    assert gmpy2.add(x, y) == 0


def test_eig_identity(ctx64):
    assert floats(mpnum.sym_eig(mpnum.eye(3, ctx64), ctx64)[0]) == [1, 1, 1]


def test_eig_2x2(ctx64):
    vals = mpnum.sym_eig(mpnum.matrix([[2, 1], [1, 2]], ctx64), ctx64)[0]
    assert floats(vals) == pytest.approx([3, 1])


def test_eig_reconstruction_100_digits():
    ctx = PrecisionContext(100)
    A = rand_sym(10, ctx, 1)
    w, V = mpnum.sym_eig(A, ctx)
    with ctx.activate():
        R = mpnum.mdot(V, mpnum.diag(w, ctx), V.T, ctx=ctx)
        assert mpnum.max_abs(R - A) < mpfr("1e-90")


def test_gen_eig_diagonal(ctx64):
    vals, right, _ = mpnum.gen_eig(mpnum.diag([2, 5], ctx64), ctx64)
    assert floats(vals) == [5, 2]
    assert np.allclose(mpnum.to_float(right), [[0, 1], [1, 0]])


def test_gen_eig_similarity(ctx64):
    P = mpnum.matrix([[1, 2, 0, 1], [0, 1, 3, 0], [1, 0, 1, 2], [2, 1, 0, 1]], ctx64)
    D = mpnum.diag([4, 3, -1, "0.5"], ctx64)
    A = mpnum.mdot(P, D, mpnum.inverse(P, ctx64), ctx=ctx64)
    vals, right, left = mpnum.gen_eig(A, ctx64)
    assert floats(vals) == pytest.approx([4, 3, 0.5, -1], abs=1e-40)
    with ctx64.activate():
        assert mpnum.max_abs(mpnum.matmul(left.T, right, ctx64) - mpnum.eye(4, ctx64)) < mpfr("1e-40")


def test_gen_eig_rejects_complex(ctx64):
    with pytest.raises(ComplexSpectrumError):
        mpnum.gen_eig(mpnum.matrix([[0, 1], [-1, 0]], ctx64), ctx64)


def test_gen_eig_gh_product_matches_pt_spectrum(sigma_d2, ctx64):
    from gaussent.negativity import pt_spectrum
    from gaussent.symplectic import partial_transpose, raw

    pt = raw(partial_transpose(sigma_d2))
    G, H = pt[0::2, 0::2], pt[1::2, 1::2]
    vals, _, _ = mpnum.gen_eig(mpnum.matmul(G, H, ctx64), ctx64)
    nus = pt_spectrum(sigma_d2, None, ctx64).eigenvalues
    assert sorted(floats(vals)) == pytest.approx(sorted(float(v) ** 2 for v in nus), rel=1e-30)


def test_inverse_2x2(ctx64):
    inv = mpnum.inverse(mpnum.matrix([[4, 7], [2, 6]], ctx64), ctx64)
    assert np.allclose(mpnum.to_float(inv), [[0.6, -0.7], [-0.2, 0.4]])


def test_pinv_rank_one(ctx64):
    P = mpnum.pinv(mpnum.matrix([[1, 1], [1, 1]], ctx64), ctx64)
    assert np.allclose(mpnum.to_float(P), 0.25)


def test_pinv_penrose_conditions_on_singular_block(soe_d2, ctx320):
    # σ'_cc - σ_c is singular: the depth-1 flow saturates the core block
    sp = soe_d2.details.sigma_prime
    A = mpnum.symmetrize(sp[:4, :4] - soe_d2.details.sigma_c, ctx320)
    P = mpnum.pinv(A, ctx320)
    tol = ctx320.half_tol
    with ctx320.activate():
        assert mpnum.max_abs(mpnum.mdot(A, P, A, ctx=ctx320) - A) < tol
        AP = mpnum.matmul(A, P, ctx320)
        assert mpnum.max_abs(AP - AP.T) < tol
    assert min(abs(float(x)) for x in mpnum.eigvalsh(A, ctx320)) < 1e-100


def test_is_psd(ctx64):
    assert mpnum.is_psd(mpnum.eye(2, ctx64), ctx64) == (True, 1)
    ctx = PrecisionContext(100)
    ok, low = mpnum.is_psd(mpnum.diag([1, "-1e-200"], ctx), ctx)
    assert ok and low < 0


def test_is_psd_yprime_example(soe_d2, ctx320):
    ok, low = mpnum.is_psd(soe_d2.details.Yprime, ctx320)
    assert not ok
    assert float(low) == pytest.approx(-0.037, abs=1e-3)


def test_op_norm(ctx64):
    assert mpnum.op_norm(mpnum.eye(4, ctx64), ctx64) == 1
    assert mpnum.op_norm(mpnum.diag([3, -7], ctx64), ctx64) == 7


def test_op_norm_matches_squaring_oracle(ctx64):
    rng = random.Random(5)
    A = mpnum.matrix([[rng.uniform(-1, 1) for _ in range(3)] for _ in range(5)], ctx64)
    top = mpnum.sym_eig(mpnum.matmul(A.T, A, ctx64), ctx64)[0][0]
    with ctx64.activate():
        assert abs(mpnum.op_norm(A, ctx64) - gmpy2.sqrt(top)) < mpfr("1e-50")


def test_sqrt_psd(ctx64):
    assert floats(np.diag(mpnum.sqrt_psd(mpnum.diag([4, 9], ctx64), ctx64))) == [2, 3]
    I = mpnum.eye(3, ctx64)
    with ctx64.activate():
        assert mpnum.max_abs(mpnum.sqrt_psd(I, ctx64) - I) == 0


def test_sqrt_of_gh_product_squares_back(sigma_d2, ctx64):
    from gaussent.symplectic import raw

    M = raw(sigma_d2)
    G, H = M[0::2, 0::2], M[1::2, 1::2]
    # symmetrized route: G^{1/2} H G^{1/2} is similar to GH
    g = mpnum.sqrt_psd(G, ctx64)
    Q = mpnum.symmetrize(mpnum.mdot(g, H, g, ctx=ctx64), ctx64)
    R = mpnum.sqrt_psd(Q, ctx64)
    with ctx64.activate():
        assert mpnum.max_abs(mpnum.matmul(R, R, ctx64) - Q) < ctx64.half_tol


def test_cholesky_rejects_indefinite(ctx64):
    with pytest.raises(NotPositiveDefiniteError):
        mpnum.cholesky(mpnum.diag([1, -1], ctx64), ctx64)


def test_conversions_roundtrip(ctx64):
    x = mpnum.scalar("1.2345678901234567890123456789", ctx64)
    s = mpnum.decimal_string(x, 64)
    assert mpnum.scalar(s, ctx64) == x
    assert mpnum.from_mpmath(mpnum.to_mpmath(x), ctx64) == x


@pytest.mark.parametrize("name", ["matmul", "sym_eig", "inverse", "cholesky"])
def test_kernel_backends_agree(name, ctx64):
    try:
        cy = mpnum.kernel_module("cython")
    except ImportError:
        pytest.skip("compiled kernels not built")
    py = mpnum.kernel_module("python")
    A = rand_sym(6, ctx64, 3)
    with ctx64.activate():
        A = A + mpnum.eye(6, ctx64) * 6
    args = (A, A, ctx64.bits) if name == "matmul" else (A, ctx64.bits)
    a, b = getattr(py, name)(*args), getattr(cy, name)(*args)
    if isinstance(a, tuple):
        assert floats(a[0]) == floats(b[0])
        a, b = a[1], b[1]
    with ctx64.activate():
        assert mpnum.max_abs(a - b) == 0


def test_kernel_selection_reported():
    assert mpnum.KERNEL in ("cython", "python")


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 7), st.integers(0, 10**6))
def test_property_eig_reconstruction(n, seed):
    ctx = PrecisionContext(40)
    A = rand_sym(n, ctx, seed)
    w, V = mpnum.sym_eig(A, ctx)
    assert all(a >= b for a, b in zip(w, w[1:]))
    with ctx.activate():
        R = mpnum.mdot(V, mpnum.diag(w, ctx), V.T, ctx=ctx)
        assert mpnum.max_abs(R - A) <= ctx.conv_tol * max(mpnum.max_abs(A), 1) * n


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(1, 5), st.integers(0, 10**6))
def test_property_pinv_penrose(n, rank, seed):
    ctx = PrecisionContext(40)
    rng = random.Random(seed)
    rank = min(rank, n)
    B = mpnum.matrix([[rng.uniform(-1, 1) for _ in range(rank)] for _ in range(n)], ctx)
    A = mpnum.symmetrize(mpnum.matmul(B, B.T, ctx), ctx)
    P = mpnum.pinv(A, ctx)
    with ctx.activate():
        tol = ctx.half_tol * 100
        AP, PA = mpnum.matmul(A, P, ctx), mpnum.matmul(P, A, ctx)
        assert mpnum.max_abs(AP - AP.T) < tol
        assert mpnum.max_abs(PA - PA.T) < tol
        assert mpnum.max_abs(mpnum.matmul(AP, A, ctx) - A) < tol


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=5))
def test_property_psd_precision_monotonic(values):
    lo, hi = PrecisionContext(40), PrecisionContext(80)
    verdict_lo, margin = mpnum.is_psd(mpnum.diag(values, lo), lo)
    verdict_hi, _ = mpnum.is_psd(mpnum.diag(values, hi), hi)
    if abs(margin) > lo.psd_tol:
        assert verdict_lo == verdict_hi
