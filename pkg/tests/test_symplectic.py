import random

import gmpy2
import pytest
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussent import mpnum
from gaussent.errors import PrecisionError
from gaussent.lattice import RegionSpec, build_region_cm
from gaussent.mpnum import PrecisionContext
from gaussent.reproduce import printed_match
from gaussent.symplectic import (certify, check_bonafide, is_xp_separated, omega, partial_transpose, purify_split, raw,
                                 reduce_modes, symplectic_residual, symplectic_spectrum, williamson)


def random_symplectic(n, ctx, seed):
    """Product of symplectic generators: local squeezers, rotations, two-mode mixers."""
    rng = random.Random(seed)
    S = mpnum.eye(2 * n, ctx)
    with ctx.activate():
        for _ in range(3 * n):
            T = mpnum.eye(2 * n, ctx)
            j = rng.randrange(n)
            kind = rng.randrange(3)
            if kind == 0:
                r = mpfr(rng.uniform(-0.7, 0.7))
                T[2 * j, 2 * j], T[2 * j + 1, 2 * j + 1] = gmpy2.exp(r), gmpy2.exp(-r)
            elif kind == 1:
                t = mpfr(rng.uniform(0, 6.3))
                c, s = gmpy2.cos(t), gmpy2.sin(t)
                T[2 * j, 2 * j], T[2 * j, 2 * j + 1], T[2 * j + 1, 2 * j], T[2 * j + 1, 2 * j + 1] = c, s, -s, c
            elif n > 1:
                k = (j + 1 + rng.randrange(n - 1)) % n
                t = mpfr(rng.uniform(0, 6.3))
                c, s = gmpy2.cos(t), gmpy2.sin(t)
                for q in (0, 1):
                    a, b = 2 * j + q, 2 * k + q
                    T[a, a], T[a, b], T[b, a], T[b, b] = c, s, -s, c
            S = mpnum.matmul(T, S, ctx)
    return S


def thermal(nus, ctx):
    return mpnum.diag([v for v in nus for _ in (0, 1)], ctx)


def test_omega_and_reduce(ctx64):
    Om = omega(2, ctx64)
    assert Om[0, 1] == 1 and Om[1, 0] == -1 and Om[0, 2] == 0
    M = mpnum.matrix([[i * 10 + j for j in range(6)] for i in range(6)], ctx64)
    R = reduce_modes(M, [2, 0])
    assert R[0, 0] == 44 and R[0, 2] == 40 and R[3, 3] == 11


def test_pt_involution_and_symmetry(sigma_d2, ctx64):
    pt = partial_transpose(sigma_d2)
    back = partial_transpose(pt)
    assert (raw(back) == raw(sigma_d2)).all()
    P = raw(pt)
    assert (P == P.T).all()


def test_pt_keeps_working_precision(sigma_d2):
    # negation outside a precision context would round to 53 bits
    P = raw(partial_transpose(sigma_d2))
    for x in P.flat:
        assert x.precision == sigma_d2.matrix[0, 0].precision
    assert all(gmpy2.add(P[i, j], sigma_d2.matrix[i, j]) == 0 for i in range(8) for j in (5, 7) if i not in (5, 7))


def test_pt_of_product_state_keeps_spectrum_above_one(ctx64):
    a = thermal([1, "1.5"], ctx64)
    prod = mpnum.block_diag(a, thermal(["1.2"], ctx64), ctx=ctx64)
    nus = symplectic_spectrum(partial_transpose(prod, [2]), ctx64)
    assert min(nus) >= 1


def test_d2_pt_minimum(sigma_d2, ctx64):
    nus = symplectic_spectrum(partial_transpose(sigma_d2), ctx64)
    assert float(min(nus)) == pytest.approx(2 ** -0.654, rel=1e-3)


def test_spectrum_trivial_cases(ctx64):
    assert [float(x) for x in symplectic_spectrum(mpnum.eye(4, ctx64), ctx64)] == [1, 1]
    assert float(symplectic_spectrum(mpnum.diag([3, 3], ctx64), ctx64)[0]) == 3


def test_spectrum_purity_identity(sigma_d2, ctx64):
    nus = symplectic_spectrum(sigma_d2, ctx64)
    assert min(nus) >= 1
    det = mpnum.sym_eig(sigma_d2.matrix, ctx64)[0]
    with ctx64.activate():
        prod_nu = 1
        for v in nus:
            prod_nu *= v
        det_prod = 1
        for w in det:
            det_prod *= w
        assert abs(1 / gmpy2.sqrt(det_prod) - 1 / prod_nu) < ctx64.half_tol


def test_bonafide(ctx64, soe_d2, ctx320):
    assert check_bonafide(mpnum.eye(2, ctx64), ctx64) == (True, 0)
    assert not check_bonafide(mpnum.diag(["0.5", "0.5"], ctx64), ctx64)[0]
    assert check_bonafide(soe_d2.details.sigma_c, ctx320)[0]


def test_williamson_identity_and_squeezed_thermal(ctx64):
    wd = williamson(mpnum.eye(4, ctx64), ctx64)
    assert [float(x) for x in wd.nu] == [1, 1]
    S = wd.S_W.matrix
    with ctx64.activate():
        assert mpnum.max_abs(mpnum.matmul(S, S.T, ctx64) - mpnum.eye(4, ctx64)) < ctx64.half_tol
    nu0 = mpnum.scalar("2.5", ctx64)
    with ctx64.activate():
        sq = mpnum.diag([nu0 * 4, nu0 / 4], ctx64)
    assert abs(float(williamson(sq, ctx64).nu[0]) - 2.5) < 1e-50


def test_williamson_reconstruction(soe_d2, ctx320):
    sc = soe_d2.details.sigma_c
    wd = williamson(sc, ctx320)
    S = wd.S_W.matrix
    D = thermal(wd.nu, ctx320)
    with ctx320.activate():
        assert mpnum.max_abs(mpnum.mdot(S, D, S.T, ctx=ctx320) - sc) < ctx320.half_tol
    assert wd.S_W.residual <= wd.S_W.certified_tolerance


def test_purify_split(soe_d2, ctx320, ctx64):
    pure, noise = purify_split(soe_d2.details.sigma_c, ctx320)
    printed = [["1.1093", "0", "0.4736"], ["0", "1.1024", "0", "-0.4706"]]
    assert printed_match(pure[0, 0], "1.1093", 4) and printed_match(pure[0, 2], "0.4736", 4)
    assert printed_match(pure[1, 1], "1.1024", 4) and printed_match(pure[1, 3], "-0.4706", 4)
    assert all(abs(float(v) - 1) < 1e-100 for v in symplectic_spectrum(pure, ctx320))
    assert mpnum.is_psd(noise, ctx320)[0]
    p2, n2 = purify_split(mpnum.eye(2, ctx64), ctx64)
    assert mpnum.max_abs(n2) < ctx64.half_tol
    p3, n3 = purify_split(thermal(["3"], ctx64), ctx64)
    assert [float(x) for x in n3.flat] == pytest.approx([2, 0, 0, 2])


def test_certify_rejects_non_symplectic(ctx64):
    with pytest.raises(PrecisionError):
        certify(mpnum.diag([2, 2], ctx64), ctx64)
    T = certify(mpnum.diag([2, "0.5"], ctx64), ctx64)
    assert T.residual == 0


def test_xp_separation(sigma_d2, ctx64):
    assert is_xp_separated(sigma_d2, ctx64)
    S = random_symplectic(4, ctx64, 3)
    assert not is_xp_separated(mpnum.congruence(S, sigma_d2.matrix, ctx64), ctx64)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_property_symplectic_invariance(n, seed):
    ctx = PrecisionContext(50)
    rng = random.Random(seed)
    nus = [mpfr(1 + rng.random() * 3, ctx.bits) for _ in range(n)]
    S1, S2 = random_symplectic(n, ctx, seed), random_symplectic(n, ctx, seed + 1)
    sigma = mpnum.congruence(S1, thermal(nus, ctx), ctx)
    moved = mpnum.congruence(S2, sigma, ctx)
    certify(S2, ctx)
    a, b = symplectic_spectrum(sigma, ctx), symplectic_spectrum(moved, ctx)
    assert max(abs(float(x - y)) for x, y in zip(a, b)) < 1e-20
    assert sorted(float(x) for x in a) == pytest.approx(sorted(float(v) for v in nus), rel=1e-20)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10**6), st.floats(0.3, 2.5))
def test_property_bonafide_iff_spectrum(n, seed, scale):
    ctx = PrecisionContext(40)
    rng = random.Random(seed)
    nus = [mpfr(scale * (0.5 + rng.random()), ctx.bits) for _ in range(n)]
    sigma = mpnum.congruence(random_symplectic(n, ctx, seed), thermal(nus, ctx), ctx)
    ok, _ = check_bonafide(sigma, ctx)
    assert ok == (min(nus) >= 1)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10**6))
def test_property_williamson_reconstructs(n, seed):
    ctx = PrecisionContext(50)
    rng = random.Random(seed)
    nus = [mpfr(1 + rng.random(), ctx.bits) for _ in range(n)]
    sigma = mpnum.congruence(random_symplectic(n, ctx, seed), thermal(nus, ctx), ctx)
    wd = williamson(sigma, ctx)
    with ctx.activate():
        R = mpnum.mdot(wd.S_W.matrix, thermal(wd.nu, ctx), wd.S_W.matrix.T, ctx=ctx)
        assert mpnum.max_abs(R - sigma) < ctx.half_tol * 100
    assert symplectic_residual(wd.S_W.matrix, ctx) <= wd.S_W.certified_tolerance
