import random

import gmpy2
import mpmath
import pytest
import sympy
from gmpy2 import mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussent import mpnum
from gaussent.consolidate import consolidate
from gaussent.mpnum import PrecisionContext
from gaussent.negativity import log_negativity
from gaussent.separability import (Verdict, core_split_search, flow_decide, hermitian_min_eig, hermitian_pinv,
                                   isotropic_qubit_demo, pad_with_vacuum, simultaneous_check, yprime)
from gaussent.soe import load_fixture
from gaussent.symplectic import check_bonafide, raw, reduce_modes
from test_symplectic import random_symplectic, thermal

CTX = PrecisionContext(120)


def random_state(n, ctx, rng, nu_max=2.0):
    nus = [mpfr(1 + rng.random() * (nu_max - 1), ctx.bits) for _ in range(n)]
    return mpnum.congruence(random_symplectic(n, ctx, rng.randrange(10**6)), thermal(nus, ctx), ctx)


def random_separable(n_a, n_b, ctx, rng, noise_rank=2):
    sa, sb = random_state(n_a, ctx, rng), random_state(n_b, ctx, rng)
    n = 2 * (n_a + n_b)
    B = mpnum.matrix([[rng.uniform(-0.5, 0.5) for _ in range(noise_rank)] for _ in range(n)], ctx)
    with ctx.activate():
        return mpnum.symmetrize(mpnum.block_diag(sa, sb, ctx=ctx) + mpnum.matmul(B, B.T, ctx), ctx)


def two_mode_squeezed(r, ctx, noise="0"):
    with ctx.activate():
        c, s = gmpy2.cosh(mpfr(2 * r)), gmpy2.sinh(mpfr(2 * r))
        M = mpnum.matrix([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]], ctx)
        return M + mpnum.eye(4, ctx) * mpfr(noise)


def assert_constructive(sigma, verdict, ctx):
    dec = verdict.decomposition
    assert dec is not None
    assert check_bonafide(dec.sigma_a, ctx)[0] and check_bonafide(dec.sigma_b, ctx)[0]
    assert mpnum.is_psd(dec.Y, ctx)[0]
    assert dec.residual < ctx.half_tol


def test_product_is_separable_with_zero_noise(ctx320):
    rng = random.Random(1)
    sa, sb = random_state(2, ctx320, rng), random_state(1, ctx320, rng)
    sigma = mpnum.block_diag(sa, sb, ctx=ctx320)
    v = flow_decide(sigma, [0, 1], ctx320)
    assert v.verdict is Verdict.SEPARABLE and v.depth == 1
    assert_constructive(sigma, v, ctx320)
    assert mpnum.max_abs(v.decomposition.Y) < ctx320.half_tol


def test_two_mode_squeezed_is_inseparable():
    v = flow_decide(two_mode_squeezed(0.4, CTX), [0], CTX)
    assert v.inseparable and v.witness < 0


def test_noisy_two_mode_squeezed_becomes_separable():
    # N = 0 once the noise exceeds the squeezing-induced violation
    sigma = two_mode_squeezed(0.2, CTX, noise="1")
    assert log_negativity(sigma, [0], CTX)[0] == 0
    v = flow_decide(sigma, [0], CTX)
    assert v.separable
    if v.depth == 1:
        assert_constructive(sigma, v, CTX)


def test_core_halo_split_of_consolidated_d2(sigma_d2, ctx320, soe_d2):
    from gaussent.lattice import build_region_cm
    from conftest import D2

    cons = consolidate(build_region_cm(D2, ctx320), ctx320)
    v = flow_decide(cons.sigma_prime, [0, 3], ctx320)
    assert v.verdict is Verdict.SEPARABLE and v.depth == 1
    sc, sh = v.decomposition.sigma_a, v.decomposition.sigma_b
    assert round(float(sc[0, 0]), 4) == 1.1143 and round(float(sc[0, 2]), 4) == 0.4785
    assert round(float(sh[0, 0]), 4) == 1.0018 and round(float(sh[0, 2]), 4) == -0.0600
    assert_constructive(cons.sigma_prime, v, ctx320)


def test_bound_entangled_fixture_inseparable_in_two_steps(ctx320):
    fx = load_fixture("appG.json")
    sigma = mpnum.matrix(fx["sigma_be"], ctx320)
    assert log_negativity(sigma, [0, 1], ctx320)[0] == 0
    v = flow_decide(sigma, [0, 1], ctx320)
    assert v.verdict is Verdict.INSEPARABLE and v.depth == 2
    assert v.decomposition is None


def test_depth_cap_gives_undecided(ctx320):
    fx = load_fixture("appG.json")
    v = flow_decide(mpnum.matrix(fx["sigma_be"], ctx320), [0, 1], ctx320, max_depth=1)
    assert v.verdict is Verdict.UNDECIDED


def test_simultaneous_check_cases(soe_d2, ctx320, ctx64):
    Y = soe_d2.details.Y_pure
    h = soe_d2.details.Y_h_pure.shape[0]
    delta = Y[-h:, -h:]
    assert simultaneous_check(Y, delta, ctx=ctx320) == mpnum.is_psd(Y, ctx320)
    ok, low = simultaneous_check(Y, soe_d2.details.Y_h_pure, ctx=ctx320)
    assert not ok and float(low) == pytest.approx(-0.037, abs=2e-3)
    Z = mpnum.zeros(4, 4, ctx64)
    assert simultaneous_check(Z, mpnum.zeros(2, 2, ctx64), ctx=ctx64)[0]
    with pytest.raises(ValueError):
        yprime(Z, mpnum.zeros(6, 6, ctx64), ctx=ctx64)


def test_hermitian_helpers_against_mpmath():
    ctx = PrecisionContext(40)
    rng = random.Random(3)
    n = 3
    B = [[complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(n)] for _ in range(n)]
    with mpmath.workdps(40):
        Mb = mpmath.matrix(B)
        H = Mb * Mb.transpose_conj()
        H[0, 0] += 0  # keep it Hermitian PSD, rank 3
        E = sorted(float(mpmath.re(x)) for x in mpmath.eighe(H)[0])
        Hp = mpmath.inverse(H)
    R = mpnum.matrix([[str(mpmath.re(H[i, j])) for j in range(n)] for i in range(n)], ctx)
    I = mpnum.matrix([[str(mpmath.im(H[i, j])) for j in range(n)] for i in range(n)], ctx)
    R, I = mpnum.symmetrize(R, ctx), (I - I.T) / 2
    low, _ = hermitian_min_eig(R, I, ctx)
    assert float(low) == pytest.approx(E[0], rel=1e-12)
    pr, pi = hermitian_pinv(R, I, ctx)
    assert float(pr[0, 1]) == pytest.approx(float(mpmath.re(Hp[0, 1])), rel=1e-12)
    assert float(pi[0, 1]) == pytest.approx(float(mpmath.im(Hp[0, 1])), rel=1e-12)


def test_core_split_trivial_cases(ctx320, soe_d2):
    one = core_split_search(soe_d2.details.sigma_c, 1, ctx320)
    assert one.success and one.sequence == [] and len(one.pair_cms) == 1


def test_core_split_d4(ctx320):
    from gaussent.lattice import build_region_cm
    from conftest import D4

    cons = consolidate(build_region_cm(D4, ctx320), ctx320)
    core = reduce_modes(cons.sigma_prime, cons.layout.core)
    res = core_split_search(core, cons.layout.n_c, ctx320)
    assert res.success
    assert res.sequence[0] in (((0,), (1, 2)), ((0, 1), (2,)), ((0, 2), (1,)))
    with ctx320.activate():
        assert mpnum.max_abs(res.recompose(3, ctx320) - core) < ctx320.half_tol
    got = [float(log_negativity(P, [0], ctx320)[0]) for P in res.pair_cms]
    assert got == pytest.approx([float(x) for x in cons.pair_negativities[:3]], rel=1e-6)


def test_core_split_two_pairs_single_level(ctx320):
    from gaussent.lattice import RegionSpec, build_region_cm

    cons = consolidate(build_region_cm(RegionSpec(3, 0, "3/1000"), ctx320), ctx320)
    if cons.layout.n_c != 2:
        pytest.skip(f"n_c = {cons.layout.n_c}")
    core = reduce_modes(cons.sigma_prime, cons.layout.core)
    res = core_split_search(core, 2, ctx320)
    assert res.success and res.sequence == [((0,), (1,))]


@pytest.mark.parametrize("eta", ["0", "1/5", "1/3"])
def test_isotropic_separable_regime(eta):
    rep = isotropic_qubit_demo(sympy.Rational(eta))
    assert rep.convex and rep.negativity == 0 and rep.reconstruction_exact


@pytest.mark.parametrize("eta", ["1/3 + 1/1000", "1/2", "1"])
def test_isotropic_entangled_regime(eta):
    rep = isotropic_qubit_demo(sympy.sympify(eta))
    assert not rep.convex and rep.negativity > 0 and rep.reconstruction_exact


def test_isotropic_values():
    assert isotropic_qubit_demo(sympy.Integer(1)).negativity == 1
    rep = isotropic_qubit_demo(sympy.Rational(1, 3))
    assert min(rep.weights.values()) == 0
    assert sorted(rep.pt_eigenvalues) == [0, sympy.Rational(1, 3)] + [sympy.Rational(1, 3)] * 2


def _instances(count, seed):
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n_a, n_b = rng.randint(1, 2), rng.randint(1, 2)
        if i % 2:
            sigma = mpnum.block_diag(random_state(n_a, CTX, rng), random_state(n_b, CTX, rng), ctx=CTX)
        else:
            sigma = random_separable(n_a, n_b, CTX, rng)
        out.append((sigma, n_a, n_b))
    return out


def test_padding_invariance_twenty_instances():
    for sigma, n_a, n_b in _instances(20, 7):
        base = flow_decide(sigma, list(range(n_a)), CTX, max_depth=20, constructive=False)
        padded_b = pad_with_vacuum(sigma, 1, CTX)
        on_b = flow_decide(padded_b, list(range(n_a)), CTX, max_depth=20, constructive=False)
        on_a = flow_decide(padded_b, list(range(n_a)) + [n_a + n_b], CTX, max_depth=20, constructive=False)
        assert base.verdict is Verdict.SEPARABLE
        assert on_b.verdict is base.verdict and on_a.verdict is base.verdict


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_property_separable_verdicts_are_constructive(seed):
    rng = random.Random(seed)
    sigma = random_separable(rng.randint(1, 2), rng.randint(1, 2), CTX, rng)
    n_a = 1
    v = flow_decide(sigma, [0], CTX)
    if v.separable and v.depth == 1:
        assert_constructive(sigma, v, CTX)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 1.0), st.floats(0, 0.5))
def test_property_npt_never_separable(seed, r, noise):
    rng = random.Random(seed)
    sigma = two_mode_squeezed(r, CTX, noise=repr(noise))
    local = mpnum.block_diag(random_symplectic(1, CTX, seed), random_symplectic(1, CTX, seed + 1), ctx=CTX)
    sigma = mpnum.congruence(local, sigma, CTX)
    if log_negativity(sigma, [0], CTX)[0] > CTX.half_tol:
        assert flow_decide(sigma, [0], CTX).verdict is not Verdict.SEPARABLE


def test_isotropic_near_boundary_is_exact():
    below = isotropic_qubit_demo(sympy.Rational(1, 3) - sympy.Rational(1, 10**9))
    above = isotropic_qubit_demo(sympy.Rational(1, 3) + sympy.Rational(1, 10**9))
    assert below.negativity == 0 and below.convex
    assert above.negativity > 0 and not above.convex
    assert sum(below.pt_eigenvalues) == 1
