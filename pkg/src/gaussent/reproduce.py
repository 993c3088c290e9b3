"""Comparison of computed results against the bundled reference fixtures.

Each ``reproduce_*`` function returns a list of :class:`Check` rows; a
reproduction passes when every row passes. Matrix entries printed to a
few significant figures are compared with :func:`printed_match`, table
values with a relative tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from gmpy2 import mpfr

from . import mpnum
from .consolidate import consolidate
from .lattice import RegionSpec, build_region_cm
from .mpnum import PrecisionContext
from .negativity import log_negativity, negativity_row
from .symplectic import raw
from .soe import load_fixture, soe_quantify, werner_be_verify

TABLE_RTOL = 1e-3
TABLES = ("s1", "s2", "s3", "s4", "appD", "appF", "appG")


@dataclass
class Check:
    """One compared quantity."""

    name: str
    computed: str
    expected: str
    ok: bool

    def line(self) -> str:
        flag = "ok  " if self.ok else "FAIL"
        return f"{flag} {self.name}: computed {self.computed}, expected {self.expected}"


def printed_match(value, printed: str, sig: int = 3) -> bool:
    """Agreement with a printed decimal to ``sig`` significant figures.

    Passes when ``|value - printed|`` is at most one unit in the
    ``sig``-th significant figure of the printed value, so that both
    rounding and truncation of the printed digits are accepted. Values
    printed with fewer digits are compared at their last printed digit.
    A printed zero requires ``|value| < 10^-(sig+3)``.
    """
    p = float(Fraction(printed))
    v = float(value)
    if p == 0:
        return abs(v) < 10.0 ** -(sig + 3)
    unit = 10.0 ** (math.floor(math.log10(abs(p))) - sig + 1)
    unit = max(unit, _last_digit_unit(printed))
    return abs(v - p) <= unit * (1 + 1e-9)


def _last_digit_unit(printed: str) -> float:
    mantissa, _, exponent = printed.lower().partition("e")
    decimals = len(mantissa.partition(".")[2])
    return 10.0 ** (int(exponent or 0) - decimals)


def relative_match(value, expected: str, rtol: float) -> bool:
    e = float(Fraction(expected))
    return abs(float(value) - e) <= rtol * abs(e)


def _fmt(x, digits: int = 6) -> str:
    return mpnum.decimal_string(x, digits) if isinstance(x, mpfr) else f"{float(x):.{digits}g}"


def compare_matrix(name: str, computed, printed: Sequence[Sequence[str]], sig: int = 3) -> list[Check]:
    """Entrywise :func:`printed_match`; only failing entries are listed
    individually, followed by one summary row."""
    out = []
    rows, cols = len(printed), len(printed[0])
    if computed.shape != (rows, cols):
        return [Check(name, f"shape {computed.shape}", f"shape {(rows, cols)}", False)]
    bad = 0
    for i in range(rows):
        for j in range(cols):
            if not printed_match(computed[i, j], printed[i][j], sig):
                bad += 1
                out.append(Check(f"{name}[{i},{j}]", _fmt(computed[i, j]), printed[i][j], False))
    out.append(Check(name, f"{rows * cols - bad}/{rows * cols} entries", f"{sig} significant figures", bad == 0))
    return out


# ---------------------------------------------------------------- worked examples


def reproduce_appD(ctx: PrecisionContext | None = None) -> list[Check]:
    """Two-region d=2 CM, negativities for d=2 and d=4, consolidation matrices."""
    ctx = ctx or PrecisionContext()
    fx = load_fixture("appD.json")
    spec = RegionSpec(fx["spec"]["d"], fx["spec"]["sep"], fx["spec"]["mass"])
    sigma = build_region_cm(spec, ctx)
    checks = compare_matrix("sigma", sigma.matrix, fx["sigma"])
    n2, _ = log_negativity(sigma, None, ctx)
    checks.append(Check("N(d=2)", _fmt(n2), fx["negativity_d2"], abs(float(n2) - float(fx["negativity_d2"])) <= 1e-3))
    for route in ("gh", "iomega"):
        cons = consolidate(sigma, ctx, route=route)
        checks += compare_matrix(f"{route}.seed", cons.seed.matrix(), fx[route]["seed"])
        checks += compare_matrix(f"{route}.S_A", cons.S_A, fx[route]["S_A"])
        checks += compare_matrix(f"{route}.sigma_prime", raw(cons.sigma_prime), fx[route]["sigma_prime"])

    d4 = fx["d4"]
    spec4 = RegionSpec(d4["spec"]["d"], d4["spec"]["sep"], d4["spec"]["mass"])
    sigma4 = build_region_cm(spec4, ctx)
    n4, spectrum = log_negativity(sigma4, None, ctx)
    got = spectrum.nonzero
    want = d4["contributions"]
    checks.append(Check("d4.count", str(len(got)), str(len(want)), len(got) == len(want)))
    for j, (g, w) in enumerate(zip(got, want), start=1):
        checks.append(Check(f"d4.N_{j}", _fmt(g), w, relative_match(g, w, 1e-2)))
    checks.append(Check("d4.total", _fmt(n4), d4["total"], abs(float(n4) - float(d4["total"])) <= 1e-3))
    cons4 = consolidate(sigma4, ctx)
    for j, (g, w) in enumerate(zip(cons4.pair_negativities, d4["pair_negativities"]), start=1):
        checks.append(Check(f"d4.pair_{j}", _fmt(g), w, relative_match(g, w, 1e-2)))
    checks += compare_matrix("d4.S_A", cons4.S_A, d4["S_A"])
    return checks


APPF_MATRICES = {
    "sigma_c": "sigma_c",
    "sigma_h": "sigma_h",
    "Y": "Y",
    "sigma_c_pure": "sigma_c_pure",
    "sigma_h_pure": "sigma_h_pure",
    "Y_pure": "Y_pure",
    "sigma_h_side_pure": "halo_side_pure",
    "Y_h_pure": "Y_h_pure",
}


def reproduce_appF(ctx: PrecisionContext | None = None) -> list[Check]:
    """Core-halo decomposition of the d=2 pair and the ``Y'`` eigenvalues."""
    ctx = ctx or PrecisionContext(mpnum.FLOW_DIGITS)
    fx = load_fixture("appF.json")
    spec = RegionSpec(fx["spec"]["d"], fx["spec"]["sep"], fx["spec"]["mass"])
    rep = soe_quantify(spec, ctx)
    checks = [Check("status", rep.status, "ok", rep.status == "ok")]
    if rep.details.Yprime is None:
        return checks + [Check("Yprime", "not formed", "formed", False)]
    for key, attr in APPF_MATRICES.items():
        checks += compare_matrix(key, getattr(rep.details, attr), fx[key])
    checks.append(Check("N_halo", _fmt(rep.N_halo), fx["halo_negativity"],
                        abs(float(rep.N_halo) - float(fx["halo_negativity"])) <= 1e-3))
    checks.append(Check("N_haloA_rest", _fmt(rep.N_haloA_vs_rest), fx["halo_a_vs_rest_negativity"],
                        abs(float(rep.N_haloA_vs_rest) - float(fx["halo_a_vs_rest_negativity"])) <= 1e-3))
    neg = rep.yprime_negative
    want = fx["yprime_negative_eigenvalues"]
    checks.append(Check("Yprime.negative_count", str(len(neg)), str(len(want)), len(neg) == len(want)))
    for i, (g, w) in enumerate(zip(neg, want)):
        checks.append(Check(f"Yprime.eig_{i}", _fmt(g), w, abs(float(g) - float(w)) <= 2e-3))
    return checks


def reproduce_appG(ctx: PrecisionContext | None = None) -> list[Check]:
    """Integer bound-entangled CM checks."""
    rep = werner_be_verify(ctx)
    return [Check(name, detail, "pass", ok) for name, (ok, detail) in rep.checks.items()]


# ---------------------------------------------------------------- tables


def _select(rows: list[dict], seps: Iterable[int] | None) -> list[dict]:
    if seps is None:
        return rows
    wanted = set(seps)
    return [r for r in rows if int(r["r_tilde"]) in wanted]


def reproduce_s1(ctx: PrecisionContext | None = None, seps: Iterable[int] | None = None,
                 rtol: float = TABLE_RTOL) -> list[Check]:
    """Per-mode negativity contributions (auto-raised precision)."""
    ctx = ctx or PrecisionContext()
    rows = _select(load_fixture("table_s1.csv"), seps)
    by_sep: dict[tuple, list[dict]] = {}
    for r in rows:
        by_sep.setdefault((int(r["d"]), r["m"], int(r["r_tilde"])), []).append(r)
    checks = []
    for (d, m, sep), listed in by_sep.items():
        row = negativity_row(RegionSpec(d, sep, m), ctx)
        if row.error:
            checks.append(Check(f"r={sep}", row.error, "computed row", False))
            continue
        got = row.contributions
        checks.append(Check(f"r={sep}.count", str(len(got)), str(len(listed)), len(got) == len(listed)))
        for r in listed:
            j = int(r["j"])
            g = got[j - 1] if j <= len(got) else mpfr(0)
            checks.append(Check(f"r={sep}.N_{j}", _fmt(g, 5), r["N_j"], relative_match(g, r["N_j"], rtol)))
    return checks


_SOE_TABLES = {
    "s2": ("table_s2.csv", ("N_total", "N_halo")),
    "s3": ("table_s3.csv", ("N_total",)),
    "s4": ("table_s4.csv", ("N_halo",)),
}


def reproduce_soe_table(table: str, ctx: PrecisionContext | None = None, seps: Iterable[int] | None = None,
                        rtol: float = TABLE_RTOL, workers: int = 1) -> list[Check]:
    """Rows of the SOE tables, computed with :func:`soe_scan`."""
    from .soe import soe_scan

    ctx = ctx or PrecisionContext(mpnum.FLOW_DIGITS)
    fname, columns = _SOE_TABLES[table]
    rows = _select(load_fixture(fname), seps)
    if not rows:
        return []
    d, m = int(rows[0]["d"]), rows[0]["m"]
    reports = soe_scan(d, [int(r["r_tilde"]) for r in rows], ctx, workers=workers, mass=m)
    checks = []
    for r, rep in zip(rows, reports):
        sep = r["r_tilde"]
        if rep.status == "error":
            checks.append(Check(f"r={sep}", rep.message, "computed row", False))
            continue
        for col in columns:
            got = rep.N_total if col == "N_total" else rep.N_halo
            if got is None:
                checks.append(Check(f"r={sep}.{col}", rep.status, r[col], False))
                continue
            checks.append(Check(f"r={sep}.{col}", _fmt(got, 5), r[col], relative_match(got, r[col], rtol)))
    return checks


def reproduce(table: str, ctx: PrecisionContext | None = None, seps: Iterable[int] | None = None,
              workers: int = 1) -> list[Check]:
    """Dispatch on a table name from :data:`TABLES`."""
    if table == "appD":
        return reproduce_appD(ctx)
    if table == "appF":
        return reproduce_appF(ctx)
    if table == "appG":
        return reproduce_appG(ctx)
    if table == "s1":
        return reproduce_s1(ctx, seps)
    if table in _SOE_TABLES:
        return reproduce_soe_table(table, ctx, seps, workers=workers)
    raise ValueError(f"unknown table {table!r}; expected one of {TABLES}")
