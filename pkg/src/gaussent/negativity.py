"""Logarithmic negativity and its decomposition over PT normal modes."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpfr

from . import mpnum
from .errors import GaussentError
from .lattice import RegionSpec, build_region_cm
from .mpnum import PrecisionContext
from .symplectic import partial_transpose, raw, reduce_modes, symplectic_spectrum

MAX_SCAN_DIGITS = 1200


@dataclass(frozen=True)
class PTSpectrum:
    """Partially transposed symplectic spectrum.

    Attributes
    ----------
    eigenvalues : list of mpfr
        ``ν^Γ`` ascending.
    contributions : list of mpfr
        ``-log2 ν^Γ`` for ``ν^Γ < 1 - tol``, else zero; aligned with
        ``eigenvalues`` (so nonzero entries come first, largest first).
    sub_precision : list of bool
        Contribution is below ``10**-(digits-15)`` and should not be trusted.
    digits : int
        Working precision used.
    """

    eigenvalues: list
    contributions: list
    sub_precision: list
    digits: int

    @property
    def n_minus(self) -> int:
        return sum(1 for c in self.contributions if c > 0)

    @property
    def total(self) -> mpfr:
        return gmpy2.fsum(self.contributions) if self.contributions else mpfr(0)

    @property
    def nonzero(self) -> list:
        """Nonzero contributions, largest first."""
        return [c for c in self.contributions if c > 0]


def _resolve_cut(sigma, cut) -> tuple[list[int], list[int]]:
    n = raw(sigma).shape[0] // 2
    if cut is None:
        side_a = list(sigma.modes_a)
    else:
        side_a = list(cut)
    if len(set(side_a)) != len(side_a) or any(not 0 <= j < n for j in side_a):
        raise ValueError(f"invalid cut {side_a} for {n} modes")
    side_b = [j for j in range(n) if j not in set(side_a)]
    if not side_a or not side_b:
        raise ValueError("cut must split the modes into two nonempty sets")
    return side_a, side_b


def pt_spectrum(sigma, cut: Sequence[int] | None = None, ctx: PrecisionContext | None = None,
                cross_check: bool = True) -> PTSpectrum:
    """Symplectic spectrum of the partial transpose across ``cut``.

    Parameters
    ----------
    sigma : CovarianceMatrix or array
    cut : sequence of int, optional
        Modes on side A; the rest form side B. Defaults to region A of a
        ``CovarianceMatrix``.
    ctx : PrecisionContext, optional
    cross_check : bool
        Forwarded to :func:`symplectic_spectrum`.
    """
    ctx = ctx or PrecisionContext()
    side_a, side_b = _resolve_cut(sigma, cut)
    pt = partial_transpose(raw(sigma), side_b)
    nu = sorted(symplectic_spectrum(pt, ctx, cross_check=cross_check))
    with ctx.activate():
        one = mpfr(1)
        tol = ctx.conv_tol
        floor = ctx.tol(ctx.decimal_digits - 15)
        contrib = [-gmpy2.log2(v) if v < one - tol else mpfr(0) for v in nu]
        flags = [bool(0 < c < floor) for c in contrib]
    return PTSpectrum(nu, contrib, flags, ctx.decimal_digits)


def log_negativity(sigma, cut: Sequence[int] | None = None, ctx: PrecisionContext | None = None,
                   cross_check: bool = True) -> tuple[mpfr, PTSpectrum]:
    """Logarithmic negativity across a bipartition.

    Returns
    -------
    N : mpfr
        Sum of the per-mode contributions.
    spectrum : PTSpectrum
    """
    spec = pt_spectrum(sigma, cut, ctx, cross_check)
    with (ctx or PrecisionContext()).activate():
        return spec.total, spec


def pair_negativity(sigma, mode_a: int, mode_b: int, ctx: PrecisionContext | None = None) -> mpfr:
    """Negativity of the two-mode reduced state between ``mode_a`` and ``mode_b``."""
    sub = reduce_modes(sigma, [mode_a, mode_b])
    return log_negativity(sub, [0], ctx, cross_check=False)[0]


@dataclass
class ScanRow:
    """One separation of a negativity scan."""

    spec: RegionSpec
    contributions: list = field(default_factory=list)
    sub_precision: list = field(default_factory=list)
    digits: int = 0
    error: str | None = None

    @property
    def total(self):
        return gmpy2.fsum(self.contributions) if self.contributions else mpfr(0)


def _agree(a: list, b: list, rel: float) -> bool:
    if len(a) != len(b):
        return False
    return all(abs(x - y) <= rel * abs(y) for x, y in zip(a, b))


def negativity_row(spec: RegionSpec, ctx: PrecisionContext, auto_precision: bool = True,
                   agreement: float = 1e-6) -> ScanRow:
    """Negativity contributions for one region pair.

    With ``auto_precision`` the row is recomputed at increasing precision
    until two runs ``24`` digits apart agree on the number of
    contributions and on each value to relative ``agreement``, and none
    is flagged sub-precision.
    """
    digits = ctx.decimal_digits
    try:
        prev = None
        while True:
            c = ctx.with_digits(digits)
            sigma = build_region_cm(spec, c, check=False)
            spectrum = pt_spectrum(sigma, None, c, cross_check=False)
            row = ScanRow(spec, spectrum.nonzero, [f for f, x in zip(spectrum.sub_precision, spectrum.contributions) if x > 0], digits)
            if not auto_precision:
                return row
            if prev is not None and not any(row.sub_precision) and _agree(prev.contributions, row.contributions, agreement):
                return row
            if digits >= MAX_SCAN_DIGITS:
                row.error = f"contributions not stable at {digits} digits"
                return row
            smallest = min(row.contributions, default=mpfr(1))
            need = int(-math.log10(float(smallest))) + 40 if smallest > 0 else digits
            if prev is None or need <= digits:
                digits = digits + 24
            else:
                digits = max(need, digits + 24)
            digits = min(digits, MAX_SCAN_DIGITS)
            prev = row
    except GaussentError as exc:
        return ScanRow(spec, digits=digits, error=str(exc))


def _row_task(args):
    spec, digits, auto = args
    return negativity_row(spec, PrecisionContext(digits), auto)


def negativity_scan(d: int, seps: Iterable[int], mass, ctx: PrecisionContext | None = None,
                    workers: int = 1, auto_precision: bool = True) -> list[ScanRow]:
    """Per-separation negativity contributions.

    Rows are independent; with ``workers > 1`` they run in a process pool
    and are returned in input order. Failures are recorded on the row.
    """
    ctx = ctx or PrecisionContext()
    specs = [RegionSpec(d, s, mass) for s in seps]
    tasks = [(s, ctx.decimal_digits, auto_precision) for s in specs]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_row_task, tasks))
    return [_row_task(t) for t in tasks]


def scan_csv(rows: Iterable[ScanRow], digits: int | None = None) -> str:
    """CSV with columns ``d, m, r_tilde, j, N_j`` (decimal strings)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "m", "r_tilde", "j", "N_j"])
    for row in rows:
        m = str(row.spec.mass)
        for j, c in enumerate(row.contributions, start=1):
            w.writerow([row.spec.d, m, row.spec.sep, j, mpnum.decimal_string(c, digits or row.digits)])
    return buf.getvalue()
