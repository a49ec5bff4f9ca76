"""Seed-free golden-value verification.

Reproduces the bundled reference numbers end to end: the three worked
decision probabilities at margin 1, their symmetric quantile intervals,
the structure of the chain precision matrix (recursive construction vs
closed form, exact tridiagonal sparsity), and the parameter round trip
through precision-matrix extraction.  Used by `niflang check` and by the
acceptance tests; nothing here consumes randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gauss import central_interval
from .gbn import chain, extract, precision_chain, precision_recursive
from .guards import branch_prob
from .reference import PARKING_COEFFS, PARKING_VARIANCES, parking_chain


@dataclass(frozen=True)
class CheckResult:
    name: str
    expected: str
    actual: str
    passed: bool


_PROBIT_CASES = (
    ("sigma2 = 0.4^2", 0.16, 0.994, 1.095),
    ("sigma2 = pi", math.pi, 0.714, 1.890),
    ("sigma2 = 4^2", 16.0, 0.599, 3.357),
)


def run_checks() -> list[CheckResult]:
    results: list[CheckResult] = []

    for name, s2, want_p, _ in _PROBIT_CASES:
        p = branch_prob(1.0, s2)
        results.append(
            CheckResult(
                name=f"decision probability at margin 1, {name}",
                expected=f"{want_p} (tol 1e-3)",
                actual=f"{p:.6f}",
                passed=abs(p - want_p) <= 1e-3,
            )
        )

    for name, s2, _, want_q in _PROBIT_CASES:
        iv = central_interval(branch_prob(1.0, s2), s2)
        ok = (
            iv.kind == "bounded"
            and abs(iv.hi - want_q) <= 0.01
            and iv.lo == -iv.hi
        )
        results.append(
            CheckResult(
                name=f"central quantile interval, {name}",
                expected=f"[-{want_q}; {want_q}] (tol 0.01)",
                actual=f"[{iv.lo:.4f}; {iv.hi:.4f}]" if iv.kind == "bounded" else iv.kind,
                passed=ok,
            )
        )

    single = chain([0.0], [PARKING_VARIANCES[0]], [])
    t11 = precision_chain(single).precision[0, 0]
    want = 1.0 / PARKING_VARIANCES[0]
    results.append(
        CheckResult(
            name="single-node precision = 1/variance",
            expected=f"{want:.6f}",
            actual=f"{t11:.6f}",
            passed=abs(t11 - want) <= 1e-9 * want,
        )
    )

    two = chain([0.0, 0.0], list(PARKING_VARIANCES[:2]), [PARKING_COEFFS[0]])
    off = precision_chain(two).precision[0, 1]
    results.append(
        CheckResult(
            name="two-node off-diagonal = -b21/sigma2^2",
            expected="-249.000000",
            actual=f"{off:.6f}",
            passed=abs(off - (-249.0)) <= 1e-6,
        )
    )

    ref = parking_chain()
    T_rec = precision_recursive(ref).precision
    T_chain = precision_chain(ref).precision
    gap = float(np.max(np.abs(T_rec - T_chain)))
    tridiag = np.ones_like(T_chain, dtype=bool)
    for i in range(7):
        for j in range(7):
            if abs(i - j) >= 2:
                tridiag[i, j] = T_rec[i, j] == 0.0 and T_chain[i, j] == 0.0
    results.append(
        CheckResult(
            name="seven-node precision: recursion vs closed form, tridiagonal",
            expected="entrywise gap <= 1e-12, exact zeros off the tridiagonal",
            actual=f"gap {gap:.3g}, sparsity {'ok' if tridiag.all() else 'violated'}",
            passed=gap <= 1e-12 and bool(tridiag.all()),
        )
    )

    recovered = extract(precision_chain(ref), template=ref)
    var_err = float(np.max(np.abs(recovered.variances() - ref.variances())))
    coeff_err = float(np.max(np.abs(recovered.chain_coeffs() - ref.chain_coeffs())))
    results.append(
        CheckResult(
            name="reference chain parameter round trip",
            expected="max error <= 1e-9 on all variances and coefficients",
            actual=f"variance err {var_err:.3g}, coefficient err {coeff_err:.3g}",
            passed=var_err <= 1e-9 and coeff_err <= 1e-9,
        )
    )
    return results


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results)
