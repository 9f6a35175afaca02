"""Acceptance criteria 1-10 at their stated tolerances.

Each test records a one-line PASS/FAIL summary; the lines are printed in
the pytest terminal summary and by running this file as a script.
Criteria whose target values could not be reproduced are marked
``xfail(strict=True)``: they run at full tolerance and must keep failing.
"""

import pytest

from deltawell import acceptance as A

LINES = {}


def _run(key, fn, *args):
    if key not in LINES:
        res = fn(*args)
        LINES[key] = res
        print(res.line)
    return LINES[key]


def test_criterion_1_unitarity():
    assert _run(1, A.criterion1).passed


def test_criterion_2_decay_rate_scaling():
    assert _run(2, A.criterion2).passed


@pytest.mark.xfail(strict=True, reason="at r=0.1 the decay is still exponential on [100, 400]")
def test_criterion_3_power_law_tail():
    assert _run(3, A.criterion3).passed


def test_criterion_3_supplementary_strong_drive():
    assert _run("3s", A.criterion3, A.TAIL_R_SUPPLEMENTARY).passed


def test_criterion_4_laplace_cross_validation():
    assert _run(4, A.criterion4).passed


def test_criterion_5_kernel_transform():
    assert _run(5, A.criterion5).passed


@pytest.mark.xfail(strict=True, reason="first intersection is 0.699 at s_p, not 0.327")
def test_criterion_6_continued_fraction():
    assert _run(6, A.criterion6).passed


def test_criterion_6_envelope_width():
    res = _run(6, A.criterion6)
    assert res.measured["width"] < A.CF_WIDTH_TOL


@pytest.mark.xfail(strict=True, reason="the overlap is purely imaginary, c = 0.551i")
def test_criterion_7_overlap_constant():
    assert _run(7, A.criterion7).passed


def test_criterion_7_remainder_certified():
    res = _run(7, A.criterion7)
    assert res.measured["remainder_bound"] < A.OVERLAP_TOL


@pytest.mark.xfail(strict=True, reason="off-root runs need t ~ 1e4 to reach the power-law tail")
def test_criterion_8_ionization_dichotomy():
    assert _run(8, A.criterion8).passed


def test_criterion_8_plateau_at_root():
    on = _run(8, A.criterion8).measured["on"]
    assert on["floor"] > A.DICHOTOMY_FLOOR
    assert abs(on["band_late"] - on["band_early"]) <= A.DICHOTOMY_BAND_REL * on["band_early"]


def test_criterion_9_genericity():
    assert _run(9, A.criterion9).passed


def test_criterion_10_pole_cancellation():
    assert _run(10, A.criterion10).passed


if __name__ == "__main__":
    for number, fn in A.ALL.items():
        print(fn().line, flush=True)
    print(A.criterion3(A.TAIL_R_SUPPLEMENTARY).line)
