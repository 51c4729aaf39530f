import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from heavyprod.params import (
    InfeasibleParams,
    Params,
    derive,
    empirical_v,
    flag_threshold_check,
    subset_count,
    theory_v,
    threshold_for,
    validate_report,
)


def test_theory_mode_rejects_at_desk_scale():
    assert theory_v(4096, 64) == 119
    assert 2 * math.exp(-(119**2) / 128) <= 4096**-13 < 2 * math.exp(-(118**2) / 128)
    with pytest.raises(InfeasibleParams, match="no amplification gap"):
        derive(4096, 64, 1, mode="theory")


def test_subset_count_figure_example():
    assert subset_count(5, 2) == 16


def test_rho_09_example():
    p = derive(256, 60, 0.9, v=18)
    assert p.w == 3
    assert abs(math.sqrt(10) * 256 ** (1 / 3) - 20.08) < 0.01
    assert p.r == math.ceil(math.log(math.sqrt(10) * 256 ** (1 / 3), 3)) == 3
    assert (p.h, p.g) == (64, 4)
    assert p.t == subset_count(60, 3) and p.u == subset_count(60, 2)


def test_acceptance_parameters():
    p = derive(256, 60, 0.8, v=18)
    assert p.w == Fraction(8, 3)
    assert (p.r, p.h, p.g, p.reps, p.threshold) == (4, 64, 4, 80, 48)
    assert p.t == 523686 and p.u == 1831 and p.t_effective == 489406


def test_flag_examples():
    p = derive(256, 60, 0.9, v=18)
    assert p.theta_cmp == (40, 16 * 18**6)
    assert not flag_threshold_check(0, p)
    assert flag_threshold_check(55**3, p)
    assert 9 * 166375**2 >= 40 * 16 * 18**6
    assert not flag_threshold_check(20000, p)


def test_flag_cutoff_is_exact():
    p = derive(256, 60, 0.8, v=18)
    c = p.flag_cutoff
    assert c == 885236
    assert flag_threshold_check(c, p) and not flag_threshold_check(c - 1, p)


@given(st.integers(-(10**12), 10**12), st.integers(0, 10**12))
def test_flag_symmetric_and_monotone(c, extra):
    p = derive(256, 60, 0.9, v=18)
    assert flag_threshold_check(c, p) == flag_threshold_check(-c, p)
    if flag_threshold_check(c, p):
        assert flag_threshold_check(abs(c) + extra, p)


@given(st.integers(8, 5000), st.integers(20, 120), st.fractions(Fraction(1, 2), 1))
def test_recomputation_matches_invariants(n, d, rho):
    v = max(1, math.floor(rho * d / 2))
    try:
        p = derive(n, d, rho, v=v, memory_budget=2**62)
    except InfeasibleParams:
        return
    w = p.w
    assert w == p.rho * d / v and w > 1
    assert w ** (6 * p.r) >= 1000 * n * n
    assert p.r == 1 or w ** (6 * (p.r - 1)) < 1000 * n * n
    assert p.t == sum(math.comb(d, i) for i in range(min(p.r, d) + 1))
    assert p.u == sum(math.comb(d, i) for i in range(min((p.r + 1) // 2, d) + 1)) <= p.t
    h = p.h
    assert h & (h - 1) == 0 and h**3 >= n * n
    assert h == 1 or (h // 2) ** 3 < n * n
    assert p.g == -(-n // h)
    assert p.reps == math.ceil(10 * math.log2(n))


def test_group_count_values():
    for n, h in [(8, 4), (27, 16), (64, 16), (256, 64), (512, 64), (1024, 128), (4096, 256)]:
        assert derive(n, 60, 0.9, v=18, memory_budget=2**62).h == h


def test_errors():
    with pytest.raises(ValueError):
        derive(7, 60, 0.8, v=18)
    with pytest.raises(ValueError):
        derive(64, 60, 0, v=18)
    with pytest.raises(ValueError):
        derive(64, 60, 1.5, v=18)
    with pytest.raises(InfeasibleParams, match="no amplification gap"):
        derive(64, 60, 0.8, v=48)
    with pytest.raises(InfeasibleParams, match="infeasible subset count") as exc:
        derive(256, 60, 0.8, v=18, memory_budget=10**6)
    assert "t=523686" in str(exc.value) and "u=1831" in str(exc.value)


def test_empirical_default_and_w_override():
    assert empirical_v(256, 60) == math.ceil(math.sqrt(120 * math.log(2 * 256**2 / 0.01)))
    p = derive(256, 60, 0.8, w=Fraction(8, 3))
    assert p.v == 18
    with pytest.raises(InfeasibleParams):
        derive(256, 60, 0.8)  # the default v exceeds rho d at this size


def test_validate_report():
    p = derive(256, 60, 0.9, v=18)
    rep = validate_report(p)
    assert rep["tail_bound"] == pytest.approx(2 * math.exp(-2.7))
    assert rep["union_bound"] == pytest.approx(65536 * 2 * math.exp(-2.7))
    assert 8.7e3 < rep["union_bound"] < 8.9e3
    assert rep["warnings"]
    assert rep["theta"] == pytest.approx(math.sqrt(10) * 4 * 18**3 / 3)
    assert rep["sigma_bound"] == 4 * 18**3
    q = derive(64, 20, 1, v=20 - 1)
    assert validate_report(q)["tail_bound"] == pytest.approx(2 * math.exp(-(19**2) / 40))


def test_tail_bound_at_v_equals_d():
    p = Params(n=64, d=30, rho=Fraction(1), v=30, w=Fraction(1), r=1, t=31, u=31, h=16, g=4, reps=60)
    assert validate_report(p)["tail_bound"] == pytest.approx(2 * math.exp(-15))


def test_json_round_trip():
    p = derive(256, 60, 0.8, v=18)
    assert Params.from_dict(json.loads(p.to_json())) == p


def test_threshold_for():
    assert threshold_for(0.8, 60) == 48
    assert threshold_for(Fraction(1, 3), 10) == 4
    assert threshold_for("0.9", 60) == 54
