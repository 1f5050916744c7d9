"""Genus-0 validators, two-point functions, hierarchies, and solvers."""

from fractions import Fraction
from math import factorial

import pytest

from ottr.algebra import JetPoly, phivar, poly_eq, vvar
from ottr.bigphase import (
    BigSeries,
    TheoryData,
    Truncation,
    eval_jetpoly,
    mono_from_factors,
    partial,
    phitop,
    s_var,
    series_eq,
    t_var,
    vtop,
)
from ottr.genus0 import (
    SeedError,
    extended_flows,
    delta,
    gamma,
    monomials_up_to,
    omega,
    principal_flow,
    solve_closed_order_by_order,
    solve_open_order_by_order,
    two_point_table,
    validate_closed_genus0,
    validate_open_genus0,
)

TR = Truncation.of(8, 3)
TH = TheoryData.rank1(TR)
JT = TR.jet()


def jvar(alpha=1, jet=0):
    return JetPoly.var(vvar(alpha, jet), JT)


def jphi(jet=0):
    return JetPoly.var(phivar(jet), JT)


def witten_coefficient(mono):
    """Independent combinatorial oracle for the rank-1 genus-0 coefficients."""
    n = sum(e for _, e in mono)
    weight = sum(var[2] * e for var, e in mono)
    if n < 3 or weight != n - 3:
        return Fraction(0)
    denom = 1
    for (_kind, _alpha, a), e in mono:
        denom *= factorial(a) ** e * factorial(e)
    return Fraction(factorial(n - 3), denom)


class TestClosedSolver:
    def test_matches_combinatorial_oracle(self, f0, theory8):
        for mono in monomials_up_to(theory8.t_vars(), 8):
            assert f0.coefficient(mono) == witten_coefficient(mono), mono

    def test_t03_t1_coefficient(self, f0):
        mono = mono_from_factors([(t_var(1, 0), 3), (t_var(1, 1), 1)])
        assert f0.coefficient(mono) == Fraction(1, 6)

    def test_free_coefficients_reported(self, witten_solve):
        # one-point and purely-positive-level two-point data is unconstrained
        expected = {m for m in monomials_up_to(TH.t_vars(), 2)
                    if m and all(var[2] >= 1 for var, _ in m)}
        assert set(witten_solve.free) == expected

    def test_zero_seed_reports_inconsistency(self):
        with pytest.raises(SeedError):
            solve_closed_order_by_order(JetPoly.zero(JT), TH)

    def test_idempotence(self, f0, witten_seed, theory8):
        from ottr.bigphase import restrict_small

        assert restrict_small(f0, theory8).terms == witten_seed.terms


class TestClosedValidation:
    def test_witten_passes(self, f0, theory8):
        report = validate_closed_genus0(f0, theory8)
        assert report.all_zero
        ids = {e.equation for e in report.entries}
        assert ids == {"string", "dilaton", "trr0", "two_point_shift"}

    def test_bare_cubic_string_at_level_zero_window(self):
        tr = Truncation.of(3, 0)
        th = TheoryData.rank1(tr)
        t0 = BigSeries.var(t_var(1, 0), tr)
        f = t0 * t0 * t0 * Fraction(1, 6)
        report = validate_closed_genus0(f, th)
        assert report.entry("string").is_zero

    def test_zero_potential_fails_string(self, theory8):
        report = validate_closed_genus0(BigSeries.zero(TR), theory8)
        res = report.entry("string").residual
        mono = mono_from_factors([(t_var(1, 0), 2)])
        assert res.coefficient(mono) == Fraction(1, 2)
        assert not report.all_zero


class TestOpenSolver:
    def test_validates(self, f0, f0o, theory8):
        report = validate_open_genus0(f0, f0o, theory8)
        assert report.all_zero

    def test_free_coefficients(self, open_solve):
        assert set(open_solve.free) == {
            ((t_var(1, a), 1),) for a in (1, 2, 3)
        } | {((s_var(a), 1),) for a in (1, 2, 3)}

    def test_zero_seed_rejected(self, f0):
        with pytest.raises(SeedError):
            solve_open_order_by_order(f0, JetPoly.zero(JT), TH)

    def test_idempotence(self, f0o, open_seed, theory8):
        from ottr.bigphase import restrict_small

        assert restrict_small(f0o, theory8).terms == open_seed.terms


class TestOpenValidation:
    def test_zero_open_potential_string_residual(self, f0, theory8):
        report = validate_open_genus0(f0, BigSeries.zero(TR), theory8)
        res = report.entry("open_string").residual
        assert res == BigSeries.var(s_var(0), TR)

    def test_normalization_entry(self, f0, f0o, theory8):
        report = validate_open_genus0(f0, f0o, theory8)
        assert report.entry("normalization").is_zero

    def test_seed_constraint_from_open_string(self, f0o, theory8):
        from ottr.bigphase import restrict_small
        from ottr.algebra import jet_partial

        seed = restrict_small(f0o, theory8)
        assert jet_partial(seed, vvar(1, 0)).terms == jphi().terms


class TestTwoPoint:
    def test_omega_witten_00(self, f0, theory8):
        assert poly_eq(omega(f0, 1, 0, 1, 0, theory8), jvar())

    def test_omega_symmetry(self, f0, theory8):
        for (a, b) in [(0, 1), (1, 2), (0, 3)]:
            assert poly_eq(omega(f0, 1, a, 1, b, theory8),
                           omega(f0, 1, b, 1, a, theory8))

    def test_omega_zero_potential(self, theory8):
        assert omega(BigSeries.zero(TR), 1, 0, 1, 0, theory8).is_zero()

    def test_gamma_delta_seed_values(self, f0o, theory8):
        assert poly_eq(gamma(f0o, 1, 0, theory8), jphi())
        expect = jvar() + jphi() * jphi() * Fraction(1, 2)
        assert poly_eq(delta(f0o, 0, theory8), expect)

    def test_gamma_delta_zero(self, theory8):
        assert gamma(BigSeries.zero(TR), 1, 0, theory8).is_zero()
        assert delta(BigSeries.zero(TR), 0, theory8).is_zero()

    def test_window_enforced(self, f0, theory8):
        with pytest.raises(IndexError):
            omega(f0, 1, 4, 1, 0, theory8)


class TestHierarchy:
    def test_kdv_flow(self, f0, theory8):
        flow = principal_flow(f0, 1, 1, theory8)[0]
        assert poly_eq(flow, jvar() * jvar(1, 1))

    def test_unit_direction_flow(self, f0, theory8):
        flow = principal_flow(f0, 1, 0, theory8)[0]
        assert poly_eq(flow, jvar(1, 1))

    def test_window_error(self, f0, theory8):
        with pytest.raises(IndexError):
            principal_flow(f0, 1, 4, theory8)

    def test_s_flow_of_v_vanishes(self, f0, f0o, theory8):
        flows = extended_flows(f0, f0o, theory8, s_index=0)
        assert all(p.is_zero() for p in flows.v)

    def test_phi_s0_flow(self, f0, f0o, theory8):
        flows = extended_flows(f0, f0o, theory8, s_index=0)
        expect = jvar(1, 1) + jphi() * jphi(1)
        assert poly_eq(flows.phi, expect)

    def test_zero_open_potential(self, f0, theory8):
        flows = extended_flows(f0, BigSeries.zero(TR), theory8, s_index=1)
        assert flows.phi.is_zero()

    def test_vtop_solves_principal_hierarchy(self, f0, theory8):
        sol = vtop(f0, theory8)
        for b in range(theory8.trunc.level_max + 1):
            rhs = eval_jetpoly(principal_flow(f0, 1, b, theory8)[0],
                               sol, None, theory8)
            lhs = partial(sol[0], t_var(1, b))
            assert series_eq(lhs, rhs), b

    def test_solution_pair_solves_extended_hierarchy(self, f0, f0o, theory8):
        sol_v = vtop(f0, theory8)
        sol_phi = phitop(f0o, theory8)
        for b in range(theory8.trunc.level_max + 1):
            tf = extended_flows(f0, f0o, theory8, t_index=(1, b))
            assert series_eq(partial(sol_phi, t_var(1, b)),
                             eval_jetpoly(tf.phi, sol_v, sol_phi, theory8))
            sf = extended_flows(f0, f0o, theory8, s_index=b)
            assert series_eq(partial(sol_phi, s_var(b)),
                             eval_jetpoly(sf.phi, sol_v, sol_phi, theory8))
            assert partial(sol_v[0], s_var(b)).is_zero()


class TestOpenRecovery:
    def test_gamma_delta_recover_derivatives(self, f0, f0o, theory8):
        sol_v = vtop(f0, theory8)
        sol_phi = phitop(f0o, theory8)
        table = two_point_table(f0, f0o, theory8)
        for a in range(theory8.trunc.level_max + 1):
            assert series_eq(eval_jetpoly(table.gamma[(1, a)], sol_v, sol_phi, theory8),
                             partial(f0o, t_var(1, a)))
            assert series_eq(eval_jetpoly(table.delta[a], sol_v, sol_phi, theory8),
                             partial(f0o, s_var(a)))

    def test_homogeneity_of_tables(self, f0, f0o, theory8):
        from ottr.algebra import standard_degree

        table = two_point_table(f0, f0o, theory8)
        for poly in list(table.omega.values()) + list(table.gamma.values()) \
                + list(table.delta.values()):
            assert set(standard_degree(poly)) <= {0}
