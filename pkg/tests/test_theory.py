import math

import numpy as np
import pytest

from broyden_lab import theory
from broyden_lab.exceptions import Infeasible, OutOfDomain, ThresholdNotMet
from broyden_lab.theory import ProblemConstants

# 50-digit mpmath evaluations of the closed forms
GREEDY_N2_K4 = 6.8247687541430298847637826503576098003488421298267
RANDOM_N2_K2_D05 = 6177.9343780454781624403458420895204220725981466153
JAC_GREEDY_N2_K11 = 0.12013221962997240077698973866957115243713120003117
ORIGINAL_K9 = 0.00010161052685058172026621958034852410709749530051313


class TestGate:
    def test_examples(self):
        assert theory.check_initial_condition(ProblemConstants(c=1, M=1, n=4, r0=0, sigma0=0))
        assert not theory.check_initial_condition(ProblemConstants(c=1, M=1, n=4, r0=1, sigma0=0))

    def test_boundary(self):
        # 48 * sqrt(4) * r0 = 1/3 at r0 = 1/288
        k = ProblemConstants(c=1, M=1, n=4, r0=1 / 288, sigma0=0)
        assert theory.check_initial_condition(k)
        assert not theory.check_initial_condition(ProblemConstants(c=1, M=1, n=4, r0=1.001 / 288, sigma0=0))
        assert theory.check_initial_condition(ProblemConstants(c=1, M=1, n=4, r0=0, sigma0=1 / 3))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ProblemConstants(c=-1, M=1, n=2, r0=0, sigma0=0)

    def test_norm_selector(self):
        B0, J0 = np.diag([1.0, 1.0]), np.zeros((2, 2))
        s = theory.initial_constants(1, 1, B0, J0, np.zeros(2), np.zeros(2))
        f = theory.initial_constants(1, 1, B0, J0, np.zeros(2), np.zeros(2), norm="frobenius")
        assert s.sigma0 == pytest.approx(1.0) and s.sigma_norm == "spectral"
        assert f.sigma0 == pytest.approx(math.sqrt(2))


class TestRates:
    def test_greedy(self):
        assert theory.greedy_rate_bound(0, 5) == 1.0
        assert theory.greedy_rate_bound(1, 5) == pytest.approx(math.e, rel=1e-15)
        assert theory.greedy_rate_bound(4, 2) == pytest.approx(GREEDY_N2_K4, rel=1e-13)
        assert theory.log_greedy_rate_bound(4, 2) == pytest.approx(4 - 3 * math.log(2), rel=1e-15)

    def test_random(self):
        assert theory.random_rate_bound(0, 3, 0.1) == 1.0
        assert theory.random_rate_bound(2, 2, 0.5) == pytest.approx(RANDOM_N2_K2_D05, rel=1e-13)
        # delta = 0.1 gives a per-step prefactor of 40 n^2 e
        n = 7
        ratio = math.exp(theory.log_random_rate_bound(1, n, 0.1) - theory.log_random_rate_bound(0, n, 0.1))
        assert ratio == pytest.approx(40 * n * n * math.e, rel=1e-13)

    def test_jacobian_greedy(self):
        assert theory.jacobian_rate_bound_greedy(11, 2, 1.0) == pytest.approx(JAC_GREEDY_N2_K11, rel=1e-13)
        with pytest.raises(ThresholdNotMet) as info:
            theory.jacobian_rate_bound_greedy(4 * 3 + 2, 3, 1.0)
        assert info.value.min_k == 15
        n = 5
        r = theory.jacobian_rate_bound_greedy(30, n, 2.0) / theory.jacobian_rate_bound_greedy(28, n, 2.0)
        assert r == pytest.approx(1 - 1 / n, rel=1e-13)

    def test_jacobian_random_threshold(self):
        k0 = theory.random_jacobian_threshold(3)
        with pytest.raises(ThresholdNotMet):
            theory.jacobian_rate_bound_random(k0 - 1, 3, 1.0)
        assert theory.jacobian_rate_bound_random(k0, 3, 1.0) > 0

    def test_original(self):
        assert theory.original_broyden_bound(1) == pytest.approx(2.0)
        assert theory.original_broyden_bound(4) == pytest.approx(0.125, rel=1e-15)
        assert theory.original_broyden_bound(9) == pytest.approx(ORIGINAL_K9, rel=1e-13)

    def test_crossover(self):
        assert theory.crossover_iteration(2) == 29
        assert theory.crossover_iteration(10) == 266
        vals = [theory.crossover_iteration(n) for n in range(2, 101)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_compare_rates(self):
        rows = theory.compare_rates(2, 100)
        assert rows[0] == (1, 2.0, pytest.approx(math.e), False)
        assert all(r[3] for r in rows[28:])

    def test_compare_underflow(self):
        # both envelopes underflow to zero long before k = 5000; the flag is still decided
        rows = theory.compare_rates(3, 5000)
        assert rows[-1][1] == 0.0 and rows[-1][2] == 0.0 and rows[-1][3]


class TestQm:
    def test_zero_radius(self):
        k = ProblemConstants(c=2, M=1, n=5, r0=0, sigma0=0.1)
        assert theory.compute_qm(k) == pytest.approx(0.2 / 0.8, abs=1e-12)

    def test_substitution(self):
        k = ProblemConstants(c=1, M=1, n=4, r0=1e-6, sigma0=0)
        q = theory.compute_qm(k)
        s1, s2 = theory.qm_constraint_slacks(q, k)
        assert s1 >= 0 and abs(s2) <= 1e-10
        lo, hi = theory.qm_bracket(k)
        assert lo <= q <= hi

    def test_minimal(self):
        k = ProblemConstants(c=1, M=2, n=9, r0=1e-5, sigma0=0.05)
        q = theory.compute_qm(k)
        assert min(theory.qm_constraint_slacks(q - 1e-6, k)) < 0

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            theory.compute_qm(ProblemConstants(c=1, M=1, n=4, r0=1, sigma0=0))


class TestNeumann:
    def test_examples(self):
        assert theory.neumann_inverse_bound(0.0) == (1.0, 0.0)
        assert theory.neumann_inverse_bound(0.5) == (2.0, 1.0)
        with pytest.raises(OutOfDomain):
            theory.neumann_inverse_bound(1.0)

    def test_random_five(self):
        rng = np.random.default_rng(42)
        E = rng.standard_normal((5, 5))
        E *= 0.3 / np.linalg.norm(E, 2)
        inv = np.linalg.solve(np.eye(5) - E, np.eye(5))
        assert np.linalg.norm(inv, 2) <= 1 / 0.7


class TestAudits:
    def _rec(self, k, r, s, res=1.0):
        from broyden_lab.solver import IterationRecord
        return IterationRecord(k=k, res_norm=res, r_k=r, sigma_abs=s)

    def test_sigma_recursion_detects_violation(self):
        good = [self._rec(0, 1.0, 1.0), self._rec(1, 0.5, 1.0)]
        bad = [self._rec(0, 1e-3, 1.0), self._rec(1, 1e-3, 2.0)]
        assert theory.audit_sigma_recursion(good, 4, 1.0).passed
        assert not theory.audit_sigma_recursion(bad, 4, 1.0).passed

    def test_r_recursion(self):
        ok = [self._rec(0, 0.1, 0.1), self._rec(1, 0.001, 0.1)]
        bad = [self._rec(0, 0.1, 0.1), self._rec(1, 0.09, 0.1)]
        assert theory.audit_r_recursion(ok, 1.0, 1.0).passed
        assert not theory.audit_r_recursion(bad, 1.0, 1.0).passed

    def test_jacobian_decay(self):
        assert theory.audit_jacobian_decay([1.0, 0.9, 0.8], 1.0, 4).passed
        assert not theory.audit_jacobian_decay([1.0, 3.0], 1.0, 4).passed

    def test_signature(self):
        recs = [self._rec(k, r, 0, res=r) for k, r in enumerate([1, 1e-1, 1e-3, 1e-6, 1e-10, 1e-15])]
        assert theory.error_ratios(recs) == pytest.approx([1e-1, 1e-2, 1e-3, 1e-4])
        assert theory.superlinear_signature(recs)
        flat = [self._rec(k, 0.5**k, 0, res=0.5**k) for k in range(8)]
        assert not theory.superlinear_signature(flat)
