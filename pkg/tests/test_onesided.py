import numpy as np
import numpy.random as npr
import pytest
from numpy.testing import assert_allclose

from ibkernel.errors import InsufficientSupport, RankDeficientConstraints
from ibkernel.kernels import (
    BasisDegree,
    KernelSource,
    SolveMode,
    WeightFunction,
    assemble_system,
    build_basis,
)
from ibkernel.onesided import (
    KernelBounds,
    SideMask,
    SignedDistance,
    classify_side,
    generate_one_sided_kernel,
    restrict_weights,
)


class TestSignedDistance:
    def test_circle_values(self):
        sd = SignedDistance.circle([0.0, 0.0], 0.5)
        assert sd.evaluator([0.6, 0.0]) == pytest.approx(0.1, abs=1e-15)
        assert sd.evaluator([0.3, 0.0]) == pytest.approx(-0.2, abs=1e-15)
        assert sd.evaluator([0.5, 0.0]) == pytest.approx(0.0, abs=1e-15)

    def test_evaluate_batch(self):
        sd = SignedDistance.circle([1.0, 1.0], 1.0)
        vals = sd.evaluate([[1.0, 1.0], [3.0, 1.0]])
        assert_allclose(vals, [-1.0, 1.0])

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            SignedDistance.circle([0.0, 0.0], 0.0)

    def test_custom_evaluator(self):
        # half-plane x > 0.25
        sd = SignedDistance(lambda p: p[0] - 0.25)
        mask = classify_side(sd, [[0.0, 5.0], [0.3, -5.0]])
        assert not mask.plus[0]
        assert mask.plus[1]


class TestClassify:
    def test_ties_to_minus(self):
        sd = SignedDistance.circle([0.0, 0.0], 0.5)
        mask = classify_side(sd, [[0.6, 0.0], [0.3, 0.0], [0.5, 0.0]])
        assert mask.plus.tolist() == [True, False, False]
        assert mask.n_plus == 1
        assert mask.n_minus == 2
        assert len(mask) == 3

    def test_mask_coercion(self):
        mask = SideMask([1, 0, 1])
        assert mask.plus.dtype == bool
        assert mask.n_plus == 2


class TestKernelBounds:
    def test_valid(self):
        kb = KernelBounds(-0.07, 0.5)
        assert kb.alpha == -0.07 and kb.beta == 0.5

    def test_invalid(self):
        with pytest.raises(ValueError):
            KernelBounds(0.5, -0.07)


def _square_system(eval_point=(0.05, 0.05), h=0.1, half=3):
    wf = WeightFunction.six_point_spline(h)
    basis = build_basis(2, BasisDegree.LINEAR)
    centers = h * (np.arange(-half, half + 1) + 0.5)
    sites = np.array([[x, y] for x in centers for y in centers])
    return assemble_system(sites, eval_point, wf, basis), sites


class TestRestrict:
    def test_all_plus_is_identity(self):
        system, sites = _square_system()
        sd = SignedDistance(lambda p: 1.0)
        restricted = restrict_weights(system, classify_side(sd, sites))
        assert_allclose(restricted.Wdiag, system.Wdiag)
        assert_allclose(restricted.A, system.A)

    def test_all_minus_insufficient(self):
        system, sites = _square_system()
        sd = SignedDistance(lambda p: -1.0)
        with pytest.raises(InsufficientSupport):
            restrict_weights(system, classify_side(sd, sites))

    def test_collinear_survivors_lose_rank(self):
        system, sites = _square_system()
        # keep the single row of sites through the evaluation point: the
        # y-moment row is then identically zero and the system loses rank
        mask = SideMask(np.abs(sites[:, 1] - 0.05) < 1e-12)
        assert mask.n_plus >= system.n_basis
        with pytest.raises(RankDeficientConstraints):
            restrict_weights(system, mask)

    def test_mask_length_checked(self):
        system, _ = _square_system()
        with pytest.raises(ValueError):
            restrict_weights(system, SideMask(np.ones(3, dtype=bool)))

    def test_minus_weights_zeroed(self):
        system, sites = _square_system()
        sd = SignedDistance(lambda p: p[0])
        mask = classify_side(sd, sites)
        restricted = restrict_weights(system, mask)
        assert np.all(restricted.Wdiag[~mask.plus] == 0.0)
        assert_allclose(restricted.Wdiag[mask.plus], system.Wdiag[mask.plus])


class TestGenerate:
    def setup_method(self):
        self.h = 0.1
        self.wf = WeightFunction.six_point_spline(self.h)
        self.basis = build_basis(2, BasisDegree.LINEAR)
        centers = self.h * (np.arange(-3, 4) + 0.5)
        self.sites = np.array([[x, y] for x in centers for y in centers])

    def test_two_sided_on_center(self):
        # evaluation at a grid node: the raw tensor weights already meet
        # the moment conditions, so the minimizer returns them unchanged
        ev = [0.05, 0.05]
        kw = generate_one_sided_kernel(self.sites, ev, self.wf, self.basis)
        system = assemble_system(self.sites, ev, self.wf, self.basis)
        assert_allclose(kw.psi, system.Wdiag, atol=1e-13)
        assert kw.source is KernelSource.PROBLEM_D
        assert kw.mode is SolveMode.EXACT

    def test_one_sided_zeros_minus_side(self):
        sd = SignedDistance(lambda p: p[0] - 0.02)
        ev = [0.05, 0.05]
        kw = generate_one_sided_kernel(
            self.sites, ev, self.wf, self.basis, sd=sd
        )
        mask = classify_side(sd, self.sites)
        assert np.all(kw.psi[~mask.plus] == 0.0)
        assert np.all(~kw.support[~mask.plus])
        system = assemble_system(self.sites, ev, self.wf, self.basis)
        assert np.max(np.abs(system.A @ kw.psi - system.p)) <= 1e-10

    def test_bounds_respected(self):
        sd = SignedDistance.circle([0.0, 0.0], 0.25)
        kb = KernelBounds(-0.07, 0.5)
        kw = generate_one_sided_kernel(
            self.sites, [0.3, 0.05], self.wf, self.basis, sd=sd, bounds=kb
        )
        live = kw.psi[kw.support]
        assert np.all(live >= kb.alpha - 1e-10)
        assert np.all(live <= kb.beta + 1e-10)
        assert kw.equality_residual <= 1e-10

    def test_tighter_bounds_cost_more(self):
        # the feasible set nests, so the minimum value cannot decrease
        sd = SignedDistance.circle([0.0, 0.0], 0.25)
        ev = [0.3, 0.05]
        system = assemble_system(self.sites, ev, self.wf, self.basis)
        restricted = restrict_weights(system, classify_side(sd, self.sites))
        keep = restricted.Wdiag > 0.0

        def cost(kw):
            live = kw.psi[keep]
            return float(live @ (live / restricted.Wdiag[keep]))

        tight = generate_one_sided_kernel(
            self.sites, ev, self.wf, self.basis, sd=sd,
            bounds=KernelBounds(-0.07, 0.5),
        )
        loose = generate_one_sided_kernel(
            self.sites, ev, self.wf, self.basis, sd=sd,
            bounds=KernelBounds(-0.2, 1.0),
        )
        assert tight.mode is SolveMode.EXACT
        assert loose.mode is SolveMode.EXACT
        assert cost(tight) >= cost(loose) - 1e-12

    def test_bounds_excluding_zero_with_elimination(self):
        sd = SignedDistance(lambda p: p[0] - 0.02)
        with pytest.raises(Exception) as err:
            generate_one_sided_kernel(
                self.sites, [0.05, 0.05], self.wf, self.basis, sd=sd,
                bounds=KernelBounds(0.1, 0.5),
            )
        assert err.typename in ("Infeasible",)

    def test_random_one_sided_moments(self):
        npr.seed(43)
        sd = SignedDistance.circle([0.0, 0.0], 0.3)
        centers = self.h * (np.arange(-7, 8) + 0.5)
        sites = np.array([[x, y] for x in centers for y in centers])
        mask = classify_side(sd, sites)
        for _ in range(10):
            ang = npr.uniform(0, 2 * np.pi)
            ev = 0.3 * np.array([np.cos(ang), np.sin(ang)])
            ev += npr.uniform(-0.01, 0.01, size=2)
            system = assemble_system(sites, ev, self.wf, self.basis)
            kw = generate_one_sided_kernel(
                sites, ev, self.wf, self.basis, sd=sd
            )
            assert np.max(np.abs(system.A @ kw.psi - system.p)) <= 1e-9
            assert np.all(kw.psi[~mask.plus] == 0.0)
