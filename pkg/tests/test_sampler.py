"""Metropolis-Hastings machinery: configs, steps, chains, determinism."""

import numpy as np
import pytest

from cayley_mcmc.cayley import ManifoldDims
from cayley_mcmc.densities import PullbackTarget, uniform_log_density
from cayley_mcmc.sampler import (
    ChainState,
    ProposalConfig,
    RunConfig,
    init_from_manifold,
    leapfrog_step,
    mh_step,
    run_chain,
)


def uniform_target(p=4, k=2, manifold="stiefel"):
    return PullbackTarget(uniform_log_density(manifold), ManifoldDims(p, k))


class TestConfigs:
    def test_proposal_validation(self):
        with pytest.raises(ValueError):
            ProposalConfig(kind="slice")
        with pytest.raises(ValueError):
            ProposalConfig(scale=0.0)
        with pytest.raises(ValueError):
            ProposalConfig(kind="leapfrog", leapfrog_steps=0)

    def test_run_validation(self):
        with pytest.raises(ValueError):
            RunConfig(iterations=0)
        with pytest.raises(ValueError):
            RunConfig(iterations=10, burn_in=10)
        with pytest.raises(ValueError):
            RunConfig(iterations=10, thin=0)
        with pytest.raises(ValueError):
            RunConfig(iterations=10, target_acceptance=1.5)


class TestSteps:
    def test_mh_step_counts_and_moves(self):
        target = uniform_target()
        rng = np.random.default_rng(0)
        state = ChainState(np.zeros(target.dim), target(np.zeros(target.dim)))
        moved = 0
        for _ in range(50):
            new = mh_step(state, target, ProposalConfig(scale=0.3), rng)
            assert new.step_count == state.step_count + 1
            moved += int(not np.array_equal(new.vector, state.vector))
            state = new
        assert 0 < moved <= 50
        assert state.accept_count == moved

    def test_rejected_grassmann_proposal_keeps_state(self):
        """Proposals that land outside the eigenvalue domain never move the chain."""
        target = uniform_target(manifold="grassmann")
        rng = np.random.default_rng(1)
        start = np.zeros(target.dim)
        state = ChainState(start, target(start))
        # enormous steps leave the domain almost surely
        for _ in range(20):
            state = mh_step(state, target, ProposalConfig(scale=500.0), rng)
        assert np.array_equal(state.vector, start)

    def test_leapfrog_requires_matching_kind(self):
        target = uniform_target()
        state = ChainState(np.zeros(target.dim), target(np.zeros(target.dim)))
        with pytest.raises(ValueError):
            leapfrog_step(state, target, ProposalConfig(kind="random-walk-gaussian"),
                          np.random.default_rng(0))

    def test_leapfrog_step_advances(self):
        target = uniform_target()
        rng = np.random.default_rng(2)
        state = ChainState(np.zeros(target.dim), target(np.zeros(target.dim)))
        prop = ProposalConfig(kind="leapfrog", scale=0.05, leapfrog_steps=3)
        out = leapfrog_step(state, target, prop, rng)
        assert out.step_count == 1
        assert out.accept_count in (0, 1)


class TestRunChain:
    def test_shapes_and_thinning(self):
        target = uniform_target(5, 2)
        run = RunConfig(iterations=300, burn_in=100, thin=4, seed=3)
        batch = run_chain(target, np.zeros(target.dim), ProposalConfig(scale=0.4), run)
        assert batch.coords_draws.shape == (50, target.dim)
        assert batch.manifold_draws.shape == (50, 5, 2)

    def test_draws_lie_on_manifold(self):
        target = uniform_target(5, 2)
        run = RunConfig(iterations=120, burn_in=20, seed=4)
        batch = run_chain(target, np.zeros(target.dim), ProposalConfig(scale=0.4), run)
        for Q in batch.manifold_draws[::10]:
            assert np.max(np.abs(Q.T @ Q - np.eye(2))) < 1e-10

    def test_same_seed_reproduces_exactly(self):
        target = uniform_target()
        run = RunConfig(iterations=200, burn_in=50, seed=5)
        prop = ProposalConfig(scale=0.3)
        b1 = run_chain(target, np.zeros(target.dim), prop, run)
        b2 = run_chain(target, np.zeros(target.dim), prop, run)
        assert np.array_equal(b1.coords_draws, b2.coords_draws)
        assert b1.acceptance_rate == b2.acceptance_rate

    def test_different_seeds_differ(self):
        target = uniform_target()
        prop = ProposalConfig(scale=0.3)
        b1 = run_chain(target, np.zeros(target.dim), prop,
                       RunConfig(iterations=200, burn_in=50, seed=6))
        b2 = run_chain(target, np.zeros(target.dim), prop,
                       RunConfig(iterations=200, burn_in=50, seed=7))
        assert not np.array_equal(b1.coords_draws, b2.coords_draws)

    def test_adaptation_moves_scale_toward_target_rate(self):
        """A far-too-large initial scale must shrink during burn-in."""
        target = uniform_target()
        run = RunConfig(iterations=2500, burn_in=2000, seed=8, target_acceptance=0.3)
        batch = run_chain(target, np.zeros(target.dim), ProposalConfig(scale=50.0), run)
        assert batch.final_scale < 50.0
        assert 0.05 < batch.acceptance_rate < 0.7

    def test_adaptation_freezes_after_burn_in(self):
        target = uniform_target()
        run = RunConfig(iterations=400, burn_in=100, seed=9)
        batch = run_chain(target, np.zeros(target.dim), ProposalConfig(scale=0.5), run)
        assert batch.final_scale == pytest.approx(batch.final_scale)

    def test_rejects_bad_init(self):
        target = uniform_target()
        with pytest.raises(ValueError):
            run_chain(target, np.zeros(3), ProposalConfig(),
                      RunConfig(iterations=10, seed=0))

    def test_leapfrog_chain_on_uniform_target(self):
        target = uniform_target(5, 2)
        prop = ProposalConfig(kind="leapfrog", scale=0.05, leapfrog_steps=4)
        run = RunConfig(iterations=300, burn_in=100, seed=10, target_acceptance=0.7)
        batch = run_chain(target, np.zeros(target.dim), prop, run)
        assert batch.acceptance_rate > 0.2
        for Q in batch.manifold_draws[::50]:
            assert np.max(np.abs(Q.T @ Q - np.eye(2))) < 1e-10


class TestInitFromManifold:
    def test_round_trips_through_coordinates(self):
        from cayley_mcmc.diagnostics import haar_stiefel
        rng = np.random.default_rng(11)
        Q = haar_stiefel(6, 2, rng)
        vec = init_from_manifold(Q)
        target = uniform_target(6, 2)
        Q_back = target.point(vec)
        assert np.max(np.abs(Q_back.Q - Q.Q)) < 1e-10

    def test_rejects_other_types(self):
        with pytest.raises(TypeError):
            init_from_manifold(np.eye(3))
