import numpy as np
import pytest

from activeil.core.exceptions import ShapeError
from activeil.core.numerics import finite_diff_check
from activeil.models.adversary import (
    AdversaryHyper, AdversaryOptim, Discriminator, PairBatch, adversary_loss, adversary_loss_and_grads,
    adversary_train_step, encode_actions, reward, score,
)
from activeil.models.representation import KernelSpec, WaeModel, encode, sample_prior

LATENT, N_ACTIONS, OBS = 3, 4, 6
ONEHOT = np.eye(N_ACTIONS)
RBF = KernelSpec("rbf", bandwidth=1.5)


def _zero_disc() -> Discriminator:
    d = Discriminator.create(LATENT, N_ACTIONS, (8,), np.random.default_rng(0))
    return Discriminator(d.net.zeros_like(), LATENT, N_ACTIONS)


def _pairs(rng, n, action=None):
    actions = rng.integers(N_ACTIONS, size=n) if action is None else np.full(n, action)
    return PairBatch(rng.normal(size=(n, OBS)), ONEHOT[actions])


class TestScoreAndReward:
    def test_zero_net_scores_half(self, rng):
        d = _zero_disc()
        np.testing.assert_array_equal(score(d, rng.normal(size=(5, LATENT)), ONEHOT[[0, 1, 2, 3, 0]]), 0.5)
        assert reward(_zero_disc(), np.zeros(LATENT), ONEHOT[1]) == pytest.approx(0.0, abs=1e-15)

    def test_score_is_clamped(self, rng):
        d = Discriminator.create(LATENT, N_ACTIONS, (8,), rng)
        s = score(d, np.full((2, LATENT), 1e9) * [[1], [-1]], ONEHOT[[0, 1]])
        assert np.all((s >= 1e-7) & (s <= 1 - 1e-7))

    def test_reward_inverts_sigmoid(self):
        d = _zero_disc()
        d.net.biases[-1][0] = 1.7
        assert reward(d, np.zeros(LATENT), ONEHOT[2]) == pytest.approx(1.7)

    def test_reward_increases_with_score(self):
        d = _zero_disc()
        rewards = []
        for logit in np.linspace(np.log(0.01 / 0.99), np.log(0.99 / 0.01), 25):
            d.net.biases[-1][0] = logit
            rewards.append(reward(d, np.zeros(LATENT), ONEHOT[0]))
        assert np.all(np.diff(rewards) > 0)


class TestObjective:
    def test_untrained_classification_terms(self, rng):
        wae = WaeModel.create(OBS, LATENT, (8,), rng, kernel=RBF)
        policy, expert = _pairs(rng, 5), _pairs(rng, 7)
        hyper = AdversaryHyper(0.0, 0.0, 0.0)
        parts, _ = adversary_loss_and_grads(_zero_disc(), wae, policy, expert, hyper,
                                            sample_prior(rng, 5, LATENT), sample_prior(rng, 7, LATENT))
        assert parts.classification == pytest.approx(12 * np.log(0.5))
        assert parts.total == parts.classification

    def test_weights_enter_linearly(self, rng):
        wae = WaeModel.create(OBS, LATENT, (8,), rng, kernel=RBF)
        d = Discriminator.create(LATENT, N_ACTIONS, (8,), rng)
        policy, expert = _pairs(rng, 6), _pairs(rng, 6)
        pp, pe = sample_prior(rng, 6, LATENT), sample_prior(rng, 6, LATENT)
        hyper = AdversaryHyper(0.3, 0.6, 2.0)
        parts, _ = adversary_loss_and_grads(d, wae, policy, expert, hyper, pp, pe)
        expected = parts.classification + 0.3 * parts.wae_policy + 0.6 * parts.wae_expert + 2.0 * parts.mmd
        assert parts.total == pytest.approx(expected)
        assert adversary_loss(d, wae, policy, expert, hyper, pp, pe) == pytest.approx(parts.total)

    def test_empty_expert_dataset_skips_expert_terms(self, rng):
        wae = WaeModel.create(OBS, LATENT, (8,), rng, kernel=RBF)
        policy = _pairs(rng, 5)
        parts, grads = adversary_loss_and_grads(_zero_disc(), wae, policy, None, AdversaryHyper(),
                                                sample_prior(rng, 5, LATENT))
        assert parts.classification == pytest.approx(5 * np.log(0.5))
        assert parts.wae_expert == 0.0 and parts.mmd == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        wae = WaeModel.create(OBS, LATENT, (6,), rng, kernel=RBF)
        d = Discriminator.create(LATENT, N_ACTIONS, (6,), rng)
        policy, expert = _pairs(rng, 6), _pairs(rng, 6)
        pp, pe = sample_prior(rng, 6, LATENT), sample_prior(rng, 6, LATENT)
        hyper = AdversaryHyper(0.7, 1.3, 0.9)

        def loss_fn():
            parts, g = adversary_loss_and_grads(d, wae, policy, expert, hyper, pp, pe)
            return parts.total, g.discriminator.arrays() + g.encoder.arrays() + g.decoder.arrays()

        params = d.net.arrays() + wae.encoder.arrays() + wae.decoder.arrays()
        assert finite_diff_check(loss_fn, params, floor=1e-5) <= 1e-4


class TestTraining:
    def _setup(self, rng, lr=1e-2):
        wae = WaeModel.create(OBS, LATENT, (8,), rng, kernel=RBF)
        d = Discriminator.create(LATENT, N_ACTIONS, (8,), rng)
        return wae, d, AdversaryOptim.fresh(d, wae, lr, lr)

    def test_zero_learning_rate_changes_nothing(self, rng):
        wae, d, optim = self._setup(rng, lr=0.0)
        new_d, new_wae, _, _ = adversary_train_step(d, wae, _pairs(rng, 8), _pairs(rng, 8), AdversaryHyper(),
                                                   optim, rng)
        assert new_d.net.allclose(d.net) and new_wae.encoder.allclose(wae.encoder)
        assert new_wae.decoder.allclose(wae.decoder)

    def test_descends_on_a_fixed_batch(self):
        rng = np.random.default_rng(11)
        wae, d, optim = self._setup(rng)
        policy, expert = _pairs(rng, 16), _pairs(rng, 16)
        hyper = AdversaryHyper(0.5, 0.5, 0.5)
        pp, pe = sample_prior(rng, 16, LATENT), sample_prior(rng, 16, LATENT)
        start = adversary_loss(d, wae, policy, expert, hyper, pp, pe)
        for _ in range(100):
            d, wae, optim, _ = adversary_train_step(d, wae, policy, expert, hyper, optim, rng)
        assert adversary_loss(d, wae, policy, expert, hyper, pp, pe) < start

    def test_single_small_steps_rarely_increase_the_loss(self):
        decreased = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            wae, d, optim = self._setup(rng, lr=1e-3)
            policy, expert = _pairs(rng, 16), _pairs(rng, 16)
            hyper = AdversaryHyper()
            # same draws adversary_train_step makes from a generator with this seed
            prior_rng = np.random.default_rng(10_000 + seed)
            pp, pe = sample_prior(prior_rng, 16, LATENT), sample_prior(prior_rng, 16, LATENT)
            before = adversary_loss(d, wae, policy, expert, hyper, pp, pe)
            d, wae, _, parts = adversary_train_step(d, wae, policy, expert, hyper, optim,
                                                    np.random.default_rng(10_000 + seed))
            assert parts.total == pytest.approx(before)
            decreased += adversary_loss(d, wae, policy, expert, hyper, pp, pe) <= before
        assert decreased >= 95

    def test_separates_expert_from_policy_actions(self):
        rng = np.random.default_rng(5)
        wae, d, optim = self._setup(rng)
        hyper = AdversaryHyper(0.1, 0.1, 0.0)
        for _ in range(200):
            d, wae, optim, _ = adversary_train_step(d, wae, _pairs(rng, 16, action=2), _pairs(rng, 16, action=3),
                                                   hyper, optim, rng)
        z = encode(wae, rng.normal(size=(20, OBS)))
        # expert always chose right (3), the policy left (2)
        assert np.mean(score(d, z, ONEHOT[[3] * 20])) > np.mean(score(d, z, ONEHOT[[2] * 20]))


def test_encode_actions(maze):
    np.testing.assert_array_equal(encode_actions(maze, [1, 3]), ONEHOT[[1, 3]])
    assert encode_actions(maze, []).shape == (0, 4)


def test_discriminator_shape_check(rng):
    net = Discriminator.create(2, 2, (3,), rng).net
    with pytest.raises(ShapeError):
        Discriminator(net, 3, 2)
