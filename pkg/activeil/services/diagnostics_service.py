"""
Diagnostics Service - Gradient checks and successor-representation dumps

=== check_gradients ===
Central finite differences against the analytic gradients of the four
trained objectives (WAE, joint adversarial objective, SR TD loss, policy TD
loss) on small tanh networks with fixed bandwidth kernels and fixed prior
samples, one random instance per seed.

=== sr_dump ===
psi(phi(s)) for every free maze cell of a saved run, one CSV row per cell.
"""
from pathlib import Path
from typing import Dict, Iterable, Union

import numpy as np
import pandas as pd
from loguru import logger

from activeil.config import config_from_text
from activeil.core.exceptions import ConfigError
from activeil.core.numerics import finite_diff_check
from activeil.environments import make_environment
from activeil.models.adversary import AdversaryHyper, Discriminator, PairBatch, adversary_loss_and_grads
from activeil.models.policy import PolicyModel, q_loss_and_grads
from activeil.models.representation import KernelSpec, WaeModel, sample_prior, wae_loss_and_grads
from activeil.models.successor import SrModel, sr_td_loss_and_grads, sr_vectors
from activeil.utils.checkpoint import load_checkpoint

GRAD_TOLERANCE = 1e-4
# denominator floor of the relative error, so exactly-zero gradients compare absolutely
GRAD_FLOOR = 1e-8

OBS_DIM, LATENT_DIM, N_ACTIONS, HIDDEN, BATCH = 5, 3, 4, (6,), 6


def _instance(seed: int):
    rng = np.random.default_rng(seed)
    kernel = KernelSpec("rbf", bandwidth=1.5)
    wae = WaeModel.create(OBS_DIM, LATENT_DIM, HIDDEN, rng, kernel=kernel, beta1=1.0)
    states = rng.normal(size=(BATCH, OBS_DIM))
    return rng, kernel, wae, states


def check_wae(seed: int) -> float:
    rng, kernel, wae, states = _instance(seed)
    prior = sample_prior(rng, BATCH, LATENT_DIM)

    def loss_fn():
        loss, grads = wae_loss_and_grads(wae, states, prior, kernel)
        return loss, grads.encoder.arrays() + grads.decoder.arrays()

    return finite_diff_check(loss_fn, wae.encoder.arrays() + wae.decoder.arrays(), floor=GRAD_FLOOR)


def check_adversary(seed: int) -> float:
    rng, kernel, wae, states = _instance(seed)
    disc = Discriminator.create(LATENT_DIM, N_ACTIONS, HIDDEN, rng)
    onehot = np.eye(N_ACTIONS)
    policy = PairBatch(states, onehot[rng.integers(N_ACTIONS, size=BATCH)])
    expert = PairBatch(rng.normal(size=(BATCH, OBS_DIM)), onehot[rng.integers(N_ACTIONS, size=BATCH)])
    hyper = AdversaryHyper(alpha1=0.7, alpha2=1.3, beta=0.9)
    prior_p, prior_e = sample_prior(rng, BATCH, LATENT_DIM), sample_prior(rng, BATCH, LATENT_DIM)
    params = disc.net.arrays() + wae.encoder.arrays() + wae.decoder.arrays()

    def loss_fn():
        parts, grads = adversary_loss_and_grads(disc, wae, policy, expert, hyper, prior_p, prior_e, kernel)
        return parts.total, grads.discriminator.arrays() + grads.encoder.arrays() + grads.decoder.arrays()

    return finite_diff_check(loss_fn, params, floor=GRAD_FLOOR)


def check_successor(seed: int) -> float:
    rng, _, wae, states = _instance(seed)
    sr = SrModel.create(LATENT_DIM, HIDDEN, rng, gamma=0.9)
    sr.target = SrModel.create(LATENT_DIM, HIDDEN, rng).psi
    next_states = rng.normal(size=(BATCH, OBS_DIM))
    dones = (rng.random(BATCH) < 0.3).astype(float)

    def loss_fn():
        loss, grads = sr_td_loss_and_grads(sr, wae, states, next_states, dones)
        return loss, grads.psi.arrays()

    return finite_diff_check(loss_fn, sr.psi.arrays(), floor=GRAD_FLOOR)


def check_policy(seed: int) -> float:
    rng = np.random.default_rng(seed)
    policy = PolicyModel.create(LATENT_DIM, N_ACTIONS, HIDDEN, rng, gamma=0.9, entropy_weight=0.5)
    policy.target = PolicyModel.create(LATENT_DIM, N_ACTIONS, HIDDEN, rng).q
    z, z_next = rng.normal(size=(BATCH, LATENT_DIM)), rng.normal(size=(BATCH, LATENT_DIM))
    actions = rng.integers(N_ACTIONS, size=BATCH)
    rewards = rng.normal(size=BATCH)
    dones = (rng.random(BATCH) < 0.3).astype(float)

    def loss_fn():
        loss, grads = q_loss_and_grads(policy, z, actions, rewards, z_next, dones)
        return loss, grads.arrays()

    return finite_diff_check(loss_fn, policy.q.arrays(), floor=GRAD_FLOOR)


CHECKS = {
    "wae": check_wae,
    "adversary": check_adversary,
    "successor": check_successor,
    "policy": check_policy,
}


def check_gradients(seeds: Iterable[int] = range(20)) -> Dict[str, float]:
    """Worst relative error per objective over all seeds"""
    seeds = list(seeds)
    worst = {name: max(check(seed) for seed in seeds) for name, check in CHECKS.items()}
    for name, err in worst.items():
        status = "✅" if err <= GRAD_TOLERANCE else "❌"
        logger.info(f"{status} {name}: max relative error {err:.2e} over {len(seeds)} seeds")
    return worst


def sr_dump(checkpoint: Union[str, Path], out: Union[str, Path, None] = None) -> pd.DataFrame:
    """
    SR vectors for every free maze cell of a saved run

    Columns: cell, sr_0 ... sr_<k-1>. Written as CSV when `out` is given.

    Raises:
        ConfigError: the checkpoint does not come from a maze run
    """
    models, meta = load_checkpoint(checkpoint)
    config = config_from_text(meta["config"])
    if config.env.kind != "maze":
        raise ConfigError("sr-dump is only defined for maze runs", ["env.kind"])
    task = make_environment(config.env)

    wae = WaeModel(models["encoder"], models["decoder"])
    sr = SrModel(models["sr_psi"], models["sr_target"], gamma=float(meta.get("gamma", config.successor.gamma)))
    cells = task.maze.free_cells()
    vectors = sr_vectors(sr, wae, np.stack([task.observe(c) for c in cells]))
    frame = pd.DataFrame(vectors, columns=[f"sr_{i}" for i in range(vectors.shape[1])])
    frame.insert(0, "cell", [task.maze.index(c) for c in cells])
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, lineterminator="\n")
    return frame
