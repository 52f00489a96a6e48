"""
Learned models and training memories - Export all models
"""
from activeil.models.representation import (
    KernelSpec, WaeModel, WaeGrads, adversarial_reg, decode, encode, kernel_matrix, mmd, mmd_with_grad,
    sample_prior, wae_loss, wae_loss_and_grads,
)
from activeil.models.adversary import (
    AdversaryGrads, AdversaryHyper, AdversaryLoss, AdversaryOptim, Discriminator, PairBatch,
    adversary_loss, adversary_loss_and_grads, adversary_train_step, encode_actions, reward, score,
)
from activeil.models.successor import (
    SrModel, TabularSr, policy_chain, sr_forward, sr_td_loss, sr_td_loss_and_grads, sr_train_step, sr_vectors,
    sync_target, tabular_sr_solve, tabular_sr_td,
)
from activeil.models.memory import ExpertDataset, QueryBudget, ReplayBuffer, TransitionBatch
from activeil.models.policy import (
    PolicyModel, act, evaluate_greedy, imitation_rewards, policy_update, q_learning_step, q_loss_and_grads,
)
from activeil.models.ensemble import BootstrapEnsemble

__all__ = [
    # Representation
    "KernelSpec",
    "WaeModel",
    "WaeGrads",
    "adversarial_reg",
    "decode",
    "encode",
    "kernel_matrix",
    "mmd",
    "mmd_with_grad",
    "sample_prior",
    "wae_loss",
    "wae_loss_and_grads",

    # Adversary
    "AdversaryGrads",
    "AdversaryHyper",
    "AdversaryLoss",
    "AdversaryOptim",
    "Discriminator",
    "PairBatch",
    "adversary_loss",
    "adversary_loss_and_grads",
    "adversary_train_step",
    "encode_actions",
    "reward",
    "score",

    # Successor representation
    "SrModel",
    "TabularSr",
    "policy_chain",
    "sr_forward",
    "sr_td_loss",
    "sr_td_loss_and_grads",
    "sr_train_step",
    "sr_vectors",
    "sync_target",
    "tabular_sr_solve",
    "tabular_sr_td",

    # Memories
    "ExpertDataset",
    "QueryBudget",
    "ReplayBuffer",
    "TransitionBatch",

    # Policy
    "PolicyModel",
    "act",
    "evaluate_greedy",
    "imitation_rewards",
    "policy_update",
    "q_learning_step",
    "q_loss_and_grads",
    "BootstrapEnsemble",
]
