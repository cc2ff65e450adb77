"""Relaxed-priority belief propagation for pairwise MRFs."""

from .engine import (EngineConfig, RunReport, SCHEDULERS, VARIANTS,
                     check_convergence, run)
from .errors import (CapacityExceeded, Empty, FormatError,
                     GraphConstructionFailed, IllegalAdversaryChoice,
                     TooLarge, ZeroDistribution, ZeroVector)
from .mrf import (MarkovRandomField, MessageState, brute_force_marginals,
                  compute_message, estimate_marginal, l1_normalize,
                  load_marginals_txt, load_mrf_txt, message_residual,
                  node_residual, save_marginals_txt, save_mrf_txt,
                  tree_exact_marginals)
from .models import (LdpcGroundTruth, ModelSpec, gen_ising, gen_ldpc,
                     gen_potts, gen_tree, generate, load_ldpc_truth,
                     save_ldpc_truth, tree_depth)
from .rng import SplitMix64, prng_next
from .schedulers import (ExactScheduler, Multiqueue, SimScheduler,
                         best_legal, frontier_starving, random_legal,
                         second_best, worst_legal)
from .treegame import (GameTrace, OptimalTreePriorities, TreeInstance,
                       build_bad_instance, build_uniform_tree,
                       optimal_tree_priorities, run_optimal_game,
                       run_tree_game)

__all__ = [
    "EngineConfig", "RunReport", "SCHEDULERS", "VARIANTS",
    "check_convergence", "run",
    "CapacityExceeded", "Empty", "FormatError", "GraphConstructionFailed",
    "IllegalAdversaryChoice", "TooLarge", "ZeroDistribution", "ZeroVector",
    "MarkovRandomField", "MessageState", "brute_force_marginals",
    "compute_message", "estimate_marginal", "l1_normalize",
    "load_marginals_txt", "load_mrf_txt", "message_residual",
    "node_residual", "save_marginals_txt", "save_mrf_txt",
    "tree_exact_marginals",
    "LdpcGroundTruth", "ModelSpec", "gen_ising", "gen_ldpc", "gen_potts",
    "gen_tree", "generate", "load_ldpc_truth", "save_ldpc_truth",
    "tree_depth",
    "SplitMix64", "prng_next",
    "ExactScheduler", "Multiqueue", "SimScheduler", "best_legal",
    "frontier_starving", "random_legal", "second_best", "worst_legal",
    "GameTrace", "OptimalTreePriorities", "TreeInstance",
    "build_bad_instance", "build_uniform_tree", "optimal_tree_priorities",
    "run_optimal_game", "run_tree_game",
]
