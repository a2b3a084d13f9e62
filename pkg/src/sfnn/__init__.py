"""Structurally flexible neural networks: evolved plastic building blocks.

Typed neurons (small linear layers) and typed synapses (GRU update rules over
per-synapse weight vectors) are assembled into randomly wired networks whose
input/output sizes fit whatever environment they are dropped into.  The
building-block parameters are optimized with CMA-ES over multi-episode
lifetimes in classic control tasks.
"""

from .genome import (ArchConfig, ConfigurationError, Genome, LayoutError,
                     count_parameters, flatten, load_genome, save_genome,
                     unflatten, zero_genome)
from .network import (NetworkState, begin_episode, env_step, gru_plasticity_step,
                      init_network, inject_action_feedback, micro_tick,
                      read_action, set_inputs, synapse_rule)
from .envs import ACROBOT, CARTPOLE, MOUNTAINCAR, SPECS, EnvSpec, episode_rollout
from .fitness import (LifetimeConfig, aggregate_fitness, evaluate_individual,
                      lifetime_score, normalize_score, run_lifetime)
from .cmaes import CmaEs
from .variants import VariantSpec, apply_variant, symla_step
from .evolve import RunConfig, run_evolution
from .protocols import EvalProtocol, run_protocol, weights_snapshot

__version__ = "0.1.0"
