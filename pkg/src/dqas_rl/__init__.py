# -*- coding: utf-8 -*-

"""Differentiable quantum architecture search for variational deep Q-learning.

A super-circuit of parameterized placeholders is trained together with a probability distribution over the
operations each placeholder may hold. Agents learn CartPole or FrozenLake with a variational quantum Q-network
while the distribution concentrates on a good architecture, which is then tuned and evaluated, optionally under
depolarizing noise.
"""

from .config import ConfigError, ExperimentConfig, TrainConfig, parse_config  # noqa: F401
from .experiment import run_experiment  # noqa: F401
from .supernet import SuperCircuit, build_pool  # noqa: F401
from .trainer import evaluate, train_agent  # noqa: F401
