# -*- coding: utf-8 -*-

"""Constants for DQAS-RL."""

import os

VERSION = '0.1.0-dev'

MODULE_NAME = 'dqas_rl'

#: Environment variable that overrides where runs are written
HOME_ENVVAR = 'DQAS_RL_HOME'
DATA_DIR = os.path.abspath(os.path.expanduser(os.environ.get(HOME_ENVVAR, os.path.join('~', f'.{MODULE_NAME}'))))
RUNS_DIR = os.path.join(DATA_DIR, 'runs')

CARTPOLE = 'cartpole'
FROZENLAKE = 'frozenlake'
ENV_KINDS = (CARTPOLE, FROZENLAKE)

OP3 = 'op3'
OP4 = 'op4'
POOL_NAMES = (OP3, OP4)
#: Internal pool holding the fixed ry/rz/cz columns; not selectable as a search space
BASELINE_POOL = 'baseline'

N_QUBITS = 4
N_BLOCKS = 5
N_PLACEHOLDERS = 4

#: Defaults that depend on the environment
ENV_DEFAULTS = {
    CARTPOLE: dict(
        gamma=0.99,
        r_max=195.0,
        w_out_init=50.0,
        max_steps=200,
        n_actions=2,
    ),
    FROZENLAKE: dict(
        gamma=0.9,
        r_max=0.95,
        w_out_init=1.0,
        max_steps=100,
        n_actions=4,
    ),
}

#: Adam constants
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

#: Output file names
RESOLVED_CONFIG_NAME = 'resolved_config.json'
SUMMARY_NAME = 'summary.json'
TRAIN_CSV_HEADER = ('episode', 'return', 'avg_return_W', 'loss', 'epsilon', 'phase')
ALPHA_CSV_HEADER = ('episode', 'placeholder', 'op_index', 'op_name', 'probability')
EVAL_CSV_HEADER = ('episode', 'return', 'noisy')

SEARCH_PHASE = 'search'
TUNE_PHASE = 'tune'
