# -*- coding: utf-8 -*-

"""Tests for DQAS-RL."""
