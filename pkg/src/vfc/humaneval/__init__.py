"""Pairwise human study service: task assignment, vote collection, majority tallies."""

from vfc.humaneval.store import INSTRUCTION_TEXT, PairTask, VoteStore
from vfc.humaneval.service import HumanEvalService

__all__ = ["INSTRUCTION_TEXT", "HumanEvalService", "PairTask", "VoteStore"]
