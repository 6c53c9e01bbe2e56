"""Trie-packed training batches and auxiliary training signals for agent trajectories."""

from triepack.advantage import AdvantageGroup, ShapedAdvantages, deviation_score, shape, should_resample
from triepack.encoder import EncodedPack, LossTarget, attention_allowed, dense_mask, encode_pack
from triepack.masking import MaskPolicy, build_loss_mask
from triepack.planner import PackPlan, brute_force_plan, plan_packs, validate_plan
from triepack.trajectory import Message, SessionTree, ToolOutcome, Trajectory, linearize, parse_sessions
from triepack.trie import Trie, TrieNode, build_trie, trie_stats
from triepack.tst import Subtree, decompose, subtree_trajectories

__all__ = [
    "AdvantageGroup", "ShapedAdvantages", "deviation_score", "shape", "should_resample",
    "EncodedPack", "LossTarget", "attention_allowed", "dense_mask", "encode_pack",
    "MaskPolicy", "build_loss_mask",
    "PackPlan", "brute_force_plan", "plan_packs", "validate_plan",
    "Message", "SessionTree", "ToolOutcome", "Trajectory", "linearize", "parse_sessions",
    "Trie", "TrieNode", "build_trie", "trie_stats",
    "Subtree", "decompose", "subtree_trajectories",
]
