from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triepack.encoder import EncodedPack, attention_allowed, dense_mask, encode_pack, encode_plan
from triepack.planner import plan_packs
from triepack.trajectory import Trajectory
from triepack.trie import build_trie
from strategies import trajectory_sets


def _targets(pack):
    return {(pack.tokens[t.context_pos], t.target_token): t.weight for t in pack.targets}


def test_scaler_weights(trie3):
    pack = encode_pack(trie3, ["T1", "T2", "T3"], "trajectory_mean", 3)
    assert _targets(pack) == pytest.approx({(5, 7): 2 / 3, (5, 2): 1 / 3, (7, 9): 1 / 3, (7, 8): 1 / 3})
    assert pack.total_weight == pytest.approx(5 / 3, abs=1e-15)
    assert pack.tokens == (5, 2, 7, 8, 9)
    assert pack.parent == (-1, 0, 0, 2, 2)
    assert pack.depth == (0, 1, 1, 2, 2)


def test_single_trajectory_is_plain_lm_loss():
    trie = build_trie([Trajectory("a", [3, 1, 4, 1, 5], [1] * 5)])
    pack = encode_pack(trie, ["a"], "trajectory_mean", 1)
    assert [t.weight for t in pack.targets] == [1.0] * 4
    assert [t.context_pos for t in pack.targets] == [0, 1, 2, 3]


def test_masked_target_omitted():
    trie = build_trie([Trajectory("T1", [5, 7, 9], [1, 1, 0]), Trajectory("T2", [5, 7, 8], [1, 1, 1]),
                       Trajectory("T3", [5, 2], [1, 1])])
    pack = encode_pack(trie, ["T1", "T2", "T3"])
    assert (7, 9) not in _targets(pack)
    assert pack.total_weight == pytest.approx(4 / 3, abs=1e-15)


def test_pack_must_be_subset(trie3):
    with pytest.raises(KeyError):
        encode_pack(trie3, ["T1", "nope"])


def _example_pack():
    # flattening [5,7,9,8,2] with insertion-ordered children
    return EncodedPack((5, 7, 9, 8, 2), (-1, 0, 1, 1, 0), (0, 1, 2, 2, 1), (0, 1, 2, 3, 4), ())


def test_attention_allowed_examples():
    pack = _example_pack()
    assert attention_allowed(pack, 3) == {0, 1, 3}
    assert attention_allowed(pack, 0) == {0}
    assert attention_allowed(pack, 4) == {0, 4}
    with pytest.raises(IndexError):
        attention_allowed(pack, 5)


def test_dense_mask_example():
    m = dense_mask(_example_pack())
    assert m.sum() == 11
    assert list(m.sum(axis=1)) == [1, 2, 3, 3, 2]
    assert not np.triu(m, 1).any()


def test_dense_mask_chain_is_causal():
    trie = build_trie([Trajectory("a", [1, 2, 3, 4], [1] * 4)])
    m = dense_mask(encode_pack(trie, ["a"]))
    assert (m == np.tril(np.ones((4, 4), dtype=bool))).all()


def test_dense_mask_disjoint_roots_block_diagonal():
    trie = build_trie([Trajectory("a", [1, 2], [1, 1]), Trajectory("b", [3, 4, 5], [1] * 3)])
    m = dense_mask(encode_pack(trie, ["a", "b"]))
    expected = np.zeros((5, 5), dtype=bool)
    expected[:2, :2] = np.tril(np.ones((2, 2), dtype=bool))
    expected[2:, 2:] = np.tril(np.ones((3, 3), dtype=bool))
    assert (m == expected).all()


# --- properties -------------------------------------------------------------

def _position_of(pack, trie, tid):
    """Packed index of each offset of trajectory ``tid`` (walk segments along its path)."""
    out = []
    for nid in trie.path(tid):
        out.extend(i for i, s in enumerate(pack.segment) if s == nid)
    return out


@settings(deadline=None)
@given(trajectory_sets(), st.integers(0, 20), st.sampled_from(["trajectory_mean", "token_mean"]))
def test_weight_conservation_and_fidelity(trajs, extra, norm):
    trie = build_trie(trajs)
    plan = plan_packs(trie, max(len(t) for t in trajs) + extra)
    packs = encode_plan(trie, plan.packs, norm)
    total = sum(t.weight for p in packs for t in p.targets)
    n_targets = sum(t.n_targets for t in trajs)
    if norm == "trajectory_mean":
        assert total == pytest.approx(n_targets / len(trajs), rel=1e-12, abs=1e-15)
    elif n_targets:
        assert total == pytest.approx(1.0, rel=1e-12)
    for pack in packs:
        assert all(p < i for i, p in enumerate(pack.parent))
        for i, p in enumerate(pack.parent):
            assert pack.depth[i] == (pack.depth[p] + 1 if p >= 0 else 0)
        for tid in pack.trajectory_ids:
            pos = _position_of(pack, trie, tid)
            traj = trie.trajectories[tid]
            assert [pack.tokens[i] for i in pos] == list(traj.tokens)
            assert [pack.depth[i] for i in pos] == list(range(len(traj)))
            for k, i in enumerate(pos):
                assert attention_allowed(pack, i) == set(pos[:k + 1])


@settings(deadline=None)
@given(trajectory_sets(), st.integers(0, 20))
def test_target_weights_equal_exact_multiplicities(trajs, extra):
    # oracle: count (prefix -> next token) pairs directly with exact fractions
    trie = build_trie(trajs)
    expected: dict = {}
    for t in trajs:
        for p in range(1, len(t)):
            if t.loss_mask[p]:
                key = (t.tokens[:p], t.loss_mask[:p], t.tokens[p])
                expected[key] = expected.get(key, 0) + Fraction(1, len(trajs))
    got: dict = {}
    for pack in encode_plan(trie, plan_packs(trie, max(len(t) for t in trajs) + extra).packs):
        for tg in pack.targets:
            chain = sorted(attention_allowed(pack, tg.context_pos))
            mask = []
            for i in chain:
                node = trie.nodes[pack.segment[i]]
                mask.append(node.mask_run[pack.depth[i] - node.start_depth])
            key = (tuple(pack.tokens[i] for i in chain), tuple(mask), tg.target_token)
            got[key] = got.get(key, 0) + tg.weight
    assert set(got) == set(expected)
    for k in expected:
        assert got[k] == pytest.approx(float(expected[k]), rel=1e-12)
