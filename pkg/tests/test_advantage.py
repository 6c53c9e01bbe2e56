import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from triepack.advantage import (
    AdvantageGroup, deviation_score, difficulty, group_normalize, group_scale, levenshtein,
    sample_scale, shape, shape_batch, should_resample,
)


def test_group_normalize_hand_values():
    assert np.allclose(group_normalize([1, 0, 1, 1]), [0.577350, -1.732051, 0.577350, 0.577350], atol=1e-6)
    assert list(group_normalize([0.5, 0.5, 0.5])) == [0, 0, 0]
    assert list(group_normalize([1])) == [0]


def test_difficulty():
    assert difficulty([1, 1, 1, 1]) == 0
    assert difficulty([0, 0]) == 1
    assert difficulty([1, 0, 1, 1]) == 0.25


def test_group_scale():
    assert group_scale(0.9, 0.1, 0.0) == 1.0
    assert group_scale(0.25, 0.5, 0.4) == pytest.approx(0.9, abs=1e-15)
    assert group_scale(0.0, 1.0, 2.0) == 0.1


def test_sample_scale():
    assert sample_scale(3.0, 1.0, 0.0) == 1.0
    assert sample_scale(1.5, 1.0, 0.2) == pytest.approx(1.1, abs=1e-15)
    assert sample_scale(0.0, 5.0, 1.0) == 0.1


def test_shape_examples():
    g = AdvantageGroup("g", [1, 0, 1, 1], [1.5, 1.0, 1.0, 0.5], lam=0.4, mu=0.2)
    out = shape(g, d_bar=0.5)
    assert out.alpha == pytest.approx(0.9)
    assert out.beta[0] == pytest.approx(1.1)
    assert out.shaped[0] == pytest.approx(0.571577, abs=1e-6)
    flat = shape(AdvantageGroup("z", [0.3, 0.3], [0.0, 4.0], lam=3, mu=3), 0.0)
    assert flat.shaped == (0.0, 0.0)


def test_group_validation():
    with pytest.raises(ValueError):
        AdvantageGroup("g", [1.5], [0.0])
    with pytest.raises(ValueError):
        AdvantageGroup("g", [1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        AdvantageGroup("g", [], [])


def _edit_oracle(a, b):
    # plain recursion, independent of the DP
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(_edit_oracle(a[1:], b) + 1, _edit_oracle(a, b[1:]) + 1,
               _edit_oracle(a[1:], b[1:]) + (a[0] != b[0]))


def test_deviation_examples():
    assert deviation_score([1, 2, 3], [[9], [1, 2, 3]]) == 0
    assert deviation_score([1, 2, 3], [[1, 2, 4]]) == pytest.approx(1 / 3)
    assert deviation_score([1, 2], [[3, 4]]) == 1
    assert deviation_score([], [[1]]) == 1
    with pytest.raises(ValueError):
        deviation_score([1], [])


def test_should_resample():
    assert not should_resample(0.0, 0.3)
    assert should_resample(1.0, 0.5)
    assert not should_resample(0.5, 0.5)


# --- properties -------------------------------------------------------------

rewards = st.lists(st.floats(0, 1), min_size=1, max_size=10)
entropy = st.floats(0, 5)


@st.composite
def groups(draw):
    r = draw(rewards)
    h = draw(st.lists(entropy, min_size=len(r), max_size=len(r)))
    return AdvantageGroup("g", r, h, lam=draw(st.floats(0, 5)), mu=draw(st.floats(0, 5)))


@given(groups(), st.floats(0, 1))
def test_identity_when_scalers_off(g, d_bar):
    g = AdvantageGroup(g.group_id, g.rewards, g.entropies, 0.0, 0.0)
    out = shape(g, d_bar)
    assert out.shaped == out.base


@given(rewards)
def test_base_centered(r):
    assume(np.std(r) > 0)
    assert abs(np.mean(group_normalize(r))) <= 1e-12


@given(groups(), st.floats(0, 1))
def test_sign_preserved(g, d_bar):
    out = shape(g, d_bar)
    assert out.alpha > 0 and all(b > 0 for b in out.beta)
    assert list(np.sign(out.shaped)) == list(np.sign(out.base))


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 5))
def test_alpha_monotone_in_difficulty(d1, d2, d_bar, lam):
    assume(d1 < d2)
    a1, a2 = 1 + lam * (d1 - d_bar), 1 + lam * (d2 - d_bar)
    assume(a1 > 0.1 and a2 > a1)
    assert group_scale(d1, d_bar, lam) < group_scale(d2, d_bar, lam)


@given(groups(), st.floats(0, 1))
def test_argmax_invariant_without_entropy(g, d_bar):
    g = AdvantageGroup(g.group_id, g.rewards, g.entropies, g.lam, 0.0)
    out = shape(g, d_bar)
    assert int(np.argmax(out.shaped)) == int(np.argmax(out.base))


@given(st.lists(groups(), min_size=1, max_size=4))
def test_batch_uses_mean_difficulty(gs):
    d_bar = np.mean([difficulty(g.rewards) for g in gs])
    for g, out in zip(gs, shape_batch(gs)):
        assert out.shaped == shape(g, d_bar).shaped


seqs = st.lists(st.integers(0, 3), max_size=7)


@given(seqs, seqs)
def test_levenshtein_matches_oracle(a, b):
    assert levenshtein(a, b) == _edit_oracle(a, b)


@given(seqs, seqs)
def test_deviation_pseudometric(a, b):
    assert deviation_score(a, [a]) == 0
    assert deviation_score(a, [b]) == deviation_score(b, [a])
    assert 0 <= deviation_score(a, [b]) <= 1
