import pytest
from hypothesis import given

from triepack.masking import MaskPolicy, build_loss_mask, mask_stats
from triepack.trajectory import Message, SessionTree, ToolOutcome, linearize
from strategies import sessions


def _session():
    return SessionTree("s", (
        Message("user", (1, 2, 3)),
        Message("assistant", (4, 5, 6, 7), ToolOutcome("bash", "error")),
        Message("tool", (8, 9)),
        Message("assistant", (10, 11, 12, 13, 14), ToolOutcome("bash", "ok")),
    ))


def test_error_call_masked_recovery_kept():
    t = build_loss_mask(_session(), 3)
    assert t.loss_mask == (0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1)
    assert t.tokens == tuple(range(1, 15))


def test_no_errors_is_plain_sft_mask():
    s = SessionTree("s", (Message("user", (1, 2)), Message("assistant", (3,)), Message("tool", (4,)),
                          Message("assistant", (5, 6), ToolOutcome("x", "ok"))))
    assert build_loss_mask(s, 3).loss_mask == (0, 0, 1, 0, 1, 1)


def test_only_user_messages_flagged():
    s = SessionTree("s", (Message("user", (1,)), Message("user", (2,))))
    t = build_loss_mask(s, 1)
    assert t.fully_masked
    assert mask_stats([t])["fully_masked"] == ["s/1"]


def test_policy_flags():
    s = _session()
    keep = build_loss_mask(s, 3, MaskPolicy(mask_non_assistant=False))
    assert keep.loss_mask == (1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1)
    strict = build_loss_mask(s, 3, MaskPolicy(preserve_recovery=False))
    assert not any(strict.loss_mask)


def test_invalid_leaf():
    with pytest.raises(IndexError):
        build_loss_mask(_session(), 9)


def _message_of_position(session, leaf):
    out = []
    for i in session.path(leaf):
        out.extend([i] * len(session.messages[i].tokens))
    return out


@given(sessions())
def test_error_tokens_always_zero(session):
    for leaf in session.leaves():
        t = build_loss_mask(session, leaf)
        assert t.tokens == linearize(session, leaf).tokens
        for bit, i in zip(t.loss_mask, _message_of_position(session, leaf)):
            tc = session.messages[i].tool_call
            if tc is not None and tc.failed:
                assert bit == 0


@given(sessions())
def test_clearing_errors_only_flips_zero_to_one(session):
    healed = SessionTree(session.session_id, tuple(
        Message(m.role, m.tokens, ToolOutcome(m.tool_call.name, "ok") if m.tool_call else None,
                m.boundary, m.parent)
        for m in session.messages
    ))
    for leaf in session.leaves():
        before = build_loss_mask(session, leaf).loss_mask
        after = build_loss_mask(healed, leaf).loss_mask
        assert all(a >= b for a, b in zip(after, before))
