"""Hypothesis strategies shared by the test modules."""

from hypothesis import strategies as st

from triepack.trajectory import Message, SessionTree, ToolOutcome, Trajectory

roles = st.sampled_from(["system", "user", "assistant", "tool"])


@st.composite
def sessions(draw, sid="s"):
    n = draw(st.integers(1, 8))
    msgs = []
    for i in range(n):
        role = draw(roles)
        tool = None
        if role == "assistant" and draw(st.booleans()):
            tool = ToolOutcome(draw(st.sampled_from(["bash", "edit"])), draw(st.sampled_from(["ok", "error"])))
        parent = draw(st.none() | st.integers(0, i - 1)) if i else None
        boundary = draw(st.sampled_from(["none", "none", "compression", "mode_switch"])) if i else "none"
        tokens = tuple(draw(st.lists(st.integers(0, 20), min_size=1, max_size=4)))
        msgs.append(Message(role, tokens, tool, boundary, parent))
    return SessionTree(sid, tuple(msgs))


@st.composite
def trajectory_sets(draw, max_n=8, alphabet=3):
    n = draw(st.integers(1, max_n))
    out = []
    for i in range(n):
        toks = draw(st.lists(st.integers(0, alphabet - 1), min_size=1, max_size=8))
        mask = draw(st.lists(st.sampled_from([1, 1, 0]), min_size=len(toks), max_size=len(toks)))
        out.append(Trajectory(f"t{i}", toks, mask))
    return out
