"""Tree-structured trajectory decomposition.

A session is cut at every message flagged as a context-compression
checkpoint or a mode switch. The flagged message becomes the root of its
own subtree, so the trajectories trained from it start at the compressed
state instead of the discarded history.
"""

from __future__ import annotations

from dataclasses import dataclass

from triepack.masking import MaskPolicy, build_loss_mask
from triepack.trajectory import Message, SessionTree, Trajectory


@dataclass(frozen=True)
class Subtree:
    root_message: int
    messages: tuple[int, ...]
    origin: str


def decompose(session: SessionTree) -> list[Subtree]:
    """Split ``session`` into subtrees ordered by root index.

    Message 0 always roots a subtree, whether or not it carries a boundary flag.
    """
    owner = [0] * len(session)
    roots = [0]
    for i in range(1, len(session)):
        if session.messages[i].boundary != "none":
            owner[i] = i
            roots.append(i)
        else:
            owner[i] = owner[session.parent_of(i)]
    members: dict[int, list[int]] = {r: [] for r in roots}
    for i, r in enumerate(owner):
        members[r].append(i)
    return [Subtree(r, tuple(members[r]), session.session_id) for r in roots]


def subtree_leaves(subtree: Subtree, session: SessionTree) -> list[int]:
    has_child = {session.parent_of(i) for i in subtree.messages if i != subtree.root_message}
    return [i for i in subtree.messages if i not in has_child]


def subtree_trajectories(subtree: Subtree, session: SessionTree,
                         policy: MaskPolicy | None = None) -> list[Trajectory]:
    """One masked trajectory per subtree leaf, linearized from the subtree root."""
    return [
        build_loss_mask(session, leaf, policy, root=subtree.root_message,
                        traj_id=f"{session.session_id}@{subtree.root_message}/{leaf}")
        for leaf in subtree_leaves(subtree, session)
    ]


def subtree_session(subtree: Subtree, session: SessionTree) -> SessionTree:
    """Materialize a subtree as a standalone session (root boundary cleared)."""
    index = {old: new for new, old in enumerate(subtree.messages)}
    messages = []
    for old in subtree.messages:
        m = session.messages[old]
        if old == subtree.root_message:
            messages.append(Message(m.role, m.tokens, m.tool_call, "none", None))
        else:
            messages.append(Message(m.role, m.tokens, m.tool_call, m.boundary,
                                    index[session.parent_of(old)]))
    return SessionTree(f"{session.session_id}@{subtree.root_message}", tuple(messages))


def decompose_trajectories(sessions: list[SessionTree],
                           policy: MaskPolicy | None = None) -> list[Trajectory]:
    out: list[Trajectory] = []
    for session in sessions:
        for sub in decompose(session):
            out.extend(subtree_trajectories(sub, session, policy))
    return out
