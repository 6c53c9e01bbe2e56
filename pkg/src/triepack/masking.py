"""Error-masked SFT loss masks.

Erroneous assistant tool calls stay in the context but contribute no loss.
Masking is done at whole-message granularity because the session format
does not delimit the call span inside a message.
"""

from __future__ import annotations

from dataclasses import dataclass

from triepack.trajectory import SessionTree, Trajectory


@dataclass(frozen=True)
class MaskPolicy:
    mask_non_assistant: bool = True
    # keep loss on assistant turns that follow a failed call (self-correction)
    preserve_recovery: bool = True


def message_mask_values(session: SessionTree, path: list[int], policy: MaskPolicy) -> list[int]:
    """One mask bit per message on ``path``."""
    values = []
    seen_error = False
    for i in path:
        msg = session.messages[i]
        if msg.role != "assistant":
            values.append(0 if policy.mask_non_assistant else 1)
        elif msg.tool_call is not None and msg.tool_call.failed:
            values.append(0)
            seen_error = True
        elif seen_error and not policy.preserve_recovery:
            values.append(0)
        else:
            values.append(1)
    return values


def build_loss_mask(session: SessionTree, leaf: int, policy: MaskPolicy | None = None,
                    root: int = 0, traj_id: str | None = None) -> Trajectory:
    """Linearize the root->leaf path and attach its loss mask.

    ``root`` restricts the path to a subtree (used by tree-structured decomposition).
    """
    policy = policy or MaskPolicy()
    path = session.path(leaf, root)
    tokens: list[int] = []
    mask: list[int] = []
    for i, bit in zip(path, message_mask_values(session, path, policy)):
        toks = session.messages[i].tokens
        tokens.extend(toks)
        mask.extend([bit] * len(toks))
    if traj_id is None:
        traj_id = f"{session.session_id}/{leaf}" if root == 0 else f"{session.session_id}@{root}/{leaf}"
    return Trajectory(traj_id, tokens, mask)


def session_trajectories(session: SessionTree, policy: MaskPolicy | None = None) -> list[Trajectory]:
    """Masked trajectories for every leaf of ``session``, in leaf order."""
    return [build_loss_mask(session, leaf, policy) for leaf in session.leaves()]


def mask_stats(trajectories: list[Trajectory]) -> dict:
    total = sum(len(t) for t in trajectories)
    supervised = sum(sum(t.loss_mask) for t in trajectories)
    return {
        "trajectories": len(trajectories),
        "tokens": total,
        "supervised_tokens": supervised,
        "fully_masked": sorted(t.traj_id for t in trajectories if t.fully_masked),
    }
