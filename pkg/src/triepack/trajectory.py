"""Sessions, messages and flattened trajectories.

Sessions arrive pre-tokenized as line-delimited JSON, one session per line::

    {"session_id": "s0", "messages": [
        {"role": "user", "tokens": [5]},
        {"role": "assistant", "tokens": [7, 9], "tool_call": {"name": "ls", "status": "ok"}},
        {"role": "assistant", "tokens": [2], "parent": 0, "boundary": "compression"}]}

A message without ``parent`` continues the previous message in the list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

from triepack.errors import ParseError, StructureError

ROLES = ("system", "user", "assistant", "tool")
BOUNDARIES = ("none", "compression", "mode_switch")
STATUSES = ("ok", "error")

_SESSION_FIELDS = {"session_id", "messages"}
_MESSAGE_FIELDS = {"role", "tokens", "tool_call", "boundary", "parent"}
_TOOL_FIELDS = {"name", "status"}


@dataclass(frozen=True)
class ToolOutcome:
    name: str
    status: str = "ok"

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("tool name must be non-empty")
        if self.status not in STATUSES:
            raise ValueError(f"unknown tool status {self.status!r}")

    @property
    def failed(self) -> bool:
        return self.status == "error"


@dataclass(frozen=True)
class Message:
    role: str
    tokens: tuple[int, ...]
    tool_call: ToolOutcome | None = None
    boundary: str = "none"
    parent: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.tokens:
            raise ValueError("message tokens must be non-empty")
        if any(t < 0 for t in self.tokens):
            raise ValueError("token ids must be non-negative")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.tool_call is not None and self.role != "assistant":
            raise ValueError("tool_call is only allowed on assistant messages")


@dataclass(frozen=True)
class SessionTree:
    """A branching conversation. Parent links always point to earlier messages."""

    session_id: str
    messages: tuple[Message, ...]
    _parents: tuple[int | None, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise StructureError(f"session {self.session_id!r} has no messages")
        parents: list[int | None] = []
        for i, msg in enumerate(self.messages):
            if i == 0:
                if msg.parent is not None:
                    raise StructureError(f"session {self.session_id!r}: message 0 cannot have a parent")
                parents.append(None)
            elif msg.parent is None:
                parents.append(i - 1)
            elif msg.parent == i:
                raise StructureError(f"session {self.session_id!r}: message {i} is its own parent")
            elif not 0 <= msg.parent < i:
                raise StructureError(
                    f"session {self.session_id!r}: message {i} has parent {msg.parent}, "
                    "which is not a strictly earlier message"
                )
            else:
                parents.append(msg.parent)
        object.__setattr__(self, "_parents", tuple(parents))

    def __len__(self) -> int:
        return len(self.messages)

    def parent_of(self, index: int) -> int | None:
        self._check(index)
        return self._parents[index]

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in self.messages]
        for i, p in enumerate(self._parents):
            if p is not None:
                kids[p].append(i)
        return kids

    def leaves(self) -> list[int]:
        return [i for i, kids in enumerate(self.children()) if not kids]

    def path(self, leaf: int, root: int = 0) -> list[int]:
        """Message indices from ``root`` down to ``leaf`` inclusive."""
        self._check(leaf)
        out = [leaf]
        node = leaf
        while node != root:
            node = self._parents[node]
            if node is None:
                raise ValueError(f"message {root} is not an ancestor of message {leaf}")
            out.append(node)
        out.reverse()
        return out

    def max_token(self) -> int:
        return max(max(m.tokens) for m in self.messages)

    def _check(self, index: int) -> None:
        if not 0 <= index < len(self.messages):
            raise IndexError(f"message index {index} out of range for session {self.session_id!r}")


@dataclass(frozen=True)
class Trajectory:
    traj_id: str
    tokens: tuple[int, ...]
    loss_mask: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "loss_mask", tuple(self.loss_mask))
        if not self.tokens:
            raise ValueError("trajectory must have at least one token")
        if len(self.tokens) != len(self.loss_mask):
            raise ValueError(f"trajectory {self.traj_id!r}: tokens and loss_mask lengths differ")
        if any(m not in (0, 1) for m in self.loss_mask):
            raise ValueError(f"trajectory {self.traj_id!r}: loss_mask entries must be 0 or 1")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_targets(self) -> int:
        # position 0 is never predicted
        return sum(self.loss_mask[1:])

    @property
    def fully_masked(self) -> bool:
        return not any(self.loss_mask)


def linearize(session: SessionTree, leaf_message: int, root: int = 0) -> Trajectory:
    """Concatenate message tokens along the path to ``leaf_message``.

    The loss mask is an all-ones placeholder; see :func:`triepack.masking.build_loss_mask`.
    """
    tokens: list[int] = []
    for i in session.path(leaf_message, root):
        tokens.extend(session.messages[i].tokens)
    return Trajectory(f"{session.session_id}/{leaf_message}", tokens, [1] * len(tokens))


# --- file format -----------------------------------------------------------


def _require_int(value, where: str, line: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected integer, got {value!r}", line=line, field=where)
    return value


def _parse_message(raw, idx: int, line: int, lenient: bool) -> Message:
    where = f"messages[{idx}]"
    if not isinstance(raw, dict):
        raise ParseError("message must be an object", line=line, field=where)
    unknown = set(raw) - _MESSAGE_FIELDS
    if unknown and not lenient:
        raise ParseError(f"unknown field(s) {sorted(unknown)}", line=line, field=where)
    for key in ("role", "tokens"):
        if key not in raw:
            raise ParseError("missing required field", line=line, field=f"{where}.{key}")
    tokens = raw["tokens"]
    if not isinstance(tokens, list) or not tokens:
        raise ParseError("tokens must be a non-empty array", line=line, field=f"{where}.tokens")
    tokens = [_require_int(t, f"{where}.tokens", line) for t in tokens]
    if any(t < 0 for t in tokens):
        raise ParseError("token ids must be non-negative", line=line, field=f"{where}.tokens")

    tool = None
    if raw.get("tool_call") is not None:
        tc = raw["tool_call"]
        if not isinstance(tc, dict):
            raise ParseError("tool_call must be an object", line=line, field=f"{where}.tool_call")
        unknown = set(tc) - _TOOL_FIELDS
        if unknown and not lenient:
            raise ParseError(f"unknown field(s) {sorted(unknown)}", line=line, field=f"{where}.tool_call")
        try:
            tool = ToolOutcome(str(tc.get("name", "")), tc.get("status", "ok"))
        except ValueError as exc:
            raise ParseError(str(exc), line=line, field=f"{where}.tool_call") from None

    parent = raw.get("parent")
    if parent is not None:
        parent = _require_int(parent, f"{where}.parent", line)
    try:
        return Message(
            role=raw["role"],
            tokens=tuple(tokens),
            tool_call=tool,
            boundary=raw.get("boundary") or "none",
            parent=parent,
        )
    except ValueError as exc:
        raise ParseError(str(exc), line=line, field=where) from None


def parse_session_line(text: str, line: int = 1, *, lenient: bool = False,
                       vocab_size: int | None = None) -> SessionTree:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=line, field="<record>") from None
    if not isinstance(raw, dict):
        raise ParseError("record must be an object", line=line, field="<record>")
    unknown = set(raw) - _SESSION_FIELDS
    if unknown and not lenient:
        raise ParseError(f"unknown field(s) {sorted(unknown)}", line=line, field="<record>")
    if not isinstance(raw.get("session_id"), str) or not raw["session_id"]:
        raise ParseError("session_id must be a non-empty string", line=line, field="session_id")
    msgs = raw.get("messages")
    if not isinstance(msgs, list) or not msgs:
        raise ParseError("messages must be a non-empty array", line=line, field="messages")
    messages = [_parse_message(m, i, line, lenient) for i, m in enumerate(msgs)]
    try:
        session = SessionTree(raw["session_id"], tuple(messages))
    except StructureError as exc:
        raise StructureError(str(exc), line=line, field="messages") from None
    if vocab_size is not None and session.max_token() >= vocab_size:
        raise ParseError(f"token id {session.max_token()} >= vocabulary size {vocab_size}",
                         line=line, field="messages")
    return session


def iter_sessions(stream: Iterable[str] | IO, *, lenient: bool = False,
                  vocab_size: int | None = None) -> Iterator[SessionTree]:
    for lineno, text in enumerate(stream, start=1):
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        if not text.strip():
            continue
        yield parse_session_line(text, lineno, lenient=lenient, vocab_size=vocab_size)


def parse_sessions(data: bytes | str | IO, *, lenient: bool = False,
                   vocab_size: int | None = None) -> list[SessionTree]:
    """Parse a whole session file. Errors carry the offending line number and field."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if isinstance(data, str):
        data = data.splitlines()
    return list(iter_sessions(data, lenient=lenient, vocab_size=vocab_size))


def session_to_dict(session: SessionTree) -> dict:
    messages = []
    for i, m in enumerate(session.messages):
        rec: dict = {"role": m.role, "tokens": list(m.tokens)}
        if m.tool_call is not None:
            rec["tool_call"] = {"name": m.tool_call.name, "status": m.tool_call.status}
        if m.boundary != "none":
            rec["boundary"] = m.boundary
        if m.parent is not None:
            rec["parent"] = m.parent
        messages.append(rec)
    return {"session_id": session.session_id, "messages": messages}


def dump_sessions(sessions: Sequence[SessionTree]) -> str:
    return "".join(json.dumps(session_to_dict(s), separators=(",", ":")) + "\n" for s in sessions)


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {"traj_id": traj.traj_id, "tokens": list(traj.tokens), "loss_mask": list(traj.loss_mask)}


def parse_trajectories(data: bytes | str) -> list[Trajectory]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    out = []
    for lineno, text in enumerate(data.splitlines(), start=1):
        if not text.strip():
            continue
        try:
            raw = json.loads(text)
            out.append(Trajectory(str(raw["traj_id"]), raw["tokens"], raw["loss_mask"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad trajectory record: {exc}", line=lineno, field="<record>") from None
    return out
