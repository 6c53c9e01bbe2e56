"""Command-line entry point.

Exit codes: 0 ok, 1 usage, 2 bad input, 3 infeasible budget, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Sequence

from triepack.advantage import (
    CLAMP_FLOOR, AdvantageGroup, batch_difficulty, deviation_score, shape, should_resample,
)
from triepack.encoder import NORMALIZATIONS, EncodedPack, LossTarget, encode_pack
from triepack.errors import InfeasibleError, ParseError, SizeError
from triepack.masking import MaskPolicy, mask_stats, session_trajectories
from triepack.planner import PackPlan, plan_packs, validate_plan
from triepack.trajectory import (
    parse_sessions, parse_trajectories, trajectory_to_dict, Trajectory,
)
from triepack.trie import build_trie, trie_stats
from triepack.tst import decompose, decompose_trajectories, subtree_trajectories
from triepack.verifier import grad_check, init_model

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 1, 2, 3, 4
COMMANDS = ("mask", "decompose", "pack", "verify", "advantage", "stats")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    input: str
    output: str = "-"
    budget: int | None = None
    normalization: str = "trajectory_mean"
    dp_width: int = 12
    seed: int = 0
    V: int = 16
    d: int = 4
    lam: float = 0.0
    mu: float = 0.0
    tau: float = 0.5
    floor: float = CLAMP_FLOOR
    mode: str = "analytic"
    grad_tol: float | None = None
    loss_tol: float = 1e-10
    input_format: str = "sessions"
    tst: bool = False
    lenient: bool = False
    keep_non_assistant: bool = False
    no_preserve_recovery: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command == "pack" and (self.budget is None or self.budget <= 0):
            raise UsageError("pack requires --budget > 0")
        if self.normalization not in NORMALIZATIONS:
            raise UsageError(f"unknown normalization {self.normalization!r}")

    @property
    def policy(self) -> MaskPolicy:
        return MaskPolicy(not self.keep_non_assistant, not self.no_preserve_recovery)


# --- I/O -------------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _write(path: str, text: str) -> None:
    """Atomic write via temp-file rename; ``-`` is stdout."""
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_trajectories(cfg: RunConfig) -> list[Trajectory]:
    data = _read(cfg.input)
    if cfg.input_format == "trajectories":
        return parse_trajectories(data)
    sessions = parse_sessions(data, lenient=cfg.lenient)
    if cfg.tst:
        return decompose_trajectories(sessions, cfg.policy)
    out: list[Trajectory] = []
    for s in sessions:
        out.extend(session_trajectories(s, cfg.policy))
    return out


def pack_record(pack_id: int, pack: EncodedPack, cost: int) -> str:
    """One output line; weights are printed with 17 significant digits."""
    head = _dumps({
        "pack_id": pack_id,
        "trajectory_ids": list(pack.trajectory_ids),
        "cost": cost,
        "tokens": list(pack.tokens),
        "parent": list(pack.parent),
        "depth": list(pack.depth),
        "segment": list(pack.segment),
    })
    targets = ",".join(f"[{t.context_pos},{t.target_token},{t.weight:.17g}]" for t in pack.targets)
    return f'{head[:-1]},"targets":[{targets}]}}\n'


def read_pack_file(data: bytes | str) -> tuple[dict, list[EncodedPack]]:
    """Parse ``pack`` output back into the plan header and encoded packs."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = [json.loads(line) for line in data.splitlines() if line.strip()]
    if not lines or "plan" not in lines[0]:
        raise ParseError("pack file must start with a plan record", line=1, field="plan")
    packs = []
    for rec in lines[1:]:
        packs.append(EncodedPack(
            tuple(rec["tokens"]), tuple(rec["parent"]), tuple(rec["depth"]), tuple(rec["segment"]),
            tuple(LossTarget(int(c), int(t), float(w)) for c, t, w in rec["targets"]),
            tuple(rec["trajectory_ids"]),
        ))
    return lines[0]["plan"], packs


# --- commands ----------------------------------------------------------------


def cmd_mask(cfg: RunConfig) -> int:
    trajs = _load_trajectories(cfg)
    _write(cfg.output, "".join(_dumps(trajectory_to_dict(t)) + "\n" for t in trajs))
    return EXIT_OK


def cmd_decompose(cfg: RunConfig) -> int:
    lines = []
    for s in parse_sessions(_read(cfg.input), lenient=cfg.lenient):
        for sub in decompose(s):
            lines.append(_dumps({
                "session_id": s.session_id,
                "root_message": sub.root_message,
                "messages": list(sub.messages),
                "trajectories": [trajectory_to_dict(t) for t in subtree_trajectories(sub, s, cfg.policy)],
            }) + "\n")
    _write(cfg.output, "".join(lines))
    return EXIT_OK


def cmd_pack(cfg: RunConfig) -> int:
    trie = build_trie(_load_trajectories(cfg))
    plan = plan_packs(trie, cfg.budget, cfg.dp_width)
    report = validate_plan(plan, trie)
    if not report.ok:
        print(f"plan failed validation: {report.violation}", file=sys.stderr)
        return EXIT_VERIFY
    header = {"plan": {**plan.to_dict(), "normalization": cfg.normalization,
                       "n_trajectories": trie.n_trajectories, **trie_stats(trie)}}
    out = [_dumps(header) + "\n"]
    for i, (members, cost) in enumerate(zip(plan.packs, plan.cost_per_pack)):
        out.append(pack_record(i, encode_pack(trie, members, cfg.normalization), cost))
    _write(cfg.output, "".join(out))
    print(f"{len(plan.packs)} pack(s), total_cost {plan.total_cost}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    trajs = _load_trajectories(cfg)
    model = init_model(cfg.seed, cfg.V, cfg.d)
    trie = build_trie(trajs)
    budget = cfg.budget if cfg.budget is not None else trie_stats(trie)["unique_tokens"]
    plan = plan_packs(trie, budget, cfg.dp_width)
    report = grad_check(model, trajs, plan, cfg.normalization, cfg.mode)
    grad_tol = cfg.grad_tol if cfg.grad_tol is not None else (1e-6 if cfg.mode == "analytic" else 1e-4)
    ok = report.passed(grad_tol, cfg.loss_tol)
    rec = {"seed": cfg.seed, "V": cfg.V, "d": cfg.d, "budget": budget, "packs": len(plan.packs),
           **report.to_dict(), "grad_tol": grad_tol, "loss_tol": cfg.loss_tol, "passed": ok}
    _write(cfg.output, json.dumps(rec, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_advantage(cfg: RunConfig) -> int:
    groups = []
    extras = []
    for lineno, text in enumerate(_read(cfg.input).decode("utf-8").splitlines(), start=1):
        if not text.strip():
            continue
        try:
            raw = json.loads(text)
            groups.append(AdvantageGroup(
                str(raw["group_id"]), raw["rewards"], raw.get("entropies", [0.0] * len(raw["rewards"])),
                float(raw.get("lambda", cfg.lam)), float(raw.get("mu", cfg.mu)),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad advantage group: {exc}", line=lineno, field="<record>") from None
        extras.append(raw)
    if not groups:
        raise ParseError("no advantage groups in input", line=None, field="<input>")
    d_bar = batch_difficulty(groups)
    lines = []
    for g, raw in zip(groups, extras):
        rec = {"group_id": g.group_id, "d_bar": d_bar, **shape(g, d_bar, cfg.floor).to_dict()}
        if raw.get("candidates") is not None and raw.get("references"):
            scores = [deviation_score(c, raw["references"]) for c in raw["candidates"]]
            rec["deviation"] = scores
            rec["resample"] = [should_resample(s, cfg.tau) for s in scores]
        lines.append(_dumps(rec) + "\n")
    _write(cfg.output, "".join(lines))
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    sessions = parse_sessions(_read(cfg.input), lenient=cfg.lenient)
    trajs = [t for s in sessions for t in session_trajectories(s, cfg.policy)]
    rec = {
        "sessions": len(sessions),
        "messages": sum(len(s) for s in sessions),
        "subtrees": sum(len(decompose(s)) for s in sessions),
        **mask_stats(trajs),
        "trie": trie_stats(build_trie(trajs)) if trajs else None,
    }
    _write(cfg.output, json.dumps(rec, indent=2) + "\n")
    return EXIT_OK


HANDLERS = {"mask": cmd_mask, "decompose": cmd_decompose, "pack": cmd_pack,
            "verify": cmd_verify, "advantage": cmd_advantage, "stats": cmd_stats}


def run(cfg: RunConfig) -> int:
    try:
        return HANDLERS[cfg.command](cfg)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, SizeError, OSError, ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-i", "--input", default="-", help="input file (default stdin)")
    common.add_argument("-o", "--output", default="-", help="output file (default stdout)")
    common.add_argument("--lenient", action="store_true", help="ignore unknown fields in sessions")
    common.add_argument("--keep-non-assistant", action="store_true",
                        help="train on system/user/tool tokens too")
    common.add_argument("--no-preserve-recovery", action="store_true",
                        help="also mask assistant turns after a failed tool call")

    packing = _Parser(add_help=False)
    packing.add_argument("--input-format", choices=["sessions", "trajectories"], default="sessions")
    packing.add_argument("--tst", action="store_true", help="decompose sessions at boundaries first")
    packing.add_argument("--budget", type=int)
    packing.add_argument("--dp-width", type=int, default=12)
    packing.add_argument("--normalization", choices=NORMALIZATIONS, default="trajectory_mean")

    parser = _Parser(prog="triepack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("mask", parents=[common, packing], help="masked trajectories per session leaf")
    sub.add_parser("decompose", parents=[common], help="split sessions into subtrees")
    sub.add_parser("pack", parents=[common, packing], help="plan and encode packs")
    v = sub.add_parser("verify", parents=[common, packing], help="packed vs unpacked gradient check")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--V", type=int, default=16)
    v.add_argument("--d", type=int, default=4)
    v.add_argument("--mode", choices=["analytic", "numeric"], default="analytic")
    v.add_argument("--grad-tol", type=float)
    v.add_argument("--loss-tol", type=float, default=1e-10)
    a = sub.add_parser("advantage", parents=[common], help="shape group advantages")
    a.add_argument("--lambda", dest="lam", type=float, default=0.0)
    a.add_argument("--mu", type=float, default=0.0)
    a.add_argument("--tau", type=float, default=0.5)
    a.add_argument("--floor", type=float, default=CLAMP_FLOOR)
    sub.add_parser("stats", parents=[common], help="corpus and sharing statistics")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        fields = RunConfig.__dataclass_fields__
        cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in fields})
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
