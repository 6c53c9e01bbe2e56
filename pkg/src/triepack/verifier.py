"""Executable check that packed training equals per-trajectory training.

The model is deliberately tiny: token embedding plus sinusoidal position,
one single-head attention layer with a residual connection, and an output
projection. Attention is the only place where the packing can go wrong, so
it is the only nonlinear block. Everything runs in float64.

Both paths share the layer math below; they differ only in their inputs.
The unpacked path feeds each trajectory separately with a causal mask and
positions ``0..L-1``; the packed path feeds the flattened trie with the
ancestor mask, depth positions and tree-scaled loss weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from triepack.encoder import EncodedPack, dense_mask, encode_plan, normalizer, with_uniform_weights
from triepack.errors import SizeError
from triepack.trajectory import Trajectory
from triepack.trie import build_trie

PARAM_NAMES = ("E", "Wq", "Wk", "Wv", "Wo", "U")
MAX_V, MAX_D, MAX_TRAJ, MAX_LEN = 16, 8, 8, 16
NUMERIC_STEP = 1e-5


@dataclass
class MicroModel:
    E: np.ndarray
    Wq: np.ndarray
    Wk: np.ndarray
    Wv: np.ndarray
    Wo: np.ndarray
    U: np.ndarray

    @property
    def V(self) -> int:
        return self.E.shape[0]

    @property
    def d(self) -> int:
        return self.E.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "MicroModel":
        return MicroModel(**{k: v.copy() for k, v in self.params().items()})


def init_model(seed: int, V: int, d: int) -> MicroModel:
    """Uniform(-0.1, 0.1) parameters from numpy's PCG64 stream seeded with ``seed``.

    Blocks are drawn in the order E, Wq, Wk, Wv, Wo, U.
    """
    if V < 2:
        raise ValueError(f"vocabulary size must be >= 2, got {V}")
    if d < 2 or d % 2:
        raise ValueError(f"hidden width must be a positive even number, got {d}")
    rng = np.random.Generator(np.random.PCG64(seed))
    shapes = {"E": (V, d), "Wq": (d, d), "Wk": (d, d), "Wv": (d, d), "Wo": (d, d), "U": (d, V)}
    return MicroModel(**{k: rng.uniform(-0.1, 0.1, size=shapes[k]) for k in PARAM_NAMES})


def positional_encoding(positions: np.ndarray, d: int) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.float64)
    freq = 10000.0 ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    angles = positions[:, None] * freq[None, :]
    pe = np.empty((len(positions), d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


@dataclass
class _Batch:
    tokens: np.ndarray
    positions: np.ndarray
    allowed: np.ndarray
    ctx: np.ndarray
    tgt: np.ndarray
    weight: np.ndarray


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    x = x - x.max(axis=1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=1, keepdims=True)


def attention_probs(model: MicroModel, batch: _Batch) -> np.ndarray:
    h = model.E[batch.tokens] + positional_encoding(batch.positions, model.d)
    scores = (h @ model.Wq) @ (h @ model.Wk).T / np.sqrt(model.d)
    return _softmax_rows(np.where(batch.allowed, scores, -np.inf))


def _run(model: MicroModel, batch: _Batch, grad: bool) -> tuple[float, dict[str, np.ndarray] | None]:
    d = model.d
    scale = 1.0 / np.sqrt(d)
    h = model.E[batch.tokens] + positional_encoding(batch.positions, d)
    q, k, v = h @ model.Wq, h @ model.Wk, h @ model.Wv
    scores = np.where(batch.allowed, (q @ k.T) * scale, -np.inf)
    a = _softmax_rows(scores)
    c = a @ v
    h2 = h + c @ model.Wo

    if len(batch.ctx) == 0:
        return 0.0, ({k: np.zeros_like(p) for k, p in model.params().items()} if grad else None)
    logits = h2[batch.ctx] @ model.U
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    nll = logz - shifted[np.arange(len(batch.tgt)), batch.tgt]
    loss = float(np.dot(batch.weight, nll))
    if not grad:
        return loss, None

    dlog = np.exp(shifted - logz[:, None])
    dlog[np.arange(len(batch.tgt)), batch.tgt] -= 1.0
    dlog *= batch.weight[:, None]
    dU = h2[batch.ctx].T @ dlog
    dh2 = np.zeros_like(h2)
    np.add.at(dh2, batch.ctx, dlog @ model.U.T)

    dWo = c.T @ dh2
    dc = dh2 @ model.Wo.T
    da = dc @ v.T
    dv = a.T @ dc
    ds = a * (da - (da * a).sum(axis=1, keepdims=True))
    dq = ds @ k * scale
    dk = ds.T @ q * scale
    dh = dh2 + dq @ model.Wq.T + dk @ model.Wk.T + dv @ model.Wv.T
    dE = np.zeros_like(model.E)
    np.add.at(dE, batch.tokens, dh)
    return loss, {"E": dE, "Wq": h.T @ dq, "Wk": h.T @ dk, "Wv": h.T @ dv, "Wo": dWo, "U": dU}


def _check_vocab(model: MicroModel, tokens) -> None:
    if len(tokens) and max(tokens) >= model.V:
        raise ValueError(f"token id {max(tokens)} outside vocabulary of size {model.V}")


def _unpacked_batches(model: MicroModel, trajectories: Sequence[Trajectory],
                      normalization: str) -> list[_Batch]:
    if normalization == "trajectory_mean":
        denom = len(trajectories)
    elif normalization == "token_mean":
        denom = sum(t.n_targets for t in trajectories)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    batches = []
    for traj in trajectories:
        _check_vocab(model, traj.tokens)
        n = len(traj)
        ctx = np.array([p for p in range(n - 1) if traj.loss_mask[p + 1]], dtype=int)
        batches.append(_Batch(
            tokens=np.array(traj.tokens), positions=np.arange(n),
            allowed=np.tril(np.ones((n, n), dtype=bool)),
            ctx=ctx, tgt=np.array(traj.tokens)[ctx + 1] if len(ctx) else ctx,
            weight=np.full(len(ctx), 1.0 / denom if denom else 0.0),
        ))
    return batches


def _packed_batches(model: MicroModel, packs: Sequence[EncodedPack]) -> list[_Batch]:
    batches = []
    for pack in packs:
        _check_vocab(model, pack.tokens)
        for i, p in enumerate(pack.parent):
            if p >= i:
                raise ValueError(f"inconsistent pack: parent[{i}] = {p} is not an earlier position")
        batches.append(_Batch(
            tokens=np.array(pack.tokens), positions=np.array(pack.depth),
            allowed=dense_mask(pack),
            ctx=np.array([t.context_pos for t in pack.targets], dtype=int),
            tgt=np.array([t.target_token for t in pack.targets], dtype=int),
            weight=np.array([t.weight for t in pack.targets], dtype=np.float64),
        ))
    return batches


def _total(model: MicroModel, batches: list[_Batch], grad: bool):
    loss = 0.0
    grads = {k: np.zeros_like(p) for k, p in model.params().items()} if grad else None
    for b in batches:
        l, g = _run(model, b, grad)
        loss += l
        if grad:
            for k in grads:
                grads[k] += g[k]
    return loss, grads


def loss_unpacked(model: MicroModel, trajectories: Sequence[Trajectory],
                  normalization: str = "trajectory_mean") -> float:
    return _total(model, _unpacked_batches(model, trajectories, normalization), False)[0]


def loss_packed(model: MicroModel, packs: Sequence[EncodedPack]) -> float:
    return _total(model, _packed_batches(model, packs), False)[0]


def grad_unpacked(model: MicroModel, trajectories: Sequence[Trajectory],
                  normalization: str = "trajectory_mean") -> tuple[float, dict[str, np.ndarray]]:
    return _total(model, _unpacked_batches(model, trajectories, normalization), True)


def grad_packed(model: MicroModel, packs: Sequence[EncodedPack]) -> tuple[float, dict[str, np.ndarray]]:
    return _total(model, _packed_batches(model, packs), True)


def numeric_grad(model: MicroModel, loss_fn: Callable[[MicroModel], float],
                 step: float = NUMERIC_STEP) -> dict[str, np.ndarray]:
    """Central differences, one parameter entry at a time."""
    work = model.copy()
    out = {}
    for name, param in work.params().items():
        g = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + step
            up = loss_fn(work)
            param[idx] = orig - step
            down = loss_fn(work)
            param[idx] = orig
            g[idx] = (up - down) / (2 * step)
        out[name] = g
    return out


def _stacked_loss(params: dict[str, np.ndarray], batch: _Batch, pe: np.ndarray) -> np.ndarray:
    """Loss for a stack of parameter sets (leading axis), loss-only forward."""
    E = params["E"]
    d = E.shape[-1]
    h = E[:, batch.tokens] + pe
    q, k, v = h @ params["Wq"], h @ params["Wk"], h @ params["Wv"]
    scores = np.where(batch.allowed, q @ k.swapaxes(1, 2) / np.sqrt(d), -np.inf)
    scores -= scores.max(axis=2, keepdims=True)
    a = np.exp(scores)
    a /= a.sum(axis=2, keepdims=True)
    h2 = h + (a @ v) @ params["Wo"]
    if len(batch.ctx) == 0:
        return np.zeros(E.shape[0])
    logits = h2[:, batch.ctx] @ params["U"]
    logits -= logits.max(axis=2, keepdims=True)
    logz = np.log(np.exp(logits).sum(axis=2))
    picked = np.take_along_axis(logits, batch.tgt[None, :, None], axis=2)[..., 0]
    return (logz - picked) @ batch.weight


def _numeric_grad_stacked(model: MicroModel, batches: list[_Batch],
                          step: float = NUMERIC_STEP) -> dict[str, np.ndarray]:
    """Central differences with every +/- perturbation of one block evaluated in one stack."""
    base = model.params()
    pes = [positional_encoding(b.positions, model.d) for b in batches]
    out = {}
    for name, param in base.items():
        size = param.size
        stack = {k: np.broadcast_to(v, (2 * size,) + v.shape).copy() for k, v in base.items()}
        flat = stack[name].reshape(2 * size, size)
        idx = np.arange(size)
        flat[idx, idx] += step
        flat[size + idx, idx] -= step
        total = np.zeros(2 * size)
        for b, pe in zip(batches, pes):
            total += _stacked_loss(stack, b, pe)
        out[name] = ((total[:size] - total[size:]) / (2 * step)).reshape(param.shape)
    return out


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - b| / max(1e-12, |b|), elementwise."""
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(1e-12, np.abs(b))))


@dataclass
class GradReport:
    loss_packed: float
    loss_unpacked: float
    max_rel_grad_err: float
    block_errors: dict[str, float] = field(default_factory=dict)
    mode: str = "analytic"
    normalization: str = "trajectory_mean"

    @property
    def loss_rel_err(self) -> float:
        return abs(self.loss_packed - self.loss_unpacked) / max(1e-12, abs(self.loss_unpacked))

    def passed(self, grad_tol: float, loss_tol: float = 1e-10) -> bool:
        return self.loss_rel_err <= loss_tol and self.max_rel_grad_err <= grad_tol

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "normalization": self.normalization,
            "loss_packed": self.loss_packed,
            "loss_unpacked": self.loss_unpacked,
            "loss_rel_err": self.loss_rel_err,
            "max_rel_grad_err": self.max_rel_grad_err,
            "block_errors": dict(self.block_errors),
        }


def _size_guard(model: MicroModel, trajectories: Sequence[Trajectory]) -> None:
    if model.V > MAX_V or model.d > MAX_D:
        raise SizeError(f"grad_check supports V <= {MAX_V} and d <= {MAX_D}")
    if len(trajectories) > MAX_TRAJ:
        raise SizeError(f"grad_check supports at most {MAX_TRAJ} trajectories")
    if max(len(t) for t in trajectories) > MAX_LEN:
        raise SizeError(f"grad_check supports trajectories of at most {MAX_LEN} tokens")


def grad_check(model: MicroModel, trajectories: Sequence[Trajectory], plan,
               normalization: str = "trajectory_mean", mode: str = "analytic",
               sabotage: bool = False) -> GradReport:
    """Compare packed and unpacked losses and gradients.

    ``plan`` is a :class:`~triepack.planner.PackPlan` or any sequence of
    trajectory-id groups. With ``sabotage`` every packed weight is set to the
    flat per-target value, which is what naive prefix reuse amounts to.
    """
    _size_guard(model, trajectories)
    if mode not in ("analytic", "numeric"):
        raise ValueError(f"unknown mode {mode!r}")
    trie = build_trie(trajectories)
    groups = plan.packs if hasattr(plan, "packs") else plan
    packs = encode_plan(trie, groups, normalization)
    if sabotage:
        denom = normalizer(trie, normalization)
        packs = [with_uniform_weights(p, 1.0 / denom if denom else 0.0) for p in packs]

    up_batches = _unpacked_batches(model, trajectories, normalization)
    pk_batches = _packed_batches(model, packs)
    if mode == "analytic":
        lu, gu = _total(model, up_batches, True)
        lp, gp = _total(model, pk_batches, True)
    else:
        lu = _total(model, up_batches, False)[0]
        lp = _total(model, pk_batches, False)[0]
        gu = _numeric_grad_stacked(model, up_batches)
        gp = _numeric_grad_stacked(model, pk_batches)
    blocks = {k: rel_error(gp[k], gu[k]) for k in PARAM_NAMES}
    return GradReport(lp, lu, max(blocks.values()), blocks, mode, normalization)


def perturb_first_weight(packs: Sequence[EncodedPack], delta: float = 0.1) -> list[EncodedPack]:
    out = list(packs)
    for i, p in enumerate(out):
        if p.targets:
            t0 = replace(p.targets[0], weight=p.targets[0].weight + delta)
            out[i] = replace(p, targets=(t0,) + p.targets[1:])
            break
    return out
