"""Recurrent policy over the token library.

The cell is a single tanh layer. Its input at each step is the pair of
embeddings for the parent and the left sibling of the slot being filled
(EMPTY when absent). Logits are masked with the constraint mask before the
softmax, so masked tokens carry probability exactly zero. Gradients are
derived by hand and back-propagated through time.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from fuzzydsr.schemas import ArrayPayload, ControllerCheckpoint
from fuzzydsr.services.artifacts import atomic_write_text
from fuzzydsr.services.constraints import ConstraintConfig, mask_for_state
from fuzzydsr.services.expression import Traversal
from fuzzydsr.services.tokens import Library

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
INIT_SCALE = 0.1

Array = NDArray[np.float64]


class ControllerError(RuntimeError):
    pass


class UnreachableTraversal(ControllerError):
    pass


class NonFiniteGradient(ControllerError):
    pass


@dataclass
class ControllerParams:
    parent_embedding: Array
    sibling_embedding: Array
    w_input: Array
    w_hidden: Array
    b_hidden: Array
    w_output: Array
    b_output: Array

    def __post_init__(self) -> None:
        vocab_plus_empty, embed = self.parent_embedding.shape
        hidden = self.w_hidden.shape[0]
        library_size = vocab_plus_empty - 1
        expected = {
            "parent_embedding": (library_size + 1, embed),
            "sibling_embedding": (library_size + 1, embed),
            "w_input": (hidden, 2 * embed),
            "w_hidden": (hidden, hidden),
            "b_hidden": (hidden,),
            "w_output": (library_size, hidden),
            "b_output": (library_size,),
        }
        for name, shape in expected.items():
            array = getattr(self, name)
            if array.shape != shape:
                raise ControllerError(f"{name} has shape {array.shape}, expected {shape}")
            if not np.isfinite(array).all():
                raise ControllerError(f"{name} holds non-finite entries")

    @property
    def library_size(self) -> int:
        return self.w_output.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def embedding_size(self) -> int:
        return self.parent_embedding.shape[1]

    @property
    def empty_index(self) -> int:
        return self.library_size

    def as_dict(self) -> dict[str, Array]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> ControllerParams:
        return ControllerParams(**{name: array.copy() for name, array in self.as_dict().items()})


PARAM_NAMES: tuple[str, ...] = tuple(f.name for f in fields(ControllerParams))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


@dataclass
class Controller:
    params: ControllerParams
    optimizer: AdamState = field(default_factory=AdamState)


@dataclass(frozen=True)
class Trajectory:
    traversal: Traversal
    step_log_probs: tuple[float, ...]
    step_entropies: tuple[float, ...]

    @property
    def total_log_prob(self) -> float:
        return float(sum(self.step_log_probs))

    @property
    def total_entropy(self) -> float:
        return float(sum(self.step_entropies))


@dataclass(frozen=True)
class GradientStepReport:
    objective: float
    grad_norm: float


def init_controller(
    library_size: int,
    hidden_size: int,
    seed: int,
    *,
    embedding_size: int = 16,
) -> Controller:
    if library_size <= 0 or hidden_size <= 0 or embedding_size <= 0:
        raise ControllerError("Controller sizes must be positive")

    rng = np.random.default_rng(seed)

    def uniform(*shape: int) -> Array:
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

    params = ControllerParams(
        parent_embedding=uniform(library_size + 1, embedding_size),
        sibling_embedding=uniform(library_size + 1, embedding_size),
        w_input=uniform(hidden_size, 2 * embedding_size),
        w_hidden=uniform(hidden_size, hidden_size),
        b_hidden=np.zeros(hidden_size),
        # Zero head: the untrained policy is uniform over the admissible tokens.
        w_output=np.zeros((library_size, hidden_size)),
        b_output=np.zeros(library_size),
    )
    return Controller(params=params)


class _SlotTracker:
    """Follows a pre-order prefix and reports the parent and left sibling of the next slot."""

    def __init__(self, lib: Library, empty: int):
        self.lib = lib
        self.empty = empty
        self.length = 0
        self.open = 1
        # [token id, children still missing, root token of the last finished child]
        self._stack: list[list[int]] = []

    def parent_sibling(self) -> tuple[int, int]:
        if not self._stack:
            return self.empty, self.empty
        token_id, _, last_child = self._stack[-1]
        return token_id, last_child

    def push(self, token_id: int) -> None:
        arity = int(self.lib.arities[token_id])
        self.length += 1
        self.open += arity - 1
        if arity > 0:
            self._stack.append([token_id, arity, self.empty])
            return

        finished = token_id
        while self._stack:
            top = self._stack[-1]
            top[1] -= 1
            top[2] = finished
            if top[1] > 0:
                return
            finished = self._stack.pop()[0]


@dataclass
class _StepCache:
    parent: int
    sibling: int
    x: Array
    h_prev: Array
    h: Array
    probs: Array
    log_probs: Array
    mask: NDArray[np.bool_]
    token: int
    entropy: float


def _step(params: ControllerParams, h_prev: Array, parent: int, sibling: int, mask: NDArray[np.bool_]):
    x = np.concatenate((params.parent_embedding[parent], params.sibling_embedding[sibling]))
    h = np.tanh(params.w_input @ x + params.w_hidden @ h_prev + params.b_hidden)
    logits = params.w_output @ h + params.b_output

    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted[mask].max()
    weights = np.exp(shifted)
    total = weights.sum()
    probs = weights / total
    log_probs = np.where(mask, shifted - np.log(total), 0.0)
    entropy = float(-(probs[mask] * log_probs[mask]).sum())
    return x, h, probs, log_probs, entropy


def sample_traversal(
    ctrl: Controller,
    lib: Library,
    cfg: ConstraintConfig,
    rng: np.random.Generator,
) -> Trajectory:
    params = ctrl.params
    if params.library_size != len(lib):
        raise ControllerError(f"Controller covers {params.library_size} tokens, library has {len(lib)}")

    tracker = _SlotTracker(lib, params.empty_index)
    h = np.zeros(params.hidden_size)
    tokens: list[int] = []
    log_probs: list[float] = []
    entropies: list[float] = []

    while tracker.open > 0:
        mask = mask_for_state(tracker.length, tracker.open, lib, cfg)
        if not mask.any():
            raise ControllerError(f"Constraint mask emptied after prefix {tokens}")
        parent, sibling = tracker.parent_sibling()
        _, h, probs, step_log_probs, entropy = _step(params, h, parent, sibling, mask)
        token = int(rng.choice(len(lib), p=probs))
        tokens.append(token)
        log_probs.append(float(step_log_probs[token]))
        entropies.append(entropy)
        tracker.push(token)

    return Trajectory(traversal=tuple(tokens), step_log_probs=tuple(log_probs), step_entropies=tuple(entropies))


def _forward(params: ControllerParams, traversal: Sequence[int], lib: Library, cfg: ConstraintConfig) -> list[_StepCache]:
    tracker = _SlotTracker(lib, params.empty_index)
    h = np.zeros(params.hidden_size)
    steps: list[_StepCache] = []

    for position, token in enumerate(traversal):
        if tracker.open <= 0:
            raise UnreachableTraversal(f"Traversal is already complete before index {position}")
        mask = mask_for_state(tracker.length, tracker.open, lib, cfg)
        if not mask[token]:
            raise UnreachableTraversal(f"Token '{lib[token].name}' is masked at index {position}")
        parent, sibling = tracker.parent_sibling()
        h_prev = h
        x, h, probs, log_probs, entropy = _step(params, h_prev, parent, sibling, mask)
        steps.append(
            _StepCache(
                parent=parent,
                sibling=sibling,
                x=x,
                h_prev=h_prev,
                h=h,
                probs=probs,
                log_probs=log_probs,
                mask=mask,
                token=token,
                entropy=entropy,
            )
        )
        tracker.push(token)

    if tracker.open != 0:
        raise UnreachableTraversal(f"Traversal leaves {tracker.open} open slot(s)")
    return steps


def _backward(params: ControllerParams, steps: list[_StepCache], dlogits: list[Array]) -> dict[str, Array]:
    grads = {name: np.zeros_like(array) for name, array in params.as_dict().items()}
    embed = params.embedding_size
    dh_next = np.zeros(params.hidden_size)

    for step, dz in zip(reversed(steps), reversed(dlogits), strict=True):
        grads["w_output"] += np.outer(dz, step.h)
        grads["b_output"] += dz
        dh = params.w_output.T @ dz + dh_next
        da = dh * (1.0 - step.h * step.h)
        grads["w_input"] += np.outer(da, step.x)
        grads["w_hidden"] += np.outer(da, step.h_prev)
        grads["b_hidden"] += da
        dx = params.w_input.T @ da
        grads["parent_embedding"][step.parent] += dx[:embed]
        grads["sibling_embedding"][step.sibling] += dx[embed:]
        dh_next = params.w_hidden.T @ da

    return grads


def _log_prob_dlogits(step: _StepCache) -> Array:
    dz = -step.probs.copy()
    dz[step.token] += 1.0
    return dz


def _entropy_dlogits(step: _StepCache) -> Array:
    return np.where(step.mask, -step.probs * (step.log_probs + step.entropy), 0.0)


def log_prob_and_grad(
    ctrl: Controller,
    traversal: Sequence[int],
    lib: Library,
    cfg: ConstraintConfig,
) -> tuple[float, dict[str, Array]]:
    steps = _forward(ctrl.params, traversal, lib, cfg)
    total = float(sum(float(step.log_probs[step.token]) for step in steps))
    return total, _backward(ctrl.params, steps, [_log_prob_dlogits(step) for step in steps])


def entropy_and_grad(
    ctrl: Controller,
    traversal: Sequence[int],
    lib: Library,
    cfg: ConstraintConfig,
) -> tuple[float, dict[str, Array]]:
    steps = _forward(ctrl.params, traversal, lib, cfg)
    total = float(sum(step.entropy for step in steps))
    return total, _backward(ctrl.params, steps, [_entropy_dlogits(step) for step in steps])


def gradient_step(
    ctrl: Controller,
    trajectories: Sequence[Trajectory],
    advantages: Sequence[float],
    learning_rate: float,
    entropy_weight: float,
    *,
    lib: Library,
    cfg: ConstraintConfig,
) -> GradientStepReport:
    """Adaptive-moment ascent on mean(advantage * log p + entropy_weight * entropy)."""
    if len(trajectories) != len(advantages):
        raise ControllerError(
            f"Got {len(trajectories)} trajectories but {len(advantages)} advantages"
        )
    if not trajectories:
        return GradientStepReport(objective=0.0, grad_norm=0.0)

    params = ctrl.params
    scale = 1.0 / len(trajectories)
    grads = {name: np.zeros_like(array) for name, array in params.as_dict().items()}
    objective = 0.0

    for trajectory, advantage in zip(trajectories, advantages, strict=True):
        steps = _forward(params, trajectory.traversal, lib, cfg)
        dlogits = []
        for step in steps:
            dz = advantage * _log_prob_dlogits(step)
            if entropy_weight:
                dz = dz + entropy_weight * _entropy_dlogits(step)
            dlogits.append(dz * scale)
            objective += scale * (advantage * float(step.log_probs[step.token]) + entropy_weight * step.entropy)
        for name, grad in _backward(params, steps, dlogits).items():
            grads[name] += grad

    bad = [name for name, grad in grads.items() if not np.isfinite(grad).all()]
    if bad:
        logger.error("controller_gradient_nonfinite params=%s step=%s", ",".join(bad), ctrl.optimizer.step)
        raise NonFiniteGradient(f"Non-finite gradient in {', '.join(bad)}; step aborted")

    grad_norm = float(np.sqrt(sum(float((grad * grad).sum()) for grad in grads.values())))
    _adam_ascent(ctrl, grads, learning_rate)
    return GradientStepReport(objective=objective, grad_norm=grad_norm)


def _adam_ascent(ctrl: Controller, grads: dict[str, Array], learning_rate: float) -> None:
    state = ctrl.optimizer
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, grad in grads.items():
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(grad)
            v = np.zeros_like(grad)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v
        update = learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        array = getattr(ctrl.params, name)
        array += update


def _payload(array: Array) -> ArrayPayload:
    return ArrayPayload(shape=list(array.shape), data=[float(x) for x in array.ravel()])


def _unpayload(payload: ArrayPayload) -> Array:
    return np.array(payload.data, dtype=np.float64).reshape(payload.shape)


def save_checkpoint(ctrl: Controller, path: Path) -> None:
    state = ctrl.optimizer
    checkpoint = ControllerCheckpoint(
        version=CHECKPOINT_VERSION,
        library_size=ctrl.params.library_size,
        hidden_size=ctrl.params.hidden_size,
        embedding_size=ctrl.params.embedding_size,
        params={name: _payload(array) for name, array in ctrl.params.as_dict().items()},
        adam_step=state.step,
        adam_m={name: _payload(array) for name, array in state.m.items()},
        adam_v={name: _payload(array) for name, array in state.v.items()},
    )
    atomic_write_text(path, checkpoint.model_dump_json(indent=2))
    logger.info("controller_checkpoint_saved path=%s step=%s", path, state.step)


def load_checkpoint(path: Path) -> Controller:
    checkpoint = ControllerCheckpoint.model_validate_json(Path(path).read_text(encoding="utf-8"))
    if checkpoint.version != CHECKPOINT_VERSION:
        raise ControllerError(f"Unsupported checkpoint version {checkpoint.version}")
    missing = set(PARAM_NAMES) - set(checkpoint.params)
    if missing:
        raise ControllerError(f"Checkpoint is missing {sorted(missing)}")
    params = ControllerParams(**{name: _unpayload(checkpoint.params[name]) for name in PARAM_NAMES})
    optimizer = AdamState(
        step=checkpoint.adam_step,
        m={name: _unpayload(p) for name, p in checkpoint.adam_m.items()},
        v={name: _unpayload(p) for name, p in checkpoint.adam_v.items()},
    )
    return Controller(params=params, optimizer=optimizer)
