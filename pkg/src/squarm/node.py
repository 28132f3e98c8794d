"""Per-node state and the four state transitions of one worker.

Each node holds parameters x, a momentum buffer v, and its public copy
hat_self (the stale, compressed view of x that all neighbors hold
identically). Bookkeeping of the neighbors' public copies comes in two
variants:

  full_copy      an explicit table copies[j] per neighbor j
  mem_efficient  a single weighted-sum accumulator
                 s = sum_{j in N_i + {i}} w_ij * hat_x_j

Both variants produce the same trajectories: since the weight row sums to
one, s - hat_self = sum_j w_ij (hat_x_j - hat_self).

The local step uses the updated momentum buffer (v <- beta v + g, then
x <- x - eta (beta v + g)); some momentum conventions use the stale buffer
instead, so this is worth stating. Triggering is strict (>), so a zero
threshold still suppresses exact-zero differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compress import CompressedMessage, CompressorSpec, compress
from .errors import DomainError, TopologyError


@dataclass
class NodeState:
    index: int
    x: np.ndarray
    v: np.ndarray
    hat_self: np.ndarray
    copies: dict[int, np.ndarray] | None = None  # full_copy variant
    s: np.ndarray | None = None  # mem_efficient variant
    neighbors: tuple[int, ...] = field(default=())


def make_node(index: int, x0: np.ndarray, neighbors: tuple[int, ...], variant: str) -> NodeState:
    """Fresh node with x = x0 and all communication state zeroed."""
    d = x0.shape[0]
    if variant == "full_copy":
        return NodeState(
            index=index,
            x=np.array(x0, dtype=float, copy=True),
            v=np.zeros(d),
            hat_self=np.zeros(d),
            copies={j: np.zeros(d) for j in neighbors},
            neighbors=tuple(neighbors),
        )
    if variant == "mem_efficient":
        return NodeState(
            index=index,
            x=np.array(x0, dtype=float, copy=True),
            v=np.zeros(d),
            hat_self=np.zeros(d),
            s=np.zeros(d),
            neighbors=tuple(neighbors),
        )
    raise ValueError(f"unknown variant {variant!r}")


def local_step(state: NodeState, g: np.ndarray, eta: float, beta: float) -> None:
    """Momentum SGD step: v <- beta v + g; x <- x - eta (beta v_new + g)."""
    if not np.isfinite(g).all():
        raise DomainError("gradient has non-finite entries")
    state.v = beta * state.v + g
    state.x = state.x - eta * (beta * state.v + g)


def should_trigger(state: NodeState, c_t: float, eta: float) -> bool:
    """True iff the copy drift ||x - hat_self||^2 strictly exceeds c_t eta^2."""
    if math.isinf(c_t):
        return False
    diff = state.x - state.hat_self
    return float(diff @ diff) > c_t * eta * eta


def encode_update(state: NodeState, spec: CompressorSpec, rng: np.random.Generator) -> CompressedMessage:
    """Compress the change in this node's public copy; state is untouched
    (the copy itself advances when the message is applied)."""
    return compress(spec, state.x - state.hat_self, rng)


def apply_incoming(state: NodeState, sender: int, q: np.ndarray, w_row: np.ndarray) -> None:
    """Fold one decoded payload q from `sender` into the copy bookkeeping.

    A node applies its own broadcast too (sender == state.index), which keeps
    hat_self in lockstep with the copy of this node held by every neighbor.
    """
    if state.copies is not None:
        if sender == state.index:
            state.hat_self = state.hat_self + q
        else:
            if sender not in state.copies:
                raise TopologyError(f"node {state.index} got message from non-neighbor {sender}")
            state.copies[sender] = state.copies[sender] + q
    else:
        if sender != state.index and sender not in state.neighbors:
            raise TopologyError(f"node {state.index} got message from non-neighbor {sender}")
        state.s = state.s + w_row[sender] * q
        if sender == state.index:
            state.hat_self = state.hat_self + q


def consensus_step(state: NodeState, gamma: float, w_row: np.ndarray) -> None:
    """Gossip correction x += gamma * sum_j w_ij (hat_x_j - hat_self)."""
    if state.copies is not None:
        acc = np.zeros_like(state.x)
        for j, copy in state.copies.items():
            acc += w_row[j] * (copy - state.hat_self)
        state.x = state.x + gamma * acc
    else:
        state.x = state.x + gamma * (state.s - state.hat_self)
