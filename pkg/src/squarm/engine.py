"""Run loop: local momentum steps, event-triggered compressed gossip,
metrics, bit accounting, and exact-identity diagnostics.

Iterations are indexed t = 0..T-1. Communication happens after the local
step of iteration t whenever (t+1) is a multiple of the synchronization gap
H; the listing's index set {0, H, 2H, ...} therefore makes the first
exchange land at t+1 = H (the 0 element never gates anything because t
starts at 0).

With diagnostics on, each run verifies two algebraic identities online:

  mean preservation   the gossip correction is average-free, so the node
                      average is unchanged by the consensus step at every
                      synchronization index (inf-norm deviation < 1e-10);

  virtual sequence    for constant eta, the shifted average
                      xt = xbar - (eta beta^2 / (1 - beta)) vbar
                      satisfies xt^{t+1} = xt^t - eta/((1-beta) n) sum_i g_i
                      exactly, whatever the compressor or trigger pattern
                      did (inf-norm defect < 1e-8);

plus two protocol facts: every non-triggering node's copy drift is within
its threshold, and with clipped gradients the momentum norm stays below
G/(1-beta).

Everything is deterministic given the seed: each node owns a private random
stream, the node-local phase may run in a thread pool, and messages are
always applied in fixed node order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import node as node_ops
from . import objective as obj_ops
from .compress import CompressorSpec, bit_cost, decode, omega_of
from .errors import ConfigError, DivergenceError, ParameterError
from .schedule import LrSchedule, ThresholdSchedule, eta_at, threshold_at, weighted_avg_weight
from .topology import MixingMatrix

CSV_HEADER = "t,loss,grad_norm_sq,consensus,bits_cum,messages,triggers,virtual_residual,weighted_avg_loss"


@dataclass
class RunConfig:
    """Fully resolved experiment description."""

    topology: MixingMatrix
    objective: obj_ops.ObjectiveSet
    compressor: CompressorSpec
    lr: LrSchedule
    threshold: ThresholdSchedule
    gamma: float
    H: int
    T: int
    beta: float
    seed: int
    variant: str = "full_copy"
    accounting: str = "broadcast"
    eval_every: int | None = None
    diagnostics: bool = False
    parallel: bool = False
    grad_clip: float | None = None
    x0_scale: float = 0.0
    trace: bool = False
    raw: dict = field(default_factory=dict)  # config echo for summaries

    def __post_init__(self):
        if self.H < 1:
            raise ConfigError("H must be >= 1")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError("beta must be in [0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        if self.variant not in ("full_copy", "mem_efficient"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.accounting not in ("broadcast", "unicast"):
            raise ConfigError(f"unknown accounting {self.accounting!r}")
        if self.objective.n != self.topology.n:
            raise ConfigError("objective and topology disagree on node count")


@dataclass
class MetricsRow:
    """State snapshot recorded after completing iteration t."""

    t: int
    loss: float
    grad_norm_sq: float
    consensus: float
    bits_cum: int
    messages: int
    triggers: int
    virtual_residual: float | None
    weighted_avg_loss: float | None


@dataclass
class Diagnostics:
    max_mean_dev: float = 0.0
    max_virtual_residual: float = 0.0
    trigger_violations: int = 0
    max_momentum_norm: float = 0.0
    sync_rounds: int = 0


@dataclass
class RunResult:
    rows: list[MetricsRow]
    x_bar: np.ndarray
    x_avg: np.ndarray | None
    total_bits: int
    config: RunConfig
    diagnostics: Diagnostics
    trace: list[np.ndarray] | None = None


def sync_indices(T: int, H: int) -> list[int]:
    """The synchronization index set {0, H, 2H, ...} below T."""
    if H < 1:
        raise ParameterError("H must be >= 1")
    return list(range(0, T, H))


def bits_to_seconds(bits: float, link_rate_bps: float) -> float:
    """Transmission time of a bit total through a rate-limited link."""
    if link_rate_bps <= 0:
        raise ParameterError("link rate must be > 0")
    return bits / link_rate_bps


def seed_streams(seed: int, n: int):
    """(data_rng, x0_rng, per-node rngs) spawned from one master seed."""
    root = np.random.SeedSequence(seed)
    data_ss, x0_ss, nodes_ss = root.spawn(3)
    node_rngs = [np.random.default_rng(s) for s in nodes_ss.spawn(n)]
    return np.random.default_rng(data_ss), np.random.default_rng(x0_ss), node_rngs


def initial_positions(x0_rng: np.random.Generator, n: int, d: int, scale: float) -> np.ndarray:
    if scale == 0.0:
        return np.zeros((n, d))
    return scale * x0_rng.standard_normal((n, d))


def virtual_residual(
    x_tilde_prev: np.ndarray,
    x_bar_new: np.ndarray,
    v_bar_new: np.ndarray,
    g_bar: np.ndarray,
    eta: float,
    beta: float,
) -> tuple[float, np.ndarray]:
    """Advance the virtual sequence one step and return (defect, new x_tilde).

    The defect is the inf-norm distance between the measured
    xt^{t+1} = xbar^{t+1} - eta beta^2/(1-beta) vbar^t and the value the
    recurrence predicts from xt^t and the mean stochastic gradient.
    """
    if beta >= 1.0:
        raise ParameterError("beta must be < 1")
    x_tilde_new = x_bar_new - (eta * beta**2 / (1.0 - beta)) * v_bar_new
    predicted = x_tilde_prev - (eta / (1.0 - beta)) * g_bar
    return float(np.abs(x_tilde_new - predicted).max()), x_tilde_new


def mean_preservation_check(x_bar_half: np.ndarray, x_bar_next: np.ndarray) -> float:
    """Inf-norm change of the node average across one consensus step."""
    return float(np.abs(x_bar_next - x_bar_half).max())


def run(cfg: RunConfig) -> RunResult:
    W = cfg.topology
    obj = cfg.objective
    n, d = W.n, obj.d
    out_degree = [len(W.neighbors(i)) for i in range(n)]

    _, x0_rng, node_rngs = seed_streams(cfg.seed, n)
    x0 = initial_positions(x0_rng, n, d, cfg.x0_scale)
    nodes = [node_ops.make_node(i, x0[i], W.neighbors(i), cfg.variant) for i in range(n)]

    eval_every = cfg.eval_every if cfg.eval_every else max(1, cfg.T // 200)
    constant_lr = cfg.lr.kind == "constant"
    decaying = cfg.lr.kind == "decaying"

    bits_cum = 0
    messages = 0
    triggers = 0
    rows: list[MetricsRow] = []
    diag = Diagnostics()
    trace = [] if cfg.trace else None

    # weighted-average accumulator (two running sums; O(d) for any T)
    wavg_acc = np.zeros(d) if decaying else None
    wavg_sum = 0.0

    x_tilde = None
    vres_since_eval = 0.0

    def x_bar_now() -> np.ndarray:
        acc = np.zeros(d)
        for st in nodes:
            acc += st.x
        return acc / n

    def local_phase(args):
        st, rng, eta = args
        g = obj_ops.stochastic_grad(obj, st.index, st.x, rng)
        if cfg.grad_clip is not None:
            g = obj_ops.clip_to_norm(g, cfg.grad_clip)
        node_ops.local_step(st, g, eta, cfg.beta)
        return g

    executor = ThreadPoolExecutor(max_workers=min(n, 8)) if cfg.parallel else None
    try:
        for t in range(cfg.T):
            eta = eta_at(cfg.lr, t)

            if decaying:
                w_t = weighted_avg_weight(cfg.lr.a, t)
                wavg_acc += w_t * x_bar_now()
                wavg_sum += w_t

            if cfg.diagnostics and constant_lr and x_tilde is None:
                x_tilde = x_bar_now()  # v^{-1} = 0, so xt^0 = xbar^0

            work = [(nodes[i], node_rngs[i], eta) for i in range(n)]
            if executor is not None:
                grads = list(executor.map(local_phase, work))
            else:
                grads = [local_phase(item) for item in work]

            if cfg.diagnostics:
                for st in nodes:
                    diag.max_momentum_norm = max(
                        diag.max_momentum_norm, float(np.linalg.norm(st.v))
                    )

            if (t + 1) % cfg.H == 0:
                c_t = threshold_at(cfg.threshold, t, eta)
                fired = [node_ops.should_trigger(st, c_t, eta) for st in nodes]
                if cfg.diagnostics and not np.isinf(c_t):
                    for st, f in zip(nodes, fired):
                        if not f:
                            drift = st.x - st.hat_self
                            if float(drift @ drift) > c_t * eta * eta:
                                diag.trigger_violations += 1
                payloads: dict[int, np.ndarray] = {}
                for i in range(n):
                    if fired[i]:
                        msg = node_ops.encode_update(nodes[i], cfg.compressor, node_rngs[i])
                        payloads[i] = decode(msg)
                        cost = bit_cost(cfg.compressor, d, msg)
                        if cfg.accounting == "broadcast":
                            bits_cum += cost
                            messages += 1
                        else:
                            bits_cum += cost * out_degree[i]
                            messages += out_degree[i]
                        triggers += 1
                for sender in range(n):
                    if sender in payloads:
                        q = payloads[sender]
                        node_ops.apply_incoming(nodes[sender], sender, q, W.w[sender])
                        for j in W.neighbors(sender):
                            node_ops.apply_incoming(nodes[j], sender, q, W.w[j])
                x_bar_half = x_bar_now() if cfg.diagnostics else None
                for st in nodes:
                    node_ops.consensus_step(st, cfg.gamma, W.w[st.index])
                if cfg.diagnostics:
                    diag.sync_rounds += 1
                    diag.max_mean_dev = max(
                        diag.max_mean_dev,
                        mean_preservation_check(x_bar_half, x_bar_now()),
                    )

            if cfg.diagnostics and constant_lr:
                g_bar = np.zeros(d)
                for g in grads:
                    g_bar += g
                g_bar /= n
                v_bar = np.zeros(d)
                for st in nodes:
                    v_bar += st.v
                v_bar /= n
                defect, x_tilde = virtual_residual(
                    x_tilde, x_bar_now(), v_bar, g_bar, eta, cfg.beta
                )
                diag.max_virtual_residual = max(diag.max_virtual_residual, defect)
                vres_since_eval = max(vres_since_eval, defect)

            if trace is not None:
                trace.append(np.stack([st.x for st in nodes]))

            if t == 0 or t == cfg.T - 1 or (t + 1) % eval_every == 0:
                xb = x_bar_now()
                f_val = obj_ops.loss(obj, xb)
                grad = obj_ops.full_grad_global(obj, xb)
                consensus = sum(float((st.x - xb) @ (st.x - xb)) for st in nodes)
                wavg_loss = None
                if decaying and wavg_sum > 0:
                    wavg_loss = obj_ops.loss(obj, wavg_acc / wavg_sum)
                row = MetricsRow(
                    t=t,
                    loss=f_val,
                    grad_norm_sq=float(grad @ grad),
                    consensus=consensus,
                    bits_cum=bits_cum,
                    messages=messages,
                    triggers=triggers,
                    virtual_residual=(
                        vres_since_eval if cfg.diagnostics and constant_lr else None
                    ),
                    weighted_avg_loss=wavg_loss,
                )
                vres_since_eval = 0.0
                if not np.isfinite(f_val):
                    partial = RunResult(
                        rows=rows + [row],
                        x_bar=xb,
                        x_avg=(wavg_acc / wavg_sum) if decaying and wavg_sum else None,
                        total_bits=bits_cum,
                        config=cfg,
                        diagnostics=diag,
                        trace=trace,
                    )
                    raise DivergenceError(f"loss diverged at t={t}", partial=partial)
                rows.append(row)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    return RunResult(
        rows=rows,
        x_bar=x_bar_now(),
        x_avg=(wavg_acc / wavg_sum) if decaying and wavg_sum else None,
        total_bits=bits_cum,
        config=cfg,
        diagnostics=diag,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# emission


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def metrics_csv(result: RunResult) -> str:
    lines = [CSV_HEADER]
    for r in result.rows:
        lines.append(
            ",".join(
                _csv_cell(v)
                for v in (
                    r.t,
                    r.loss,
                    r.grad_norm_sq,
                    r.consensus,
                    r.bits_cum,
                    r.messages,
                    r.triggers,
                    r.virtual_residual,
                    r.weighted_avg_loss,
                )
            )
        )
    return "\n".join(lines) + "\n"


def derived_constants(cfg: RunConfig) -> dict:
    return {
        "gamma": cfg.gamma,
        "p": cfg.gamma * cfg.topology.delta / 8.0,
        "delta": cfg.topology.delta,
        "lambda": cfg.topology.lambda_dev,
        "omega": omega_of(cfg.compressor, cfg.objective.d),
    }


def summary_json(result: RunResult) -> str:
    last = result.rows[-1]
    payload = {
        "final": {
            "t": last.t,
            "loss": last.loss,
            "grad_norm_sq": last.grad_norm_sq,
            "consensus": last.consensus,
            "bits_cum": last.bits_cum,
            "messages": last.messages,
            "triggers": last.triggers,
        },
        "total_bits": result.total_bits,
        "derived": derived_constants(result.config),
        "diagnostics": {
            "max_mean_dev": result.diagnostics.max_mean_dev,
            "max_virtual_residual": result.diagnostics.max_virtual_residual,
            "trigger_violations": result.diagnostics.trigger_violations,
            "max_momentum_norm": result.diagnostics.max_momentum_norm,
            "sync_rounds": result.diagnostics.sync_rounds,
        },
        "config": result.config.raw,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
