"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest

from oracles import gossip_sgd_trajectory
from squarm.compress import CompressorSpec, compress, decode, estimate_contraction, omega_of
from squarm.config import build_run_config, merged
from squarm.engine import metrics_csv, run
from squarm.objective import loss, optimum
from squarm.presets import preset
from squarm.schedule import gamma_relaxed, gamma_strong, min_a_strongly_convex, p_of, s_T
from squarm.topology import build_ring, power_deviation

RING_DELTA = 1 - (1 / 3 + (2 / 3) * math.cos(math.pi / 4))

# trigger-drift violations accumulated over every diagnostics run in this
# module; criterion 8 asserts the total is zero
_DRIFT_LEDGER: list[tuple[str, int]] = []


def _record(name: str, result) -> None:
    _DRIFT_LEDGER.append((name, result.diagnostics.trigger_violations))


def _report(num: int, name: str, ok: bool, detail: str) -> bool:
    print(f"criterion {num:2d} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def _spec_for(kind: str, d: int) -> CompressorSpec:
    if kind == "top_k":
        return CompressorSpec(kind, k=max(1, d // 4))
    if kind == "rand_k":
        return CompressorSpec(kind, k=max(1, d // 2))
    if kind == "qsgd":
        return CompressorSpec(kind, s=int(np.ceil(np.sqrt(d))) + 1)
    if kind == "qsgd_top_k":
        return CompressorSpec(kind, k=max(1, d // 4), s=4)
    return CompressorSpec(kind)


def test_criterion_01_compression_contract():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_gap = -np.inf
    for kind in ("top_k", "rand_k", "qsgd", "qsgd_top_k", "identity"):
        for d in (8, 64, 256):
            spec = _spec_for(kind, d)
            omega = omega_of(spec, d)
            ratio = estimate_contraction(spec, d, 10_000, rng)
            worst_gap = max(worst_gap, ratio - ((1 - omega) + 0.02))
    worst_rel = 0.0
    sign_spec = CompressorSpec("scaled_sign")
    for _ in range(1000):
        d = int(rng.integers(2, 128))
        x = rng.standard_normal(d) * rng.uniform(0.01, 10)
        c = decode(compress(sign_spec, x, rng))
        lhs = float((x - c) @ (x - c))
        rhs = float(x @ x) - float(np.abs(x).sum()) ** 2 / d
        worst_rel = max(worst_rel, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 0.0 and worst_rel < 1e-9 and elapsed < 10.0
    assert _report(
        1,
        "compression contract",
        ok,
        f"max bound gap {worst_gap:.4f}, sign residual rel err {worst_rel:.2e}, {elapsed:.1f}s",
    )


def test_criterion_02_qsgd_unbiasedness():
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    d, trials = 16, 100_000
    spec = CompressorSpec("qsgd", s=4)
    x = rng.standard_normal(d)
    acc = np.zeros(d)
    sq = np.zeros(d)
    for _ in range(trials):
        c = decode(compress(spec, x, rng))
        acc += c
        sq += c * c
    mean = acc / trials
    se = np.sqrt(np.maximum(sq / trials - mean**2, 1e-30) / trials)
    devs = np.abs(mean - x) / se
    elapsed = time.perf_counter() - start
    ok = bool(np.all(devs <= 4.0)) and elapsed < 5.0
    assert _report(2, "qsgd unbiasedness", ok, f"max dev {devs.max():.2f} se, {elapsed:.1f}s")


def test_criterion_03_spectral_facts():
    start = time.perf_counter()
    worst = 0.0
    for n in (4, 8, 16):
        w = build_ring(n, 1 / 3)
        for k in range(11):
            worst = max(worst, abs(power_deviation(w.w, k) - (1 - w.delta) ** k))
    j_err = max(
        abs(float(np.linalg.norm(np.full((n, n), 1 / n) - np.eye(n), 2)) - 1.0)
        for n in (4, 8, 16)
    )
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and j_err < 1e-10 and elapsed < 1.0
    assert _report(
        3, "spectral facts", ok, f"power err {worst:.2e}, J-I err {j_err:.2e}, {elapsed:.2f}s"
    )


@pytest.fixture(scope="module")
def squarm_500_run():
    flat = merged(
        {
            "topology.n": 8,
            "objective.d": 100,
            "objective.mu": 0.5,
            "objective.L": 3.0,
            "objective.noise_sigma": 0.3,
            "compressor.kind": "sign_top_k",
            "compressor.k": 1,  # 1% of d = 100
            "threshold.kind": "piecewise",
            "threshold.init": 2.5,
            "threshold.step": 1.5,
            "threshold.period": 100,
            "gamma.kind": "explicit",
            "gamma.value": 0.5,
            "H": 5,
            "beta": 0.9,
            "T": 500,
            "seed": 104,
            "lr.kind": "auto_constant",
            "x0_scale": 1.0,
            "diagnostics": True,
        }
    )
    cfg, _ = build_run_config(flat)
    start = time.perf_counter()
    result = run(cfg)
    elapsed = time.perf_counter() - start
    _record("squarm-500", result)
    return result, elapsed


def test_criterion_04_mean_preservation(squarm_500_run):
    result, elapsed = squarm_500_run
    dev = result.diagnostics.max_mean_dev
    ok = dev < 1e-10 and elapsed < 5.0
    assert _report(
        4,
        "mean preservation",
        ok,
        f"max dev {dev:.2e} over {result.diagnostics.sync_rounds} rounds, {elapsed:.1f}s",
    )


def test_criterion_05_virtual_sequence(squarm_500_run):
    result, elapsed = squarm_500_run
    res = result.diagnostics.max_virtual_residual
    ok = res < 1e-8 and elapsed < 5.0
    assert _report(5, "virtual-sequence recurrence", ok, f"max residual {res:.2e}, {elapsed:.1f}s")


def test_criterion_06_dpsgd_degeneracy():
    seed, n, d, T, eta = 106, 8, 10, 200, 0.05
    flat = merged(
        preset("dpsgd"),
        {
            "topology.n": n,
            "objective.d": d,
            "objective.mu": 0.5,
            "objective.L": 4.0,
            "objective.noise_sigma": 0.2,
            "T": T,
            "seed": seed,
            "lr.kind": "constant",
            "lr.eta": eta,
            "x0_scale": 1.0,
            "trace": True,
        },
    )
    cfg, _ = build_run_config(flat)
    result = run(cfg)
    _record("dpsgd-200", result)
    oracle = gossip_sgd_trajectory(cfg.objective, cfg.topology.w, eta, T, seed, x0_scale=1.0)
    worst = max(np.abs(result.trace[t] - oracle[t + 1]).max() for t in range(T))
    ok = worst < 1e-12
    assert _report(6, "gossip-SGD degeneracy", ok, f"max traj diff {worst:.2e}")


def test_criterion_07_memory_efficient_equivalence():
    base = {
        "topology.n": 8,
        "objective.d": 40,
        "objective.mu": 0.5,
        "objective.L": 3.0,
        "objective.noise_sigma": 0.3,
        "compressor.kind": "sign_top_k",
        "compressor.k": 2,
        "threshold.kind": "poly",
        "threshold.c0": 1.0,
        "threshold.epsilon": 0.5,
        "gamma.kind": "explicit",
        "gamma.value": 0.5,
        "H": 5,
        "beta": 0.9,
        "T": 500,
        "seed": 107,
        "lr.kind": "auto_constant",
        "x0_scale": 1.0,
        "trace": True,
    }
    results = {}
    for variant in ("full_copy", "mem_efficient"):
        cfg, _ = build_run_config(merged(base, {"variant": variant}))
        results[variant] = run(cfg)
        _record(f"variant-{variant}", results[variant])
    worst = max(
        np.abs(a - b).max()
        for a, b in zip(results["full_copy"].trace, results["mem_efficient"].trace)
    )
    ok = worst < 1e-10
    assert _report(7, "memory-efficient equivalence", ok, f"max traj diff {worst:.2e}")


def test_criterion_09_momentum_bound():
    worst = 0.0
    for beta in (0.5, 0.9):
        flat = merged(
            {
                "topology.n": 8,
                "objective.d": 16,
                "objective.mu": 0.5,
                "objective.L": 3.0,
                "objective.noise_sigma": 1.0,
                "compressor.kind": "top_k",
                "compressor.k": 2,
                "threshold.kind": "always",
                "gamma.kind": "explicit",
                "gamma.value": 0.5,
                "H": 5,
                "beta": beta,
                "T": 1000,
                "seed": 109,
                "lr.kind": "auto_constant",
                "grad_clip": 1.0,
                "x0_scale": 1.0,
                "diagnostics": True,
            }
        )
        cfg, _ = build_run_config(flat)
        result = run(cfg)
        _record(f"momentum-{beta}", result)
        excess = result.diagnostics.max_momentum_norm - (1.0 / (1.0 - beta) + 1e-9)
        worst = max(worst, excess)
    ok = worst <= 0.0
    assert _report(9, "momentum norm bound", ok, f"max excess {worst:.2e}")


def test_criterion_10_hyperparameter_formulas():
    start = time.perf_counter()
    rng = np.random.default_rng(110)
    ok = True
    for _ in range(1000):
        delta = rng.uniform(1e-9, 1.0)
        omega = rng.uniform(1e-9, 1.0)
        lam = rng.uniform(1e-9, 2.0)
        gs = gamma_strong(delta, omega, lam)
        ok &= gs <= omega
        ok &= p_of(gs, delta) >= delta**2 * omega / 644.0
    ok &= abs(gamma_strong(1, 1, 1) - 2 / 73) < 1e-12
    ok &= abs(gamma_relaxed(1, 1, 1) - 2 / 157) < 1e-12
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 1.0
    assert _report(10, "hyperparameter formulas", bool(ok), f"1000 draws, {elapsed:.2f}s")


# shared problem for criteria 11 and 12
_CONVEX_PROBLEM = {
    "topology.n": 8,
    "objective.d": 20,
    "objective.mu": 0.1,
    "objective.L": 1.0,
    "objective.noise_sigma": 0.1,
    "objective.hetero_scale": 1.0,
    "x0_scale": 1.0,
    "seed": 111,
    "eval_every": 100,
}
_GAMMA_11 = 0.5
_BETA_11 = 0.2
_H_11 = 5


def _squarm_convex_flat(compressor: dict, T: int) -> dict:
    p = _GAMMA_11 * RING_DELTA / 8.0
    a = min_a_strongly_convex(_H_11, p, 1.0, 0.1, _BETA_11)
    return merged(
        _CONVEX_PROBLEM,
        compressor,
        {
            "threshold.kind": "poly",
            "threshold.c0": 2.0,
            "threshold.epsilon": 0.5,
            "gamma.kind": "explicit",
            "gamma.value": _GAMMA_11,
            "H": _H_11,
            "beta": _BETA_11,
            "T": T,
            "lr.kind": "decaying",
            "lr.b": 16 * (1 - _BETA_11) / 0.1,
            "lr.a": a,
        },
    )


def test_criterion_11_strongly_convex_convergence():
    start = time.perf_counter()
    vals = {}
    for T in (5000, 20000):
        cfg, _ = build_run_config(
            _squarm_convex_flat({"compressor.kind": "top_k", "compressor.k": 2}, T)
        )
        result = run(cfg)
        _record(f"convex-{T}", result)
        _, f_star = optimum(cfg.objective)
        vals[T] = loss(cfg.objective, result.x_avg) - f_star
    ratio = vals[20000] / vals[5000]
    elapsed = time.perf_counter() - start
    ok = ratio < 0.35 and elapsed < 60.0
    assert _report(
        11,
        "strongly-convex convergence",
        ok,
        f"f(x_avg)-f*: {vals[5000]:.3g} -> {vals[20000]:.3g}, ratio {ratio:.3f}, {elapsed:.0f}s",
    )


def test_criterion_12_communication_savings():
    start = time.perf_counter()
    # vanilla baseline: uncompressed gossip every iteration, its own
    # admissible decaying schedule
    a_d = min_a_strongly_convex(1, RING_DELTA / 8.0, 1.0, 0.1, 0.0)
    dp_flat = merged(
        preset("dpsgd"),
        _CONVEX_PROBLEM,
        {"T": 10000, "lr.kind": "decaying", "lr.b": 160.0, "lr.a": a_d},
    )
    cfg_d, _ = build_run_config(dp_flat)
    res_d = run(cfg_d)
    _record("savings-dpsgd", res_d)
    _, f_star = optimum(cfg_d.objective)
    eps = res_d.rows[-1].loss - f_star
    bits_d = next(r.bits_cum for r in res_d.rows if r.loss - f_star <= eps)

    sq_flat = _squarm_convex_flat(
        {"compressor.kind": "sign_top_k", "compressor.k": 1}, 60000  # 5% of d = 20
    )
    cfg_s, _ = build_run_config(sq_flat)
    res_s = run(cfg_s)
    _record("savings-squarm", res_s)
    _, f_star_s = optimum(cfg_s.objective)
    hit = next((r for r in res_s.rows if r.loss - f_star_s <= eps), None)
    elapsed = time.perf_counter() - start
    ok = hit is not None and hit.bits_cum * 10 <= bits_d and elapsed < 90.0
    detail = (
        f"target {eps:.3g}; bits {hit.bits_cum if hit else 'n/a'} vs {bits_d} "
        f"({bits_d / hit.bits_cum:.0f}x saved), {elapsed:.0f}s"
        if hit
        else f"target never reached, {elapsed:.0f}s"
    )
    assert _report(12, "communication savings", ok, detail)


def test_criterion_13_determinism():
    base = {
        "topology.n": 8,
        "objective.d": 30,
        "objective.mu": 0.5,
        "objective.L": 3.0,
        "objective.noise_sigma": 0.3,
        "compressor.kind": "sign_top_k",
        "compressor.k": 2,
        "threshold.kind": "piecewise",
        "threshold.init": 2.5,
        "threshold.step": 1.5,
        "threshold.period": 100,
        "gamma.kind": "explicit",
        "gamma.value": 0.5,
        "H": 5,
        "beta": 0.9,
        "T": 400,
        "seed": 113,
        "lr.kind": "auto_constant",
        "x0_scale": 1.0,
        "parallel": True,
    }
    csvs = []
    for _ in range(2):
        cfg, _ = build_run_config(merged(base))
        csvs.append(metrics_csv(run(cfg)))
    cfg_serial, _ = build_run_config(merged(base, {"parallel": False}))
    serial_csv = metrics_csv(run(cfg_serial))
    ok = csvs[0] == csvs[1] == serial_csv
    assert _report(
        13, "determinism", ok, f"parallel repeat identical: {csvs[0] == csvs[1]}, "
        f"parallel == serial: {csvs[0] == serial_csv}"
    )


def test_criterion_14_closed_form_weight_sum():
    ok = all(
        s_T(a, T) == sum((a + t) ** 2 for t in range(T))
        for a in range(1, 6)
        for T in range(1, 51)
    )
    assert _report(14, "closed-form S_T", ok, "(a,T) in {1..5}x{1..50}")


def test_criterion_08_trigger_drift_bound():
    # runs last: audits every diagnostics run this module executed
    total = sum(count for _, count in _DRIFT_LEDGER)
    runs = len(_DRIFT_LEDGER)
    ok = total == 0 and runs >= 8
    assert _report(8, "trigger-drift bound", ok, f"{total} violations across {runs} runs")
