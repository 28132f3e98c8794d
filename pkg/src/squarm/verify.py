"""Self-contained property suites behind the `verify` CLI command.

Each suite returns a list of (name, passed, detail) tuples so the CLI can
print a pass/fail table and exit nonzero on the first failure. The checks
mirror the per-module invariants; the pytest suite covers the same ground
plus oracle comparisons.
"""

from __future__ import annotations

import numpy as np

from . import compress as comp
from . import schedule as sched
from .config import build_run_config, merged
from .engine import run
from .topology import build_complete, build_custom, build_ring, power_deviation

Check = tuple[str, bool, str]


def _check(name: str, ok: bool, detail: str = "") -> Check:
    return (name, bool(ok), detail)


def compression_suite(seed: int = 0) -> list[Check]:
    checks: list[Check] = []
    rng = np.random.default_rng(seed)
    dims = (8, 64, 256)
    for d in dims:
        specs = [
            comp.CompressorSpec("identity"),
            comp.CompressorSpec("top_k", k=max(1, d // 4)),
            comp.CompressorSpec("rand_k", k=max(1, d // 2)),
            comp.CompressorSpec("qsgd", s=int(np.ceil(np.sqrt(d))) + 1),
            comp.CompressorSpec("scaled_sign"),
            comp.CompressorSpec("sign_top_k", k=max(1, d // 10)),
            comp.CompressorSpec("qsgd_top_k", k=max(1, d // 4), s=4),
        ]
        for spec in specs:
            zero = comp.decode(comp.compress(spec, np.zeros(d), rng))
            checks.append(
                _check(f"{spec.kind}/d={d} C(0)=0", not zero.any(), "nonzero output at 0")
            )
            omega = comp.omega_of(spec, d)
            if omega is not None:
                ratio = comp.estimate_contraction(spec, d, 2000, rng)
                ok = ratio <= (1.0 - omega) + 0.02
                checks.append(
                    _check(
                        f"{spec.kind}/d={d} contraction",
                        ok,
                        f"ratio {ratio:.4f} vs bound {(1.0 - omega) + 0.02:.4f}",
                    )
                )
        # exact scaled-sign residual identity
        worst = 0.0
        for _ in range(200):
            x = rng.standard_normal(d)
            c = comp.decode(comp.compress(comp.CompressorSpec("scaled_sign"), x, rng))
            lhs = float((x - c) @ (x - c))
            rhs = float(x @ x) - float(np.abs(x).sum()) ** 2 / d
            worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-30))
        checks.append(
            _check(f"scaled_sign/d={d} exact residual", worst < 1e-9, f"rel err {worst:.2e}")
        )
    return checks


def spectral_suite() -> list[Check]:
    checks: list[Check] = []
    for n in (4, 8, 16):
        w = build_ring(n, 1.0 / 3.0)
        worst = max(
            abs(power_deviation(w.w, k) - (1.0 - w.delta) ** k) for k in range(11)
        )
        checks.append(
            _check(f"ring n={n} power deviation", worst < 1e-8, f"max err {worst:.2e}")
        )
        j_minus_i = float(np.linalg.norm(np.full((n, n), 1.0 / n) - np.eye(n), 2))
        checks.append(
            _check(f"n={n} ||J - I|| = 1", abs(j_minus_i - 1.0) < 1e-10, f"{j_minus_i!r}")
        )
    cw = build_complete(8)
    checks.append(
        _check(
            "complete graph (delta, lambda) = (1, 1)",
            abs(cw.delta - 1.0) < 1e-12 and abs(cw.lambda_dev - 1.0) < 1e-12,
            f"({cw.delta}, {cw.lambda_dev})",
        )
    )
    ring = build_ring(6, 0.4)
    edges, weights = [], []
    for i in range(6):
        j = (i + 1) % 6
        edges.append((i, j))
        weights.append(ring.w[i, j])
    rebuilt = build_custom(6, edges, weights, [ring.w[i, i] for i in range(6)])
    checks.append(
        _check(
            "custom rebuild of ring matches entrywise",
            np.array_equal(rebuilt.w, ring.w),
            "",
        )
    )
    return checks


def schedules_suite(seed: int = 0) -> list[Check]:
    checks: list[Check] = []
    rng = np.random.default_rng(seed)
    ok_gs, ok_p, ok_range = True, True, True
    for _ in range(1000):
        delta = rng.uniform(1e-6, 1.0)
        omega = rng.uniform(1e-6, 1.0)
        lam = rng.uniform(1e-6, 2.0)
        gs = sched.gamma_strong(delta, omega, lam)
        gr = sched.gamma_relaxed(delta, omega, lam)
        ok_gs &= gs <= omega
        ok_p &= sched.p_of(gs, delta) >= delta**2 * omega / 644.0
        ok_range &= 0.0 < gs <= 1.0 and 0.0 < gr <= 1.0
    checks.append(_check("gamma_strong <= omega (1000 draws)", ok_gs))
    checks.append(_check("p >= delta^2 omega / 644 (1000 draws)", ok_p))
    checks.append(_check("gamma formulas in (0, 1]", ok_range))
    checks.append(
        _check(
            "gamma values at (1,1,1)",
            abs(sched.gamma_strong(1, 1, 1) - 2 / 73) < 1e-12
            and abs(sched.gamma_relaxed(1, 1, 1) - 2 / 157) < 1e-12,
        )
    )
    exact = all(
        sched.s_T(a, T) == sum((a + t) ** 2 for t in range(T))
        for a in range(1, 6)
        for T in range(1, 51)
    )
    checks.append(_check("s_T closed form exact", exact))
    ratio_ok = True
    for H in (1, 5, 20):
        a = 5.0 * H  # a >= 5H/p >= H for any p <= 1
        for t in (0, 3, 100):
            ratio_ok &= sched.decaying_lr(t, 1.0, 0.0, a) <= 2 * sched.decaying_lr(t + H, 1.0, 0.0, a)
    checks.append(_check("eta_t <= 2 eta_{t+H} when a >= 5H/p", ratio_ok))
    return checks


def _identity_configs() -> list[dict]:
    base = {
        "topology.n": 8,
        "objective.kind": "quadratic",
        "objective.d": 24,
        "objective.mu": 0.5,
        "objective.L": 3.0,
        "objective.noise_sigma": 0.3,
        "T": 150,
        "lr.kind": "auto_constant",
        "x0_scale": 1.0,
        "diagnostics": True,
    }
    variations = [
        {"compressor.kind": "identity", "threshold.kind": "always", "H": 1},
        {"compressor.kind": "top_k", "compressor.k": 4, "threshold.kind": "always", "H": 5, "beta": 0.9},
        {"compressor.kind": "rand_k", "compressor.k": 6, "threshold.kind": "poly", "threshold.c0": 1.0, "threshold.epsilon": 0.5, "H": 4, "beta": 0.5},
        {"compressor.kind": "qsgd", "compressor.s": 6, "threshold.kind": "always", "H": 2, "beta": 0.9},
        {"compressor.kind": "scaled_sign", "threshold.kind": "piecewise", "threshold.init": 2.5, "threshold.step": 1.5, "threshold.period": 20, "H": 5, "beta": 0.9},
        {"compressor.kind": "sign_top_k", "compressor.k": 2, "threshold.kind": "piecewise", "threshold.init": 2.5, "threshold.step": 1.5, "threshold.period": 20, "H": 5, "beta": 0.9, "variant": "mem_efficient"},
        {"compressor.kind": "qsgd_top_k", "compressor.k": 4, "compressor.s": 4, "threshold.kind": "const_eta", "threshold.c0": 0.5, "threshold.epsilon": 0.5, "H": 5, "beta": 0.9},
        {"compressor.kind": "identity", "threshold.kind": "never", "H": 5, "beta": 0.9},
        {"compressor.kind": "top_k", "compressor.k": 4, "threshold.kind": "always", "H": 5, "beta": 0.9, "variant": "mem_efficient"},
        {"compressor.kind": "top_k", "compressor.k": 4, "threshold.kind": "always", "H": 3, "beta": 0.0, "accounting": "unicast"},
        {"objective.kind": "least_squares", "compressor.kind": "top_k", "compressor.k": 4, "threshold.kind": "always", "H": 5, "beta": 0.9},
        {"objective.kind": "least_squares_nonconvex", "compressor.kind": "sign_top_k", "compressor.k": 3, "threshold.kind": "poly", "threshold.c0": 2.0, "threshold.epsilon": 0.5, "H": 5, "beta": 0.9, "grad_clip": 1.0},
    ]
    return [merged(base, extra) for extra in variations]


def identities_suite() -> list[Check]:
    checks: list[Check] = []
    for idx, flat in enumerate(_identity_configs()):
        cfg, _ = build_run_config(flat)
        result = run(cfg)
        d = result.diagnostics
        label = f"config {idx} ({flat['compressor.kind']}, H={flat['H']})"
        checks.append(
            _check(f"{label}: mean preservation", d.max_mean_dev < 1e-10, f"{d.max_mean_dev:.2e}")
        )
        checks.append(
            _check(
                f"{label}: virtual residual",
                d.max_virtual_residual < 1e-8,
                f"{d.max_virtual_residual:.2e}",
            )
        )
        checks.append(
            _check(f"{label}: trigger drift", d.trigger_violations == 0, str(d.trigger_violations))
        )
        if cfg.grad_clip is not None:
            bound = cfg.grad_clip / (1.0 - cfg.beta) + 1e-9
            checks.append(
                _check(
                    f"{label}: momentum bound",
                    d.max_momentum_norm <= bound,
                    f"{d.max_momentum_norm:.4f} vs {bound:.4f}",
                )
            )
    return checks


SUITES = {
    "compression": compression_suite,
    "spectral": spectral_suite,
    "identities": identities_suite,
    "schedules": schedules_suite,
}


def run_suites(names: list[str]) -> list[Check]:
    out: list[Check] = []
    for name in names:
        out.extend(SUITES[name]())
    return out
