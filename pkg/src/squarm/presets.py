"""Named baselines expressed as partial configurations of the same engine.

squarm     the full algorithm: momentum, local steps, a growing piecewise
           threshold, and sign-top-k compression
sparq      squarm with the momentum coefficient zeroed (the configs differ
           in nothing else)
choco      compressed gossip every iteration, no momentum, no triggering;
           gamma comes from this project's strong-assumption formula rather
           than the one its source method prescribes, to keep comparisons
           on one parameterization
dpsgd      uncompressed gossip SGD: identity compressor, gamma = 1
local_sgd  no communication at all (the trigger never fires)
"""

from __future__ import annotations

from .errors import ConfigError

_SQUARM = {
    "beta": 0.9,
    "H": 5,
    "compressor.kind": "sign_top_k",
    "compressor.k_frac": 0.01,
    "threshold.kind": "piecewise",
    "threshold.init": 2.5,
    "threshold.step": 1.5,
    "threshold.period": 500,
    "gamma.kind": "explicit",
    "gamma.value": 0.5,
}

PRESETS: dict[str, dict] = {
    "squarm": dict(_SQUARM),
    "sparq": dict(_SQUARM, beta=0.0),
    "choco": {
        "beta": 0.0,
        "H": 1,
        "compressor.kind": "top_k",
        "compressor.k_frac": 0.01,
        "threshold.kind": "always",
        "gamma.kind": "auto_strong",
    },
    "dpsgd": {
        "beta": 0.0,
        "H": 1,
        "compressor.kind": "identity",
        "threshold.kind": "always",
        "gamma.kind": "explicit",
        "gamma.value": 1.0,
    },
    "local_sgd": {
        "H": 1,
        "compressor.kind": "identity",
        "threshold.kind": "never",
        "gamma.kind": "explicit",
        "gamma.value": 1.0,
    },
}


def preset(name: str) -> dict:
    """Partial flat config for a named baseline."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}"
        )
    return dict(PRESETS[name])
