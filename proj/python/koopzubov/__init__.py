"""Python access to the koopzubov core library."""

import json

from ._core import (  # noqa: F401
    Dictionary,
    Interval,
    OdeSystem,
    builtin_system,
    cos,
    exp,
    flow,
    fnv1a_hex,
    linear_system,
    pow_int,
    required_beta,
    select_beta,
    sin,
    sqr,
    tanh,
)
from . import _core


def _text(config):
    if isinstance(config, (str, bytes)):
        return config if isinstance(config, str) else config.decode()
    return json.dumps(config)


def run_pipeline(config):
    """Simulate, learn, solve and certify from a config dict (or JSON text)."""
    return json.loads(_core._run_pipeline(_text(config)))


def learn(config):
    """Simulate and learn the generator; returns the model document."""
    return json.loads(_core._learn(_text(config)))


def load_config(path):
    with open(path) as fh:
        return json.load(fh)
