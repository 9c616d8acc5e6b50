"""Task arithmetic on a one-layer ReLU transformer."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import run_experiment as _run_experiment


def run(config, format="json"):
    """Run an experiment config (dict or JSON text).

    JSON reports come back parsed; CSV reports come back as text.
    """
    text = config if isinstance(config, str) else _json.dumps(config)
    out = _run_experiment(text, format)
    return _json.loads(out) if format == "json" else out
