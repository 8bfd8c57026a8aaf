"""Dynamic latent graph temporal point processes (C++ core)."""

import json
import sys

from ._vaetpp import auroc, lognormal_mixture_logpdf, lognormal_mixture_mean, run_cli
from ._vaetpp import scenario_truth_json as _truth
from ._vaetpp import simulate_json as _simulate

__all__ = [
    "auroc",
    "lognormal_mixture_logpdf",
    "lognormal_mixture_mean",
    "run_cli",
    "scenario_truth",
    "simulate",
    "main",
]


def simulate(scenario):
    """Sample sequences from a scenario dict (same keys as `vaetpp simulate --config`)."""
    return _simulate(json.dumps(scenario))


def scenario_truth(scenario):
    return json.loads(_truth(json.dumps(scenario)))


def main(argv=None):
    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
