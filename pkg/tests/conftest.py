import sys

import numpy as np
import pytest

from diam.graph import EdgeRecord, Multigraph
from diam.synth import SynthConfig, generate
from diam.train import xavier_init


def random_graph(rng, n, m, d=2, parallel=0):
    """Random multigraph; ``parallel`` extra copies of the first edge's endpoints."""
    src = rng.integers(0, n, m)
    dst = rng.integers(0, n, m)
    if parallel and m:
        src = np.concatenate([src, np.full(parallel, src[0])])
        dst = np.concatenate([dst, np.full(parallel, dst[0])])
    k = len(src)
    ts = rng.integers(0, 50, k).astype(float)
    attrs = rng.normal(size=(k, d))
    attrs[:, 0] = ts / 50.0
    return Multigraph.from_arrays(n, src, dst, ts, attrs)


def random_params(c, d, layers, seed=0, bias_scale=0.1):
    params = xavier_init(c, d, layers, seed)
    rng = np.random.default_rng(seed + 1000)
    for name, t in params.items():
        if t.ndim == 1 and not name.endswith(".q"):
            t.data = rng.normal(0.0, bias_scale, t.shape)
    return params


@pytest.fixture
def parallel_example():
    """Five nodes; edges e4, e5, e6 all run from v3 to v4 (parallel edges)."""
    recs = [EdgeRecord(0, 1, 1.0, (1.0, 1.0)), EdgeRecord(1, 2, 2.0, (2.0, 2.0)),
            EdgeRecord(2, 3, 3.0, (3.0, 3.0)), EdgeRecord(3, 4, 4.0, (4.0, 4.0)),
            EdgeRecord(3, 4, 5.0, (5.0, 5.0)), EdgeRecord(3, 4, 6.0, (6.0, 6.0))]
    return Multigraph.build(6, recs)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthConfig(n_normal=60, n_illicit=20, mean_out_degree=4.0, seed=3))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
