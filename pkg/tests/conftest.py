import numpy as np
import pytest

from mee.genome import Genome, InterfaceGenes, OperationalGenes


def make_genome(
    edges,
    node_count=5,
    mask_width=4,
    emission_width=1,
    emission_gain=1.0,
    steps=1,
    move_prob=0.0,
    mask=None,
):
    """Hand-built genome for unit tests: edges as (src, dst, weight)."""
    if mask is None:
        mask = tuple([1] * mask_width)
    return Genome(
        node_count=node_count,
        conn_src=np.array([e[0] for e in edges], dtype=np.int64),
        conn_dst=np.array([e[1] for e in edges], dtype=np.int64),
        conn_weight=np.array([e[2] for e in edges], dtype=np.float64),
        interface=InterfaceGenes(
            emission_width=emission_width,
            emission_gain=emission_gain,
            receptor_mask=mask,
        ),
        params=OperationalGenes(propagation_steps=steps, move_prob=move_prob),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
