import numpy as np
import pytest

from cvrsp.exceptions import StructuralError
from cvrsp.oracle import MUTATIONS, Z_THRESHOLD, run_oracle, sample_chain
from cvrsp.protocol import RspParams, find_optimal_gain, run_rsp, reference_params


@pytest.fixture(scope="module")
def s2():
    p = reference_params()
    return p.with_feedforward(find_optimal_gain(p))


def test_identity_chain_passes():
    rep = run_oracle(RspParams(), samples=200_000, seed=4)
    assert rep.passed and rep.max_abs_z <= Z_THRESHOLD
    assert np.allclose(rep.analytic, np.eye(4) / 4)


def test_reference_chain_passes(s2):
    rep = run_oracle(s2, samples=400_000, seed=11)
    assert rep.passed
    assert np.allclose(rep.analytic, run_rsp(s2)[2].cov)


@pytest.mark.parametrize("mutation", MUTATIONS)
def test_mutations_are_caught(s2, mutation):
    rep = run_oracle(s2, samples=100_000, seed=11, mutation=mutation)
    assert not rep.passed and rep.max_abs_z > 50


def test_seeded_sampling_is_reproducible(s2):
    a = run_oracle(s2, samples=20_000, seed=99)
    b = run_oracle(s2, samples=20_000, seed=99)
    assert np.array_equal(a.sampled, b.sampled)


def test_sample_shapes(s2):
    c, m = sample_chain(s2, np.random.default_rng(0), 1000)
    assert c.shape == m.shape == (1000,) and np.iscomplexobj(c)


@pytest.mark.parametrize("kw", [{"samples": 9999}, {"seed": -1}, {"mutation": "bogus"}])
def test_rejects_bad_arguments(kw):
    args = dict(samples=10_000, seed=0)
    args.update(kw)
    with pytest.raises(StructuralError):
        run_oracle(RspParams(), **args)
