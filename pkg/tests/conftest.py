import numpy as np
import pytest
from scipy import stats as spstats

import walkcurrent as wc


@pytest.fixture(scope="session")
def drift_kernel():
    return wc.validate_kernel({1: 0.7, -1: 0.3})


@pytest.fixture(scope="session")
def pure_right_kernel():
    return wc.validate_kernel({1: 1.0})


@pytest.fixture(scope="session")
def wide_kernel():
    return wc.validate_kernel({2: 0.5, -1: 0.5})


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def lattice_chisquare(samples, support, probs, min_expected=5.0):
    """Chi-square p-value of integer samples against an exact lattice pmf.

    Folds out-of-range samples into the edge bins, then greedily merges
    adjacent bins left to right so every tested bin carries at least
    min_expected expected counts.
    """
    samples = np.asarray(samples)
    support = np.asarray(support)
    probs = np.asarray(probs, float)
    n = samples.size
    obs = np.array([(samples == v).sum() for v in support], float)
    obs[0] += (samples < support[0]).sum()
    obs[-1] += (samples > support[-1]).sum()
    exp = probs * n

    bins_obs, bins_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins_obs.append(acc_o)
            bins_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_o > 0.0 or acc_e > 0.0:
        bins_obs[-1] += acc_o
        bins_exp[-1] += acc_e
    obs_arr = np.asarray(bins_obs)
    exp_arr = np.asarray(bins_exp)
    exp_arr = exp_arr * (obs_arr.sum() / exp_arr.sum())
    return spstats.chisquare(obs_arr, exp_arr).pvalue
