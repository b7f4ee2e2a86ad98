"""Estimator-style front end for the ring toss code."""

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_index
from .codec import decode, encode, measure_rate
from .probcore import build_joint, detect_singular, mutual_information
from .sampler import CommonRandomness, draw_inputs, run_trials, trial_seeds
from .widthfn import cross_entropy_oracle, functional_information


class RingTossCode(BaseEstimator):
    """Channel simulator for a finite channel.

    ``fit`` takes the row-stochastic channel matrix (rows are inputs) and an
    optional input pmf (uniform by default) and records the information
    quantities that bound the code rate.  ``predict`` simulates the channel:
    output ``t`` is ``Y_K`` for input ``X[t]`` under seed ``seed + t``.

    Parameters
    ----------
    tol : float
        Relative tolerance used for the singularity check.
    k_max : int or None
        Search limit for the rejection index; ``None`` means ``ceil(64 M)``.
    exact : bool
        Build the joint with exact rational arithmetic.
    """

    def __init__(self, tol=1e-9, k_max=None, exact=False):
        self.tol = tol
        self.k_max = k_max
        self.exact = exact

    def fit(self, channel, px=None):
        channel = np.asarray(channel, dtype=object if self.exact else float)
        if channel.ndim != 2:
            raise ValueError(f"channel must be a 2-D matrix, got shape {channel.shape}")
        if px is None:
            n = channel.shape[0]
            px = [Fraction(1, n)] * n if self.exact else np.full(n, 1.0 / n)
        j = build_joint(px, channel, exact=self.exact)
        self.joint_ = j
        self.bound_m_ = float(j.bound_m)
        self.mutual_information_ = mutual_information(j)
        self.functional_information_ = functional_information(j)
        self.cross_entropy_ = cross_entropy_oracle(j)
        self.singularity_ = detect_singular(j, tol=self.tol)
        self.is_singular_ = self.singularity_.is_singular
        self.n_inputs_ = j.n_inputs
        self.n_outputs_ = j.n_outputs
        return self

    def _inputs(self, X):
        check_is_fitted(self, "joint_")
        xs = np.asarray(X).reshape(-1).astype(np.int64)
        for x in xs:
            check_index(int(x), self.n_inputs_, "x")
            if self.joint_.px[int(x)] <= 0:
                raise ValueError(f"input symbol {int(x)} has zero probability")
        return xs

    def predict(self, X, seed=0):
        """Simulated channel outputs, one per entry of ``X``."""
        xs = self._inputs(X)
        run = run_trials(self.joint_, xs, trial_seeds(seed, xs.size), k_max=self.k_max)
        return run.y

    def sample(self, n, seed=0):
        """``n`` joint draws ``(X, Y)`` with ``X ~ px`` and ``Y`` simulated."""
        check_is_fitted(self, "joint_")
        seeds = trial_seeds(seed, n)
        xs = draw_inputs(self.joint_, seeds)
        return xs, run_trials(self.joint_, xs, seeds, k_max=self.k_max).y

    def encode(self, x, seed):
        x = int(self._inputs([x])[0])
        z = CommonRandomness.for_joint(seed, self.joint_)
        return encode(x, z, self.joint_, k_max=self.k_max)

    def decode(self, bits, seed):
        check_is_fitted(self, "joint_")
        z = CommonRandomness.for_joint(seed, self.joint_)
        return decode(bits, z, self.joint_, k_max=self.k_max)

    def score(self, n_trials=10_000, seed=0):
        """Average codeword length in bits (lower is better)."""
        check_is_fitted(self, "joint_")
        return measure_rate(self.joint_, n_trials, seed, k_max=self.k_max).mean_length
