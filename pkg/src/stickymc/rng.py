"""Reproducible random streams.

Every replication owns one :class:`RandomStream`, derived from the master
seed and run index with :class:`numpy.random.SeedSequence`.  Normal and
gamma variates are generated here from the uniform stream with fixed
algorithms (Box-Muller, Marsaglia-Tsang) so that traces do not depend on
numpy's internal variate routines.
"""

import math

import numpy as np

_BLOCK = 4096


class RandomStream:
    """Buffered uniform stream over a PCG64 bit generator."""

    def __init__(self, seed_sequence):
        self.seed_sequence = seed_sequence
        self._gen = np.random.Generator(np.random.PCG64(seed_sequence))
        self._buf = []
        self._pos = 0
        self._spare = None

    def random(self):
        """One uniform draw on [0, 1)."""
        pos = self._pos
        if pos == len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            pos = 0
        self._pos = pos + 1
        return self._buf[pos]

    def random_open(self):
        """One uniform draw on (0, 1]."""
        return 1.0 - self.random()

    def uniforms(self, n):
        return np.array([self.random() for _ in range(n)])

    def normal(self):
        """Standard normal via the Box-Muller transform (pairs cached)."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        r = math.sqrt(-2.0 * math.log(self.random_open()))
        t = 2.0 * math.pi * self.random()
        self._spare = r * math.sin(t)
        return r * math.cos(t)

    def gamma(self, shape):
        """Gamma(shape, 1) by Marsaglia and Tsang, boosted for shape < 1."""
        if shape <= 0:
            raise ValueError("gamma shape must be positive")
        if shape < 1.0:
            return self.gamma(shape + 1.0) * self.random_open() ** (1.0 / shape)
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.random_open()
            if math.log(u) < 0.5 * x * x + d - d * v + d * math.log(v):
                return d * v

    def inverse_gamma(self, shape, scale):
        return scale / self.gamma(shape)


def derive_run_seed(master, run_index, chain=0):
    """Independent stream for replication ``run_index`` of experiment ``master``.

    Identical arguments give identical streams; distinct run indices or chain
    numbers give statistically independent ones.
    """
    seq = np.random.SeedSequence(int(master) & (2**64 - 1), spawn_key=(int(run_index), int(chain)))
    return RandomStream(seq)
