"""Innovation generators: iid Gaussian and ARCH(1) weak white noise.

Both regimes are driven by the same recursion

    eps_t = sigma_t * eta_t,   sigma_t^2 = omega + alpha1 * eps_{t-1}^2,

with eta_t iid standard Gaussian; alpha1 = 0 collapses to iid N(0, omega).
Streams use a counter-based bit generator (Philox) so replication streams can
be split deterministically without coordination.
"""

from dataclasses import dataclass

import numpy as np

from .validation import check_count

KINDS = ("strong-gaussian", "arch1")


@dataclass(frozen=True)
class NoiseConfig:
    """Configuration of one innovation stream."""

    kind: str = "strong-gaussian"
    alpha1: float = 0.0
    omega: float = 1.0
    seed: int = 0
    burnin: int = 500

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "strong-gaussian" and self.alpha1 != 0.0:
            raise ValueError("strong-gaussian noise requires alpha1 = 0")
        if not np.isfinite(self.alpha1) or self.alpha1 < 0:
            raise ValueError(f"alpha1 must be finite and >= 0, got {self.alpha1!r}")
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"omega must be finite and > 0, got {self.omega!r}")
        check_count(self.seed, "seed", minimum=0)
        check_count(self.burnin, "burnin", minimum=0)

    def with_seed(self, seed):
        return NoiseConfig(self.kind, self.alpha1, self.omega, int(seed), self.burnin)


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def generate(config, n):
    """Draw eps_1..eps_n from the configured noise process.

    The first ``config.burnin`` values are discarded so the ARCH recursion
    reaches its stationary regime. Bit-for-bit deterministic in
    (seed, n, burnin).
    """
    n = check_count(n, "n", minimum=1)
    total = n + config.burnin
    eta = _rng(config.seed).standard_normal(total)
    if config.alpha1 == 0.0:
        eps = np.sqrt(config.omega) * eta
        return eps[config.burnin:]
    eps = np.empty(total)
    omega, alpha1 = config.omega, config.alpha1
    prev_sq = 0.0
    for t in range(total):
        e = np.sqrt(omega + alpha1 * prev_sq) * eta[t]
        eps[t] = e
        prev_sq = e * e
    return eps[config.burnin:]


def stream_for_replication(master_seed, replication_index):
    """Derive the seed of replication ``replication_index`` from a master seed.

    Built on numpy's splittable SeedSequence so distinct indices yield
    statistically independent streams, stable across runs and platforms.
    """
    master_seed = check_count(master_seed, "master_seed", minimum=0)
    replication_index = check_count(replication_index, "replication_index", minimum=0)
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(replication_index,))
    return int(ss.generate_state(1, np.uint64)[0])
