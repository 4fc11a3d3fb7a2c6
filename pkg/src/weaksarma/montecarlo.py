"""Replication harness for empirical size and power of the portmanteau tests.

The size experiment simulates a seasonal MA model

    X_t = eps_t - b1 eps_{t-1} - B1 eps_{t-s} + b1 B1 eps_{t-s-1},
    (b1, B1) = (-0.6, -0.7),

fits the same orders, and tallies rejections; the power experiment adds an
AR(1) term with coefficient 0.8 to the data generating process while still
fitting the pure MA orders. Innovations are iid Gaussian or ARCH(1).
Replications carry derived seeds, so results are reproducible regardless of
worker count or scheduling.
"""

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom, chi2, norm

from .acf import acf, portmanteau_statistic
from .estimator import fit_sarma
from .exceptions import ExperimentIntegrityError, WeakSarmaError
from .model import SarmaOrder, SarmaSpec, default_burnin, simulate
from .noise import NoiseConfig, generate, stream_for_replication
from .selfnorm import default_table, sn_normalizer, sn_statistics, uk_quantile
from .validation import check_count, check_prob
from .weak import mixture_law

SIZE_THETA = (-0.6, -0.7)
POWER_THETA = (0.8, -0.6, -0.7)
ALL_METHODS = ("LB_SN", "BP_SN", "LB_W", "BP_W", "LB_S", "BP_S")
MAX_FAILURE_FRACTION = 0.02


@dataclass(frozen=True)
class ExperimentConfig:
    """One size or power experiment."""

    dgp: str                      # "size" or "power"
    s: int = 12
    n: tuple = (2000,)
    N: int = 1000
    alpha1: float = 0.0
    m_list: tuple = (4, 8, 12, 15, 18, 20)
    methods: tuple = ALL_METHODS
    alpha: float = 0.05
    master_seed: int = 0
    path_mode: str = "independent"   # or "shared": one path, analyzed on prefixes
    noise_burnin: int = 500
    lrv_r_max: int = 5

    def __post_init__(self):
        if self.dgp not in ("size", "power"):
            raise ValueError(f"dgp must be 'size' or 'power', got {self.dgp!r}")
        object.__setattr__(self, "n", tuple(int(v) for v in np.atleast_1d(self.n)))
        object.__setattr__(self, "m_list", tuple(int(v) for v in self.m_list))
        object.__setattr__(self, "methods", tuple(self.methods))
        check_count(self.N, "N", minimum=1)
        check_prob(self.alpha, "alpha")
        if self.path_mode not in ("independent", "shared"):
            raise ValueError("path_mode must be 'independent' or 'shared'")
        for meth in self.methods:
            if meth not in ALL_METHODS:
                raise ValueError(f"unknown method {meth!r}")
        for m in self.m_list:
            if m >= min(self.n):
                raise ValueError(f"m={m} must be smaller than n={min(self.n)}")


@dataclass(frozen=True)
class TableRow:
    """Aggregated rejection frequency of one (n, m, method) cell."""

    s: int
    n: int
    m: int
    method: str
    freq: float          # percent, NaN when not applicable
    flag: str            # inside | outside-95 | outside-99 | n.a.
    n_used: int
    n_failed: int


def _dgp_specs(config):
    fit_order = SarmaOrder(0, 1, 0, 1, config.s)
    if config.dgp == "size":
        sim_spec = SarmaSpec(fit_order, np.asarray(SIZE_THETA))
    else:
        sim_order = SarmaOrder(1, 1, 0, 1, config.s)
        sim_spec = SarmaSpec(sim_order, np.asarray(POWER_THETA))
    return sim_spec, fit_order


def _noise_kind(alpha1):
    return "strong-gaussian" if alpha1 == 0.0 else "arch1"


def _critical_values(config):
    """Per-m critical values that do not depend on the data."""
    k0 = _dgp_specs(config)[1].k0
    sn_crit = {}
    if any(meth.endswith("_SN") for meth in config.methods):
        table = default_table()
        sn_crit = {m: uk_quantile(m, 1.0 - config.alpha, table=table)
                   for m in config.m_list}
    std_crit = {m: (chi2.ppf(1.0 - config.alpha, m - k0) if m > k0 else None)
                for m in config.m_list}
    return sn_crit, std_crit


def _replicate(config, sn_crit, std_crit, rep):
    """One replication: simulate, fit, test. Returns rejections of shape
    (len(n), len(m_list), len(methods)) with NaN marking n.a. cells, or None
    when the fit fails."""
    sim_spec, fit_order = _dgp_specs(config)
    burn = default_burnin(sim_spec.order)
    k0 = fit_order.k0
    n_list = config.n
    out = np.full((len(n_list), len(config.m_list), len(config.methods)), np.nan)
    need_weak = any(meth.endswith("_W") for meth in config.methods)
    need_sn = any(meth.endswith("_SN") for meth in config.methods)

    if config.path_mode == "shared":
        seed = stream_for_replication(config.master_seed, rep)
        noise = generate(NoiseConfig(_noise_kind(config.alpha1), config.alpha1, 1.0,
                                     seed, config.noise_burnin), max(n_list) + burn)
        full_path = simulate(sim_spec, noise, burnin=burn)
        paths = [full_path[:n] for n in n_list]
    else:
        paths = []
        for j, n in enumerate(n_list):
            seed = stream_for_replication(config.master_seed, rep * len(n_list) + j)
            noise = generate(NoiseConfig(_noise_kind(config.alpha1), config.alpha1, 1.0,
                                         seed, config.noise_burnin), n + burn)
            paths.append(simulate(sim_spec, noise, burnin=burn))

    for jn, x in enumerate(paths):
        try:
            fit = fit_sarma(x, fit_order, lrv_r_max=config.lrv_r_max)
        except WeakSarmaError:
            return None
        for jm, m in enumerate(config.m_list):
            acfset = acf(fit.residuals, m)
            stats = {"LB": portmanteau_statistic(acfset, "LB"),
                     "BP": portmanteau_statistic(acfset, "BP")}
            law = None
            if need_weak:
                _, law, _ = mixture_law(fit, m, r_max=config.lrv_r_max)
            sn_stats = None
            if need_sn:
                q_sn, q_sn_lb = sn_statistics(fit, m, sn_normalizer(fit, m))
                sn_stats = {"BP": q_sn, "LB": q_sn_lb}
            for jmeth, meth in enumerate(config.methods):
                kind, family = meth.split("_")
                if family == "S":
                    if m <= k0:
                        continue  # stays NaN -> reported n.a.
                    out[jn, jm, jmeth] = float(stats[kind] > std_crit[m])
                elif family == "W":
                    out[jn, jm, jmeth] = float(law.tail(stats[kind]) < config.alpha)
                else:
                    out[jn, jm, jmeth] = float(sn_stats[kind] > sn_crit[m])
    return out


def _replicate_star(payload):
    config, sn_crit, std_crit, rep = payload
    return rep, _replicate(config, sn_crit, std_crit, rep)


def run_experiment(config, n_jobs=1, progress=None):
    """Run all replications and aggregate them into TableRows.

    Failed fits are counted and excluded; more than 2 percent of failures
    aborts the experiment as untrustworthy. Aggregation is an
    order-independent reduction over replication indices.
    """
    sn_crit, std_crit = _critical_values(config)
    payloads = [(config, sn_crit, std_crit, rep) for rep in range(config.N)]
    results = [None] * config.N
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for rep, res in pool.map(_replicate_star, payloads,
                                     chunksize=max(1, config.N // (8 * n_jobs))):
                results[rep] = res
                if progress is not None:
                    progress(rep)
    else:
        for payload in payloads:
            rep, res = _replicate_star(payload)
            results[rep] = res
            if progress is not None:
                progress(rep)

    ok = [r for r in results if r is not None]
    n_failed = config.N - len(ok)
    if n_failed > MAX_FAILURE_FRACTION * config.N:
        raise ExperimentIntegrityError(
            f"{n_failed} of {config.N} replications failed to fit")
    if not ok:
        raise ExperimentIntegrityError("no replication succeeded")
    stacked = np.stack(ok)  # (reps, n, m, method)

    rows = []
    for jn, n in enumerate(config.n):
        for jm, m in enumerate(config.m_list):
            for jmeth, meth in enumerate(config.methods):
                cell = stacked[:, jn, jm, jmeth]
                if np.all(np.isnan(cell)):
                    rows.append(TableRow(config.s, n, m, meth, float("nan"),
                                         "n.a.", 0, n_failed))
                    continue
                freq = 100.0 * float(np.nanmean(cell))
                flag = flag_band(freq, len(ok), config.alpha) if len(ok) >= 30 else "inside"
                rows.append(TableRow(config.s, n, m, meth, freq, flag,
                                     len(ok), n_failed))
    return rows


def run_size(config, n_jobs=1, progress=None):
    """Empirical size experiment (data generated under the fitted orders)."""
    if config.dgp != "size":
        raise ValueError("run_size requires a config with dgp='size'")
    return run_experiment(config, n_jobs=n_jobs, progress=progress)


def run_power(config, n_jobs=1, progress=None):
    """Empirical power experiment (data from the AR-augmented alternative)."""
    if config.dgp != "power":
        raise ValueError("run_power requires a config with dgp='power'")
    return run_experiment(config, n_jobs=n_jobs, progress=progress)


def band_limits(N, alpha, level):
    """Acceptance band (percent) for an empirical frequency of a nominal-alpha
    test over N replications.

    Takes the wider of the normal-approximation interval and the exact
    binomial equal-tail acceptance region, rounded to table precision (one
    decimal in percent). At N=1000, alpha=0.05 this gives (3.6, 6.4) at the
    95 percent level and (3.2, 6.9) at 99 percent.
    """
    N = check_count(N, "N", minimum=1)
    alpha = check_prob(alpha, "alpha")
    level = check_prob(level, "level")
    tail = 0.5 * (1.0 - level)
    z = norm.ppf(1.0 - tail)
    se = np.sqrt(alpha * (1.0 - alpha) / N)
    lo_n, hi_n = alpha - z * se, alpha + z * se
    k_lo = int(binom.ppf(tail, N, alpha))
    while binom.cdf(k_lo, N, alpha) <= tail:
        k_lo += 1
    k_hi = int(binom.isf(tail, N, alpha))
    while k_hi > 0 and binom.sf(k_hi - 1, N, alpha) <= tail:
        k_hi -= 1
    lo = min(lo_n, k_lo / N)
    hi = max(hi_n, k_hi / N)
    return round(100.0 * lo, 1), round(100.0 * hi, 1)


def flag_band(freq_percent, N, alpha):
    """Classify an empirical frequency against the 95/99 percent bands."""
    if N < 30:
        raise ValueError("band classification needs N >= 30")
    lo95, hi95 = band_limits(N, alpha, 0.95)
    lo99, hi99 = band_limits(N, alpha, 0.99)
    eps = 1e-9
    if freq_percent < lo99 - eps or freq_percent > hi99 + eps:
        return "outside-99"
    if freq_percent < lo95 - eps or freq_percent > hi95 + eps:
        return "outside-95"
    return "inside"


def rows_to_csv(rows, path=None):
    """Serialize TableRows as comma-separated text (s, n, m, method, freq, flag)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["s", "n", "m", "method", "freq", "flag"])
    for row in rows:
        freq = "n.a." if np.isnan(row.freq) else f"{row.freq:.1f}"
        writer.writerow([row.s, row.n, row.m, row.method, freq, row.flag])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
