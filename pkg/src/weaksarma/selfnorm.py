"""Self-normalized portmanteau statistics and their reference distribution.

Instead of estimating a long-run variance, these statistics normalize the
autocovariance vector by a random matrix built from its own partial sums,

    C_m = n^-2 sum_t S_t S_t',   S_t = sum_{j<=t} (Lambda w_j - mean),

which makes the limit law pivotal: U_K = B_K(1)' V_K^{-1} B_K(1) with B_K a
K-dimensional Brownian motion and V_K the integrated outer product of its
bridge. U_K quantiles do not depend on the data, so they are simulated once,
cached to a small text table, and reused like a chi-square table.
"""

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acf import TestReport, acf
from .exceptions import (DegenerateNormalizerError, NotApplicableError,
                         NumericalFailureError)
from .validation import check_count, check_prob, symmetrize
from .weak import build_w, phi_hat

TABLE_VERSION = 1
DEFAULT_TABLE_META = {"grid": 5000, "reps": 200000, "seed": 101, "k_max": 20}
DEFAULT_LEVELS = (0.90, 0.95, 0.99)
MAX_CONDITION = 1e12
MAX_DISCARD_FRACTION = 1e-3


@dataclass(frozen=True)
class SnNormalizer:
    """Partial-sum normalization matrix and the block map that produced it."""

    C: np.ndarray
    Lambda: np.ndarray


def sn_normalizer(fit, m):
    """Normalization matrix C_m from the fitted model's stacked process.

    Requires at least one estimated coefficient; with none, the centering
    argument behind the pivotal limit law breaks down.
    """
    m = check_count(m, "m", minimum=1)
    if fit.k_free == 0:
        raise NotApplicableError("self-normalized tests need at least one coefficient")
    w = build_w(fit, m)
    lam = np.hstack([phi_hat(fit, m), np.eye(m)])
    u = w @ lam.T
    u = u - u.mean(axis=0)
    s = np.cumsum(u, axis=0)
    c = symmetrize((s.T @ s) / fit.n ** 2)
    if not np.all(np.isfinite(c)) or np.linalg.cond(c) > MAX_CONDITION:
        raise DegenerateNormalizerError(
            "partial-sum normalizer is numerically singular")
    return SnNormalizer(C=c, Lambda=lam)


def lb_weight_matrix(n, m):
    """Diagonal of the small-sample reweighting: (n+2)/(n-1), ..., (n+2)/(n-m)."""
    return (n + 2.0) / (n - np.arange(1, m + 1))


def sn_statistics(fit, m, normalizer=None):
    """Both self-normalized statistics (plain, Ljung-Box-weighted).

    Returns
    -------
    (float, float)
        n sigma^4 rho' C^-1 rho and its D^{1/2}-sandwiched variant.
    """
    if normalizer is None:
        normalizer = sn_normalizer(fit, m)
    acfset = acf(fit.residuals, m)
    rho = acfset.rho
    scale = fit.n * fit.sigma2 ** 2
    sol = np.linalg.solve(normalizer.C, rho)
    q_sn = float(scale * (rho @ sol))
    d_half = np.sqrt(lb_weight_matrix(fit.n, m))
    rho_w = d_half * rho
    sol_w = np.linalg.solve(normalizer.C, rho_w)
    q_sn_lb = float(scale * (rho_w @ sol_w))
    return q_sn, q_sn_lb


# ---------------------------------------------------------------------------
# U_K reference distribution


@dataclass
class UkTable:
    """Cached quantiles of U_K = B_K(1)' V_K^{-1} B_K(1)."""

    quantiles: dict            # (K, level) -> float
    meta: dict = field(default_factory=lambda: dict(DEFAULT_TABLE_META))

    def levels(self):
        return tuple(sorted({lvl for (_, lvl) in self.quantiles}))

    def k_values(self):
        return tuple(sorted({k for (k, _) in self.quantiles}))

    def quantile(self, k, level):
        key = (int(k), round(float(level), 6))
        return self.quantiles[key]

    def validate(self):
        for lvl in self.levels():
            ks = sorted(k for (k, l) in self.quantiles if l == lvl)
            vals = [self.quantiles[(k, lvl)] for k in ks]
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"quantiles not strictly increasing in K at level {lvl}")
        for k in self.k_values():
            lvls = sorted(l for (kk, l) in self.quantiles if kk == k)
            vals = [self.quantiles[(k, l)] for l in lvls]
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"quantiles not strictly increasing in level at K={k}")

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def dumps(self):
        buf = io.StringIO()
        buf.write(f"# weaksarma U_K quantile table v{TABLE_VERSION}\n")
        meta = " ".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
        buf.write(f"# meta: {meta}\n")
        buf.write("# columns: K level quantile\n")
        for (k, lvl) in sorted(self.quantiles):
            buf.write(f"{k} {lvl:.6f} {self.quantiles[(k, lvl)]:.10g}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text):
        meta = {}
        quantiles = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# meta:"):
                    for item in line[len("# meta:"):].split():
                        key, val = item.split("=")
                        meta[key] = int(val) if val.lstrip("-").isdigit() else float(val)
                continue
            k_str, lvl_str, q_str = line.split()
            quantiles[(int(k_str), round(float(lvl_str), 6))] = float(q_str)
        table = cls(quantiles=quantiles, meta=meta)
        table.validate()
        return table

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


def _uk_chunk(args):
    """Simulate one deterministic chunk of U_K draws; used by worker processes."""
    seed, chunk_index, reps, k_max, grid, batch = args
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))
    rng = np.random.Generator(np.random.Philox(ss))
    out = np.empty((reps, k_max))
    grid_times = np.arange(1, grid + 1) / grid
    done = 0
    discarded = 0
    while done < reps:
        b = min(batch, reps - done)
        inc = rng.standard_normal((b, k_max, grid))
        inc *= 1.0 / np.sqrt(grid)
        paths = np.cumsum(inc, axis=2)
        end = paths[:, :, -1]
        bridge = paths - end[:, :, None] * grid_times[None, None, :]
        v_full = bridge @ bridge.transpose(0, 2, 1)
        v_full /= grid
        ok = np.ones(b, dtype=bool)
        for k in range(1, k_max + 1):
            vk = v_full[:, :k, :k]
            bk = end[:, :k]
            try:
                sol = np.linalg.solve(vk, bk[:, :, None])[:, :, 0]
                out[done:done + b, k - 1] = np.einsum("ij,ij->i", bk, sol)
            except np.linalg.LinAlgError:
                for i in range(b):
                    try:
                        sol_i = np.linalg.solve(vk[i], bk[i])
                        out[done + i, k - 1] = bk[i] @ sol_i
                    except np.linalg.LinAlgError:
                        ok[i] = False
        n_ok = int(ok.sum())
        if n_ok < b:
            discarded += b - n_ok
            out[done:done + n_ok] = out[done:done + b][ok]
        done += n_ok
    return out, discarded


def simulate_uk_table(k_max=20, levels=DEFAULT_LEVELS, grid=5000, reps=200000,
                      seed=101, n_jobs=1, chunk_size=2000, batch=40):
    """Simulate the U_K quantile table on a fixed grid.

    Each replication draws one k_max-dimensional Brownian path; U_K for all
    K <= k_max reuses its leading coordinates, so the table is internally
    consistent across K. Chunks carry derived seeds, making the result
    independent of the worker count.
    """
    k_max = check_count(k_max, "k_max", minimum=1)
    grid = check_count(grid, "grid", minimum=max(10, k_max + 1))
    reps = check_count(reps, "reps", minimum=100)
    n_chunks = (reps + chunk_size - 1) // chunk_size
    sizes = [chunk_size] * (reps // chunk_size)
    if reps % chunk_size:
        sizes.append(reps % chunk_size)
    jobs = [(seed, idx, size, k_max, grid, batch) for idx, size in enumerate(sizes)]

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_uk_chunk, jobs, chunksize=1))
    else:
        results = [_uk_chunk(job) for job in jobs]
    values = np.vstack([r[0] for r in results])
    discarded = sum(r[1] for r in results)
    if discarded > MAX_DISCARD_FRACTION * reps:
        raise NumericalFailureError(
            f"{discarded} singular normalizer draws out of {reps}")

    quantiles = {}
    for k in range(1, k_max + 1):
        col = values[:, k - 1]
        for lvl in levels:
            quantiles[(k, round(float(lvl), 6))] = float(np.quantile(col, lvl))
    meta = {"grid": grid, "reps": reps, "seed": seed, "k_max": k_max,
            "discarded": discarded, "version": TABLE_VERSION}
    table = UkTable(quantiles=quantiles, meta=meta)
    table.validate()
    return table


_DEFAULT_TABLE = None


def default_table():
    """The table shipped with the package (simulated once, cached on disk)."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        from importlib.resources import files

        path = files("weaksarma").joinpath("data/uk_quantiles.txt")
        _DEFAULT_TABLE = UkTable.loads(path.read_text())
    return _DEFAULT_TABLE


def uk_quantile(k, level, table=None, cache_path=None):
    """Quantile of U_K at ``level``, from the cache or by fresh simulation.

    When the requested (K, level) pair is not in the table, the distribution
    is re-simulated at the table's recorded grid/replication settings, the
    table is extended, and (if ``cache_path`` is given) persisted.
    """
    k = check_count(k, "K", minimum=1)
    level = check_prob(level, "level")
    if table is None:
        table = default_table()
    k_max = int(table.meta.get("k_max", max(table.k_values() or (0,))))
    if k > k_max:
        raise NotApplicableError(
            f"K={k} exceeds the tabulated maximum {k_max}; "
            "regenerate the table with a larger k_max")
    try:
        return table.quantile(k, level)
    except KeyError:
        fresh = simulate_uk_table(
            k_max=k_max, levels=tuple(sorted(set(table.levels()) | {round(level, 6)})),
            grid=int(table.meta.get("grid", DEFAULT_TABLE_META["grid"])),
            reps=int(table.meta.get("reps", DEFAULT_TABLE_META["reps"])),
            seed=int(table.meta.get("seed", DEFAULT_TABLE_META["seed"])))
        table.quantiles.update(fresh.quantiles)
        table.meta.update(fresh.meta)
        table.validate()
        if cache_path is not None:
            table.dump(cache_path)
        return table.quantile(k, level)


def sn_test(fit, m, kind="LB", alpha=0.05, table=None):
    """Self-normalized portmanteau test; rejects when the statistic exceeds
    the tabulated U_m quantile at 1 - alpha."""
    alpha = check_prob(alpha, "alpha")
    normalizer = sn_normalizer(fit, m)
    q_sn, q_sn_lb = sn_statistics(fit, m, normalizer)
    stat = q_sn_lb if kind == "LB" else q_sn
    if kind not in ("BP", "LB"):
        raise ValueError(f"kind must be 'BP' or 'LB', got {kind!r}")
    crit = uk_quantile(m, 1.0 - alpha, table=table)
    return TestReport(method=f"{kind}_SN", m=m, statistic=stat,
                      distribution=f"self-normalized U_{m}",
                      critical_value=float(crit), p_value=None, alpha=alpha,
                      reject=stat > crit)


def acf_bands_sn(fit, m, alpha=0.05, normalizer=None, table=None):
    """Per-lag half-widths from the one-dimensional self-normalized statistic.

    Lag h is flagged when n sigma^4 rho(h)^2 / C[h,h] exceeds the U_1 quantile,
    i.e. the band is sqrt(U_1(1-alpha) * C[h,h] / (n sigma^4)).
    """
    alpha = check_prob(alpha, "alpha")
    if normalizer is None:
        normalizer = sn_normalizer(fit, m)
    u1 = uk_quantile(1, 1.0 - alpha, table=table)
    diag = np.clip(np.diag(normalizer.C), 0.0, None)
    return np.sqrt(u1 * diag / (fit.n * fit.sigma2 ** 2))
