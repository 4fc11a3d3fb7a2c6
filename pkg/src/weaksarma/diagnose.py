"""Fit-and-diagnose workflow producing a structured report and plot data.

A report bundles the fitted coefficients with their robust standard errors,
portmanteau tests of every requested family at every requested lag depth, and
three per-lag significance bands for the residual autocorrelations: the
classical iid band, the dependence-robust band, and the self-normalized band.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .acf import TestReport, acf, standard_test
from .estimator import coefficient_inference, fit_sarma
from .exceptions import NotApplicableError
from .selfnorm import acf_bands_sn, sn_normalizer, sn_test
from .validation import check_prob
from .weak import acf_bands_weak, mixture_law, modified_test

DEFAULT_M_LIST = (4, 8, 12, 15, 18, 20)
DEFAULT_METHODS = ("LB_SN", "BP_SN", "LB_W", "BP_W", "LB_S", "BP_S")


@dataclass
class LagRecord:
    lag: int
    rho: float
    band_strong: float
    band_weak: float
    band_sn: float


@dataclass
class DiagnosticReport:
    order: tuple               # (p, q, P, Q, s)
    fixed_zero: tuple
    coefficients: list         # rows from coefficient_inference
    sigma2: float
    n: int
    alpha: float
    tests: list                # TestReport per (m, method)
    lags: list                 # LagRecord per lag 1..max(m_list)
    provenance: dict = field(default_factory=dict)
    fit_result: object = None  # FitResult backing the report

    def validate(self):
        for rec in self.lags:
            vals = (rec.rho, rec.band_strong, rec.band_weak, rec.band_sn)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"non-finite value in lag record {rec.lag}")
            if min(rec.band_strong, rec.band_weak, rec.band_sn) <= 0:
                raise ValueError(f"non-positive band at lag {rec.lag}")


def diagnose(x, order, fixed_zero=(), m_list=DEFAULT_M_LIST, methods=DEFAULT_METHODS,
             alpha=0.05, uk_table=None, lrv_r_max=5, provenance=None, fit_kwargs=None):
    """Fit the model and run the requested portmanteau tests at each lag depth.

    Parameters
    ----------
    x : array-like
        Mean-corrected series.
    order : SarmaOrder
    fixed_zero : sequence of int
        Coefficient indices pinned at zero.
    m_list : sequence of int
        Lag depths for the portmanteau statistics.
    methods : sequence of str
        Any of LB_S, BP_S, LB_W, BP_W, LB_SN, BP_SN.
    alpha : float
        Nominal level for tests and bands.
    uk_table : UkTable, optional
        Reference quantiles for the self-normalized family.
    provenance : dict, optional
        Free-form metadata (input digest, seeds, versions) carried verbatim.

    Returns
    -------
    DiagnosticReport
    """
    alpha = check_prob(alpha, "alpha")
    fit = fit_sarma(x, order, fixed_zero=fixed_zero, lrv_r_max=lrv_r_max,
                    **(fit_kwargs or {}))
    m_list = tuple(sorted(set(int(m) for m in m_list)))
    m_max = max(m_list)

    tests = []
    for m in m_list:
        acfset = acf(fit.residuals, m)
        for method in methods:
            kind, family = method.split("_")
            if family == "S":
                try:
                    tests.append(standard_test(acfset, fit.k_free, kind, alpha))
                except NotApplicableError:
                    from .acf import TestReport
                    tests.append(TestReport(method=method, m=m, statistic=float("nan"),
                                            distribution="n.a. (m <= k0)",
                                            critical_value=None, p_value=None,
                                            alpha=alpha, reject=False))
            elif family == "W":
                tests.append(modified_test(fit, m, kind, alpha, r_max=lrv_r_max))
            else:
                tests.append(sn_test(fit, m, kind, alpha, table=uk_table))

    acf_max = acf(fit.residuals, m_max)
    sig_rho_mat, _, _ = mixture_law(fit, m_max, r_max=lrv_r_max)
    weak_bands = acf_bands_weak(fit, m_max, alpha, sig_rho_mat=sig_rho_mat)
    normalizer = sn_normalizer(fit, m_max)
    sn_bands = acf_bands_sn(fit, m_max, alpha, normalizer=normalizer, table=uk_table)
    strong_band = norm.ppf(1.0 - alpha / 2.0) / np.sqrt(fit.n)
    lags = [LagRecord(lag=h, rho=float(acf_max.rho[h - 1]),
                      band_strong=float(strong_band),
                      band_weak=float(weak_bands[h - 1]),
                      band_sn=float(sn_bands[h - 1]))
            for h in range(1, m_max + 1)]

    prov = dict(provenance or {})
    prov.setdefault("n_observations", fit.n)
    report = DiagnosticReport(
        order=(order.p, order.q, order.P, order.Q, order.s),
        fixed_zero=tuple(int(i) for i in fixed_zero),
        coefficients=coefficient_inference(fit, level=1.0 - alpha),
        sigma2=fit.sigma2, n=fit.n, alpha=alpha, tests=tests, lags=lags,
        provenance=prov)
    report.validate()
    report.fit_result = fit
    return report


def emit_plot_data(report, path):
    """Write the per-lag records as comma-separated plot data.

    Columns: lag, rho, band_strong, band_weak_lo, band_weak_hi,
    band_sn_lo, band_sn_hi. Rewriting the same report gives an identical file.
    """
    lines = ["lag,rho,band_strong,band_weak_lo,band_weak_hi,band_sn_lo,band_sn_hi"]
    for rec in report.lags:
        lines.append(f"{rec.lag},{rec.rho:.17g},{rec.band_strong:.17g},"
                     f"{-rec.band_weak:.17g},{rec.band_weak:.17g},"
                     f"{-rec.band_sn:.17g},{rec.band_sn:.17g}")
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return path


def render_report(report):
    """Human-readable nested key/value rendering of a DiagnosticReport."""
    p, q, P, Q, s = report.order
    out = []
    out.append("diagnostic-report:")
    out.append(f"  model: orders ({p},{q})({P},{Q})_{s}")
    if report.fixed_zero:
        out.append(f"  fixed-zero-indices: {','.join(str(i) for i in report.fixed_zero)}")
    out.append(f"  n: {report.n}")
    out.append(f"  sigma2: {report.sigma2:.6f}")
    out.append("  coefficients:")
    for row in report.coefficients:
        out.append(f"    {row['name']}: estimate={row['estimate']:+.4f} "
                   f"se={row['se']:.4f} p={row['p_value']:.4f}")
    out.append(f"  tests (alpha={report.alpha}):")
    for rep in report.tests:
        out.append("    " + rep.summary())
    out.append("  lags:")
    for rec in report.lags:
        mark = ""
        if abs(rec.rho) > rec.band_weak:
            mark = "  * outside weak band"
        out.append(f"    lag {rec.lag:2d}: rho={rec.rho:+.4f} "
                   f"strong=+-{rec.band_strong:.4f} weak=+-{rec.band_weak:.4f} "
                   f"sn=+-{rec.band_sn:.4f}{mark}")
    if report.provenance:
        out.append("  provenance:")
        for key in sorted(report.provenance):
            out.append(f"    {key}: {report.provenance[key]}")
    return "\n".join(out) + "\n"
