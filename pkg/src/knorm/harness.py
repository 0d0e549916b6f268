"""Simulation drivers, statistical self-tests, and CSV output.

Each driver returns a ResultTable carrying a config echo, a long-form
table (epsilon, mechanism, replicate, metric, value) and a summary table.
Replicates use independent RngStream ids, so identical configs reproduce
byte-identical CSVs regardless of execution order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

from .erm import ObjPertConfig, logistic_loss_spec, minimize_erm, objective_perturbation
from .geometry import k2_ball, lp_norm
from .incgamma import gamma_cdf
from .linreg import (
    RegressionDataset,
    build_statistic,
    dp_estimate,
    preprocess,
    sanitize_statistic,
)
from .sampling import (
    RngStream,
    sample_k_mech_rejection,
    sample_l1_mech,
    sample_l2_mech,
    sample_linf_mech,
)

__all__ = [
    "SimulationConfig",
    "ResultTable",
    "DiagnosticCheck",
    "DiagnosticsReport",
    "simulate_logistic",
    "simulate_coverage",
    "run_regression_file",
    "run_diagnostics",
    "read_table",
    "lower_median",
    "ks_statistic",
    "ks_critical",
]

#: true coefficient vector of the logistic simulation protocol
LOGISTIC_BETA = np.array([0.0, -1.0, -0.5, -0.25, 0.0, 0.75, 1.5])

DEFAULT_LOGISTIC_EPS = (1 / 64, 1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0, 2.0)
DEFAULT_COVERAGE_EPS = (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0, 2.0, 4.0)
DEFAULT_REGRESSION_EPS = (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0)


@dataclass(frozen=True)
class SimulationConfig:
    """One experiment run: grids, replicate count, mechanisms, seed, outputs."""

    experiment: str
    eps: tuple = ()
    n: int = 10_000
    p: int = 5
    reps: int = 100
    mechanisms: tuple = ()
    q: float = 0.5
    seed: int = 0
    out: Optional[str] = None
    summary_out: Optional[str] = None
    csv_path: Optional[str] = None
    response: Optional[str] = None
    log_columns: tuple = ()
    lower_q: float = 0.0001
    upper_q: float = 0.9999

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("replicate count must be >= 1")
        if any(e <= 0 for e in self.eps):
            raise ValueError("epsilon values must be positive")


def lower_median(values):
    """Median with the lower of the two central order statistics for even counts."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("median of empty sequence")
    return ordered[(len(ordered) - 1) // 2]


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ResultTable:
    """Config echo plus long-form and summary rows, written as CSV."""

    config_echo: dict
    long_header: tuple
    long_rows: list = field(default_factory=list)
    summary_header: tuple = ("epsilon", "mechanism", "metric", "value")
    summary_rows: list = field(default_factory=list)

    def _write(self, fh, header, rows):
        for key, value in self.config_echo.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    def write_long(self, fh):
        self._write(fh, self.long_header, self.long_rows)

    def write_summary(self, fh):
        self._write(fh, self.summary_header, self.summary_rows)

    def long_csv(self):
        buf = io.StringIO()
        self.write_long(buf)
        return buf.getvalue()

    def summary_csv(self):
        buf = io.StringIO()
        self.write_summary(buf)
        return buf.getvalue()

    def summary_value(self, epsilon, mechanism, metric):
        for eps, mech, met, value in self.summary_rows:
            if eps == epsilon and mech == mechanism and met == metric:
                return value
        raise KeyError((epsilon, mechanism, metric))


def _echo(config: SimulationConfig, **extra):
    echo = {
        "experiment": config.experiment,
        "seed": config.seed,
        "n": config.n,
        "reps": config.reps,
        "eps": ",".join(_fmt(float(e)) for e in config.eps),
        "mechanisms": ",".join(config.mechanisms),
        "q": _fmt(float(config.q)),
    }
    echo.update(extra)
    return echo


def _noise_stream(config, eps_idx, mech_idx, rep):
    # data streams occupy [0, reps); noise streams are disjoint by construction
    n_mech = len(config.mechanisms)
    return config.reps + ((eps_idx * n_mech + mech_idx) * config.reps + rep)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_LOGISTIC_NORMS = {"l1": 1.0, "l2": 2.0, "linf": math.inf}


def simulate_logistic(config: SimulationConfig) -> ResultTable:
    """Private logistic regression on synthetic data.

    Per replicate, draws a uniform design on [-1,1]^(n x 7) and Bernoulli
    responses from the fixed coefficient vector, fits the non-private MLE,
    and runs objective perturbation for every (epsilon, mechanism),
    recording the l2 distance to the true coefficients. Summaries are
    lower medians per cell.
    """
    bad = [m for m in config.mechanisms if m not in _LOGISTIC_NORMS]
    if bad:
        raise ValueError(f"unknown logistic mechanisms: {bad}")
    beta = LOGISTIC_BETA
    m = len(beta)
    table = ResultTable(
        config_echo=_echo(config, m=m),
        long_header=("epsilon", "mechanism", "replicate", "metric", "value"),
    )
    losses = {
        mech: logistic_loss_spec(m, _LOGISTIC_NORMS[mech])
        for mech in config.mechanisms
    }
    errors = {
        (eps, mech): [] for eps in config.eps for mech in config.mechanisms
    }
    mle_errors = []
    for rep in range(config.reps):
        g = RngStream(config.seed, rep).generator()
        X = g.uniform(-1.0, 1.0, size=(config.n, m))
        u = g.random(config.n)
        y = (u < _sigmoid(X @ beta)).astype(float)

        mle = minimize_erm(logistic_loss_spec(m), X, y)
        mle_err = float(np.linalg.norm(mle - beta))
        mle_errors.append(mle_err)
        table.long_rows.append(("", "mle", rep, "l2_error", mle_err))

        for ei, eps in enumerate(config.eps):
            for ki, mech in enumerate(config.mechanisms):
                cfg = ObjPertConfig(epsilon=eps, q=config.q, loss=losses[mech])
                g_noise = RngStream(
                    config.seed, _noise_stream(config, ei, ki, rep)
                ).generator()
                theta = objective_perturbation(cfg, X, y, g_noise)
                err = float(np.linalg.norm(theta - beta))
                errors[(eps, mech)].append(err)
                table.long_rows.append((float(eps), mech, rep, "l2_error", err))

    table.summary_rows.append(
        ("", "zero", "l2_error", float(np.linalg.norm(beta)))
    )
    table.summary_rows.append(("", "mle", "median_l2_error", lower_median(mle_errors)))
    for eps in config.eps:
        for mech in config.mechanisms:
            table.summary_rows.append(
                (float(eps), mech, "median_l2_error",
                 lower_median(errors[(eps, mech)]))
            )
    return table


def simulate_coverage(config: SimulationConfig) -> ResultTable:
    """Confidence-interval coverage of private linear-regression estimates.

    Per replicate, simulates a Gaussian-error regression with unit variance
    and coefficients spaced over [-1.5, 1.5], builds classical 95%
    t-intervals from the least-squares fit, and records the fraction of the
    last p coordinates of each private estimate falling inside. Summaries
    are means per cell; "true_beta" rows record the intervals' own coverage
    of the true coefficients.
    """
    p = config.p
    beta = np.concatenate([[0.0], np.linspace(-1.5, 1.5, p)])
    table = ResultTable(
        config_echo=_echo(config, p=p),
        long_header=("epsilon", "mechanism", "replicate", "metric", "value"),
    )
    coverages = {
        (eps, mech): [] for eps in config.eps for mech in config.mechanisms
    }
    true_cov = []
    n = config.n
    tcrit = float(sps.t.ppf(0.975, n - p - 1))
    for rep in range(config.reps):
        g = RngStream(config.seed, rep).generator()
        X = np.empty((n, p + 1))
        X[:, 0] = 1.0
        X[:, 1:] = g.uniform(-1.0, 1.0, size=(n, p))
        y = X @ beta + g.standard_normal(n)

        xtx = X.T @ X
        beta_hat = np.linalg.solve(xtx, X.T @ y)
        resid = y - X @ beta_hat
        s2 = float(resid @ resid) / (n - p - 1)
        se = np.sqrt(s2 * np.diag(np.linalg.inv(xtx)))
        lo = beta_hat - tcrit * se
        hi = beta_hat + tcrit * se

        cov_true = float(np.mean((beta[1:] >= lo[1:]) & (beta[1:] <= hi[1:])))
        true_cov.append(cov_true)
        table.long_rows.append(("", "true_beta", rep, "coverage", cov_true))

        # the protocol's Gaussian responses are unbounded, so skip range checks
        data = RegressionDataset(X, y, validate=False)
        stat = build_statistic(data)
        for ei, eps in enumerate(config.eps):
            for ki, mech in enumerate(config.mechanisms):
                g_noise = RngStream(
                    config.seed, _noise_stream(config, ei, ki, rep)
                ).generator()
                noisy = sanitize_statistic(stat, mech, eps, g_noise)
                beta_dp = dp_estimate(noisy, n)
                cov = float(
                    np.mean((beta_dp[1:] >= lo[1:]) & (beta_dp[1:] <= hi[1:]))
                )
                coverages[(eps, mech)].append(cov)
                table.long_rows.append((float(eps), mech, rep, "coverage", cov))

    table.summary_rows.append(
        ("", "true_beta", "mean_coverage", float(np.mean(true_cov)))
    )
    for eps in config.eps:
        for mech in config.mechanisms:
            table.summary_rows.append(
                (float(eps), mech, "mean_coverage",
                 float(np.mean(coverages[(eps, mech)])))
            )
    return table


def read_table(path):
    """Read a numeric CSV with a header row into a dict of column arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        columns = {name: [] for name in header}
        if len(columns) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
            for name, cell in zip(header, row):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {i}, column {name!r}: not numeric: {cell!r}"
                    ) from None
    return {name: np.array(vals) for name, vals in columns.items()}


def run_regression_file(config: SimulationConfig) -> ResultTable:
    """Private regression on a CSV file, measured against its own MLE.

    Preprocesses the table (log transforms, quantile clamping, affine map
    to [-1,1]), computes the least-squares fit, and for every (epsilon,
    mechanism, replicate) records the l2 distance between the private
    estimate and that fit. The zero-vector baseline ||beta_mle||_2 is
    echoed in the header.
    """
    if config.csv_path is None or config.response is None:
        raise ValueError("run-regression requires a csv path and response column")
    columns = read_table(config.csv_path)
    data = preprocess(
        columns,
        config.response,
        log_columns=config.log_columns,
        lower_q=config.lower_q,
        upper_q=config.upper_q,
    )
    beta_mle, *_ = np.linalg.lstsq(data.design, data.response, rcond=None)
    baseline = float(np.linalg.norm(beta_mle))
    stat = build_statistic(data)
    table = ResultTable(
        config_echo=_echo(
            config,
            n=data.n,
            p=data.p,
            csv=config.csv_path,
            response=config.response,
            baseline_l2=_fmt(baseline),
        ),
        long_header=("epsilon", "mechanism", "replicate", "metric", "value"),
    )
    dists = {(eps, mech): [] for eps in config.eps for mech in config.mechanisms}
    for ei, eps in enumerate(config.eps):
        for ki, mech in enumerate(config.mechanisms):
            for rep in range(config.reps):
                g = RngStream(
                    config.seed, _noise_stream(config, ei, ki, rep)
                ).generator()
                noisy = sanitize_statistic(stat, mech, eps, g)
                beta_dp = dp_estimate(noisy, data.n)
                dist = float(np.linalg.norm(beta_dp - beta_mle))
                dists[(eps, mech)].append(dist)
                table.long_rows.append(
                    (float(eps), mech, rep, "l2_distance_to_mle", dist)
                )
    table.summary_rows.append(("", "zero", "l2_distance_to_mle", baseline))
    for eps in config.eps:
        for mech in config.mechanisms:
            table.summary_rows.append(
                (float(eps), mech, "median_l2_distance_to_mle",
                 lower_median(dists[(eps, mech)]))
            )
    return table


# -- statistical self-tests ------------------------------------------------

def ks_statistic(samples, cdf):
    """One-sample Kolmogorov-Smirnov distance against a CDF callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    f = np.array([cdf(v) for v in x])
    i = np.arange(1, n + 1)
    return float(max((i / n - f).max(), (f - (i - 1) / n).max()))


def _kolmogorov_sf(x):
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-16:
            break
    return total


def ks_critical(n, alpha=0.01):
    """Critical KS distance at level alpha (asymptotic Kolmogorov law)."""
    lo, hi = 0.3, 5.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _kolmogorov_sf(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) / math.sqrt(n)


@dataclass(frozen=True)
class DiagnosticCheck:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class DiagnosticsReport:
    checks: list

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def format_lines(self):
        lines = []
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            extra = f" ({c.detail})" if c.detail else ""
            lines.append(
                f"{verdict} {c.name}: statistic={c.statistic:.6g} "
                f"threshold={c.threshold:.6g}{extra}"
            )
        return lines


def _diag_draws(mech, m, delta, epsilon, rng, n_draws, fault):
    """Noise draws plus their gauges for one named sampler."""
    zero = np.zeros(m)
    if mech == "l1":
        d = delta / 2.0 if fault == "laplace-scale" else delta
        v = sample_l1_mech(zero, d, epsilon, rng, size=n_draws)
        return v, lp_norm(v, 1)
    if mech == "l2":
        v = sample_l2_mech(zero, delta, epsilon, rng, size=n_draws)
        return v, lp_norm(v, 2)
    if mech == "linf":
        v = sample_linf_mech(zero, delta, epsilon, rng, size=n_draws)
        return v, lp_norm(v, math.inf)
    if mech == "k2":
        ball = k2_ball()
        v, stats = sample_k_mech_rejection(
            np.zeros(2), ball, delta, epsilon, rng, size=n_draws,
            return_stats=True,
        )
        return v, ball.gauge_many(v), stats
    raise ValueError(f"unknown diagnostic mechanism {mech!r}")


def _dp_ratio_check(epsilon, n, seed):
    """Histogram density-ratio bound for the 1-d Laplace mechanism."""
    rng = RngStream(seed, 900_000).generator()
    s0 = sample_l1_mech(np.zeros(1), 1.0, epsilon, rng, size=n)[:, 0]
    s1 = sample_l1_mech(np.ones(1), 1.0, epsilon, rng, size=n)[:, 0]
    edges = np.arange(-8.0, 9.0 + 1e-9, 0.5)
    c0, _ = np.histogram(s0, bins=edges)
    c1, _ = np.histogram(s1, bins=edges)
    use = (c0 >= 100) & (c1 >= 100)
    worst = 0.0
    bound_hit = 1.0
    for a, b in zip(c0[use], c1[use]):
        ratio = max(a / b, b / a)
        slack = 1.0 + 5.0 * math.sqrt(1.0 / a + 1.0 / b)
        rel = ratio / (math.exp(epsilon) * slack)
        if rel > worst:
            worst = rel
            bound_hit = ratio
    return worst, bound_hit, int(use.sum())


def run_diagnostics(mechanisms=("l1", "l2", "linf", "k2"), n_draws=10_000,
                    seed=0, fault=None) -> DiagnosticsReport:
    """Run the sampler self-tests and collect per-check verdicts.

    Checks per mechanism: Kolmogorov-Smirnov test of the noise gauge
    against its Gamma(m, eps/Delta) marginal at level 0.01, and a
    4-standard-error unbiasedness check per coordinate. The l1 entry adds
    the Laplace histogram ratio bound; the k2 entry adds the rejection
    acceptance-rate check against the known hull/box volume ratio. An empty
    mechanism list yields an empty report. ``fault`` deliberately breaks a
    sampler to demonstrate detection (testing aid): "laplace-scale" halves
    the l1 scale.

    With several simultaneous 0.01-level tests the false-alarm rate is a
    few percent (no Bonferroni correction); the default seed is known-good.
    """
    checks = []
    configs = {"m": 2, "delta": 1.0, "epsilon": 1.0}
    for idx, mech in enumerate(mechanisms):
        m, delta, epsilon = configs["m"], configs["delta"], configs["epsilon"]
        rng = RngStream(seed, 1000 + idx).generator()
        out = _diag_draws(mech, m, delta, epsilon, rng, n_draws, fault)
        v, gauges = out[0], out[1]
        rate = epsilon / delta
        d = ks_statistic(gauges, lambda x: gamma_cdf(x, m, rate))
        crit = ks_critical(n_draws, 0.01)
        checks.append(
            DiagnosticCheck(
                name=f"gamma-marginal-ks[{mech}]",
                statistic=d,
                threshold=crit,
                passed=d < crit,
                detail=f"m={m} delta={delta} eps={epsilon} n={n_draws}",
            )
        )
        se = v.std(axis=0, ddof=1) / math.sqrt(n_draws)
        worst = float(np.max(np.abs(v.mean(axis=0)) / se))
        checks.append(
            DiagnosticCheck(
                name=f"unbiasedness[{mech}]",
                statistic=worst,
                threshold=4.0,
                passed=worst <= 4.0,
                detail="max |mean|/SE over coordinates",
            )
        )
        if mech == "k2":
            stats = out[2]
            expected = (40.0 / 3.0) / 16.0
            se_rate = math.sqrt(expected * (1 - expected) / stats["proposals"])
            dev = abs(stats["acceptance_rate"] - expected) / se_rate
            checks.append(
                DiagnosticCheck(
                    name="rejection-acceptance[k2]",
                    statistic=stats["acceptance_rate"],
                    threshold=4.0,
                    passed=dev <= 4.0,
                    detail=f"expected {expected:.4f}, deviation {dev:.2f} SE",
                )
            )
        if mech == "l1":
            worst_rel, ratio, n_bins = _dp_ratio_check(epsilon, 100_000, seed)
            checks.append(
                DiagnosticCheck(
                    name="dp-ratio[laplace]",
                    statistic=worst_rel,
                    threshold=1.0,
                    passed=worst_rel <= 1.0,
                    detail=f"worst bin ratio {ratio:.3f} over {n_bins} bins",
                )
            )
    return DiagnosticsReport(checks)
