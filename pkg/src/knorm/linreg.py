"""Private linear regression by sanitized sufficient statistics.

The statistic vector collects the unique non-constant entries of X'X and
X'y for a design with an all-ones first column and entries in [-1, 1],
with squared-column slots doubled so every slot has sensitivity 2. Noise
from the l1, l-infinity, or hull mechanism is added to the whole vector at
once, and the coefficient estimate is recovered by a pseudoinverse solve,
which is pure post-processing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    NormBall,
    _k2_member_many,
    _k3_member_many,
    register_oracle,
)
from .sampling import sample_k_mech_rejection, sample_l1_mech, sample_linf_mech

__all__ = [
    "StatisticLayout",
    "StatisticVector",
    "RegressionDataset",
    "build_statistic",
    "kT_member",
    "kt_ball",
    "statistic_dimension",
    "sanitize_statistic",
    "dp_estimate",
    "preprocess",
    "statistic_to_csv",
    "coefficients_to_csv",
]

#: per-slot sensitivity after the doubling rescale
SLOT_SENSITIVITY = 2.0


def statistic_dimension(p):
    """Length of the statistic vector for p predictors."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return (p * p + 5 * p + 2) // 2


class StatisticLayout:
    """Fixed slot ordering of the sufficient-statistic vector.

    Order: the p column sums; the upper triangle of the predictor Gram
    block, column-major, with diagonal (squared) slots doubled; the
    response sum; and the p predictor-response cross sums.
    """

    def __init__(self, p):
        self.p = int(p)
        self.d = statistic_dimension(p)
        self._pair_base = p
        self._ysum = p + p * (p + 1) // 2

    def sum_idx(self, j):
        """Slot of sum_i x_ij (1-based j)."""
        return j - 1

    def sq_idx(self, j):
        """Slot of 2 * sum_i x_ij^2."""
        return self._pair_base + (j - 1) * j // 2 + (j - 1)

    def cross_idx(self, j, k):
        """Slot of sum_i x_ij x_ik for j < k."""
        if not j < k:
            raise ValueError("cross_idx requires j < k")
        return self._pair_base + (k - 1) * k // 2 + (j - 1)

    @property
    def ysum_idx(self):
        return self._ysum

    def xy_idx(self, j):
        """Slot of sum_i x_ij y_i."""
        return self._ysum + j

    def names(self):
        p = self.p
        out = [f"sum_x{j}" for j in range(1, p + 1)]
        for k in range(1, p + 1):
            for j in range(1, k + 1):
                out.append(f"sumsq2_x{j}" if j == k else f"cross_x{j}_x{k}")
        out.append("sum_y")
        out.extend(f"sum_x{j}y" for j in range(1, p + 1))
        return out

    def doubled_mask(self):
        """Boolean mask of the slots carrying the x2 rescale."""
        mask = np.zeros(self.d, dtype=bool)
        for j in range(1, self.p + 1):
            mask[self.sq_idx(j)] = True
        return mask


@dataclass(frozen=True)
class StatisticVector:
    """Statistic values together with the predictor count fixing their layout."""

    values: np.ndarray
    p: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (statistic_dimension(self.p),):
            raise ValueError(
                f"expected {statistic_dimension(self.p)} slots for p={self.p}, "
                f"got {values.shape}"
            )

    @property
    def layout(self):
        return StatisticLayout(self.p)


class RegressionDataset:
    """Design matrix with ones column and response, both bounded by [-1, 1].

    Validation enforces the range constraints the sensitivity bounds rely
    on; simulation code that deliberately generates unbounded responses may
    pass validate=False.
    """

    def __init__(self, design, response, predictor_names=None, validate=True):
        design = np.asarray(design, dtype=float)
        response = np.asarray(response, dtype=float)
        if design.ndim != 2 or response.ndim != 1:
            raise ValueError("design must be 2-d and response 1-d")
        if design.shape[0] != response.shape[0]:
            raise ValueError("design and response row counts differ")
        if design.shape[1] < 2:
            raise ValueError("design needs the ones column plus >= 1 predictor")
        if validate:
            if not np.all(design[:, 0] == 1.0):
                raise ValueError("first design column must be all ones")
            if np.abs(design[:, 1:]).max() > 1.0 + 1e-12:
                raise ValueError("design entries must lie in [-1, 1]")
            if np.abs(response).max() > 1.0 + 1e-12:
                raise ValueError("response entries must lie in [-1, 1]")
        self.design = design
        self.response = response
        self.predictor_names = (
            tuple(predictor_names) if predictor_names is not None else None
        )

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def p(self):
        return self.design.shape[1] - 1


def build_statistic(data: RegressionDataset) -> StatisticVector:
    """Sufficient-statistic vector of a dataset in the fixed slot order."""
    X = data.design[:, 1:]
    y = data.response
    p = data.p
    layout = StatisticLayout(p)
    values = np.empty(layout.d)
    values[:p] = X.sum(axis=0)
    gram = X.T @ X
    for k in range(1, p + 1):
        for j in range(1, k + 1):
            if j == k:
                values[layout.sq_idx(j)] = 2.0 * gram[j - 1, j - 1]
            else:
                values[layout.cross_idx(j, k)] = gram[j - 1, k - 1]
    values[layout.ysum_idx] = y.sum()
    values[layout.ysum_idx + 1 :] = X.T @ y
    return StatisticVector(values, p)


def _kt_member_many(U, layout: StatisticLayout):
    U = np.atleast_2d(np.asarray(U, dtype=float))
    ok = (np.abs(U) <= 2.0).all(axis=1)
    p = layout.p
    sums = [U[:, layout.sum_idx(j)] for j in range(1, p + 1)]
    for j in range(1, p + 1):
        pair = np.column_stack([sums[j - 1], U[:, layout.sq_idx(j)]])
        ok &= _k2_member_many(pair)
    for k in range(2, p + 1):
        for j in range(1, k):
            triple = np.column_stack(
                [sums[j - 1], sums[k - 1], U[:, layout.cross_idx(j, k)]]
            )
            ok &= _k3_member_many(triple)
    ysum = U[:, layout.ysum_idx]
    for j in range(1, p + 1):
        triple = np.column_stack([sums[j - 1], ysum, U[:, layout.xy_idx(j)]])
        ok &= _k3_member_many(triple)
    return ok


def kT_member(u, p) -> bool:
    """Membership of a statistic-difference vector in the hull body K_T.

    The body is the [-2, 2]^d box intersected with the parabola-capped hull
    on every (sum, doubled square) pair and the cross body on every
    cross-product and response triple. It contains every single-row
    difference of statistic vectors, so the hull mechanism uses scale 1.
    """
    u = np.asarray(u, dtype=float)
    d = statistic_dimension(p)
    if u.shape != (d,):
        raise ValueError(f"expected a {d}-vector for p={p}, got shape {u.shape}")
    return bool(_kt_member_many(u[None, :], StatisticLayout(p))[0])


def kt_ball(p) -> NormBall:
    """Oracle norm ball for the regression hull body at predictor count p."""
    layout = StatisticLayout(p)
    return NormBall.from_oracle(
        lambda U: _kt_member_many(U, layout),
        linf_bound=2.0,
        dimension=layout.d,
        name=f"kt{p}",
    )


for _p in (1, 2, 5):
    register_oracle(f"kt{_p}", lambda _p=_p: kt_ball(_p))


_MECH_DELTAS = {
    "l1": lambda d: SLOT_SENSITIVITY * d,
    "linf": lambda d: SLOT_SENSITIVITY,
    "kt": lambda d: 1.0,
}


def sanitize_statistic(stat: StatisticVector, mech, epsilon, rng,
                       max_attempts=10**6) -> StatisticVector:
    """Add K-norm noise to the whole statistic vector.

    mech is "l1" (Delta = 2d), "linf" (Delta = 2) or "kt" (hull body,
    Delta = 1). Rejection-sampler failures for "kt" propagate.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d = stat.layout.d
    if mech == "l1":
        noisy = sample_l1_mech(stat.values, 2.0 * d, epsilon, rng)
    elif mech == "linf":
        noisy = sample_linf_mech(stat.values, SLOT_SENSITIVITY, epsilon, rng)
    elif mech == "kt":
        noisy = sample_k_mech_rejection(
            stat.values, kt_ball(stat.p), 1.0, epsilon, rng,
            max_attempts=max_attempts,
        )
    else:
        raise ValueError(f"unknown mechanism {mech!r}; use l1, linf, or kt")
    return StatisticVector(noisy, stat.p)


def mechanism_delta(mech, p):
    """Sensitivity used by sanitize_statistic for a given mechanism name."""
    try:
        return _MECH_DELTAS[mech](statistic_dimension(p))
    except KeyError:
        raise ValueError(f"unknown mechanism {mech!r}; use l1, linf, or kt") from None


def dp_estimate(stat: StatisticVector, n_rows):
    """Coefficient estimate from (possibly noisy) sufficient statistics.

    Reassembles (X'X)* and (X'y)*, halving the doubled diagonal slots and
    restoring the constant n entry, then solves with the Moore-Penrose
    pseudoinverse, dropping singular values at or below
    (p+1) * machine epsilon * sigma_max. Total: indefinite or singular
    reconstructions still produce an estimate.
    """
    p = stat.p
    layout = stat.layout
    v = stat.values
    xtx = np.empty((p + 1, p + 1))
    xtx[0, 0] = n_rows
    for j in range(1, p + 1):
        xtx[0, j] = xtx[j, 0] = v[layout.sum_idx(j)]
        xtx[j, j] = v[layout.sq_idx(j)] / 2.0
    for k in range(2, p + 1):
        for j in range(1, k):
            xtx[j, k] = xtx[k, j] = v[layout.cross_idx(j, k)]
    xty = np.empty(p + 1)
    xty[0] = v[layout.ysum_idx]
    xty[1:] = v[layout.ysum_idx + 1 :]
    rcond = (p + 1) * np.finfo(float).eps
    return np.linalg.pinv(xtx, rcond=rcond) @ xty


def statistic_to_csv(stat: StatisticVector) -> str:
    """Statistic values as a two-line CSV: slot-name header plus values."""
    names = stat.layout.names()
    values = ",".join(repr(float(v)) for v in stat.values)
    return ",".join(names) + "\n" + values + "\n"


def coefficients_to_csv(beta, predictor_names=None) -> str:
    """Coefficient estimate as a two-line CSV with named columns."""
    beta = np.asarray(beta, dtype=float)
    p = len(beta) - 1
    if predictor_names is None:
        predictor_names = [f"x{j}" for j in range(1, p + 1)]
    if len(predictor_names) != p:
        raise ValueError("one name per predictor required")
    header = ",".join(["intercept", *predictor_names])
    values = ",".join(repr(float(v)) for v in beta)
    return header + "\n" + values + "\n"


def preprocess(columns, response, log_columns=(), lower_q=0.0001,
               upper_q=0.9999) -> RegressionDataset:
    """Normalize a table of numeric columns into a RegressionDataset.

    Applies a natural log to the configured columns (which must be strictly
    positive), clamps every used column to its empirical [lower_q, upper_q]
    quantiles (linear interpolation between order statistics), and maps the
    clamped range affinely onto [-1, 1]. The response column is named;
    every other column becomes a predictor in table order; an all-ones
    column is prepended. A column that is constant after clamping is
    rejected by name.
    """
    if response not in columns:
        raise ValueError(f"response column {response!r} not in table")
    unknown = set(log_columns) - set(columns)
    if unknown:
        raise ValueError(f"log columns not in table: {sorted(unknown)}")

    def transform(name):
        col = np.asarray(columns[name], dtype=float)
        if name in log_columns:
            if col.min() <= 0:
                raise ValueError(f"column {name!r} must be positive for log transform")
            col = np.log(col)
        lo, hi = np.quantile(col, [lower_q, upper_q])
        col = np.clip(col, lo, hi)
        mn, mx = col.min(), col.max()
        if mx - mn <= 0:
            raise ValueError(f"column {name!r} is constant after clamping")
        return 2.0 * (col - mn) / (mx - mn) - 1.0

    predictor_names = [name for name in columns if name != response]
    n = len(np.asarray(columns[response]))
    design = np.empty((n, len(predictor_names) + 1))
    design[:, 0] = 1.0
    for i, name in enumerate(predictor_names, start=1):
        design[:, i] = transform(name)
    y = transform(response)
    return RegressionDataset(design, y, predictor_names=predictor_names)
