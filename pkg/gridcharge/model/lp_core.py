"""Linear programs in standard form, and a bundled dense simplex solver.

Problems are assembled with :class:`LPBuilder`, which stores every constraint as one or
more rows of ``A·z ≤ b``:

- ``≥`` rows are negated, and
- equality rows become a pair of opposite inequalities.

:func:`solve_lp` is a two-phase tableau simplex. Internally each variable with a finite
upper bound is shifted and rescaled to the unit interval, rows are scaled by their
largest coefficient and the objective by its largest coefficient. Entering variables are
chosen by most-negative reduced cost (lowest index on ties); after
:data:`DEGENERATE_LIMIT` consecutive degenerate pivots the solver switches to Bland's
rule.

Every optimal answer is checked with :func:`validate_solution` before it is returned;
an answer failing the check is reported as :attr:`LPStatus.FAILED`.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import click
import numpy as np

from gridcharge.util.click import common_params

log = logging.getLogger(__name__)

#: Feasibility tolerance on scaled rows and relative bounds.
FEAS_TOL = 1e-6

#: Minimum magnitude of a pivot element.
PIVOT_TOL = 1e-9

#: Reduced costs above −OPT_TOL are treated as non-negative.
OPT_TOL = 1e-9

#: Consecutive degenerate pivots after which Bland's rule is used.
DEGENERATE_LIMIT = 50


class MalformedProblem(ValueError):
    """A linear program that violates the invariants of :class:`StandardFormLP`."""


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    #: Iteration limit, numerical breakdown, or an answer failing validation.
    FAILED = "failed"


@dataclass(frozen=True)
class StandardFormLP:
    """``min c·z`` subject to ``A·z ≤ b`` and ``lo ≤ z ≤ hi``.

    Construct with :class:`LPBuilder` rather than directly.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    labels: Tuple[str, ...]
    row_names: Tuple[str, ...]

    def __post_init__(self):
        n, m = len(self.c), len(self.b)
        if self.A.shape != (m, n):
            raise MalformedProblem(f"A has shape {self.A.shape}; expected {(m, n)}")
        if len(self.lo) != n or len(self.hi) != n or len(self.labels) != n:
            raise MalformedProblem("bounds/labels do not match number of variables")
        if len(self.row_names) != m:
            raise MalformedProblem("row names do not match number of rows")
        for name in ("c", "A", "b", "lo"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise MalformedProblem(f"non-finite value in {name}")
        if np.any(np.isnan(self.hi)) or np.any(self.hi == -np.inf):
            raise MalformedProblem("invalid upper bound")
        bad = np.flatnonzero(self.lo > self.hi)
        if len(bad):
            i = bad[0]
            raise MalformedProblem(
                f"{self.labels[i]}: lower bound {self.lo[i]} > upper bound {self.hi[i]}"
            )

    @property
    def n_variables(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def dump(self) -> str:
        """Human-readable text, one constraint per line."""
        lines = ["minimize", "  " + _format_terms(self.c, self.labels), "subject to"]
        for name, row, rhs in zip(self.row_names, self.A, self.b):
            lines.append(f"  {name}: {_format_terms(row, self.labels)} <= {rhs:.12g}")
        lines.append("bounds")
        for label, lo, hi in zip(self.labels, self.lo, self.hi):
            lines.append(f"  {lo:.12g} <= {label} <= {hi:.12g}")
        return "\n".join(lines) + "\n"


def _format_terms(coefs: np.ndarray, labels: Sequence[str]) -> str:
    terms = [f"{v:+.12g} {labels[j]}" for j, v in enumerate(coefs) if v != 0]
    return " ".join(terms) or "0"


class LPBuilder:
    """Assemble a :class:`StandardFormLP` one variable and constraint at a time.

    Example
    -------
    >>> lp = LPBuilder()
    >>> z = lp.add_variable("z", cost=-1.0)
    >>> lp.add_row({z: 1.0}, "<=", 1.0, "cap")
    >>> problem = lp.build()
    """

    def __init__(self):
        self._labels: List[str] = []
        self._index: Dict[str, int] = {}
        self._cost: List[float] = []
        self._lo: List[float] = []
        self._hi: List[float] = []
        self._rows: List[Tuple[Dict[int, float], float, str]] = []

    def add_variable(
        self, label: str, cost: float = 0.0, lo: float = 0.0, hi: float = np.inf
    ) -> int:
        """Declare a variable and return its index."""
        if label in self._index:
            raise MalformedProblem(f"duplicate variable {label!r}")
        if not (np.isfinite(cost) and np.isfinite(lo)) or np.isnan(hi):
            raise MalformedProblem(f"{label}: cost {cost}, bounds [{lo}, {hi}]")
        if lo > hi:
            raise MalformedProblem(f"{label}: lower bound {lo} > upper bound {hi}")
        self._index[label] = len(self._labels)
        self._labels.append(label)
        self._cost.append(float(cost))
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        return self._index[label]

    def index(self, label: str) -> int:
        return self._index[label]

    def add_row(
        self, coefs: Mapping[int, float], sense: str, rhs: float, name: str = ""
    ) -> None:
        """Add the constraint ``Σ coefs[j]·z_j (sense) rhs``.

        `sense` is one of "<=", ">=", "==".
        """
        name = name or f"r{len(self._rows)}"
        n = len(self._labels)
        for j, v in coefs.items():
            if not 0 <= j < n:
                raise MalformedProblem(f"{name}: undeclared variable index {j}")
            if not np.isfinite(v):
                raise MalformedProblem(f"{name}: non-finite coefficient {v}")
        if not np.isfinite(rhs):
            raise MalformedProblem(f"{name}: non-finite right-hand side {rhs}")

        if sense == "<=":
            self._rows.append((dict(coefs), float(rhs), name))
        elif sense == ">=":
            self._rows.append(({j: -v for j, v in coefs.items()}, -float(rhs), name))
        elif sense == "==":
            self._rows.append((dict(coefs), float(rhs), f"{name}[le]"))
            self._rows.append(
                ({j: -v for j, v in coefs.items()}, -float(rhs), f"{name}[ge]")
            )
        else:
            raise MalformedProblem(f"{name}: unknown sense {sense!r}")

    def build(self) -> StandardFormLP:
        A = np.zeros((len(self._rows), len(self._labels)))
        for i, (coefs, _, _) in enumerate(self._rows):
            for j, v in coefs.items():
                A[i, j] += v
        return StandardFormLP(
            c=np.array(self._cost),
            A=A,
            b=np.array([r[1] for r in self._rows]),
            lo=np.array(self._lo),
            hi=np.array(self._hi),
            labels=tuple(self._labels),
            row_names=tuple(r[2] for r in self._rows),
        )


@dataclass(frozen=True)
class LPSolution:
    status: LPStatus
    #: Variable assignment; :obj:`None` unless :attr:`status` is optimal.
    values: Optional[np.ndarray] = None
    objective_value: float = np.nan
    iterations: int = 0
    labels: Tuple[str, ...] = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL

    def as_dict(self) -> Dict[str, float]:
        if self.values is None:
            return {}
        return dict(zip(self.labels, self.values.tolist()))


@dataclass(frozen=True)
class FeasibilityReport:
    """Result of :func:`validate_solution`."""

    max_bound_violation: float
    max_row_violation: float
    objective_value: float
    #: Name of the row with the largest violation, if any is violated.
    worst_row: Optional[str] = None

    def ok(self, tol: float = FEAS_TOL) -> bool:
        return max(self.max_bound_violation, self.max_row_violation) <= tol


def validate_solution(
    problem: StandardFormLP, candidate: Union[Mapping[str, float], Sequence[float]]
) -> FeasibilityReport:
    """Measure how far `candidate` is from satisfying `problem`.

    Row violations are divided by ``max(1, max|a_ij|, max|a_ij·z_j|, |b_i|)``; bound
    violations by ``max(1, |bound|)``.

    Raises
    ------
    ValueError
        if `candidate` lacks a value for any variable.
    """
    if isinstance(candidate, Mapping):
        missing = [label for label in problem.labels if label not in candidate]
        if missing:
            raise ValueError(f"No value for variable(s) {missing[:5]}")
        z = np.array([candidate[label] for label in problem.labels], dtype=float)
    else:
        z = np.asarray(candidate, dtype=float)
        if z.shape != (problem.n_variables,):
            raise ValueError(
                f"Need {problem.n_variables} values; got shape {z.shape}"
            )

    with np.errstate(invalid="ignore"):
        below = (problem.lo - z) / np.maximum(1.0, np.abs(problem.lo))
        above = np.where(
            np.isfinite(problem.hi),
            (z - problem.hi) / np.maximum(1.0, np.abs(problem.hi)),
            0.0,
        )
    bound_violation = float(np.max(np.maximum(below, above), initial=0.0))

    row_violation, worst = 0.0, None
    if problem.n_rows:
        terms = np.abs(problem.A * z)
        scale = np.maximum.reduce(
            [
                np.ones(problem.n_rows),
                np.abs(problem.A).max(axis=1, initial=0.0),
                terms.max(axis=1, initial=0.0),
                np.abs(problem.b),
            ]
        )
        excess = (problem.A @ z - problem.b) / scale
        i = int(np.argmax(excess))
        if excess[i] > 0:
            row_violation, worst = float(excess[i]), problem.row_names[i]

    return FeasibilityReport(
        max_bound_violation=max(bound_violation, 0.0),
        max_row_violation=row_violation,
        objective_value=float(problem.c @ z),
        worst_row=worst,
    )


class _Tableau:
    """Dense two-phase simplex tableau for ``min c·y, A·y ≤ b, y ≥ 0``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, c: np.ndarray, max_iter: int):
        m, n = A.shape
        neg = b < 0
        k = int(neg.sum())

        self.n, self.m, self.k = n, m, k
        self.c = c
        self.max_iter = max_iter
        self.iterations = 0

        T = np.zeros((m + 1, n + m + k + 1))
        sign = np.where(neg, -1.0, 1.0)
        T[:m, :n] = A * sign[:, None]
        T[np.arange(m), n + np.arange(m)] = sign
        T[np.flatnonzero(neg), n + m + np.arange(k)] = 1.0
        T[:m, -1] = np.abs(b)
        self.T = T

        # Slack for rows with b ≥ 0, artificial otherwise
        self.basis = n + np.arange(m)
        self.basis[neg] = n + m + np.arange(k)

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        # Round-off on the right-hand side
        rhs = T[:-1, -1]
        rhs[(rhs < 0) & (rhs > -PIVOT_TOL)] = 0.0
        self.basis[row] = col
        self.iterations += 1

    def run(self, n_active: int) -> LPStatus:
        """Iterate with entering candidates among the first `n_active` columns."""
        T = self.T
        degenerate, bland = 0, False
        if n_active == 0:
            return LPStatus.OPTIMAL

        while True:
            if self.iterations >= self.max_iter:
                log.warning(f"Iteration limit {self.max_iter} reached")
                return LPStatus.FAILED
            if not np.all(np.isfinite(T)):
                log.warning("Non-finite value in tableau")
                return LPStatus.FAILED

            reduced = T[-1, :n_active]
            if bland:
                candidates = np.flatnonzero(reduced < -OPT_TOL)
                if len(candidates) == 0:
                    return LPStatus.OPTIMAL
                col = int(candidates[0])
            else:
                col = int(np.argmin(reduced))
                if reduced[col] >= -OPT_TOL:
                    return LPStatus.OPTIMAL

            column = T[:-1, col]
            eligible = column > PIVOT_TOL
            if not eligible.any():
                return LPStatus.UNBOUNDED

            ratios = np.full(len(column), np.inf)
            ratios[eligible] = T[:-1, -1][eligible] / column[eligible]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + PIVOT_TOL * max(1.0, best))
            row = int(ties[np.argmin(self.basis[ties])])

            if best <= PIVOT_TOL:
                degenerate += 1
                if not bland and degenerate > DEGENERATE_LIMIT:
                    log.debug(f"Switch to Bland's rule after {degenerate} pivots")
                    bland = True
            else:
                degenerate = 0

            self.pivot(row, col)

    def phase_1(self) -> LPStatus:
        if self.k == 0:
            return LPStatus.OPTIMAL

        n, m, T = self.n, self.m, self.T
        art = self.basis >= n + m
        T[-1, :] = -T[:-1][art].sum(axis=0)
        T[-1, n + m :] = 0.0
        T[-1, -1] = -T[:-1, -1][art].sum()
        tol = PIVOT_TOL * max(1.0, T[:-1, -1][art].sum())

        status = self.run(n + m + self.k)
        if status is LPStatus.UNBOUNDED:
            return LPStatus.FAILED
        elif status is not LPStatus.OPTIMAL:
            return status
        elif -T[-1, -1] > tol:
            return LPStatus.INFEASIBLE

        # Drive remaining artificial variables out of the basis
        redundant = []
        for row in np.flatnonzero(self.basis >= n + m):
            candidates = np.abs(T[row, : n + m])
            col = int(np.argmax(candidates))
            if candidates[col] > PIVOT_TOL:
                self.pivot(row, col)
            else:
                redundant.append(row)
        keep = np.setdiff1d(np.arange(m + 1), redundant)
        self.T = T[keep][:, np.r_[0 : n + m, -1]]
        self.T[:-1, -1] = np.maximum(self.T[:-1, -1], 0.0)
        self.basis = self.basis[keep[:-1]]
        self.k = 0
        if redundant:
            log.debug(f"Drop {len(redundant)} redundant row(s)")
        return LPStatus.OPTIMAL

    def phase_2(self) -> LPStatus:
        n, m, T = self.n, self.m, self.T
        cost = np.zeros(T.shape[1])
        cost[:n] = self.c
        T[-1, :] = cost
        c_basis = cost[self.basis]
        T[-1, :] -= c_basis @ T[:-1, :]
        return self.run(n + m)

    def values(self) -> np.ndarray:
        y = np.zeros(self.T.shape[1] - 1)
        y[self.basis] = self.T[:-1, -1]
        return y[: self.n]


def solve_lp(problem: StandardFormLP, max_iter: Optional[int] = None) -> LPSolution:
    """Solve `problem` with the bundled simplex method.

    Returns
    -------
    LPSolution
        with :attr:`~LPStatus.OPTIMAL` status and a validated assignment, or one of the
        other statuses and no values.
    """
    n = problem.n_variables
    lo, hi = problem.lo, problem.hi

    # z = lo + scale·y, with y ∈ [0, 1] for variables bounded above
    bounded = np.isfinite(hi)
    span = np.where(bounded, hi - lo, 1.0)
    scale = np.where(span > 0, span, 1.0)

    idx = np.flatnonzero(bounded)
    bound_rows = np.zeros((len(idx), n))
    bound_rows[np.arange(len(idx)), idx] = 1.0

    A = np.vstack([problem.A * scale, bound_rows])
    b = np.concatenate([problem.b - problem.A @ lo, span[idx] / scale[idx]])

    row_max = np.abs(A).max(axis=1, initial=0.0)
    empty = row_max == 0
    if np.any(b[empty] < -FEAS_TOL * np.maximum(1.0, np.abs(problem.b).max(initial=0))):
        return LPSolution(LPStatus.INFEASIBLE, labels=problem.labels)
    A = A[~empty] / row_max[~empty, None]
    b = b[~empty] / row_max[~empty]

    c = problem.c * scale
    c = c / max(np.abs(c).max(initial=0.0), 1e-300)

    m = len(b)
    tableau = _Tableau(A, b, c, max_iter or 50 * (m + n) + 1000)

    status = tableau.phase_1()
    if status is LPStatus.OPTIMAL:
        status = tableau.phase_2()

    log.debug(
        f"{status.value} after {tableau.iterations} pivots ({n} variables, {m} rows)"
    )
    if status is not LPStatus.OPTIMAL:
        return LPSolution(status, iterations=tableau.iterations, labels=problem.labels)

    z = np.clip(lo + scale * tableau.values(), lo, hi)
    report = validate_solution(problem, z)
    if not report.ok():
        log.warning(
            f"Solution fails validation: bound {report.max_bound_violation:.3g}, row "
            f"{report.max_row_violation:.3g} at {report.worst_row}"
        )
        return LPSolution(
            LPStatus.FAILED, iterations=tableau.iterations, labels=problem.labels
        )

    return LPSolution(
        LPStatus.OPTIMAL,
        values=z,
        objective_value=report.objective_value,
        iterations=tableau.iterations,
        labels=problem.labels,
    )


# Command-line interface


@click.command(name="dump-lp")
@click.option(
    "--problem",
    "kind",
    type=click.Choice(["ucp", "charging"]),
    default="ucp",
    help="Which problem to build.",
)
@click.option(
    "--out",
    "path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write to this file instead of standard output.",
)
@common_params("seed")
@click.pass_obj
def cli(context, kind, path, seed):
    """Write a linear program as text, one constraint per line."""
    from gridcharge.harness import prepare_run
    from gridcharge.model.charging import build_charging_lp
    from gridcharge.model.ucp import build_ucp

    config = context.get_config()
    if seed is not None:
        config = config.replace(master_seed=seed)

    inputs = prepare_run(config, 0)
    if kind == "ucp":
        problem = build_ucp(inputs.ucp)
    else:
        problem = build_charging_lp(inputs.charging_instance(config.charging_lambda))

    text = problem.dump()
    if path:
        Path(path).write_text(text)
        log.info(
            f"Wrote {problem.n_variables} variables, {problem.n_rows} rows to {path}"
        )
    else:
        click.echo(text, nl=False)
