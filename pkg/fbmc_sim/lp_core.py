"""
Linear program wrapper around scipy's HiGHS interface.

Variables and constraints are declared by name; ``solve`` assembles sparse
matrices, calls ``scipy.optimize.linprog`` and maps the result back to names.

Dual sign convention: for a minimisation, a binding ``>=`` constraint has a
non-negative dual, a binding ``<=`` constraint a non-positive one, and the
dual of an equality is d(objective)/d(rhs).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

SENSES = ("<=", ">=", "==")


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FAILED = "failed"


# linprog status codes
_STATUS = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}


@dataclass
class LpModel:
    """Minimisation LP built up incrementally; owned by one thread."""

    name: str = "lp"
    var_names: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    con_names: list = field(default_factory=list)
    con_terms: list = field(default_factory=list)  # list of {var index: coef}
    con_sense: list = field(default_factory=list)
    con_rhs: list = field(default_factory=list)
    _var_index: dict = field(default_factory=dict, repr=False)

    def add_variable(self, name, lower=0.0, upper=math.inf, cost=0.0):
        if name in self._var_index:
            raise ValueError(f"duplicate variable {name!r}")
        if lower > upper:
            # kept as declared; surfaces as an infeasible or failed solve
            logger.debug("variable %s has lower %s > upper %s", name, lower, upper)
        if not math.isfinite(cost):
            raise ValueError(f"non-finite cost on {name!r}")
        idx = len(self.var_names)
        self._var_index[name] = idx
        self.var_names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        return idx

    def var(self, name):
        return self._var_index[name]

    def set_cost(self, idx, cost):
        self.cost[idx] = float(cost)

    def add_constraint(self, name, terms, sense, rhs):
        """
        Add ``sum(coef * x[idx]) <sense> rhs``.

        Args:
            terms (dict | iterable): {variable index or name: coefficient}.
            sense (str): One of "<=", ">=", "==".
            rhs (float): Right-hand side; an infinite rhs on an inequality
                makes the row redundant and it is skipped.

        Returns:
            int | None: Row index, or None when skipped.
        """
        if sense not in SENSES:
            raise ValueError(f"unknown constraint sense {sense!r}")
        rhs = float(rhs)
        if math.isinf(rhs):
            if sense == "==" or (sense == "<=" and rhs < 0) or (sense == ">=" and rhs > 0):
                raise ValueError(f"constraint {name!r} has an unsatisfiable infinite rhs")
            return None
        if math.isnan(rhs):
            raise ValueError(f"constraint {name!r} has NaN rhs")

        row = {}
        items = terms.items() if isinstance(terms, dict) else terms
        for key, coef in items:
            idx = self._var_index[key] if isinstance(key, str) else int(key)
            if not 0 <= idx < len(self.var_names):
                raise ValueError(f"constraint {name!r} references unknown variable {key!r}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError(f"constraint {name!r} has a non-finite coefficient")
            if coef != 0.0:
                row[idx] = row.get(idx, 0.0) + coef

        self.con_names.append(name)
        self.con_terms.append(row)
        self.con_sense.append(sense)
        self.con_rhs.append(rhs)
        return len(self.con_names) - 1

    @property
    def n_vars(self):
        return len(self.var_names)

    @property
    def n_cons(self):
        return len(self.con_names)

    def scaled(self, factor):
        """Copy with the objective multiplied by ``factor``."""
        clone = LpModel(
            name=self.name,
            var_names=list(self.var_names),
            lower=list(self.lower),
            upper=list(self.upper),
            cost=[c * factor for c in self.cost],
            con_names=list(self.con_names),
            con_terms=[dict(t) for t in self.con_terms],
            con_sense=list(self.con_sense),
            con_rhs=list(self.con_rhs),
            _var_index=dict(self._var_index),
        )
        return clone


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray
    duals: np.ndarray
    objective: float
    dual_objective: float
    message: str
    var_names: tuple = ()
    con_names: tuple = ()

    @property
    def optimal(self):
        return self.status == LpStatus.OPTIMAL

    def value(self, name):
        return float(self.x[self.var_names.index(name)])

    def dual(self, name):
        return float(self.duals[self.con_names.index(name)])


def _matrix(rows, n_vars):
    data, row_idx, col_idx = [], [], []
    for r, terms in enumerate(rows):
        for c, v in terms.items():
            row_idx.append(r)
            col_idx.append(c)
            data.append(v)
    return sparse.csr_matrix((data, (row_idx, col_idx)), shape=(len(rows), n_vars))


def solve(model):
    """
    Solve ``model`` with HiGHS.

    Returns:
        LpSolution: Status-tagged; ``x``/``duals`` are NaN-filled when not optimal.
    """
    n = model.n_vars
    ub_rows, ub_rhs, ub_map, ub_sign = [], [], [], []
    eq_rows, eq_rhs, eq_map = [], [], []
    for i, (terms, sense, rhs) in enumerate(zip(model.con_terms, model.con_sense, model.con_rhs)):
        if sense == "==":
            eq_rows.append(terms)
            eq_rhs.append(rhs)
            eq_map.append(i)
        elif sense == "<=":
            ub_rows.append(terms)
            ub_rhs.append(rhs)
            ub_map.append(i)
            ub_sign.append(1.0)
        else:
            ub_rows.append({k: -v for k, v in terms.items()})
            ub_rhs.append(-rhs)
            ub_map.append(i)
            ub_sign.append(-1.0)

    kwargs = {}
    if ub_rows:
        kwargs["A_ub"] = _matrix(ub_rows, n)
        kwargs["b_ub"] = np.asarray(ub_rhs)
    if eq_rows:
        kwargs["A_eq"] = _matrix(eq_rows, n)
        kwargs["b_eq"] = np.asarray(eq_rhs)
    lower = np.asarray(model.lower, dtype=float)
    upper = np.asarray(model.upper, dtype=float)
    bounds = [(None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
              for lo, hi in zip(lower, upper)]

    nan_x = np.full(n, np.nan)
    nan_duals = np.full(model.n_cons, np.nan)
    try:
        res = linprog(np.asarray(model.cost, dtype=float), bounds=bounds, method="highs", **kwargs)
    except (ValueError, RuntimeError) as e:
        logger.warning("LP %s failed: %s", model.name, e)
        return LpSolution(LpStatus.FAILED, nan_x, nan_duals, math.nan, math.nan, str(e),
                          tuple(model.var_names), tuple(model.con_names))

    status = _STATUS.get(res.status, LpStatus.FAILED)
    if status != LpStatus.OPTIMAL:
        logger.debug("LP %s: %s (%s)", model.name, status.value, res.message)
        return LpSolution(status, nan_x, nan_duals, math.nan, math.nan, res.message,
                          tuple(model.var_names), tuple(model.con_names))

    duals = np.zeros(model.n_cons)
    dual_obj = 0.0
    if ub_rows:
        marg = np.asarray(res.ineqlin.marginals)
        for k, i in enumerate(ub_map):
            duals[i] = marg[k] * ub_sign[k]
        dual_obj += float(marg @ np.asarray(ub_rhs))
    if eq_rows:
        marg = np.asarray(res.eqlin.marginals)
        duals[eq_map] = marg
        dual_obj += float(marg @ np.asarray(eq_rhs))
    finite_lo, finite_hi = np.isfinite(lower), np.isfinite(upper)
    dual_obj += float(np.asarray(res.lower.marginals)[finite_lo] @ lower[finite_lo])
    dual_obj += float(np.asarray(res.upper.marginals)[finite_hi] @ upper[finite_hi])

    return LpSolution(LpStatus.OPTIMAL, np.asarray(res.x), duals, float(res.fun), dual_obj,
                      res.message, tuple(model.var_names), tuple(model.con_names))


def residuals(model, x):
    """Per constraint violation (>= 0) of a primal point."""
    out = np.zeros(model.n_cons)
    for i, (terms, sense, rhs) in enumerate(zip(model.con_terms, model.con_sense, model.con_rhs)):
        lhs = sum(v * x[k] for k, v in terms.items())
        if sense == "==":
            out[i] = abs(lhs - rhs)
        elif sense == "<=":
            out[i] = max(lhs - rhs, 0.0)
        else:
            out[i] = max(rhs - lhs, 0.0)
    return out


def _lp_name(name):
    # LP format forbids a few characters in identifiers
    return "".join(ch if ch.isalnum() or ch in "_.[]" else "_" for ch in name)


def _expression(terms, names):
    parts = []
    for idx, coef in terms.items():
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef):.12g} {names[idx]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp(model, path):
    """Export ``model`` in CPLEX LP text format."""
    names = [_lp_name(n) for n in model.var_names]
    lines = [f"\\ {model.name}", "Minimize"]
    obj = {i: c for i, c in enumerate(model.cost) if c != 0.0}
    lines.append(f" obj: {_expression(obj, names)}")
    lines.append("Subject To")
    for cname, terms, sense, rhs in zip(model.con_names, model.con_terms,
                                        model.con_sense, model.con_rhs):
        op = "=" if sense == "==" else sense
        lines.append(f" {_lp_name(cname)}: {_expression(terms, names)} {op} {rhs:.12g}")
    lines.append("Bounds")
    for name, lo, hi in zip(names, model.lower, model.upper):
        if math.isinf(lo) and math.isinf(hi):
            lines.append(f" {name} free")
        else:
            lo_txt = "-inf" if math.isinf(lo) else f"{lo:.12g}"
            hi_txt = "+inf" if math.isinf(hi) else f"{hi:.12g}"
            lines.append(f" {lo_txt} <= {name} <= {hi_txt}")
    lines.append("End")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
