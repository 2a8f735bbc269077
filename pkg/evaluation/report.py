import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional

from evaluation.exact import (
    CLOSED_FORM_TOLERANCE,
    DECIMAL_PRECISION,
    ClosedFormCost,
    as_decimal,
    exact_cost,
    opt_dp,
    prophet_value,
)
from evaluation.monte_carlo import monte_carlo_cost
from model.schemas import format_rational

logger = logging.getLogger(__name__)


def e_over_e_minus_one(prec=DECIMAL_PRECISION):
    with localcontext() as ctx:
        ctx.prec = prec
        e = Decimal(1).exp()
        return e / (e - 1)


# Competitive-ratio guarantees; ski rules have none.
BOUNDS = {
    "det": Decimal(2),
    "coin": Decimal(2),
    "rand": e_over_e_minus_one(),
}

INFINITY = float("inf")


def competitive_ratio(cost, opt):
    """ALG/OPT as a float; OPT = 0 gives ∞ when ALG > 0 and 1 when ALG = 0."""
    alg = as_decimal(cost)
    opt = as_decimal(opt)
    if opt == 0:
        return INFINITY if alg > 0 else 1.0
    with localcontext() as ctx:
        ctx.prec = DECIMAL_PRECISION
        return float(alg / opt)


def within_bound(cost, opt, bound, alpha=1):
    """cost <= alpha·bound·opt; exact for Fractions, 10⁻¹² slack for closed forms."""
    if isinstance(cost, Fraction) and bound == int(bound):
        return cost <= Fraction(alpha) * int(bound) * Fraction(opt)
    with localcontext() as ctx:
        ctx.prec = DECIMAL_PRECISION
        alpha = as_decimal(Fraction(alpha))
        slack = as_decimal(CLOSED_FORM_TOLERANCE) * max(Decimal(1), as_decimal(opt))
        return as_decimal(cost) <= alpha * bound * as_decimal(opt) + slack


def _render(value):
    if value is None:
        return None
    if isinstance(value, ClosedFormCost):
        return str(value)
    return format_rational(Fraction(value))


def _ratio_field(ratio):
    return "∞" if ratio == INFINITY else ratio


@dataclass
class EvalReport:
    policy: str
    instance_id: str
    opt: Fraction
    prophet: Fraction
    exact_cost: Optional[object] = None
    exact_stop_index: Optional[object] = None
    mc_mean: Optional[float] = None
    mc_stderr: Optional[float] = None
    mc_trials: int = 0
    ratio: Optional[float] = None
    prophet_ratio: Optional[float] = None
    bound: Optional[float] = None
    alpha: Fraction = Fraction(1)
    bound_violated: bool = False
    mc_disagrees: bool = False
    extra: dict = field(default_factory=dict)

    def to_record(self):
        return {
            "policy": self.policy,
            "instance_id": self.instance_id,
            "exact_cost": float(as_decimal(self.exact_cost)) if self.exact_cost is not None else None,
            "exact_cost_exact": _render(self.exact_cost),
            "exact_stop_index": (
                float(as_decimal(self.exact_stop_index)) if self.exact_stop_index is not None else None
            ),
            "mc_mean": self.mc_mean,
            "mc_stderr": self.mc_stderr,
            "mc_trials": self.mc_trials,
            "opt": format_rational(self.opt),
            "prophet": format_rational(self.prophet),
            "ratio": _ratio_field(self.ratio),
            # informational only: no algorithm competes with the prophet in general
            "prophet_ratio": _ratio_field(self.prophet_ratio),
            "bound": self.bound,
            "alpha": format_rational(self.alpha),
            "bound_violated": self.bound_violated,
            "mc_disagrees": self.mc_disagrees,
            **self.extra,
        }


def evaluate_policy(tree, policy, *, instance_id, opt, prophet, trials=0, seed=0, alpha=1):
    result = exact_cost(tree, policy)
    report = EvalReport(
        policy=policy,
        instance_id=instance_id,
        opt=opt,
        prophet=prophet,
        exact_cost=result.cost,
        exact_stop_index=result.stop_index,
        alpha=Fraction(alpha),
    )
    report.ratio = competitive_ratio(result.cost, opt)
    report.prophet_ratio = competitive_ratio(result.cost, prophet)
    bound = BOUNDS.get(policy)
    if bound is not None:
        report.bound = float(bound * as_decimal(Fraction(alpha)))
        report.bound_violated = not within_bound(result.cost, opt, bound, alpha)
        if report.bound_violated:
            logger.warning(
                f"{instance_id}: {policy} ratio {report.ratio:.6f} exceeds bound {report.bound:.6f}"
            )

    if trials > 0:
        estimate = monte_carlo_cost(tree, policy, trials, seed)
        report.mc_mean = estimate.mean
        report.mc_stderr = estimate.stderr
        report.mc_trials = estimate.trials
        report.mc_disagrees = not estimate.degenerate and not estimate.agrees_with(
            as_decimal(result.cost))
        if report.mc_disagrees:
            logger.warning(
                f"{instance_id}: {policy} Monte-Carlo {estimate.mean:.6f} ± {estimate.stderr:.6f} "
                f"disagrees with exact {float(as_decimal(result.cost)):.6f}"
            )
    return report


def competitive_report(tree, policies, *, instance_id="instance", trials=0, seed=0,
                       alpha=1, reference_opt=None):
    """
    Assemble exact and Monte-Carlo costs, OPT, prophet value and ratios per policy.

    reference_opt replaces opt_dp(tree) as the ratio denominator; with alpha it
    checks the robustness bound alpha·bound on perturbed trees.
    """
    opt = Fraction(reference_opt) if reference_opt is not None else opt_dp(tree).value
    prophet = prophet_value(tree)
    reports = []
    for policy in policies:
        reports.append(evaluate_policy(
            tree, policy,
            instance_id=instance_id, opt=opt, prophet=prophet,
            trials=trials, seed=seed, alpha=alpha,
        ))
    return reports


def write_jsonl(records, path, *, config=None):
    """JSON lines: a header (timestamp and full config) then one record per line."""
    header = {
        "type": "header",
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config or {},
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for record in records:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    logger.info(f"Wrote {len(records)} record(s) to {path}")


CSV_FIELDS = [
    "instance_id", "policy", "exact_cost", "exact_stop_index", "mc_mean", "mc_stderr",
    "opt", "prophet", "ratio", "prophet_ratio", "bound", "bound_violated",
]


def write_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for record in records:
            writer.writerow(record)
    logger.info(f"Wrote CSV table to {path}")
