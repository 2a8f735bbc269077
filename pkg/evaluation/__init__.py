from .exact import opt_dp, prophet_value, exact_policy_cost, exact_randomized_cost, exact_cost
from .monte_carlo import monte_carlo_cost, MonteCarloEstimate
from .report import EvalReport, competitive_report, competitive_ratio, write_jsonl, write_csv
