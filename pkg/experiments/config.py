import logging
import os
import re
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from typing import Optional

from evaluation.report import e_over_e_minus_one
from generators.stopping import GeneratorSpec
from policies.stopping import POLICIES

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "./output"
DEFAULT_MC_TRIALS = 10000
ASSERTION_TOLERANCE = Decimal("1e-12")

# Exit-code contract
EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    """Bad flags or an inconsistent experiment configuration."""


def output_dir_from_env():
    return os.getenv("STOPWISE_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def mc_trials_from_env():
    raw = os.getenv("STOPWISE_MC_TRIALS", str(DEFAULT_MC_TRIALS))
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"STOPWISE_MC_TRIALS must be an integer, got {raw!r}")


_ASSERTION = re.compile(r"^\s*([a-z\-]+)\s*(<=|>=)\s*([^@\s]+)\s*(?:@\s*(opt|prophet))?\s*$")


def _parse_bound(text):
    if text.replace(" ", "") == "e/(e-1)":
        return e_over_e_minus_one()
    try:
        return Decimal(text)
    except ArithmeticError:
        raise ConfigError(f"Invalid bound {text!r}; expected a number or e/(e-1)")


@dataclass(frozen=True)
class RatioAssertion:
    """
    A competitive-ratio claim such as "det<=2", "rand<=e/(e-1)", "ski>=2.9" or
    "det<=2@prophet" (the ratio against the prophet value instead of OPT).
    """
    policy: str
    op: str
    bound: str
    against: str = "opt"

    @classmethod
    def parse(cls, text):
        match = _ASSERTION.match(text)
        if not match:
            raise ConfigError(f"Invalid assertion {text!r}; expected e.g. det<=2 or ski>=2.9")
        policy, op, bound, against = match.groups()
        if policy not in POLICIES:
            raise ConfigError(f"Assertion {text!r} names unknown policy {policy!r}")
        _parse_bound(bound)
        return cls(policy, op, bound, against or "opt")

    def __str__(self):
        suffix = "" if self.against == "opt" else f"@{self.against}"
        return f"{self.policy}{self.op}{self.bound}{suffix}"

    def holds(self, record, alpha=Decimal(1)):
        """Check a report record; upper bounds scale with the robustness factor alpha."""
        ratio = record["ratio"] if self.against == "opt" else record["prophet_ratio"]
        if ratio == "∞":
            return self.op == ">="
        ratio = Decimal(repr(ratio))
        bound = _parse_bound(self.bound)
        if self.op == "<=":
            return ratio <= bound * alpha + ASSERTION_TOLERANCE
        return ratio >= bound - ASSERTION_TOLERANCE


@dataclass(frozen=True)
class InstanceSource:
    """Either an instance file or a generator spec; picklable for worker processes."""
    path: Optional[str] = None
    generator: Optional[GeneratorSpec] = None

    @property
    def instance_id(self):
        if self.path is not None:
            return os.path.basename(self.path)
        return self.generator.instance_id


@dataclass
class ExperimentConfig:
    sources: list
    policies: list
    label: str = "eval"
    trials: int = 0
    seed: int = 0
    output_dir: str = field(default_factory=output_dir_from_env)
    assertions: list = field(default_factory=list)
    alpha: Optional[str] = None  # robustness factor; perturbed trees are evaluated
    perturb_rule: str = "max"
    perturb_scope: str = "all"
    workers: int = 1
    track: bool = False
    resume: bool = False

    def validate(self):
        if not self.sources:
            raise ConfigError("No instances to evaluate")
        for source in self.sources:
            if source.path is not None and not os.path.exists(source.path):
                raise ConfigError(f"Instance file not found: {source.path}")
        for policy in self.policies:
            if policy not in POLICIES:
                raise ConfigError(f"Unknown policy {policy!r}; expected one of {sorted(POLICIES)}")
        for assertion in self.assertions:
            if assertion.policy not in self.policies:
                raise ConfigError(f"Assertion {assertion} names a policy that is not evaluated")
        if self.trials < 0:
            raise ConfigError(f"trials must be >= 0, got {self.trials}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.resume and not self.track:
            raise ConfigError("--resume needs run tracking (--track)")
        return self

    def to_dict(self):
        """Full configuration for report provenance."""
        data = asdict(self)
        data["sources"] = [
            s.path if s.path is not None else {"kind": s.generator.kind, **s.generator.params}
            for s in self.sources
        ]
        data["assertions"] = [str(a) for a in self.assertions]
        return data
