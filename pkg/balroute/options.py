from dataclasses import dataclass, field
import enum
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence


class ChoicesEnum(enum.Enum):
    """A helper class that is easier to use with argparse"""

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Tolerances:
    conservation: float = 1e-9
    certificate: float = 1e-7


DEFAULT_TOLERANCES = Tolerances()


class ToleranceProfile(ChoicesEnum):
    STRICT = "strict"
    DEFAULT = "default"
    LOOSE = "loose"

    def baseline_slack(self) -> float:
        """Multiplier applied to a frozen baseline constant before comparing."""
        return {
            ToleranceProfile.STRICT: 1.0,
            ToleranceProfile.DEFAULT: 1.25,
            ToleranceProfile.LOOSE: 2.0,
        }[self]


class OutputFormat(ChoicesEnum):
    TEXT = "text"
    JSON = "json"


class ApproximatorKind(ChoicesEnum):
    AUTO = "auto"
    ALL_CUTS = "all-cuts"
    TREE = "tree"


def parse_params(items: Sequence[str]) -> Dict[str, str]:
    """
    Parse `key=value` pairs as given to `gen` and `experiment`.
    Values stay strings; generators convert them.
    """
    params: Dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValueError(f"Expected key=value, got '{item}'")
        params[key.replace("-", "_")] = value
    return params


@dataclass
class Options:
    class CommandEnum(ChoicesEnum):
        GEN = "gen"
        BALANCE = "balance"
        CHECK_BALANCE = "check-balance"
        DECOMPOSE = "decompose"
        ARBORESCENCE = "arborescence"
        ROUTING = "routing"
        EVAL_ROUTING = "eval-routing"
        MAXFLOW = "maxflow"
        SPARSEST_CUT = "sparsest-cut"
        EXPERIMENT = "experiment"

    command: CommandEnum
    graph_path: Optional[Path]
    seed: int
    output_format: OutputFormat
    tolerance_profile: ToleranceProfile
    debug: bool
    sanitize_tracebacks: bool
    generator: Optional[str] = None
    params: Dict[str, str] = field(default_factory=dict)
    radius: Optional[float] = None
    root: int = 0
    sink: Optional[int] = None
    alpha: float = 2.0
    eps: float = 0.1
    phi: float = 0.5
    arborescence_constant: float = 8.0
    approximator: ApproximatorKind = ApproximatorKind.AUTO
    routing_path: Optional[Path] = None
    demand_paths: List[Path] = field(default_factory=list)
    exact_ratio: bool = False
    spec_path: Optional[Path] = None
    parallel: Optional[int] = None
    visualize: Optional[Path] = None

    def formatter(self) -> "Formatter":
        return Formatter(json_output=self.output_format == OutputFormat.JSON)


@dataclass
class Formatter:
    precision: int = 6
    json_output: bool = False

    def number(self, x: float) -> str:
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0:
            # Avoid printing "-0"
            return "0"
        return f"{x:.{self.precision}g}"

    def numbers(self, xs: Sequence[float]) -> str:
        return " ".join(self.number(float(x)) for x in xs)

    def vertex_set(self, vertices: Sequence[int]) -> str:
        return "{" + ", ".join(str(v) for v in sorted(vertices)) + "}"
