from dataclasses import dataclass
from typing import Any, NoReturn, Tuple


@dataclass
class RoutingFailure(Exception):
    """Bad input, or a solver outcome that fails its own certificate."""

    message: str

    def __str__(self) -> str:
        return self.message

    def __reduce__(self) -> Tuple[Any, ...]:
        # Failures raised in pool workers are pickled back to the parent.
        return (RoutingFailure, (self.message,))

    def within(self, context: str) -> "RoutingFailure":
        return RoutingFailure(f"{context}: {self.message}")


def static_assert_unreachable(x: NoReturn) -> NoReturn:
    raise AssertionError(f"Unhandled case {x!r}")
