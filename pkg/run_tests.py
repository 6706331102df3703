#!/usr/bin/env python3
"""
Golden-output runner for the command line. Each case under tests/end_to_end/
is a `<name>-flags.txt` file with the command and its flags, an optional
`<name>.graph` appended as the graph argument, and the expected stdout in
`<name>-out.txt`. A nonzero exit status is recorded as CRASH_STRING followed
by whatever the command printed.
"""
import argparse
import contextlib
from dataclasses import dataclass, field
import difflib
import enum
import io
import logging
import multiprocessing
from pathlib import Path
import re
import shlex
import sys
from typing import Any, Iterable, List, Optional, Pattern, Tuple

from coverage import Coverage  # type: ignore

CRASH_STRING = "CRASHED\n"

REPO_ROOT = Path(__file__).parent
CASES_ROOT = REPO_ROOT / "tests" / "end_to_end"

# Flags whose argument is a file next to the flags file.
PATH_FLAGS = {"--routing", "--demand", "--visualize"}


class Verdict(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIP = "SKIP"


@dataclass(frozen=True)
class RunSettings:
    overwrite: bool = False
    diff_context: int = 3
    pattern: Optional[Pattern[str]] = None
    every: Optional[int] = None
    processes: Optional[int] = None
    extra_flags: List[str] = field(default_factory=list)
    coverage: Any = None


@dataclass(frozen=True, order=True)
class GoldenCase:
    name: str
    directory: Path
    stem: str

    @property
    def flags_file(self) -> Path:
        return self.directory / f"{self.stem}-flags.txt"

    @property
    def expected_file(self) -> Path:
        return self.directory / f"{self.stem}-out.txt"

    @property
    def graph_file(self) -> Optional[Path]:
        graph = self.directory / f"{self.stem}.graph"
        return graph if graph.is_file() else None

    def command_line(self, extra_flags: Iterable[str]) -> List[str]:
        words = shlex.split(self.flags_file.read_text(), comments=True)
        for i, word in enumerate(words):
            if word in PATH_FLAGS:
                if i + 1 == len(words):
                    raise ValueError(f"{self.flags_file}: {word} needs a file name")
                words[i + 1] = str(self.directory / words[i + 1])
        if self.graph_file is not None:
            words.append(str(self.graph_file))
        return ["--sanitize-tracebacks", *words, *extra_flags]


@dataclass(frozen=True)
class Outcome:
    case: GoldenCase
    verdict: Verdict
    detail: str = ""


def collect_cases(root: Path) -> List[GoldenCase]:
    cases = []
    for flags_file in root.glob("*/*-flags.txt"):
        stem = flags_file.name[: -len("-flags.txt")]
        name = f"e2e:{flags_file.parent.name}/{stem}"
        cases.append(GoldenCase(name, flags_file.parent, stem))
    return sorted(cases)


def capture(argv: List[str]) -> str:
    # Deferred so that coverage sees the package being imported.
    from balroute.main import parse_flags, run

    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        status = run(parse_flags(argv))
    text = buffer.getvalue().replace(str(REPO_ROOT), ".")
    return text if status == 0 else f"{CRASH_STRING}\n{text}"


def check(case: GoldenCase, settings: RunSettings) -> Outcome:
    if settings.coverage is not None:
        settings.coverage.switch_context(case.name)
    expected: Optional[str] = None
    if case.expected_file.is_file():
        expected = case.expected_file.read_text()
    elif not settings.overwrite:
        return Outcome(case, Verdict.SKIP, f"missing {case.expected_file}")

    logging.debug(f"Running {case.flags_file}")
    actual = capture(case.command_line(settings.extra_flags))
    if settings.overwrite:
        case.expected_file.write_text(actual)
    if actual == expected:
        return Outcome(case, Verdict.PASS)

    diff = difflib.unified_diff(
        (expected or "").splitlines(),
        actual.splitlines(),
        fromfile=str(case.expected_file.relative_to(REPO_ROOT)),
        tofile="actual",
        n=settings.diff_context,
        lineterm="",
    )
    return Outcome(case, Verdict.FAIL, "\n".join(diff))


def _check_job(job: Tuple[GoldenCase, RunSettings]) -> Outcome:
    return check(*job)


def run_cases(cases: List[GoldenCase], settings: RunSettings) -> int:
    selected = [c for c in cases if settings.pattern is None or settings.pattern.search(c.name)]
    if settings.every is not None:
        selected = selected[:: settings.every]
    counts = {verdict: 0 for verdict in Verdict}
    counts[Verdict.SKIP] = len(cases) - len(selected)

    jobs = [(case, settings) for case in selected]
    if settings.processes:
        with multiprocessing.Pool(settings.processes) as pool:
            outcomes = list(pool.imap_unordered(_check_job, jobs, chunksize=4))
    else:
        outcomes = [_check_job(job) for job in jobs]

    for outcome in sorted(outcomes, key=lambda o: o.case):
        counts[outcome.verdict] += 1
        logging.info(f"[{outcome.verdict.value}] {outcome.case.name}")
        if outcome.detail:
            logging.info(outcome.detail)

    logging.info(
        ", ".join(f"{counts[v]} {v.value.lower()}" for v in Verdict)
        + f" of {len(cases)} cases"
    )
    return 1 if counts[Verdict.FAIL] and not settings.overwrite else 0


def parse_args(argv: List[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Run the command line on the end-to-end cases and compare with the stored output."
    )
    parser.add_argument("--debug", action="store_true", help="log every case as it starts")
    parser.add_argument(
        "--overwrite",
        action="store_true",
        help="store the new output instead of comparing with it",
    )
    parser.add_argument(
        "--filter",
        metavar="REGEX",
        dest="pattern",
        type=re.compile,
        help="run only the cases whose name matches",
    )
    parser.add_argument(
        "-K", "--fraction", metavar="N", dest="every", type=int, help="run one case in every N"
    )
    parser.add_argument(
        "-j", "--parallel", metavar="N", dest="processes", type=int, help="worker processes"
    )
    parser.add_argument(
        "--diff-context", metavar="N", type=int, default=3, help="context lines in diffs"
    )
    parser.add_argument(
        "extra_flags",
        nargs=argparse.REMAINDER,
        help="flags appended to every command, after `--`",
    )
    cov = parser.add_argument_group("coverage")
    cov.add_argument("--coverage", action="store_true", help="measure branch coverage")
    cov.add_argument(
        "--coverage-html", metavar="DIR", default="htmlcov/", help="report directory"
    )
    cov.add_argument(
        "--coverage-emit-data", action="store_true", help="also keep the .coverage data file"
    )
    args = parser.parse_args(argv)
    args.extra_flags = [flag for flag in args.extra_flags if flag != "--"]
    return args


def main(argv: List[str]) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        format="[%(levelname)s] %(message)s",
        level=logging.DEBUG if args.debug else logging.INFO,
    )

    cov = None
    if args.coverage:
        data_file = ".coverage" if args.coverage_emit_data else None
        cov = Coverage(include="balroute/*", data_file=data_file, branch=True)
        cov.start()
    if args.overwrite:
        logging.info("Overwriting stored outputs.")

    settings = RunSettings(
        overwrite=args.overwrite,
        diff_context=args.diff_context,
        pattern=args.pattern,
        every=args.every,
        processes=args.processes,
        extra_flags=args.extra_flags,
        coverage=cov,
    )
    status = run_cases(collect_cases(CASES_ROOT), settings)

    if cov is not None:
        cov.stop()
        cov.html_report(directory=args.coverage_html, show_contexts=True, skip_empty=True)
        logging.info(f"Coverage report in {args.coverage_html}")
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
