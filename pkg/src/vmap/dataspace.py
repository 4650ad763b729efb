"""Configuration space, variability observations, and dataset splits.

A *run* is one benchmark execution of a task under a fixed system
configuration; replicated runs of the same configuration are condensed into
one observation whose response is the standard deviation of throughput (the
performance-variability measure) alongside the mean throughput.  Observations
are keyed by the categorical triple (operation mode, IO scheduler, VM IO
scheduler) and carry a continuous encoding of the remaining four variables.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from ._errors import IngestError, VmapError

IO_MODES = (
    "Fread",
    "Pread",
    "Re-read",
    "Randomread",
    "Read",
    "ReverseRead",
    "Strideread",
    "Fwrite",
    "Pwrite",
    "Randomwrite",
    "Rewrite",
    "Initialwrite",
    "Mixedworkload",
)

SCHEDULERS = ("CFQ", "DEAD", "NOOP")

# canonical experiment grid levels for the full benchmark campaign
FREQUENCY_LEVELS = (1.2, 1.4, 1.5, 1.6, 1.8, 1.9, 2.0, 2.1, 2.3, 2.4, 2.5, 2.7, 2.8, 2.9, 3.0)
THREAD_LEVELS = (1, 2, 4, 8, 16, 32, 64, 128, 256)
FILE_RECORD_PAIRS = ((64, 32), (256, 32), (256, 128), (1024, 32), (1024, 128), (1024, 512))

RUNS_COLUMNS = (
    "io_mode",
    "io_scheduler",
    "vm_io_scheduler",
    "frequency_ghz",
    "threads",
    "file_size_kb",
    "record_size_kb",
    "throughput_kb_s",
)

OBSERVATIONS_COLUMNS = RUNS_COLUMNS[:7] + ("n_runs", "mean_throughput_kb_s", "pvm_kb_s")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


@dataclass(frozen=True)
class VariabilityMapKey:
    """Categorical triple identifying one variability map."""

    io_mode: str
    io_scheduler: str
    vm_io_scheduler: str

    def __str__(self) -> str:
        return f"{self.io_mode}/{self.io_scheduler}/{self.vm_io_scheduler}"


@dataclass(frozen=True)
class SystemConfiguration:
    """One complete system setup: three categorical and four numeric variables."""

    io_mode: str
    io_scheduler: str
    vm_io_scheduler: str
    frequency: float
    threads: int
    file_size: int
    record_size: int

    def __post_init__(self):
        if self.io_mode not in IO_MODES:
            raise VmapError(f"unknown io_mode {self.io_mode!r}")
        if self.io_scheduler not in SCHEDULERS:
            raise VmapError(f"unknown io_scheduler {self.io_scheduler!r}")
        if self.vm_io_scheduler not in SCHEDULERS:
            raise VmapError(f"unknown vm_io_scheduler {self.vm_io_scheduler!r}")
        if not (isinstance(self.frequency, (int, float)) and math.isfinite(self.frequency) and self.frequency > 0):
            raise VmapError(f"frequency must be a positive real, got {self.frequency!r}")
        if self.threads < 1:
            raise VmapError(f"threads must be a positive integer, got {self.threads!r}")
        if self.file_size < 1 or self.record_size < 1:
            raise VmapError("file_size and record_size must be positive integers")
        if self.file_size < self.record_size:
            raise VmapError(
                f"file_size {self.file_size} smaller than record_size {self.record_size}"
            )
        if self.file_size % self.record_size != 0:
            raise VmapError(
                f"file_size {self.file_size} is not a multiple of record_size {self.record_size}"
            )

    @property
    def key(self) -> VariabilityMapKey:
        return VariabilityMapKey(self.io_mode, self.io_scheduler, self.vm_io_scheduler)


@dataclass(frozen=True)
class RunRecord:
    """One benchmark run: a configuration and its measured throughput (KB/s)."""

    config: SystemConfiguration
    throughput: float

    def __post_init__(self):
        if not (math.isfinite(self.throughput) and self.throughput > 0):
            raise VmapError(f"throughput must be positive, got {self.throughput!r}")


@dataclass(frozen=True)
class ContinuousPoint:
    """Continuous encoding (log file size, log record size, log threads, frequency)."""

    x1: float
    x2: float
    x3: float
    x4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3, self.x4])

    @classmethod
    def from_array(cls, arr) -> "ContinuousPoint":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class VariabilityObservation:
    """Condensed replicate group: variability, mean throughput, and run count."""

    config: SystemConfiguration
    point: ContinuousPoint
    pvm: float
    mean_throughput: float
    n_runs: int

    def __post_init__(self):
        if self.pvm < 0:
            raise VmapError("pvm must be nonnegative")
        if self.mean_throughput <= 0:
            raise VmapError("mean_throughput must be positive")
        if self.n_runs < 2:
            raise VmapError("an observation requires at least two replicate runs")

    @property
    def key(self) -> VariabilityMapKey:
        return self.config.key


@dataclass
class DatasetSplit:
    training: list[VariabilityObservation]
    interpolation_test: list[VariabilityObservation]
    extrapolation_test: list[VariabilityObservation]


def encode_point(config: SystemConfiguration) -> ContinuousPoint:
    """Map a configuration to (ln file size, ln record size, ln threads, frequency)."""
    return ContinuousPoint(
        math.log(config.file_size),
        math.log(config.record_size),
        math.log(config.threads),
        float(config.frequency),
    )


def transform_response(y: float, scale: str) -> float:
    """Transform a response to the given modeling scale ("log" or "raw")."""
    if scale == "raw":
        return float(y)
    if scale == "log":
        if y <= 0:
            raise VmapError(f"log scale requires a positive response, got {y!r}")
        return math.log(y)
    raise VmapError(f"unknown response scale {scale!r}")


def inverse_transform_response(value: float, scale: str) -> float:
    """Undo transform_response exactly."""
    if scale == "raw":
        return float(value)
    if scale == "log":
        return math.exp(value)
    raise VmapError(f"unknown response scale {scale!r}")


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _parse_field(raw: str, name: str, kind, line: int):
    try:
        value = kind(raw)
    except ValueError:
        raise IngestError(f"line {line}: field {name!r} has malformed value {raw!r}") from None
    return value


def ingest_runs(source: str | Path | TextIO | Iterable[str]) -> list[RunRecord]:
    """Parse a runs CSV into records, rejecting malformed or invalid rows.

    The file must start with the exact header of RUNS_COLUMNS.  Any malformed
    row or configuration-invariant violation aborts ingestion with a
    diagnostic naming the offending line.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return ingest_runs(handle)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty runs file (header required)") from None
    if tuple(h.strip() for h in header) != RUNS_COLUMNS:
        raise IngestError(
            f"bad header {header!r}; expected columns {', '.join(RUNS_COLUMNS)}"
        )

    records = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(RUNS_COLUMNS):
            raise IngestError(
                f"line {line}: expected {len(RUNS_COLUMNS)} fields, got {len(row)}"
            )
        values = [cell.strip() for cell in row]
        frequency = _parse_field(values[3], "frequency_ghz", float, line)
        threads = _parse_field(values[4], "threads", int, line)
        file_size = _parse_field(values[5], "file_size_kb", int, line)
        record_size = _parse_field(values[6], "record_size_kb", int, line)
        throughput = _parse_field(values[7], "throughput_kb_s", float, line)
        try:
            config = SystemConfiguration(
                io_mode=values[0],
                io_scheduler=values[1],
                vm_io_scheduler=values[2],
                frequency=frequency,
                threads=threads,
                file_size=file_size,
                record_size=record_size,
            )
            records.append(RunRecord(config=config, throughput=throughput))
        except VmapError as exc:
            raise IngestError(f"line {line}: {exc}") from None
    return records


def compute_pvm(records: Sequence[RunRecord]) -> list[VariabilityObservation]:
    """Condense replicated runs into variability observations.

    Groups records by identical configuration; each group must hold at least
    two runs, since the variability measure is a sample standard deviation
    (n-1 denominator).  Output is sorted canonically by configuration.
    """
    groups: dict[SystemConfiguration, list[float]] = {}
    for record in records:
        groups.setdefault(record.config, []).append(record.throughput)

    observations = []
    for config, throughputs in groups.items():
        if len(throughputs) < 2:
            raise VmapError(
                f"configuration {config} has a single run; variability needs >= 2 replicates"
            )
        arr = np.asarray(throughputs)
        observations.append(
            VariabilityObservation(
                config=config,
                point=encode_point(config),
                pvm=float(np.std(arr, ddof=1)),
                mean_throughput=float(arr.mean()),
                n_runs=len(throughputs),
            )
        )
    observations.sort(
        key=lambda o: (
            o.config.io_mode,
            o.config.io_scheduler,
            o.config.vm_io_scheduler,
            o.config.file_size,
            o.config.record_size,
            o.config.threads,
            o.config.frequency,
        )
    )
    return observations


# ---------------------------------------------------------------------------
# observation CSV round trip
# ---------------------------------------------------------------------------

def write_observations(observations: Sequence[VariabilityObservation], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(OBSERVATIONS_COLUMNS)
        for obs in observations:
            cfg = obs.config
            writer.writerow(
                [
                    cfg.io_mode,
                    cfg.io_scheduler,
                    cfg.vm_io_scheduler,
                    _fmt(cfg.frequency),
                    cfg.threads,
                    cfg.file_size,
                    cfg.record_size,
                    obs.n_runs,
                    _fmt(obs.mean_throughput),
                    _fmt(obs.pvm),
                ]
            )


def read_observations(source: str | Path | TextIO) -> list[VariabilityObservation]:
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return read_observations(handle)

    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != OBSERVATIONS_COLUMNS:
        raise IngestError(
            f"bad observations header; expected columns {', '.join(OBSERVATIONS_COLUMNS)}"
        )
    observations = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(OBSERVATIONS_COLUMNS):
            raise IngestError(f"line {line}: expected {len(OBSERVATIONS_COLUMNS)} fields")
        try:
            config = SystemConfiguration(
                io_mode=row[0].strip(),
                io_scheduler=row[1].strip(),
                vm_io_scheduler=row[2].strip(),
                frequency=float(row[3]),
                threads=int(row[4]),
                file_size=int(row[5]),
                record_size=int(row[6]),
            )
            observations.append(
                VariabilityObservation(
                    config=config,
                    point=encode_point(config),
                    pvm=float(row[9]),
                    mean_throughput=float(row[8]),
                    n_runs=int(row[7]),
                )
            )
        except (ValueError, VmapError) as exc:
            raise IngestError(f"line {line}: {exc}") from None
    return observations


# ---------------------------------------------------------------------------
# declarative splits
# ---------------------------------------------------------------------------

_SCALAR_VARS = {
    "io_mode": str,
    "io_scheduler": str,
    "vm_io_scheduler": str,
    "frequency": float,
    "threads": int,
    "file_size": int,
    "record_size": int,
}
_PAIR_VARS = {
    "file_record": ("file_size", "record_size"),
    "freq_threads": ("frequency", "threads"),
}


def _num_eq(a, b) -> bool:
    return math.isclose(float(a), float(b), rel_tol=1e-12, abs_tol=1e-12)


@dataclass(frozen=True)
class SplitPredicate:
    """Membership test: a configuration variable (or pair) must hit a value set."""

    variable: str
    values: tuple

    def matches(self, config: SystemConfiguration) -> bool:
        if self.variable in _PAIR_VARS:
            names = _PAIR_VARS[self.variable]
            actual = tuple(getattr(config, name) for name in names)
            return any(
                _num_eq(actual[0], want[0]) and _num_eq(actual[1], want[1])
                for want in self.values
            )
        actual = getattr(config, self.variable)
        if isinstance(actual, str):
            return actual in self.values
        return any(_num_eq(actual, want) for want in self.values)


@dataclass
class SplitSpec:
    """Declarative split rules: a point matching all predicates of a section
    belongs to that test set; extrapolation takes precedence over interpolation."""

    interpolation: list[SplitPredicate] = field(default_factory=list)
    extrapolation: list[SplitPredicate] = field(default_factory=list)

    @classmethod
    def from_text(cls, text: str) -> "SplitSpec":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise VmapError(f"bad split specification: {exc}") from None
        spec = cls()
        for section, target in (("interpolation", spec.interpolation), ("extrapolation", spec.extrapolation)):
            if not parser.has_section(section):
                continue
            for variable, raw in parser.items(section):
                target.append(_parse_predicate(variable, raw))
        if not spec.interpolation and not spec.extrapolation:
            raise VmapError("split specification defines no predicates")
        return spec

    @classmethod
    def from_file(cls, path: str | Path) -> "SplitSpec":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _parse_predicate(variable: str, raw: str) -> SplitPredicate:
    tokens = raw.split()
    if not tokens:
        raise VmapError(f"split predicate {variable!r} has no values")
    if variable in _PAIR_VARS:
        values = []
        for token in tokens:
            parts = token.split(",")
            if len(parts) != 2:
                raise VmapError(f"split predicate {variable!r}: bad pair {token!r}")
            values.append((float(parts[0]), float(parts[1])))
        return SplitPredicate(variable, tuple(values))
    if variable not in _SCALAR_VARS:
        raise VmapError(f"unknown split variable {variable!r}")
    kind = _SCALAR_VARS[variable]
    try:
        values = tuple(kind(token) for token in tokens)
    except ValueError as exc:
        raise VmapError(f"split predicate {variable!r}: {exc}") from None
    return SplitPredicate(variable, values)


def default_split_spec() -> SplitSpec:
    """The bundled split rules for the full benchmark campaign."""
    text = resources.files("vmap").joinpath("data/default_split.spec").read_text(encoding="utf-8")
    return SplitSpec.from_text(text)


def split_dataset(
    observations: Sequence[VariabilityObservation],
    spec: SplitSpec | None = None,
) -> DatasetSplit:
    """Partition observations into training and the two declarative test sets."""
    if spec is None:
        spec = default_split_spec()

    split = DatasetSplit(training=[], interpolation_test=[], extrapolation_test=[])
    for obs in observations:
        if spec.extrapolation and all(p.matches(obs.config) for p in spec.extrapolation):
            split.extrapolation_test.append(obs)
        elif spec.interpolation and all(p.matches(obs.config) for p in spec.interpolation):
            split.interpolation_test.append(obs)
        else:
            split.training.append(obs)
    if not split.training:
        raise VmapError("split produced an empty training set")
    return split
