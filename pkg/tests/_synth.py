"""Synthetic desk-scale datasets shared by the test suite.

The base grid mirrors the shape of the real campaign at a fraction of its
size: 2 operation modes x 9 scheduler pairs x 5 frequencies x 5 thread
levels x 3 file/record pairs.  One extra file/record pair is collected at a
single interior cell, exactly like the campaign's interpolation test points.
Log-variability grows smoothly with frequency and thread count, with a soft
shoulder once the thread count passes the physical-core budget, so a global
linear fit is visibly biased while local/adaptive methods are not.
"""

from __future__ import annotations

import math

import numpy as np

from vmap.dataspace import (
    SCHEDULERS,
    SplitSpec,
    SystemConfiguration,
    VariabilityObservation,
    encode_point,
)

DESK_MODES = ("Fread", "Fwrite")
DESK_FREQUENCIES = (1.2, 1.6, 2.0, 2.4, 2.8)
DESK_THREADS = (1, 4, 16, 64, 256)
DESK_FILE_RECORD = ((64, 32), (256, 64), (1024, 256))
DESK_INTERP_FILE_RECORD = (512, 128)
DESK_INTERP_CELL = (2.0, 16)  # (frequency, threads) where the extra pair is collected

DESK_SPLIT_TEXT = """
[interpolation]
file_record = 512,128

[extrapolation]
freq_threads = 2.8,256
"""


def desk_split_spec() -> SplitSpec:
    return SplitSpec.from_text(DESK_SPLIT_TEXT)


def desk_log_pvm(config: SystemConfiguration) -> float:
    """Noiseless log-variability, increasing in frequency and threads."""
    point = encode_point(config)
    mode_off = 0.0 if config.io_mode == "Fread" else 0.25
    sched_off = 0.06 * SCHEDULERS.index(config.io_scheduler) \
        + 0.04 * SCHEDULERS.index(config.vm_io_scheduler)
    shoulder = math.log1p(math.exp(4.0 * (point.x3 - math.log(16.0)))) / 4.0
    return (
        2.0
        + 1.5 * (config.frequency / 3.0) ** 2 * (1.0 + point.x3 / math.log(256.0))
        + 0.6 * shoulder * (config.frequency / 3.0)
        + 0.10 * point.x1
        + 0.08 * (point.x1 - point.x2)
        + mode_off
        + sched_off
    )


def desk_pvm(config: SystemConfiguration) -> float:
    return math.exp(desk_log_pvm(config))


def desk_mean_throughput(config: SystemConfiguration) -> float:
    """Noiseless performance surface, increasing in frequency and threads."""
    point = encode_point(config)
    sched_bump = 1.0 + 0.04 * SCHEDULERS.index(config.io_scheduler) \
        + 0.03 * SCHEDULERS.index(config.vm_io_scheduler)
    return 2000.0 * config.frequency * (1.0 + 0.15 * point.x3) * (1.0 + 0.02 * point.x1) * sched_bump


def desk_cells() -> list[tuple[float, int, tuple[int, int]]]:
    cells = [
        (freq, threads, pair)
        for freq in DESK_FREQUENCIES
        for threads in DESK_THREADS
        for pair in DESK_FILE_RECORD
    ]
    cells.append((DESK_INTERP_CELL[0], DESK_INTERP_CELL[1], DESK_INTERP_FILE_RECORD))
    return cells


def desk_observations(noise: float = 0.05, seed: int = 20200817) -> list[VariabilityObservation]:
    rng = np.random.default_rng(seed)
    observations = []
    for mode in DESK_MODES:
        for io_sched in SCHEDULERS:
            for vm_sched in SCHEDULERS:
                for freq, threads, (file_size, record_size) in desk_cells():
                    config = SystemConfiguration(
                        io_mode=mode,
                        io_scheduler=io_sched,
                        vm_io_scheduler=vm_sched,
                        frequency=freq,
                        threads=threads,
                        file_size=file_size,
                        record_size=record_size,
                    )
                    pvm = desk_pvm(config)
                    mean = desk_mean_throughput(config)
                    if noise:
                        pvm *= 1.0 + noise * float(np.clip(rng.standard_normal(), -3.0, 3.0))
                        mean *= 1.0 + noise * float(np.clip(rng.standard_normal(), -3.0, 3.0))
                    observations.append(
                        VariabilityObservation(
                            config=config,
                            point=encode_point(config),
                            pvm=float(pvm),
                            mean_throughput=float(mean),
                            n_runs=40,
                        )
                    )
    return observations


def runs_csv_text(groups: dict[SystemConfiguration, list[float]]) -> str:
    """Render a runs CSV for the given configuration -> throughputs mapping."""
    lines = ["io_mode,io_scheduler,vm_io_scheduler,frequency_ghz,threads,file_size_kb,record_size_kb,throughput_kb_s"]
    for config, throughputs in groups.items():
        for value in throughputs:
            lines.append(
                f"{config.io_mode},{config.io_scheduler},{config.vm_io_scheduler},"
                f"{config.frequency:g},{config.threads},{config.file_size},"
                f"{config.record_size},{value:g}"
            )
    return "\n".join(lines) + "\n"
