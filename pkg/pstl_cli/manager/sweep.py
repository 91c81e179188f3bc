"""
Grid sweeps: run a list of commands for every combination of config values and tabulate the reports.
"""
import itertools
import json
import logging
from collections.abc import Iterator, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from pstl_cli.config.core import RunConfig
from pstl_cli.evaluation import EvalReport, write_rows
from pstl_cli.exception import ParserError
from pstl_cli.log.logger import PSTLLogger
from pstl_cli.manager._processor import PSTLProcessor
from pstl_cli.utils import merge_maps, unflatten

LOGGER: PSTLLogger = logging.getLogger(__name__)


def grid_points(grid: Mapping[str, Sequence[Any]]) -> Iterator[dict[str, Any]]:
    """Every combination of the ``grid`` values, varying the last key fastest"""
    if not grid:
        return
    keys, values = zip(*grid.items())
    for combination in itertools.product(*values):
        yield dict(zip(keys, combination))


def point_overrides(point: Mapping[str, Any]) -> dict[str, Any]:
    """Turn a grid point of dotted keys into nested config overrides"""
    overrides: dict[str, Any] = {}
    for key, value in point.items():
        merge_maps(overrides, unflatten(key, value))
    return overrides


def run_point(config_map: dict[str, Any], commands: Sequence[str]) -> list[dict[str, Any]]:
    """
    Run ``commands`` in order with the config built from ``config_map``.

    :return: One row per report produced by the commands.
    """
    config = RunConfig.from_map(config_map)
    processor = PSTLProcessor(config, handle_exceptions=False)

    rows = []
    for command in commands:
        processor.set_processor(command)
        result = processor.run()
        if isinstance(result, list):
            rows.extend(item.as_row() for item in result if isinstance(item, EvalReport))
    return rows


def prepare_datasets(configs: Sequence[RunConfig], commands: Sequence[str]) -> list[str]:
    """
    Generate the dataset of every distinct data section in ``configs`` once, in this process,
    so parallel points that share a dataset directory never write it concurrently.

    :return: ``commands`` without the dataset generation step when it was run here, else ``commands`` unchanged.
    """
    gen_data = PSTLProcessor.gen_data.__name__
    if gen_data not in commands:
        return list(commands)

    generated: set[Path] = set()
    for cfg in configs:
        if cfg.dataset_dir in generated:
            continue
        processor = PSTLProcessor(cfg, handle_exceptions=False)
        processor.set_processor(gen_data)
        processor.run()
        generated.add(cfg.dataset_dir)

    LOGGER.debug(f"Generated {len(generated)} distinct dataset(s) for {len(configs)} sweep points")
    return [command for command in commands if command != gen_data]


def _cell(value: Any) -> Any:
    return json.dumps(value) if isinstance(value, (list, tuple, dict)) else value


def run_sweep(config: RunConfig) -> Path:
    """
    Run the configured commands for every grid point of ``config.sweep``, sequentially or in a process pool.
    Every point is validated before any is run.

    :return: The path of the CSV table holding one row per report per grid point.
    :raise ParserError: When the grid is empty, a command is unknown or a grid point gives an invalid config.
    """
    sweep = config.sweep
    if not sweep.grid:
        raise ParserError("Sweep grid is empty", key="sweep.grid")

    commands = [command.replace("-", "_") for command in sweep.commands]
    unknown = [c for c in commands if c not in PSTLProcessor.__commands__ or c == PSTLProcessor.sweep.__name__]
    if unknown:
        raise ParserError("Unrecognised sweep commands", key="sweep.commands", value=unknown)

    points = list(grid_points(sweep.grid))
    configs = [config.with_overrides(point_overrides(point)) for point in points]
    config_maps = [cfg.model_dump(mode="json", exclude={"logging"}) for cfg in configs]
    LOGGER.info(f"Sweeping {len(points)} grid points over {list(sweep.grid)} with {sweep.workers} worker(s)")

    if sweep.workers > 1:
        commands = prepare_datasets(configs, commands)
        with ProcessPoolExecutor(max_workers=sweep.workers) as executor:
            results = list(executor.map(run_point, config_maps, itertools.repeat(commands)))
    else:
        results = [
            run_point(config_map, commands)
            for config_map in LOGGER.get_iterator(config_maps, desc="Sweeping", unit="points")
        ]

    rows = []
    for i, (point, cfg, reports) in enumerate(zip(points, configs, results)):
        provenance = {
            "point": i,
            **{key: _cell(value) for key, value in point.items()},
            "config_hash": cfg.section_hash(*RunConfig.stage_sections["evaluation"]),
            "run_seed": cfg.seed,
        }
        rows.extend(provenance | {key: _cell(value) for key, value in row.items()} for row in reports)

    folder = config.paths.sweep.joinpath(f"{config.section_hash('sweep', *RunConfig.stage_sections['evaluation'])}"
                                         f"-seed{config.seed}")
    path = write_rows(rows, folder.joinpath("sweep.csv"))
    config.save_yaml(folder)
    LOGGER.info(f"\33[92mSaved {len(rows)} sweep rows to {path} \33[0m")
    return path
