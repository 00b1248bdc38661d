import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.api.router import dispatch
from app.core.config import settings
from app.core.exceptions import ConfigurationError
from app.models.experiment import ExperimentConfig


def parse_grid(text: str) -> List[float]:
    """'2:2.1:0.01' -> [2.0, 2.01, ..., 2.1] (stop included); '2,2.5' -> [2.0, 2.5]"""
    if ":" not in text:
        return [float(item) for item in text.split(",") if item]
    start, stop, step = (float(item) for item in text.split(":"))
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected start:stop:step with step > 0")
    count = int(round((stop - start) / step))
    return [round(start + i * step, 12) for i in range(count + 1)]


def parse_k_range(text: str) -> List[int]:
    """'1..8' -> [1, ..., 8]; '2,4' -> [2, 4]"""
    if ".." in text:
        lo, hi = (int(item) for item in text.split(".."))
        return list(range(lo, hi + 1))
    return [int(item) for item in text.split(",") if item]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pym-lab", description=f"{settings.PROJECT_NAME} {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed (u64)")

    verify = subparsers.add_parser("verify", parents=[common], help="run the inequality battery")
    verify.add_argument("--samples", type=int)
    verify.add_argument("--checks", type=lambda s: s.split(","))

    flow = subparsers.add_parser("flow", parents=[common], help="gradient-flow minimization")
    flow.add_argument("--p", type=float)
    flow.add_argument("--steps", type=int)

    spectrum = subparsers.add_parser("spectrum", parents=[common], help="spectrum of a quadratic form")
    spectrum.add_argument("--p", type=float)
    spectrum.add_argument("--k-eig", type=int)
    spectrum.add_argument("--form", choices=["Q", "Q_frak", "Q_cal", "neck"])

    neck = subparsers.add_parser("neck", parents=[common], help="constant sweeps and weight tables")
    neck.add_argument("--p-grid", type=parse_grid)
    neck.add_argument("--eps", type=parse_grid)

    bubble = subparsers.add_parser("bubble", parents=[common], help="bubbling-family bookkeeping")
    bubble.add_argument("--k", type=parse_k_range)
    bubble.add_argument("--k-eig", type=int)
    bubble.add_argument("--relax-steps", type=int)

    subparsers.add_parser("lorentz", parents=[common], help="neck quantization diagnostics")
    return parser


OVERRIDES = {
    # argparse destination -> (section, field)
    "samples": ("fuzz", "samples"),
    "checks": ("fuzz", "checks"),
    "p": ("physics", "p"),
    "steps": ("solver", "steps"),
    "k_eig": ("solver", "k_eig"),
    "form": ("solver", "form"),
    "p_grid": ("physics", "p_grid"),
    "eps": ("physics", "eps_grid"),
    "k": ("physics", "k_values"),
    "relax_steps": ("solver", "relax_steps"),
}


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Reads the config file, applies command-line overrides and validates the result

    Raises:
        ConfigurationError: If the file cannot be read or parsed
        ValidationError: If the merged configuration is invalid
    """
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"config {args.config} must hold a JSON object")

    for dest, (section, field) in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            data.setdefault(section, {})[field] = value
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out_dir"] = str(args.out)
    return ExperimentConfig.model_validate(data)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=logging.DEBUG if settings.DEBUG else settings.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger = logging.getLogger("pym-lab")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigurationError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except ValidationError as exc:
        for error in exc.errors():
            location = ".".join(str(part) for part in error["loc"])
            logger.error("config field %s: %s", location or "<root>", error["msg"])
        return ConfigurationError.exit_code
    return dispatch(args.command, config, workers=settings.PYM_WORKERS)


if __name__ == "__main__":
    sys.exit(main())
