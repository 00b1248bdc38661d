import logging
from pathlib import Path
from typing import Callable, Dict

from app.api.endpoints import bubble, flow, lorentz, neck, spectrum, verify
from app.core.exceptions import ConfigurationError, NumericalError
from app.models.experiment import ExperimentConfig, RunContext, config_hash
from app.utils.serialization import write_json

logger = logging.getLogger(__name__)

Handler = Callable[[ExperimentConfig, Path, RunContext], dict]

COMMANDS: Dict[str, Handler] = {
    "verify": verify.handle,
    "flow": flow.handle,
    "spectrum": spectrum.handle,
    "neck": neck.handle,
    "bubble": bubble.handle,
    "lorentz": lorentz.handle,
}

EXIT_OK = 0


def dispatch(command: str, config: ExperimentConfig, workers: int = 1) -> int:
    """
    Run one subcommand and map its outcome to an exit code

    Args:
        command: One of COMMANDS
        config: Validated experiment configuration
        workers: Thread pool size for sweeps

    Returns:
        int: 0 on success, 2 on configuration errors, 3 on numerical failures
    """
    if command not in COMMANDS:
        logger.error("unknown command %r, expected one of %s", command, sorted(COMMANDS))
        return ConfigurationError.exit_code

    out = Path(config.out_dir)
    context = RunContext(command=command, config_hash=config_hash(config), seed=config.seed, workers=max(workers, 1))
    logger.info("%s: config %s, seed %d, output %s", command, context.config_hash[:12], context.seed, out)
    try:
        COMMANDS[command](config, out, context)
    except ConfigurationError as exc:
        logger.error("%s: invalid input: %s", command, exc)
        return exc.exit_code
    except NumericalError as exc:
        partial = {"error": type(exc).__name__, "message": str(exc), "partial": exc.partial}
        path = write_json(out / f"{command}_partial.json", partial, context.stamp())
        logger.error("%s: numerical failure: %s (partial report in %s)", command, exc, path)
        return exc.exit_code
    logger.info("%s: done", command)
    return EXIT_OK
