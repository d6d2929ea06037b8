"""Re-run a stored manifest."""

import inspect

from config import get_logger
from tools.manifest import RunManifest

logger = get_logger(__name__)


def run_replay(manifest_path: str) -> RunManifest:
    """Call the recorded command with the recorded parameters.

    Outputs are rewritten at the recorded paths.
    """
    from tools import COMMANDS

    manifest = RunManifest.load(manifest_path)
    if manifest.command not in COMMANDS:
        raise ValueError(
            f"{manifest_path}: command '{manifest.command}' cannot be replayed; "
            f"replayable: {', '.join(sorted(COMMANDS))}"
        )
    command = COMMANDS[manifest.command]
    try:
        inspect.signature(command).bind(**manifest.params)
    except TypeError as e:
        raise ValueError(f"{manifest_path}: parameters do not fit '{manifest.command}': {e}") from None
    logger.info(f"[REPLAY] {manifest.command} from {manifest_path}")
    return command(**manifest.params)
