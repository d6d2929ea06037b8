"""Command implementations behind the CLI."""

from tools.experiment import run_experiment
from tools.reconstruct import run_reconstruct
from tools.simulate import run_simulate

# Commands that write a manifest and can be replayed from it
COMMANDS = {
    "simulate": run_simulate,
    "reconstruct": run_reconstruct,
    "experiment": run_experiment,
}
