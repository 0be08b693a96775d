"""
Create and return a parser for command-line arguments

The various *ArgumentAction classes are used to check given arguments
and raise an error if something is wrong.

Important functions:
create_parser: main function that creates and returns a parser
"""
from argparse import Action, ArgumentParser
import os

commands = ['bound', 'simulate', 'fig1', 'oracle', 'spark']


class ConfigArgumentAction(Action):
    def __call__(self, parser, namespace, values, option_string=None):
        config_file_name = values
        if not os.path.isfile(config_file_name):
            parser.error(f"Config file {config_file_name} does not exist")
        namespace.config = config_file_name


class SeedArgumentAction(Action):
    def __call__(self, parser, namespace, values, option_string=None):
        try:
            seed = int(values)
        except ValueError:
            parser.error(f"Seed must be an integer, got {values}")
        if not 0 <= seed < 2**64:
            parser.error("Seed must be in [0, 2^64)")
        namespace.seed = seed


class PositiveIntArgumentAction(Action):
    def __call__(self, parser, namespace, values, option_string=None):
        try:
            number = int(values)
        except ValueError:
            parser.error(f"{option_string} needs an integer, got {values}")
        if number < 1:
            parser.error(f"{option_string} must be positive")
        setattr(namespace, self.dest, number)


def create_parser():
    """Helper function to parse command-line arguments

    Returns a parser to pull the arguments from
    """
    parser = ArgumentParser(description="Variance lower bounds for the sparse linear model")
    parser.add_argument("command",
        help=f"What to run.  One of: {commands}",
        choices=commands)
    parser.add_argument("--config",
        help="JSON file describing the model, parameter vectors, estimators and options",
        metavar=("CONFIG_FILE"),
        action=ConfigArgumentAction,
        required=False)
    parser.add_argument("--out",
        help="CSV output path.  Written to stdout when neither this nor the config names one",
        metavar=("PATH"),
        required=False)
    parser.add_argument("--seed",
        help="Monte Carlo seed, overrides the config",
        metavar=("SEED"),
        action=SeedArgumentAction,
        required=False)
    parser.add_argument("--trials",
        help="Monte Carlo trials per simulation, overrides the config",
        metavar=("N"),
        action=PositiveIntArgumentAction,
        required=False)
    parser.add_argument("--threads",
        help="Worker threads for simulations and support enumeration",
        metavar=("N"),
        action=PositiveIntArgumentAction,
        required=False)
    parser.add_argument("--verbose",
        help="Log progress at INFO level",
        action="store_true")
    parser.add_argument("--debug",
        help="Append DEBUG records to sparsebound_debug.log",
        action="store_true")
    return parser
