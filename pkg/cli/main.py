import argparse
import sys
import traceback
from typing import List, Optional

import bittensor as bt

from cli.experiments import ExperimentRunner
from cli.scenario import load_scenario
from config.config import appConfig as config
from core.errors import EXIT_OK, ConfigurationError, GapfieldError

COMMANDS = {
    'validate': lambda runner, args: runner.run_validate(flip_mixed_sign=args.flip_mixed_sign),
    'solve': lambda runner, args: runner.run_solve(),
    'sweep': lambda runner, args: runner.run_sweep(),
    'harnack': lambda runner, args: runner.run_harnack(),
    'layers': lambda runner, args: runner.run_layers(),
    'fit': lambda runner, args: runner.run_fit(),
    'report': lambda runner, args: runner.run_report(),
}


def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='gapfield', description='Insulated thin-gap conductivity laboratory')

    parser.add_argument('command', choices=sorted(COMMANDS), help='Subcommand to run')
    parser.add_argument('--config', type=str, default=None, help='Scenario file (optional for validate)')
    parser.add_argument('--out', type=str, default=config.OUTPUT_DIRECTORY, help='Output directory')
    parser.add_argument('--serial', action='store_true', help='Single worker regardless of GAPFIELD_THREADS')
    parser.add_argument('--debug-dump', action='store_true', help='Write grid axes and CSR arrays under <out>/debug')
    parser.add_argument('--flip-mixed-sign', action='store_true',
                        help='Flip the sign of the mixed pushforward entries (validate must then fail)')

    bt.logging.add_args(parser)
    return parser


def configure_logging(args: argparse.Namespace):
    options = vars(args)
    if options.get('logging.trace'):
        bt.logging.set_trace(True)
    elif options.get('logging.debug'):
        bt.logging.set_debug(True)
    elif config.GAPFIELD_LOG_LEVEL == 'trace':
        bt.logging.set_trace(True)
    elif config.GAPFIELD_LOG_LEVEL == 'debug':
        bt.logging.set_debug(True)
    elif config.GAPFIELD_LOG_LEVEL == 'warning':
        bt.logging.set_warning(True)
    else:
        bt.logging.set_info(True)


def main(argv: Optional[List[str]] = None) -> int:
    args = get_parser().parse_args(argv)
    configure_logging(args)

    try:
        scenario = load_scenario(args.config) if args.config else None
        if scenario is None and args.command != 'validate':
            raise ConfigurationError(f"{args.command} needs --config", keys=['--config'])

        runner = ExperimentRunner(scenario, out_dir=args.out, serial=args.serial,
                                  debug_dump=True if args.debug_dump else None)
        bt.logging.info(f"🚀 gapfield {args.command} ({runner.scenario_id}), {runner.workers} worker(s), output in {args.out}")
        COMMANDS[args.command](runner, args)

    except GapfieldError as e:
        bt.logging.error(f"💥 {args.command} failed ({type(e).__name__}): {e}")
        bt.logging.error(traceback.format_exc())
        return e.exit_code

    except KeyboardInterrupt:
        bt.logging.info("⏹️ Interrupted by user")
        return 1

    bt.logging.success(f"✅ {args.command} finished")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
