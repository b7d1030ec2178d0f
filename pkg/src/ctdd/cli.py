"""
Command line front end: ``ctdd <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 1 stage failure, 2 configuration error, 3 failed reproduction.
"""
import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from ctdd.artifact import dump_json
from ctdd.config import load_config
from ctdd.ctdd import Workbench
from ctdd.exceptions import ConfigError, CtddException

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_REPRODUCE_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON experiment configuration.')
    common.add_argument('--out', help='Output directory.')
    common.add_argument('--quad', type=int, help='Quadrature node count.')
    common.add_argument('--seed', type=int, help='Seed for randomized property suites.')
    common.add_argument('--json', action='store_true', help='Machine-readable stdout.')
    common.add_argument('--log-level', help='Logging level, CTDD_LOG_LEVEL or WARNING by default.')

    parser = argparse.ArgumentParser(prog='ctdd', description='Continuous-time data-driven control with Legendre expansions.')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser(Workbench.GEN_DATA, parents=[common], help='Simulate and write the excitation experiment.')
    check_pe = commands.add_parser(Workbench.CHECK_PE, parents=[common], help='Persistency-of-excitation certificate.')
    check_pe.add_argument('--order', type=int, help='Excitation order L.')
    check_pe.add_argument('--csv', help='Measured data with columns t, u1..um.')
    commands.add_parser(Workbench.IDENTIFY, parents=[common], help='Identify (A, B) from the data Gramian.')
    commands.add_parser(Workbench.DD_SIMULATE, parents=[common], help='Data-driven response to the configured input.')
    lqr = commands.add_parser(Workbench.LQR, parents=[common], help='Data-driven LQR sweep over truncation orders.')
    lqr.add_argument('--orders', type=int, nargs='*', help='Truncation orders, overriding the configuration.')
    commands.add_parser(Workbench.REPRODUCE, parents=[common], help='Full scalar-example pipeline with checks.')
    return parser


def run(bench: Workbench, args: argparse.Namespace) -> dict:
    if args.command == Workbench.GEN_DATA:
        return bench.gen_data()
    if args.command == Workbench.CHECK_PE:
        return bench.check_pe(order=args.order, csv_path=args.csv)
    if args.command == Workbench.IDENTIFY:
        return bench.identify()
    if args.command == Workbench.DD_SIMULATE:
        return bench.dd_simulate()
    if args.command == Workbench.LQR:
        return bench.lqr()
    return bench.reproduce()


def _print_summary(command: str, result: dict) -> None:
    if command == Workbench.REPRODUCE:
        for check in result['checks']:
            print(f"{'ok  ' if check['passed'] else 'FAIL'} {check['name']}: {check['value']}")
        print('passed' if result['passed'] else 'failed')
    elif command == Workbench.LQR:
        print(f"J* = {result['J_star']:.10f}")
        for row in result['rows']:
            print(f"N={row['N']:>3}  J_N={row['J_N']:.10e}  gap={row['gap']:.3e}")
    else:
        for key in sorted(result):
            print(f'{key}: {result[key]}')


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    load_dotenv()
    logging.basicConfig(
        level=(args.log_level or os.getenv('CTDD_LOG_LEVEL') or 'WARNING').upper(),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    overrides = {'output_dir': args.out, 'quadrature': args.quad, 'seed': args.seed}
    if args.command == Workbench.LQR and args.orders is not None:
        overrides['truncation_orders'] = args.orders
    try:
        config = load_config(args.config, **overrides)
    except ConfigError as error:
        print(f'Configuration error: {error}', file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        with Workbench(config) as bench:
            result = run(bench, args)
    except CtddException as error:
        print(f'Error: {error}', file=sys.stderr)
        return EXIT_STAGE_FAILED

    if args.json:
        sys.stdout.write(dump_json(result))
    else:
        _print_summary(args.command, result)
    if args.command == Workbench.REPRODUCE and not result['passed']:
        return EXIT_REPRODUCE_FAILED
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
