import glob
import logging
import os
import sys
from argparse import ArgumentParser, RawTextHelpFormatter

from . import __version__ as VERSION
from .assignment import DEFAULT_CAP, AssignmentInstance, assignment_summary, solve_assignment, write_assignment
from .barrier import BarrierMode
from .config import DEFAULT_EPSILON, ENV_VARS, build_run_config, load_config
from .errors import FicoptError
from .format import PrintFormat, print_assignment
from .harness import RunRecord, bench, bench_configs, record_name, run, sample_step, setup_run, write_record
from .mode import RunMode
from .problems import problem_names
from .profile import DataProfileSpec, data_profile
from .protocol import FidelityProtocol
from .sampling import FeasibilityStats

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
log = logging.getLogger(__name__)


def main(argv=None):
    args = parse_args(argv=argv if argv is not None else (None if sys.argv[1:] else ['--help']))
    if args.version:
        print(VERSION)
        sys.exit(0)

    if args.subcommand is None:
        print('Please specify a command: sample, assign, optimize, profile or bench')
        sys.exit(1)

    config_logging(args)
    log.debug("running with args [%s]", vars(args))
    try:
        args.func(args)
    except FicoptError as e:
        log.fatal(e)
        sys.exit(1)
    except KeyboardInterrupt:
        log.info("User interrupted")
        sys.exit(0)


def config_logging(args):
    if args.verbose:
        handler = logging.StreamHandler(sys.stdout)
        logging.root.handlers = []
        handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        logging.root.addHandler(handler)
        logging.root.setLevel(logging.DEBUG)
        log.debug("verbose=[%s], log level set to [%s] level", args.verbose, logging.DEBUG)


def run_config(args, **changes):
    return build_run_config(load_config(args.config), vars(args), **changes)


def do_sample(args):
    cfg = run_config(args)
    setup = setup_run(cfg)
    step = sample_step(cfg, setup, disable_progress=args.verbose)
    step.stats.write_json(args.output)
    if args.samples_csv:
        step.samples.to_csv(args.samples_csv)
    print(f"sampled [{step.stats.sample_count}] points, [{step.stats.apriori_pass_count}] pass the a priori "
          f"constraints, time offset [{step.offset:.6g}], x0 {step.x0.tolist()}")


def do_assign(args):
    stats = FeasibilityStats.read_json(args.stats)
    inst = AssignmentInstance.from_stats(stats, args.epsilon, force_top=args.force_top)
    B = solve_assignment(inst, args.cap, args.workers)
    if args.output:
        dct = write_assignment(args.output, B, inst, stats.ladder)
    else:
        dct = assignment_summary(B, inst, stats.ladder)
    print_assignment(dct, args.print_format)


def do_optimize(args):
    cfg = run_config(args)
    record = run(cfg, disable_progress=args.verbose)
    write_record(record, args.output)
    if record.found:
        print(f"best f [{record.best_f:.10g}] at {record.best_x} after [{record.end_time:.6g}] seconds")
    else:
        print(f"{record.diagnostic} after [{record.end_time:.6g}] seconds")


def do_bench(args):
    cfg = run_config(args)
    configs = bench_configs(cfg, range(args.seeds), modes=args.modes, problems=args.problems, vary=args.vary)
    records = bench(configs, workers=args.jobs, disable_progress=args.verbose)
    os.makedirs(args.output, exist_ok=True)
    for record in records:
        write_record(record, os.path.join(args.output, record_name(record)))
    print(f"wrote [{len(records)}] records to [{args.output}]")
    if args.tau is not None:
        write_profile(records, args.tau, os.path.join(args.output, 'profile.csv'))


def do_profile(args):
    records = [RunRecord.read_json(path) for path in record_paths(args.records)]
    write_profile(records, args.tau, args.output)


def write_profile(records, tau, path):
    profile = data_profile(records, DataProfileSpec(tau))
    profile.write_csv(path)
    for mode in sorted(profile.curves):
        print(f"{mode}: {profile.curves[mode][-1][1]:.2f} of runs solved with tau={tau}")
    if profile.excluded:
        print(f"excluded problems without a feasible point: {', '.join(profile.excluded)}")


def record_paths(paths):
    found = []
    for path in paths:
        if os.path.isdir(path):
            found.extend(sorted(glob.glob(os.path.join(path, '*.json'))))
        else:
            found.append(path)
    return found


def floats(value):
    return tuple(float(v) for v in split(value))


def ints(value):
    return tuple(int(v) for v in split(value))


def split(arg):
    return [v for v in arg.split(",") if v.strip()] if arg else []


def modes(value):
    converted = [RunMode.argparse(v) for v in split(value)]
    unknown = [v for v in converted if isinstance(v, str)]
    if unknown:
        raise ValueError(f"unknown modes {unknown}")
    return converted


def env(name, default=None):
    return os.environ.get(ENV_VARS[name], default)


def add_run_options(parser):
    parser.add_argument(
        '-c',
        '--config',
        metavar=('file'),
        help='YAML config file whose keys are the long option names with underscores')
    parser.add_argument(
        '-p',
        '--problem',
        metavar=('name'),
        default=env('problem'),
        help=f"synthetic problem to run: {', '.join(problem_names())}")
    parser.add_argument(
        '--command',
        metavar=('command'),
        help='external blackbox command, called with the point file (and the fidelity)')
    parser.add_argument(
        '-m',
        '--mode',
        type=RunMode.argparse,
        choices=list(RunMode),
        default=env('mode'),
        help='inter_pb, inter_eb or base (default: "inter_pb")')
    parser.add_argument(
        '-l',
        '--ladder',
        type=floats,
        metavar=('csv'),
        help='comma delimited increasing fidelities ending at 1')
    parser.add_argument(
        '-e',
        '--epsilon',
        type=float,
        default=env('epsilon'),
        help=f'representativity tolerance (default: {DEFAULT_EPSILON})')
    parser.add_argument(
        '-r',
        '--rho',
        type=float,
        help='Latin hypercube sizing factor in [0, 1] (default: the problem\'s)')
    parser.add_argument(
        '-n',
        '--samples',
        dest='n_samples',
        type=int,
        help='Latin hypercube sample size (default: 10000)')
    parser.add_argument(
        '-w',
        '--workers',
        type=int,
        default=env('workers'),
        help='parallel blackbox evaluations while sampling (default: 1)')
    parser.add_argument(
        '-s',
        '--seed',
        type=int,
        default=env('seed'),
        help='Latin hypercube seed (default: 0)')
    parser.add_argument(
        '--solver-seed',
        type=int,
        help='poll order seed (default: 0)')
    parser.add_argument(
        '--x0',
        type=floats,
        metavar=('csv'),
        help='starting point (default: the problem\'s)')
    parser.add_argument(
        '--lh-start',
        action='store_const',
        const=True,
        help='ignore any starting point and start from the best sampled point')
    parser.add_argument(
        '-b',
        '--budget',
        type=float,
        help='budget in virtual blackbox seconds (default: the problem\'s)')
    parser.add_argument(
        '--max-evaluations',
        type=int,
        help='budget in evaluations')
    parser.add_argument(
        '--force-top',
        action='store_const',
        const=True,
        help='always evaluate the top fidelity (for fidelity dependent objectives)')
    parser.add_argument(
        '--barrier',
        type=BarrierMode.argparse,
        choices=list(BarrierMode),
        help='constraint handling of the base case (default: "eb")')
    parser.add_argument(
        '--cap',
        type=int,
        help=f'largest assignment space searched exhaustively (default: {DEFAULT_CAP})')
    parser.add_argument('--initial-mesh', type=float, help='initial mesh size as a fraction of the box (default: 0.1)')
    parser.add_argument('--mesh-expand', type=float, help='mesh expansion factor (default: 2)')
    parser.add_argument('--mesh-shrink', type=float, help='mesh shrink factor (default: 0.5)')
    parser.add_argument('--min-mesh', type=float, help='minimum mesh size (default: 1e-6)')
    parser.add_argument('--dimension', type=int, help='external blackbox dimension')
    parser.add_argument('--lower', type=floats, metavar=('csv'), help='external blackbox lower bounds')
    parser.add_argument('--upper', type=floats, metavar=('csv'), help='external blackbox upper bounds')
    parser.add_argument('--constraints', type=int, help='external blackbox constraint count')
    parser.add_argument('--a-priori', type=ints, metavar=('csv'), help='indexes of the a priori constraints')
    parser.add_argument(
        '--protocol',
        type=FidelityProtocol.argparse,
        choices=list(FidelityProtocol),
        help='fidelity passed as the last argument or the last line of the point file (default: "argument")')
    parser.add_argument('--timeout', type=float, help='external blackbox timeout in seconds')


def parse_args(argv=None):
    example_text = r'''examples:

    estimate the feasibility tables of a problem:
    ficopt sample -p gating -o stats.json

    compute the optimal assignment from the tables:
    ficopt assign stats.json -o assignment.json

    optimize with interruptions and the progressive barrier:
    ficopt optimize -p solar2 --mode inter_pb -o run.json

    run the base case on fidelity 1 only:
    ficopt optimize -p solar2 --mode base --seed 7 -o base.json

    optimize an external blackbox reading the point file and the fidelity argument:
    ficopt optimize --command './bb.sh' --dimension 2 --lower 0,0 --upper 1,1 --constraints 1 -b 100 -o run.json

    20 runs per mode and the data profile:
    ficopt bench -p gating --seeds 20 --tau 0.05 -o runs/

    data profile of existing records:
    ficopt profile runs/ --tau 0.05 -o profile.csv
    '''

    parser = ArgumentParser(
        description='Ficopt - fidelity and interruption controlled blackbox optimization',
        prog="ficopt",
        epilog=example_text,
        formatter_class=RawTextHelpFormatter)
    parser.add_argument(
        '--verbose',
        action='store_true',
        help='print more verbose output')
    parser.add_argument(
        '--version',
        action='store_true',
        help='print the version')
    subparsers = parser.add_subparsers(dest='subcommand', metavar='command')

    sample = subparsers.add_parser('sample', help='sample the problem and write the feasibility tables')
    add_run_options(sample)
    sample.add_argument('-o', '--output', required=True, metavar=('file'), help='feasibility tables JSON')
    sample.add_argument('--samples-csv', metavar=('file'), help='also write every sampled output as CSV')
    sample.set_defaults(func=do_sample)

    assign = subparsers.add_parser('assign', help='compute the optimal assignment from feasibility tables')
    assign.add_argument('stats', metavar='stats', help='feasibility tables JSON written by sample')
    assign.add_argument('-o', '--output', metavar=('file'), help='assignment JSON')
    assign.add_argument('-e', '--epsilon', type=float, default=env('epsilon', DEFAULT_EPSILON),
                        help=f'representativity tolerance (default: {DEFAULT_EPSILON})')
    assign.add_argument('--force-top', action='store_true', default=False,
                        help='always evaluate the top fidelity')
    assign.add_argument('--cap', type=int, default=DEFAULT_CAP, help=f'search space cap (default: {DEFAULT_CAP})')
    assign.add_argument('-w', '--workers', type=int, default=env('workers', 1), help='search threads (default: 1)')
    assign.add_argument('--print-format', type=PrintFormat.argparse, default=PrintFormat.TABLE,
                        choices=list(PrintFormat), help='print format (default: \'table\')')
    assign.set_defaults(func=do_assign)

    optimize = subparsers.add_parser('optimize', help='run one optimization and write its record')
    add_run_options(optimize)
    optimize.add_argument('-o', '--output', required=True, metavar=('file'),
                          help='record JSON, iteration and evaluation CSV logs are written next to it')
    optimize.set_defaults(func=do_optimize)

    bench_parser = subparsers.add_parser('bench', help='batch of runs over seeds, problems and modes')
    add_run_options(bench_parser)
    bench_parser.add_argument('--seeds', type=int, default=20, help='runs per problem and mode (default: 20)')
    bench_parser.add_argument('--modes', type=modes, metavar=('csv'), help='modes to run (default: all)')
    bench_parser.add_argument('--problems', type=split, metavar=('csv'), help='problems to run (default: --problem)')
    bench_parser.add_argument('--vary', choices=['solver', 'lh', 'both'], default='both',
                              help='seed axis moved across runs (default: "both")')
    bench_parser.add_argument('-j', '--jobs', type=int, default=1, help='concurrent runs (default: 1)')
    bench_parser.add_argument('--tau', type=float, help='also write profile.csv with this tolerance')
    bench_parser.add_argument('-o', '--output', required=True, metavar=('dir'), help='record directory')
    bench_parser.set_defaults(func=do_bench)

    profile = subparsers.add_parser('profile', help='data profile of run records')
    profile.add_argument('records', nargs='+', help='record JSON files or directories of records')
    profile.add_argument('-t', '--tau', type=float, default=0.05, help='convergence tolerance (default: 0.05)')
    profile.add_argument('-o', '--output', required=True, metavar=('file'), help='profile CSV')
    profile.set_defaults(func=do_profile)

    return parser.parse_args(argv)
