""" primerace - top level script for prime race tools

Subcommands race primes by sieving, reconstruct races from zeros of
Dirichlet L-functions, estimate densities of orderings, check independence
of zero ordinates and verify barrier specifications.

Copyright primerace developers, 2026
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from primerace import __version__
from primerace_tools.constants import EXIT_INCONCLUSIVE, EXIT_IO, EXIT_OK, EXIT_USAGE, THREADS_ENV

logger = logging.getLogger('primerace_tools')


def int_list(text):
    """Parse '3,1' into [3, 1]."""
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got '{text}'")


def number(text):
    """Integer or float text such as 30000, 1e6 or 6e8 as an int when whole."""
    value = float(text)
    return int(value) if value.is_integer() and abs(value) < 2 ** 63 else value


def build_parser():
    p = argparse.ArgumentParser(description="Prime number races: sieve, explicit formulas, densities and barriers")
    p.add_argument('-v', '--version', action='version', version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--output', type=Path, default=Path('.'),
                        help='output folder (defaults to current directory)')
    common.add_argument('--config', type=Path, default=None,
                        help='key=value file of option defaults; explicit flags win')
    common.add_argument('--threads', type=int, default=int(os.environ.get(THREADS_ENV, 1)),
                        help=f'worker threads (default ${THREADS_ENV} or 1)')
    common.add_argument('--verbose', action='store_true', help='log progress')

    sp = p.add_subparsers(title='subcommands',
                          description='Available tools',
                          required=True,
                          dest='subcommand')

    # Race tool
    raceparser = sp.add_parser('race', parents=[common], help='Race residue classes modulo k by sieving.')
    race_req = raceparser.add_argument_group('required arguments')
    race_req.add_argument('-k', '--modulus', type=int, required=True, help='modulus k >= 3')
    race_req.add_argument('-r', '--residues', type=int_list, required=True,
                          help='tracked residues, e.g. 3,1; pairs follow this order')
    race_req.add_argument('-x', '--limit', type=number, required=True, help='race up to x')
    raceparser.add_argument('--segment-size', type=int, default=None, help='odd slots per sieve segment')
    raceparser.add_argument('--wheel', choices=('none', 'mod30', 'mod210'), default=None, help='presieve wheel')
    raceparser.add_argument('--event-buffer', type=int, default=None, help='events kept in memory')
    raceparser.add_argument('--trace-limit', type=number, default=None,
                            help='keep the full pi/psi trace for x up to this value')
    raceparser.add_argument('--checkpoint', type=Path, default=None, help='checkpoint file, rewritten periodically')
    raceparser.add_argument('--resume', type=Path, default=None, help='resume from a checkpoint file')
    raceparser.add_argument('--plot', action='store_true', help='write an SVG of the first pair difference')
    raceparser.set_defaults(func=race)

    # Chebyshev tool
    chebparser = sp.add_parser('chebyshev', parents=[common],
                               help="Chebyshev's sum over odd primes of (-1)^((p-1)/2) exp(-p/x).")
    cheb_req = chebparser.add_argument_group('required arguments')
    cheb_req.add_argument('-x', '--scale', type=float, required=True, help='scale x > 0')
    chebparser.add_argument('--limit', type=number, default=None, help='sieve bound (default 50 x, at least 100)')
    chebparser.set_defaults(func=chebyshev)

    # Shanks tool
    shanksparser = sp.add_parser('shanks', parents=[common],
                                 help='Check pi(x,8,1) <= max of pi(x,8,a), a = 3, 5, 7.')
    shanksparser.add_argument('-x', '--limit', type=number, required=True, help='check x up to this value')
    shanksparser.set_defaults(func=shanks)

    # Characters tool
    charparser = sp.add_parser('characters', parents=[common],
                               help='Group structure, characters and square root counts modulo k.')
    charparser.add_argument('-k', '--modulus', type=int, required=True, help='modulus k >= 3')
    charparser.set_defaults(func=characters)

    # Density tool
    densparser = sp.add_parser('density', parents=[common], help='Logarithmic density of a race ordering.')
    dens_req = densparser.add_argument_group('required arguments')
    dens_req.add_argument('-k', '--modulus', type=int, required=True, help='modulus k >= 3')
    dens_req.add_argument('-r', '--residues', type=int_list, required=True, help='residues, e.g. 3,1')
    densparser.add_argument('--ordering', type=int_list, default=None,
                            help='ordering to estimate, largest count first (default: residue order)')
    densparser.add_argument('--all-orderings', action='store_true', help='report every ordering')
    densparser.add_argument('--gsh', action='store_true',
                            help='Monte Carlo with independent zero phases (default: sieve log measure)')
    densparser.add_argument('-x', '--limit', type=number, default=None, help='sieve bound for the empirical estimate')
    densparser.add_argument('--zeros', type=Path, default=None, help='zero file for --gsh')
    densparser.add_argument('-T', '--height', type=float, default=None, help='truncation height (default T_max)')
    densparser.add_argument('-n', '--samples', type=number, default=None, help='Monte Carlo draws')
    densparser.add_argument('--seed', type=int, default=0, help='master seed')
    densparser.add_argument('--no-fejer', action='store_true', help='drop the weights 1 - gamma/T')
    densparser.add_argument('--samples-csv', type=int, default=0, help='write this many E-vector draws as CSV')
    densparser.set_defaults(func=density)

    # Explicit formula tool
    explparser = sp.add_parser('explicit', parents=[common],
                               help='Reconstruct a race from zeros and compare with the sieve.')
    expl_req = explparser.add_argument_group('required arguments')
    expl_req.add_argument('-k', '--modulus', type=int, required=True, help='modulus k >= 3')
    expl_req.add_argument('-r', '--residues', type=int_list, required=True, help='the pair l1,l2')
    expl_req.add_argument('--zeros', type=Path, required=True, help='zero file')
    explparser.add_argument('-T', '--height', type=float, default=None, help='truncation height (default T_max)')
    explparser.add_argument('--x-min', type=float, default=10.0, help='first sample point')
    explparser.add_argument('--x-max', type=float, default=1e4, help='last sample point')
    explparser.add_argument('--points', type=int, default=200, help='log-spaced sample points')
    explparser.add_argument('--mode', choices=('expi', 'quad', 'asymptotic'), default=None, help='evaluation of f(rho)')
    explparser.add_argument('--sieve', action='store_true', help='add the sieved curve and the Ingham check')
    explparser.add_argument('-N', type=int, default=1, help='N for the Diamond bounds')
    explparser.add_argument('-m', type=int, default=1, help='number of largest residues in the Diamond bounds')
    explparser.add_argument('--plot', action='store_true', help='write an SVG overlay')
    explparser.set_defaults(func=explicit)

    # Independence tool
    indparser = sp.add_parser('independence', parents=[common], help='N-independence of zero ordinates.')
    ind_req = indparser.add_argument_group('required arguments')
    ind_req.add_argument('--zeros', type=Path, required=True, help='zero file')
    ind_req.add_argument('--subset', type=int_list, required=True,
                         help='1-based positions in the sorted ordinate set G, e.g. 1,2,3')
    ind_req.add_argument('-N', type=int, required=True, help='coefficient bound')
    indparser.add_argument('--tol', type=float, default=None, help='tolerance (default 1e-9 max gamma)')
    indparser.set_defaults(func=independence)

    # Barrier tool
    barparser = sp.add_parser('barrier', parents=[common], help='Verify an ordering exclusion by a barrier.')
    source = barparser.add_mutually_exclusive_group(required=True)
    source.add_argument('--builtin', choices=('k5',), help='built-in barrier')
    source.add_argument('--spec', type=Path, help='barrier file')
    barparser.add_argument('--check-ordering', type=int_list, default=None,
                           help='ordering to exclude, largest count first, e.g. 1,4,2,3')
    barparser.add_argument('--census', action='store_true', help='tally orderings visited by the main terms')
    barparser.add_argument('--C', dest='C', type=float, default=None, help='envelope constant C')
    barparser.add_argument('--C-prime', dest='C_prime', type=float, default=None, help="envelope constant C'")
    barparser.add_argument('--x-min', type=float, default=None, help='smallest sampled x')
    barparser.add_argument('--x-max', type=float, default=None, help='largest sampled x')
    barparser.add_argument('--samples', type=int, default=None, help='log-spaced samples (>= 1000)')
    barparser.add_argument('--plot', action='store_true', help='write an SVG margin profile')
    barparser.set_defaults(func=barrier)

    return p, sp.choices


def _read_config(path, parser):
    """key=value lines mapped onto the destinations of parser's options."""
    actions = {a.dest: a for a in parser._actions}
    values = {}
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            key, sep, value = line.partition('=')
            key = key.strip().replace('-', '_')
            if not sep or key not in actions:
                raise argparse.ArgumentTypeError(f'{path} line {lineno}: unknown option {key!r}')
            value = value.strip()
            if isinstance(actions[key], argparse._StoreTrueAction):
                value = value.lower() in ('1', 'true', 'yes', 'on')
            values[key] = value
    return values


def main(import_args=None):
    p, subparsers = build_parser()

    # Parse command-line arguments
    args = p.parse_args(import_args)
    if args.config is not None:
        sub = subparsers[args.subcommand]
        try:
            sub.set_defaults(**_read_config(args.config, sub))
        except (OSError, argparse.ArgumentTypeError) as exc:
            p.error(str(exc))
        # Required options still have to be given as flags
        args = p.parse_args(import_args)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    from primerace.errors import Error
    from primerace_tools.reporting import OutputSet

    argv = sys.argv[1:] if import_args is None else list(import_args)
    out = OutputSet(args.output, args.subcommand, argv, args)

    # Call function
    try:
        code = args.func(args, out)
        out.finish()
    except Error as exc:
        out.discard()
        print(f'primerace {args.subcommand}: error: {exc}', file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        out.discard()
        print(f'primerace {args.subcommand}: I/O error: {exc}', file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if code is None else code


def _sieve_config(args, limit):
    from primerace.sieve import SieveConfig
    from primerace.definitions import sieve_defaults
    return SieveConfig(limit=int(limit),
                       segment_size=getattr(args, 'segment_size', None) or sieve_defaults.segment_size,
                       wheel=getattr(args, 'wheel', None) or sieve_defaults.wheel,
                       thread_count=args.threads)


def race(args, out):
    """Runs a prime race and writes events, snapshot and summary
    :param args: Argparse interpreted arguments
    :type args: Namespace
    :param out: Output bookkeeping
    :type out: OutputSet
    """
    import numpy as np
    from primerace.race import load_checkpoint, run_race, write_snapshot
    from primerace.density import empirical_log_density

    cfg = _sieve_config(args, args.limit)
    events = out.path('race_events.csv')
    resume = None
    if args.resume is not None:
        out.add_input(args.resume)
        resume = load_checkpoint(args.resume, event_csv=events)
    elif events.exists():
        events.unlink()

    state = run_race(args.modulus, args.residues, args.limit, cfg=cfg, event_csv=events,
                     event_buffer=args.event_buffer, trace_limit=args.trace_limit,
                     checkpoint=args.checkpoint, resume=resume)
    if not events.exists():
        events.write_text('x,kind,l1,l2,delta\n', encoding='utf-8')
    write_snapshot(state, out.path('race_snapshot.json'))

    summary = {
        'modulus': state.modulus.k,
        'residues': list(state.residues),
        'x': state.x_current,
        'first_negative': {f'{a},{b}': x for (a, b), x in sorted(state.first_negative.items())},
        'first_lead': {str(l): x for l, x in sorted(state.first_lead.items())},
        'preponderance': {f'{a},{b}': n for (a, b), n in state.preponderance.items()},
        'event_counts': {kind.value: n for kind, n in state.events.counts.items()},
    }
    if state.x_current > 2:
        summary['log_density'] = {
            ','.join(str(l) for l in ordering): empirical_log_density(state, ordering).delta_hat
            for ordering in sorted(state.orderings_seen)}
    out.write_json('race_summary.json', summary)

    print(f'Race mod {state.modulus.k} over {state.residues} to x={state.x_current}')
    for (a, b), x in sorted(state.first_negative.items()):
        print(f'  pi(x,{state.modulus.k},{a}) - pi(x,{state.modulus.k},{b}) first negative at x={x}')

    if args.plot and len(state.residues) > 1:
        if state.trace is None:
            logger.warning('No trace kept (--trace-limit 0); skipping the plot.')
        else:
            from primerace.plotting import race_curve
            top = state.trace.covered
            xs = np.unique(np.geomspace(2, top, 2000).astype(np.int64))
            values = [int(state.values_at(x)[1][0] - state.values_at(x)[1][1]) for x in xs]
            race_curve(out.path('race_curve.svg'), xs, values,
                       title=f'pi(x,{state.modulus.k},{state.residues[0]}) - pi(x,{state.modulus.k},{state.residues[1]})')


def chebyshev(args, out):
    """Evaluates Chebyshev's weighted sum over odd primes
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    from primerace.race import chebyshev_weighted_sum

    limit = args.limit if args.limit is not None else max(100, int(50 * args.scale))
    value = chebyshev_weighted_sum(args.scale, limit, cfg=_sieve_config(args, max(limit, 2)))
    out.write_json('chebyshev.json', {'x': args.scale, 'limit': limit, 'value': value})
    print(f'sum (-1)^((p-1)/2) exp(-p/{args.scale:g}) over p <= {limit}: {value:.15g}')


def shanks(args, out):
    """Checks Shanks' inequality for modulus 8
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    from primerace.race import shanks_first_violation

    violation = shanks_first_violation(args.limit, cfg=_sieve_config(args, args.limit))
    out.write_json('shanks.json', {'limit': args.limit, 'holds': violation is None, 'first_violation': violation})
    if violation is None:
        print(f'pi(x,8,1) <= max(pi(x,8,3), pi(x,8,5), pi(x,8,7)) for all x <= {args.limit}')
    else:
        print(f'pi(x,8,1) leads first at x={violation}')


def characters(args, out):
    """Prints the group structure, characters and square root counts modulo k
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    from primerace import residues as res

    m = res.build_modulus(args.modulus)
    chars = res.characters(m)
    counts = res.square_root_counts(m)
    defect = res.character_orthogonality_defect(m)
    print(f'(Z/{m.k})*: phi={m.phi}, generators ' + ', '.join(f'{g} (order {n})' for g, n in m.generators))
    print('N_k(l): ' + ', '.join(f'{l}:{counts[l]}' for l in m.residues))
    for chi in chars:
        kind = 'principal' if chi.is_principal else ('real' if chi.is_real else 'complex')
        turns = ' '.join(str(chi.turn(l)) for l in m.residues)
        print(f'  {chi.label:<12} {kind:<9} conductor {chi.conductor:<4} turns {turns}')
    print(f'Orthogonality defect: {defect:.3g}')

    out.write_json('characters.json', {
        'modulus': m.k,
        'phi': m.phi,
        'generators': [list(g) for g in m.generators],
        'square_root_counts': {str(l): counts[l] for l in m.residues},
        'orthogonality_defect': defect,
        'characters': [{'label': chi.label,
                        'principal': chi.is_principal,
                        'real': chi.is_real,
                        'conductor': chi.conductor,
                        'turns': {str(l): str(chi.turn(l)) for l in m.residues}} for chi in chars],
    })


def density(args, out):
    """Estimates the logarithmic density of race orderings
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    from itertools import permutations
    from primerace import density as dens
    from primerace.errors import DomainError

    orderings = [tuple(args.ordering or args.residues)]
    if args.all_orderings:
        orderings = list(permutations(args.residues))

    if args.gsh:
        from primerace.zeros import load_zeros
        if args.zeros is None:
            raise DomainError('--gsh needs --zeros.')
        out.add_input(args.zeros)
        zs = load_zeros(args.zeros)
        T = zs.height_limit if args.height is None else args.height
        n = args.samples or dens.density_defaults.min_samples
        fejer = False if args.no_fejer else None
        every = dens.gsh_all_orderings(zs, args.modulus, args.residues, T, int(n), args.seed,
                                       thread_count=args.threads, fejer=fejer)
        estimates = [every[tuple(o)] if tuple(o) in every else dens.gsh_density(
            zs, args.modulus, args.residues, o, T, int(n), args.seed, args.threads, fejer) for o in orderings]
        if args.samples_csv:
            sampler = dens.GSHSampler(zs, args.modulus, args.residues, T, fejer)
            dens.write_samples(out.path('density_samples.csv'), sampler.residues,
                               sampler.draw(args.samples_csv, args.seed, args.threads))
    else:
        from primerace.race import run_race
        if args.limit is None:
            raise DomainError('The empirical estimate needs -x/--limit.')
        state = run_race(args.modulus, args.residues, args.limit, cfg=_sieve_config(args, args.limit),
                         trace_limit=0)
        estimates = [dens.empirical_log_density(state, o) for o in orderings]

    out.write_json('density.json', [e.to_dict() for e in estimates])
    for e in estimates:
        print(f'delta({",".join(str(l) for l in e.ordering)}) = {e.delta_hat:.6f} +/- {e.stderr:.2g} ({e.method})')


def explicit(args, out):
    """Reconstructs a race from zeros and writes the sample curve and oscillation report
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    import numpy as np
    from primerace import explicit as ex
    from primerace.errors import DomainError
    from primerace.zeros import load_zeros

    if len(args.residues) != 2:
        raise DomainError('explicit needs exactly two residues.')
    l1, l2 = args.residues
    out.add_input(args.zeros)
    zs = load_zeros(args.zeros)
    T = zs.height_limit if args.height is None else args.height
    w = ex.residue_weights(args.modulus, l1, l2)
    xs = np.geomspace(args.x_min, args.x_max, args.points)
    values = ex.reconstruct_curve(xs, w, zs, T, args.mode)

    sieved = None
    report = None
    us = np.linspace(np.log(args.x_min), np.log(args.x_max), args.points)
    try:
        report = ex.oscillation_report(w, zs, T, N=args.N, m=args.m, u_samples=us)
    except DomainError as exc:
        logger.warning(f'No oscillation report: {exc}')
    result = {'modulus': args.modulus, 'l1': l1, 'l2': l2, 'T': T,
              'oscillation': report.to_dict() if report is not None else None}

    if args.sieve:
        from primerace.race import run_race
        limit = int(args.x_max)
        state = run_race(args.modulus, [l1, l2], limit, cfg=_sieve_config(args, limit), trace_limit=limit)
        counts = np.array([state.values_at(int(x))[1] for x in xs])
        sieved = state.modulus.phi * (counts[:, 0] - counts[:, 1])
        if report is not None:
            check = ex.ingham_sandwich(state, l1, l2, report.terms, T, report.a0, u_samples=us)
            result['ingham'] = dict(check._asdict(), passed=check.passed)

    ex.write_curve(out.path('explicit_curve.csv'), xs, values, T, sieved)
    out.write_json('explicit.json', result)
    if report is not None:
        print(f'a0 = {report.a0:.6g}, {len(report.terms)} terms, Diamond bounds '
              f'[{report.diamond_bounds[0]:.6g}, {report.diamond_bounds[1]:.6g}]')
    if args.plot:
        from primerace.plotting import overlay_curve
        overlay_curve(out.path('explicit_curve.svg'), xs, values, sieved, T,
                      ylabel=f'phi(k) (pi(x,k,{l1}) - pi(x,k,{l2}))')


def independence(args, out):
    """Checks N-independence of a subset of zero ordinates
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    from primerace.errors import DomainError
    from primerace.zeros import load_zeros, n_independence

    if any(i < 1 for i in args.subset):
        raise DomainError('--subset positions are 1-based.')
    out.add_input(args.zeros)
    zs = load_zeros(args.zeros)
    verdict = n_independence(zs, [i - 1 for i in args.subset], args.N, tol=args.tol, thread_count=args.threads)
    out.write_json('independence.json', verdict.to_dict())
    state = 'passed' if verdict.passed else f'{len(verdict.violations)} violation(s)'
    print(f'{args.N}-independence of G[{",".join(str(i) for i in args.subset)}]: {state}')


def barrier(args, out):
    """Verifies ordering exclusions for a barrier specification
    :param args: Argparse interpreted arguments
    :type args: Namespace
    """
    import numpy as np
    from primerace import barrier as bar
    from primerace.definitions import barrier_defaults

    if args.builtin:
        spec = bar.BUILTIN[args.builtin]()
    else:
        out.add_input(args.spec)
        spec = bar.load_barrier(args.spec)
    x_min = args.x_min or barrier_defaults.x_min
    x_max = args.x_max or barrier_defaults.x_max
    n = args.samples or barrier_defaults.n_samples
    xs = np.exp(np.linspace(np.log(x_min), np.log(x_max), n))

    result = {'modulus': spec.modulus.k, 'residues': list(spec.residues), 'zeros': spec.size,
              'source': spec.source}
    code = EXIT_OK
    if args.builtin == 'k5':
        phase = bar.k5_phase_inequality()
        result['phase_inequality'] = dict(phase._asdict(), certified=phase.certified)
    if args.check_ordering:
        verdict = bar.verify_exclusion(spec, args.check_ordering, xs, C=args.C, C_prime=args.C_prime)
        result['verdict'] = verdict.to_dict()
        print(f'Ordering {",".join(str(l) for l in verdict.ordering)}: {verdict.status.value}'
              f' (margin {verdict.margin:.4g}, x threshold {verdict.x_threshold:.4g})')
        if verdict.status is bar.VerdictStatus.inconclusive:
            code = EXIT_INCONCLUSIVE
        if args.plot:
            from primerace.plotting import margin_profile
            L, violation, envelope = bar.exclusion_profile(spec, verdict.ordering, xs, args.C, args.C_prime)
            margin_profile(out.path('barrier_margin.svg'), L, violation, envelope)
    if args.census:
        census = bar.orderings_census(spec, xs)
        result['census'] = {'samples': census.samples, 'ties': census.ties,
                            'counts': {','.join(str(l) for l in o): c for o, c in sorted(census.counts.items())}}
        print(f'{len(census.counts)} ordering(s) visited in {census.samples} samples')
    if not args.check_ordering and not args.census:
        logger.warning('Nothing to do: give --check-ordering and/or --census.')
        code = EXIT_USAGE
    out.write_json('barrier.json', result)
    return code
