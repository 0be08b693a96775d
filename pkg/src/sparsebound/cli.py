import logging
import signal
import sys
import traceback

from sparsebound import bounds, config, linalg, montecarlo, oracle, report
from sparsebound.arguments import create_parser
from sparsebound.errors import (BudgetExceededError, ConfigError, DimensionError,
                                IllConditionedError, SingularMatrixError,
                                SparseBoundError, UnsupportedConfigurationError)
from sparsebound.estimators import (HardThresholdEstimator, MLSSNMEstimator,
                                    mean_functions_for)
from sparsebound.model import SparseVector, snr_db_to_xi, xi_and_j

logger = logging.getLogger(__name__)

DEBUG_LOG = 'sparsebound_debug.log'
SANDWICH_TOL = 1e-8

EXIT_CODES = [
    (ConfigError, 2),
    (DimensionError, 2),
    (UnsupportedConfigurationError, 2),
    (IllConditionedError, 3),
    (SingularMatrixError, 3),
    (BudgetExceededError, 4),
]


class CustomExit(Exception):
    """Custom class to exit program"""
    pass


def signal_handler(signum, frame):
    """Wrapper to handle break signals from the user"""
    raise CustomExit


def exit_code(error):
    for error_class, code in EXIT_CODES:
        if isinstance(error, error_class):
            return code
    return 1


def configure_logging(verbose=False, debug=False):
    root = logging.getLogger('sparsebound')
    root.setLevel(logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING)
    if not root.handlers:
        console = logging.StreamHandler(sys.stderr)
        console.setLevel(logging.INFO if verbose else logging.WARNING)
        console.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
        root.addHandler(console)
    if debug:
        debug_file = logging.FileHandler(DEBUG_LOG)
        debug_file.setLevel(logging.DEBUG)
        debug_file.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        root.addHandler(debug_file)


def cmd_bound(cfg):
    """Per-component L* with its support, the summed bound and, for H = I with
    unbiased means, the closed form next to it"""
    model = cfg.model()
    gammas = cfg.mean_functions()
    rows = []
    lines = []
    for n, x0 in enumerate(cfg.x0_list, start=1):
        results = bounds.component_bounds(model, gammas, x0, cfg.quadrature, cfg.bound_mode,
                                          cfg.budget, cfg.threads)
        for gamma, result in zip(gammas, results):
            rows.append([n, gamma.k, result.value, str(result.K), result.beta2, result.crb_term])
        total = float(sum(result.value for result in results))
        rows.append([n, 'sum', total, '', '', ''])
        lines.append(f"x0 #{n} {x0.support}: summed bound {total:.10g}")
        if model.is_ssnm and cfg.mean_spec['kind'] == 'unbiased':
            xi, _ = xi_and_j(x0, model.S)
            closed = bounds.ssnm_unbiased_bound(model.N, model.S, xi, model.sigma2)
            rows.append([n, 'closed_form', closed, '', '', ''])
            lines.append(f"x0 #{n} {x0.support}: closed form  {closed:.10g}")
    report.write_csv(cfg.output_path, ['x0', 'component', 'bound', 'support', 'beta2', 'crb_term'], rows)
    report.summary(lines, bool(cfg.output_path))
    return rows


def _estimator_bound(estimator, model, x0, cfg):
    try:
        gammas = mean_functions_for(estimator, model, cfg.quadrature)
    except UnsupportedConfigurationError:
        return float('nan')
    if any(getattr(gamma, 'stochastic', False) for gamma in gammas):
        return float('nan')
    return bounds.theorem_bound(model, gammas, x0, cfg.quadrature, cfg.bound_mode, cfg.budget, cfg.threads)


def cmd_simulate(cfg):
    """One row of Monte Carlo statistics per (parameter vector, estimator)"""
    model = cfg.model()
    rows = []
    for n, x0 in enumerate(cfg.x0_list, start=1):
        for estimator in cfg.estimators_for(x0):
            spec = montecarlo.SimulationSpec(model=model, x0=x0, estimator=estimator,
                                             n_trials=cfg.trials, seed=cfg.seed,
                                             chunk_size=cfg.chunk_size)
            stats = montecarlo.simulate(spec, cfg.threads)
            rows.append([n, estimator.name, stats.n_trials, cfg.seed, stats.total_variance,
                         stats.se_total_variance, stats.mse, stats.se_mse, stats.bias_norm,
                         _estimator_bound(estimator, model, x0, cfg)])
    report.write_csv(cfg.output_path,
                     ['x0', 'estimator', 'n_trials', 'seed', 'total_variance', 'se_variance',
                      'mse', 'se_mse', 'bias_norm', 'bound'], rows)
    return rows


def _s1_bound_and_variance(estimator, model, x0, j, cfg):
    i = 1 if j != 1 else 2
    gamma_j = estimator.mean_function(j, model, cfg.quadrature)
    gamma_i = estimator.mean_function(i, model, cfg.quadrature)
    bound = bounds.ssnm_s1_estimator_bound(model, gamma_j, gamma_i, x0, cfg.quadrature)
    spec = montecarlo.SimulationSpec(model=model, x0=x0, estimator=estimator, n_trials=cfg.trials,
                                     seed=cfg.seed, chunk_size=cfg.chunk_size)
    stats = montecarlo.simulate(spec, cfg.threads)
    return stats.total_variance, bound, stats.se_total_variance


def cmd_fig1(cfg):
    """Variance of the ML and thresholding estimators and their bounds against SNR"""
    model = cfg.model()
    if not model.is_ssnm or model.S != 1:
        raise UnsupportedConfigurationError(f"the SNR sweep needs H = I and S = 1, got {model!r}")
    j = cfg.sweep_j
    thresholds = cfg.thresholds
    labels = [f"T{T:g}" for T in thresholds]
    header = ['snr_db', 'v_ml', 'b_ml']
    for label in labels:
        header += [f"v_ht_{label}", f"b_ht_{label}"]
    header += ['se_ml'] + [f"se_ht_{label}" for label in labels]
    if cfg.unbiased_reference:
        header.append('b_unbiased')
    rows = []
    for snr_db in cfg.snr_grid:
        xi = snr_db_to_xi(snr_db, model.sigma2)
        x0 = SparseVector.from_support(model.N, [j], [xi])
        v_ml, b_ml, se_ml = _s1_bound_and_variance(MLSSNMEstimator(1), model, x0, j, cfg)
        row = [snr_db, v_ml, b_ml]
        errors = [se_ml]
        for T in thresholds:
            v, b, se = _s1_bound_and_variance(HardThresholdEstimator(T), model, x0, j, cfg)
            row += [v, b]
            errors.append(se)
        row += errors
        if cfg.unbiased_reference:
            row.append(bounds.ssnm_unbiased_bound(model.N, 1, xi, model.sigma2))
        logger.info("SNR %g dB: v_ml %.6g, b_ml %.6g", snr_db, v_ml, b_ml)
        rows.append(row)
    report.write_csv(cfg.output_path, header, rows)
    return rows


def cmd_oracle(cfg):
    """Grid-refinement table of the finite-point bound against L^K on the argmax support

    Rows finished before an ill-conditioned Gram matrix are still written.
    """
    model = cfg.model()
    gammas = cfg.mean_functions()
    header = ['x0', 'component', 'support', 'per_axis', 'n_points', 'usable_size', 'condition',
              'oracle', 'bound_L_K', 'sandwich']
    rows = []
    lines = []

    def add_rows(n, k, best, table):
        for per_axis, result in table.items():
            passed = result.value >= best.value - SANDWICH_TOL
            rows.append([n, k, str(best.K), per_axis, result.n_points, result.usable_size,
                         result.condition, result.value, best.value, passed])

    try:
        for n, x0 in enumerate(cfg.x0_list, start=1):
            for k in cfg.oracle_components:
                best = bounds.bound_L_star(model, gammas[k - 1], x0, cfg.quadrature, cfg.bound_mode,
                                           cfg.budget, cfg.threads)
                try:
                    table = oracle.refinement_study(model, gammas[k - 1], x0, best.K, cfg.per_axis_list,
                                                    cfg.oracle_half_width * model.sigma, center=best.s0,
                                                    cond_limit=cfg.oracle_cond_limit)
                except IllConditionedError as e:
                    add_rows(n, k, best, e.partial or {})
                    raise
                add_rows(n, k, best, table)
                finest = table.peekitem(-1)[1]
                lines.append(f"x0 #{n} component {k} on {best.K}: oracle {finest.value:.10g} "
                             f"vs L^K {best.value:.10g}")
    finally:
        report.write_csv(cfg.output_path, header, rows)
    failed = sum(1 for row in rows if not row[-1])
    lines.append(f"sandwich check: {len(rows) - failed} passed, {failed} failed")
    report.summary(lines, bool(cfg.output_path))
    return rows


def cmd_spark(cfg):
    """Whether every S columns of H are linearly independent"""
    exceeds = linalg.spark_exceeds(cfg.H, cfg.S)
    rows = [[cfg.H.shape[0], cfg.N, cfg.S, exceeds]]
    report.write_csv(cfg.output_path, ['M', 'N', 'S', 'spark_exceeds_S'], rows)
    report.summary([f"spark(H) > {cfg.S}: {exceeds}"], bool(cfg.output_path))
    return rows


COMMANDS = {
    'bound': cmd_bound,
    'simulate': cmd_simulate,
    'fig1': cmd_fig1,
    'oracle': cmd_oracle,
    'spark': cmd_spark,
}


def main(argv=None):
    """Entry point for the program

    Parses the arguments, loads the experiment configuration (the built-in
    default when no --config is given), applies the command-line overrides
    and runs one command.  Returns the process exit code.
    """
    signal.signal(signal.SIGTERM, signal_handler)
    signal.signal(signal.SIGINT, signal_handler)

    argument_parser = create_parser()
    args = argument_parser.parse_args(argv)
    configure_logging(args.verbose, args.debug)

    try:
        my_config = config.ExperimentConfig()
        if args.config:
            my_config.load_config(args.config)
        else:
            my_config.load_document({})
        my_config.override(seed=args.seed, trials=args.trials, threads=args.threads, output=args.out)
        COMMANDS[args.command](my_config)
        return 0

    except CustomExit:
        print("Interrupted", file=sys.stderr)
        return 1

    except SparseBoundError as e:
        print(f"error: {e}", file=sys.stderr)
        logger.debug(traceback.format_exc())
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
