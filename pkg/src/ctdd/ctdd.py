import os
import logging
from typing import Callable, Optional, Sequence

import numpy as np

from ctdd.artifact import Artifact, ReportBundle, read_csv, write_csv, write_json
from ctdd.config import BUILTIN_EXAMPLE, ExperimentConfig, example_state
from ctdd.excitation import PeCertificate, check_pe, gramian_joint, reduced_basis
from ctdd.exceptions import (
    ConfigError,
    CtddException,
    DimensionMismatch,
    NotPersistentlyExciting,
    StageFailed,
)
from ctdd.fundamental import DataDictionary, Variant, build_dictionary, dd_simulate, identify, membership_residual
from ctdd.legendre import fit_samples, gauss_legendre, project, series_eval, uniform_rule
from ctdd.lqr import (
    LqrSolution,
    LqrSpec,
    optimality_gap_sweep,
    solve_reference_analytic_example,
    solve_reference_riccati,
    solve_reference_riccati_io,
)
from ctdd.lti import (
    PolynomialInput,
    SampledSignal,
    SampledTrajectory,
    sample_signal,
    simulate,
    simulate_series,
    structural_indices,
)

logger = logging.getLogger(__name__)

EXPECTED_OPTIMAL_VALUE = 0.4125
EXPECTED_MIN_EIGENVALUE = 0.1729
EXPECTED_RANKS = {'Gamma_1_2': 2, 'Gamma_2_2': 3}
EXPECTED_GAPS = {
    1: 3.59e0,
    2: 4.11e-1,
    3: 3.36e-2,
    4: 1.70e-3,
    5: 4.79e-5,
    6: 9.58e-7,
    7: 1.25e-8,
    8: 1.30e-10,
}
GAP_FLOOR = 1e-10
GAP_ROUNDING = 1e-12


def signal_columns(prefix: str, dim: int, order: int) -> list:
    """Column names of a derivative stack: ``u1, u2, u1_d1, u2_d1, ...``."""
    return [
        f'{prefix}{channel + 1}' if k == 0 else f'{prefix}{channel + 1}_d{k}'
        for k in range(order)
        for channel in range(dim)
    ]


class Workbench:
    """
    Runs the data-driven experiments of one configuration and writes their artifacts.

    Every public method is a pipeline stage; failures surface as
    :class:`~ctdd.exceptions.StageFailed` tagged with the stage name.
    """
    GEN_DATA = 'gen-data'
    CHECK_PE = 'check-pe'
    IDENTIFY = 'identify'
    DD_SIMULATE = 'dd-simulate'
    LQR = 'lqr'
    REPRODUCE = 'reproduce'

    DISPLAY_POINTS = 201

    def __init__(self, config: ExperimentConfig, out_dir: Optional[str] = None) -> None:
        """
        Creates a workbench for one configuration.

        Args:
            config (ExperimentConfig): Validated configuration.
            out_dir (str, optional): Output directory, ``config.output_dir`` by default.
        """
        self.config = config
        self.out_dir = out_dir or config.output_dir
        self.bundle: Optional[ReportBundle] = None
        self.__trajectory: Optional[SampledTrajectory] = None

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        self.bundle = ReportBundle(config_hash=self.config.digest(), seed=self.config.seed)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.bundle.artifacts:
            self.bundle.write_metadata(self.out_dir)

    def run_stage(self, stage: str, func: Callable, *args, **kwargs):
        """
        Run one stage and tag its failure.

        Args:
            stage (str): Stage name.
            func (Callable): Stage body.

        Returns:
            Whatever ``func`` returns.
        """
        logger.info('Stage %s started.', stage)
        try:
            result = func(*args, **kwargs)
        except (ConfigError, StageFailed):
            raise
        except (CtddException, ValueError, KeyError, np.linalg.LinAlgError) as error:
            raise StageFailed(stage, str(error)) from error
        logger.info('Stage %s finished.', stage)
        return result

    def __write_csv(self, name: str, header: Sequence[str], rows) -> Artifact:
        return self.bundle.add(write_csv(os.path.join(self.out_dir, name), header, rows))

    def __write_json(self, name: str, payload) -> Artifact:
        return self.bundle.add(write_json(os.path.join(self.out_dir, name), payload))

    @property
    def is_builtin(self) -> bool:
        return self.config.system == BUILTIN_EXAMPLE and self.config.excitation.name == 't-squared'

    def io_order(self) -> int:
        """Stacking order ``L = K = lag + 1`` of the input-output LQR dictionary."""
        return structural_indices(self.config.build_system()).lag + 1

    def data_orders(self) -> tuple:
        """Input stacking order carried by the data (enough for the excitation check) and K."""
        sys = self.config.build_system()
        L, K = self.config.L, self.config.K
        if self.config.lqr.variant is Variant.INPUT_OUTPUT:
            K = max(K, self.io_order())
        return max(L, K) + sys.n, K

    def trajectory(self) -> SampledTrajectory:
        """Informative trajectory of the configured experiment, simulated once per workbench."""
        if self.__trajectory is None:
            L, K = self.data_orders()
            rule = gauss_legendre(self.config.node_count(max(self.config.truncation_orders)))
            self.__trajectory = simulate(
                self.config.build_system(), self.config.build_signal(), self.config.initial_state, rule, L, K
            )
        return self.__trajectory

    def dictionary(self, variant: Variant = Variant.INPUT_STATE, L: Optional[int] = None, K: Optional[int] = None) -> DataDictionary:
        tolerances = self.config.tolerances
        return build_dictionary(
            self.trajectory(),
            L or self.config.L,
            K or self.config.K,
            variant=variant,
            pe_tol=tolerances.pe_tol,
            rank_rel_tol=tolerances.rank_rel_tol,
        )

    def ranks(self) -> dict:
        """Ranks of the state Gramians ``Gamma_{L,K}`` and ``Gamma_{L+1,K}`` of the data."""
        traj = self.trajectory()
        ranks = {}
        for L in (self.config.L, self.config.L + 1):
            gramian = gramian_joint(traj, L, self.config.K, use_state=True)
            ranks[f'Gamma_{L}_{self.config.K}'] = reduced_basis(gramian, self.config.tolerances.rank_rel_tol).rank
        return ranks

    def gen_data(self) -> dict:
        """
        Simulate the excitation experiment and write it at the quadrature nodes
        (``trajectory.csv``) and on a uniform display grid (``trajectory_grid.csv``).

        Returns:
            dict: Written artifacts.
        """
        return self.run_stage(Workbench.GEN_DATA, self.__gen_data)

    def __gen_data(self) -> dict:
        sys = self.config.build_system()
        L, K = self.data_orders()
        header = ['t'] + signal_columns('u', sys.m, L) + signal_columns('x', sys.n, K) + signal_columns('y', sys.p, K)

        def rows(traj: SampledTrajectory):
            return np.hstack([traj.rule.nodes[:, None], traj.u_derivs, traj.x_derivs, traj.y_derivs])

        grid = simulate(sys, self.config.build_signal(), self.config.initial_state, uniform_rule(Workbench.DISPLAY_POINTS), L, K)
        artifacts = [
            self.__write_csv('trajectory.csv', header, rows(self.trajectory())),
            self.__write_csv('trajectory_grid.csv', header, rows(grid)),
        ]
        return {'artifacts': [artifact.as_dict() for artifact in artifacts]}

    def check_pe(self, order: Optional[int] = None, csv_path: Optional[str] = None) -> dict:
        """
        Certify persistency of excitation of the configured input or of a CSV file.

        Args:
            order (int, optional): Order L, ``max(L, K) + n`` by default.
            csv_path (str, optional): Table with a ``t`` column and input columns ``u1..um``.

        Returns:
            dict: ``{order, min_eigenvalue, is_pe, tolerance}``.
        """
        return self.run_stage(Workbench.CHECK_PE, self.__check_pe, order, csv_path)

    def __check_pe(self, order: Optional[int], csv_path: Optional[str]) -> dict:
        order = order or self.data_orders()[0]
        signal = self.csv_signal(csv_path, order) if csv_path else self.analytic_signal(order)
        certificate = check_pe(signal, order, self.config.tolerances.pe_tol)
        payload = certificate.as_dict()
        self.__write_json('pe_certificate.json', payload)
        return payload

    def analytic_signal(self, order: int) -> SampledSignal:
        rule = gauss_legendre(self.config.node_count(max(self.config.truncation_orders)))
        return sample_signal(self.config.build_signal(), rule, order)

    def csv_signal(self, csv_path: str, order: int) -> SampledSignal:
        """
        Project the input columns of a CSV table onto ``projection_order`` Legendre
        coefficients; derivatives come from the spectral differentiation operator.
        """
        m = self.config.build_system().m
        header, table = read_csv(csv_path)
        columns = ['t'] + signal_columns('u', m, 1)
        missing = [name for name in columns if name not in header]
        if missing:
            raise DimensionMismatch(f'{csv_path} lacks columns {missing}.')
        t = table[:, header.index('t')]
        samples = table[:, [header.index(name) for name in columns[1:]]]
        series = fit_samples(t, samples, self.config.projection_order)
        rule = gauss_legendre(self.config.node_count(self.config.projection_order))
        return SampledSignal.from_series(series, rule, order)

    def identify(self) -> dict:
        """
        Identify ``(A, B)`` from the state Gramian.

        Returns:
            dict: ``{A_tilde, B_tilde, residual, kernel_rep}``.
        """
        return self.run_stage(Workbench.IDENTIFY, self.__identify)

    def __identify(self) -> dict:
        try:
            dictionary = self.dictionary(Variant.INPUT_STATE, K=max(self.config.K, 2))
        except NotPersistentlyExciting as error:
            certificate = error.certificate.as_dict() if isinstance(error.certificate, PeCertificate) else None
            self.__write_json('identify.json', {'error': str(error), 'certificate': certificate})
            raise
        model = identify(dictionary, self.config.tolerances.rank_rel_tol)
        payload = model.as_dict()
        self.__write_json('identify.json', payload)
        return payload

    def dd_simulate(self) -> dict:
        """
        Data-driven response to the configured input, compared with the model response
        on the display grid (``dd_simulate.csv``).

        Returns:
            dict: Residual of the coefficient system and the largest deviation from the model.
        """
        return self.run_stage(Workbench.DD_SIMULATE, self.__dd_simulate)

    def __dd_simulate(self) -> dict:
        sys = self.config.build_system()
        order = self.config.projection_order
        rule = gauss_legendre(self.config.node_count(order))
        u_series = project(self.config.build_signal().derivative(0, rule.nodes), rule, order, sys.m)
        result = dd_simulate(self.dictionary(Variant.INPUT_STATE), u_series, self.config.initial_state, order)

        grid = uniform_rule(Workbench.DISPLAY_POINTS)
        u = series_eval(u_series, grid.nodes)
        x_dd = series_eval(result.output, grid.nodes)
        x_model = simulate_series(sys, u_series, self.config.initial_state, grid)
        header = ['t'] + signal_columns('u', sys.m, 1) + [f'x{c + 1}_dd' for c in range(sys.n)] + [f'x{c + 1}_model' for c in range(sys.n)]
        self.__write_csv('dd_simulate.csv', header, np.hstack([grid.nodes[:, None], u, x_dd, x_model]))

        payload = {
            'order': order,
            'residual': result.residual,
            'max_deviation': float(np.max(np.abs(x_dd - x_model))),
        }
        self.__write_json('dd_simulate.json', payload)
        return payload

    def reference(self, variant: Variant, initial: np.ndarray) -> LqrSolution:
        """Analytic optimum for the scalar example, Riccati otherwise."""
        lqr = self.config.lqr
        sys = self.config.build_system()
        if variant is Variant.INPUT_OUTPUT:
            return solve_reference_riccati_io(sys, initial, lqr.Q, lqr.R)
        if self.config.system == BUILTIN_EXAMPLE and lqr.Q is None and lqr.R is None and np.allclose(initial, 1.0):
            return solve_reference_analytic_example()
        return solve_reference_riccati(sys, lqr.Q, lqr.R, initial)

    def lqr(self, orders: Optional[Sequence[int]] = None) -> dict:
        """
        Sweep the data-driven LQR over the truncation orders.

        Writes ``gaps.csv`` (N, J_N, gap, traj_gap), one ``lqr_N<N>.csv`` per order on
        the display grid and ``report.json``.

        Args:
            orders (Sequence[int], optional): Truncation orders, the configured ones by default.

        Returns:
            dict: Report with ``J_star``, ``min_eigenvalue``, ``ranks`` and the gap rows.
        """
        return self.run_stage(Workbench.LQR, self.__lqr, orders)

    def __lqr(self, orders: Optional[Sequence[int]]) -> dict:
        sys = self.config.build_system()
        lqr = self.config.lqr
        variant = lqr.variant
        if variant is Variant.INPUT_STATE:
            dictionary = self.dictionary(variant)
            initial = np.asarray(lqr.x0 if lqr.x0 is not None else np.ones(sys.n), dtype=float)
        else:
            dictionary = self.dictionary(variant, L=self.io_order(), K=self.io_order())
            size = dictionary.initial_size()
            initial = np.asarray(lqr.xi0 if lqr.xi0 is not None else np.ones(size), dtype=float)

        reference = self.reference(variant, initial)
        spec = LqrSpec(target=dictionary, initial=initial, order=1, variant=variant, Q=lqr.Q, R=lqr.R)
        rows, solutions = optimality_gap_sweep(spec, orders or self.config.truncation_orders, reference, self.config.tolerances.kkt_tol)

        self.__write_csv('gaps.csv', ['N', 'J_N', 'gap', 'traj_gap'], [[r.order, r.cost, r.gap, r.trajectory_gap] for r in rows])
        grid = uniform_rule(Workbench.DISPLAY_POINTS).nodes
        name = 'x' if variant is Variant.INPUT_STATE else 'y'
        for solution in solutions:
            second = solution.second_series
            header = (
                ['t']
                + [f'u{c + 1}_N' for c in range(sys.m)]
                + [f'{name}{c + 1}_N' for c in range(second.dim)]
                + [f'u{c + 1}_star' for c in range(sys.m)]
                + [f'{name}{c + 1}_star' for c in range(second.dim)]
            )
            table = np.hstack([
                grid[:, None],
                series_eval(solution.u_series, grid),
                series_eval(second, grid),
                series_eval(reference.u_series, grid),
                series_eval(reference.second_series, grid),
            ])
            self.__write_csv(f'lqr_N{solution.order}.csv', header, table)

        report = {
            'variant': variant.value,
            'J_star': reference.cost,
            'reference': reference.solver,
            'min_eigenvalue': dictionary.certificate.min_eigenvalue if dictionary.certificate else None,
            'ranks': self.ranks(),
            'dictionary_rank': dictionary.rank,
            'rows': [row.as_dict() for row in rows],
        }
        self.bundle.tables['gaps'] = report['rows']
        self.__write_json('report.json', report)
        return report

    def reproduce(self) -> dict:
        """
        Run the full pipeline of the scalar example and check every result against
        its expected value.

        Returns:
            dict: ``{passed, checks}`` where each check carries value, expected value and tolerance.
        """
        if not self.is_builtin:
            raise StageFailed(Workbench.REPRODUCE, f'Reproduction needs the {BUILTIN_EXAMPLE} configuration.')
        checks = []

        def check(name: str, value, expected, tolerance, passed: bool):
            checks.append({'name': name, 'value': value, 'expected': expected, 'tolerance': tolerance, 'passed': bool(passed)})

        self.gen_data()
        header, table = read_csv(os.path.join(self.out_dir, 'trajectory_grid.csv'))
        deviation = float(np.max(np.abs(table[:, header.index('x1')] - example_state(table[:, 0]))))
        check('trajectory_x', deviation, 0.0, 1e-10, deviation <= 1e-10)

        certificate = self.check_pe(order=3)
        value = certificate['min_eigenvalue']
        check('min_eigenvalue', value, EXPECTED_MIN_EIGENVALUE, 1e-3, abs(value - EXPECTED_MIN_EIGENVALUE) <= 1e-3)
        certificate = self.check_pe(order=4)
        check('pe_order_4', certificate['is_pe'], False, None, not certificate['is_pe'])

        for name, rank in self.run_stage(Workbench.REPRODUCE, self.ranks).items():
            check(f'rank_{name}', rank, EXPECTED_RANKS.get(name), 0, rank == EXPECTED_RANKS.get(name))

        model = self.identify()
        error = max(abs(model['A_tilde'][0][0] + 1.0), abs(model['B_tilde'][0][0] - 1.0))
        check('identification', error, 0.0, 1e-8, error <= 1e-8)

        report = self.lqr()
        check('J_star', report['J_star'], EXPECTED_OPTIMAL_VALUE, 5e-4, abs(report['J_star'] - EXPECTED_OPTIMAL_VALUE) <= 5e-4)
        for row in report['rows']:
            N, gap = row['N'], row['gap']
            if N in EXPECTED_GAPS:
                expected = EXPECTED_GAPS[N]
                check(f'gap_N{N}', gap, expected, 0.05, abs(gap - expected) <= 0.05 * expected)
            else:
                check(f'gap_N{N}', gap, 0.0, GAP_FLOOR, -GAP_ROUNDING <= gap <= GAP_FLOOR)

        simulation = self.dd_simulate()
        deviation = simulation['max_deviation']
        check('dd_simulate', deviation, 0.0, 1e-8, deviation <= 1e-8)
        value = self.run_stage(Workbench.REPRODUCE, self.__membership_check)
        check('membership', value, 0.0, 1e-7, value <= 1e-7)

        summary = {'passed': all(c['passed'] for c in checks), 'checks': checks}
        self.bundle.tables['summary'] = checks
        self.__write_json('summary.json', summary)
        logger.info('Reproduction %s.', 'passed' if summary['passed'] else 'failed')
        return summary

    def __membership_check(self) -> float:
        dictionary = self.dictionary(Variant.INPUT_STATE)
        candidate = simulate(
            self.config.build_system(),
            PolynomialInput([[1.0, -1.0, 0.5, 0.25]]),
            [0.3],
            self.trajectory().rule,
            dictionary.L,
            dictionary.K,
        )
        return membership_residual(dictionary, candidate)
