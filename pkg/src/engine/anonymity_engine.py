import logging
from pathlib import Path

import numpy as np

from engine.errors import ConfigError, InfeasibleTarget
from engine.masking_pipeline import (
    detect_extrema,
    mask_concentration,
    mask_difference,
    mask_quantity,
    verify_detail_fidelity,
)
from engine.signal_builder import (
    build_concentration_signal,
    build_difference_signal,
    build_group_totals,
    build_quantity_signal,
)
from engine.wavelet_engine import QUANTITY, Signal, as_vector, daubechies, decompose, level_table
from ui import charts, reports
from utils.file_io import write_text_atomic
from utils.microdata_store import (
    DENOMINATOR_PRESERVING,
    apply_plan,
    audit,
    load_csv,
    plan_redistribution,
    save_csv,
)
from utils.run_config import CONCENTRATION_MODE, DIFFERENCE_MODE, QUANTITY_MODE

logger = logging.getLogger(__name__)


class AnonymityEngine:
    def __init__(self):
        self.progress_callback = None

    def _progress(self, percent, message):
        logger.debug("[%3d%%] %s", percent, message)
        if self.progress_callback:
            self.progress_callback(percent, message)

    def _collect_signals(self, config, microfile=None):
        """Quantity signals and totals, counted from the microfile or taken from the config."""
        if microfile is not None:
            if config.mode == DIFFERENCE_MODE:
                main, subordinate = config.paired.main, config.paired.subordinate
                return {
                    'main': build_quantity_signal(microfile, main, config.strict),
                    'subordinate': build_quantity_signal(microfile, subordinate, config.strict),
                    'totals': build_group_totals(microfile, main, config.strict),
                }
            signals = {'quantity': build_quantity_signal(microfile, config.group, config.strict)}
            if config.mode == CONCENTRATION_MODE:
                signals['totals'] = build_group_totals(microfile, config.group, config.strict)
            return signals

        embedded = config.signals
        signals = {}
        for name in embedded.series:
            if name == 'totals':
                signals[name] = embedded.vector(name)
            else:
                signals[name] = Signal(embedded.vector(name), embedded.labels, QUANTITY)
        return signals

    def _mask_signals(self, config, signals):
        f = daubechies(config.wavelet_order)
        options = dict(
            rounding=config.rounding,
            extrema=config.extrema,
            extremum_threshold=config.extremum_threshold,
        )
        if config.mode == QUANTITY_MODE:
            result = mask_quantity(signals['quantity'], f, config.level, config.strategy,
                                   offset=config.offset, **options)
            return {'quantity': result}
        if config.mode == CONCENTRATION_MODE:
            result = mask_concentration(signals['quantity'], signals['totals'], f, config.level, config.strategy,
                                        offset=config.offset, **options)
            return {'quantity': result}
        main, subordinate = mask_difference(signals['main'], signals['subordinate'], signals['totals'], f,
                                            config.level, config.strategy, policy=config.policy, **options)
        return {'main': main, 'subordinate': subordinate}

    def _realize(self, config, microfile, results):
        """Plan, apply and audit record edits for every masked side."""
        if config.mode == DIFFERENCE_MODE:
            specs = {'main': config.paired.main, 'subordinate': config.paired.subordinate}
        else:
            specs = {'quantity': config.group}

        check_denominator = config.redistribution_mode == DENOMINATOR_PRESERVING
        plans, audits = {}, {}
        current = microfile
        for side, spec in specs.items():
            frozen = tuple(other for name, other in specs.items() if name != side)
            plan = plan_redistribution(current, spec, results[side].masked_int, mode=config.redistribution_mode,
                                       seed=config.seed, frozen=frozen)
            current = apply_plan(current, plan)
            plans[side] = plan

        for side, spec in specs.items():
            report = audit(microfile, current, spec, target=results[side].masked_int,
                           check_denominator=check_denominator)
            audits[side] = report
            if not report.passed:
                failed = report.mismatched_buckets[0][0] if report.mismatched_buckets else None
                raise InfeasibleTarget(f"{side} audit failed: {'; '.join(report.failures)}", bucket=failed)
        return current, plans, audits

    def run_mask(self, config, progress_callback=None):
        """
        Mask the configured signals and, for a microfile run, rewrite the records.

        Returns:
            dict with labels, inputs, results, and for microfile runs the
            microfile, plans and audits; plus the paths written
        """
        self.progress_callback = progress_callback

        microfile = None
        if config.uses_microfile:
            self._progress(5, f"Loading microfile {config.input_path}...")
            microfile = load_csv(config.input_path)

        self._progress(20, "Building signals...")
        signals = self._collect_signals(config, microfile)

        self._progress(40, f"Masking {config.mode} signal with db{config.wavelet_order} level {config.level}...")
        results = self._mask_signals(config, signals)
        first = next(iter(results.values()))

        outcome = {
            'labels': first.labels,
            'inputs': {name: as_vector(signal) for name, signal in signals.items()},
            'results': results,
            'microfile': None,
            'paths': {},
        }

        if microfile is not None:
            self._progress(60, "Planning record redistribution...")
            masked, plans, audits = self._realize(config, microfile, results)
            outcome.update(microfile=microfile, plans=plans, audits=audits)
            save_csv(masked, config.output_path)
            outcome['paths']['output'] = config.output_path

        self._progress(85, "Writing report and run record...")
        report_text = reports.render_mask_report(config, outcome)
        write_text_atomic(config.report_path, report_text)
        reports.write_run_record(reports.build_run_record(config, outcome), config.record_path)
        outcome['paths'].update(report=config.report_path, record=config.record_path)
        outcome['report'] = report_text

        if config.plot_path is not None:
            reports.write_plot_series(reports.comparison_frame(first.labels, results), config.plot_path)
            outcome['paths']['plot'] = config.plot_path
        if config.chart_path is not None:
            series = {}
            for side, result in results.items():
                prefix = '' if len(results) == 1 else f"{side} "
                series[f"{prefix}original"] = result.original
                series[f"{prefix}masked"] = result.masked_int
            charts.plot_signal_comparison(first.labels, series, f"{config.name}: before and after masking",
                                          config.chart_path)
            outcome['paths']['chart'] = config.chart_path

        self._progress(100, "Masking complete!")
        return outcome

    def _inspected_signal(self, config, signals):
        if config.mode == QUANTITY_MODE:
            return signals['quantity']
        if config.mode == CONCENTRATION_MODE:
            return build_concentration_signal(signals['quantity'], signals['totals'])
        return build_difference_signal(
            build_concentration_signal(signals['main'], signals['totals']),
            build_concentration_signal(signals['subordinate'], signals['totals']),
        )

    def run_inspect(self, config, progress_callback=None):
        """Decompose the mode's signal and flag extremal approximation coefficients."""
        self.progress_callback = progress_callback
        microfile = load_csv(config.input_path) if config.uses_microfile else None
        signal = self._inspected_signal(config, self._collect_signals(config, microfile))

        self._progress(50, f"Decomposing {signal.flavor} signal...")
        decomposition = decompose(signal, daubechies(config.wavelet_order), config.level)
        extrema = list(config.extrema) if config.extrema is not None else detect_extrema(
            decomposition.approx_coeffs, config.extremum_threshold
        )
        outcome = {
            'flavor': signal.flavor,
            'labels': signal.labels,
            'signal': signal.values,
            'decomposition': decomposition,
            'extrema': extrema,
            'paths': {},
        }
        outcome['report'] = reports.render_inspection(config, outcome)

        if config.plot_path is not None:
            frame = reports.decomposition_frame(signal.labels, signal.values, decomposition)
            reports.write_plot_series(frame, config.plot_path)
            outcome['paths']['plot'] = config.plot_path
        if config.chart_path is not None:
            charts.plot_decomposition(signal.labels, signal.values, level_table(decomposition),
                                      f"{config.name}: level {decomposition.level} decomposition",
                                      config.chart_path)
            outcome['paths']['chart'] = config.chart_path
        self._progress(100, "Inspection complete!")
        return outcome

    def _record_targets(self, config, record_path):
        path = record_path or config.record_path
        if path is None or not Path(path).exists():
            return {}
        record = reports.load_run_record(path)
        return {side: np.array(block['masked_int'], dtype=np.int64)
                for side, block in (record.get('results') or {}).items()}

    def run_verify(self, config, original_path, masked_path, record_path=None):
        """
        Recompute signals from both microfiles and check fidelity and the audit.

        The deviation bound is deviation_factor x (1 + ratio) in counts; for
        concentrations it is scaled by the largest 1 / total. Difference runs
        report the fitted ratio without a bound.
        """
        if not config.uses_microfile:
            raise ConfigError("verify needs a config with a microfile 'input' group")

        before = load_csv(original_path)
        after = load_csv(masked_path)
        targets = self._record_targets(config, record_path)
        f = daubechies(config.wavelet_order)
        check_denominator = config.redistribution_mode == DENOMINATOR_PRESERVING

        if config.mode == DIFFERENCE_MODE:
            specs = {'main': config.paired.main, 'subordinate': config.paired.subordinate}
        else:
            specs = {'quantity': config.group}
        audits = {
            side: audit(before, after, spec, target=targets.get(side), check_denominator=check_denominator)
            for side, spec in specs.items()
        }

        signals_before = self._collect_signals(config, before)
        signals_after = self._collect_signals(config, after)
        bound = None
        if config.mode == QUANTITY_MODE:
            ratio, deviation = verify_detail_fidelity(signals_before['quantity'], signals_after['quantity'],
                                                      f, config.level)
            bound = config.deviation_factor * (1.0 + abs(ratio))
        elif config.mode == CONCENTRATION_MODE:
            c_before = self._inspected_signal(config, signals_before)
            c_after = self._inspected_signal(config, signals_after)
            ratio, deviation = verify_detail_fidelity(c_before, c_after, f, config.level)
            totals = as_vector(signals_before['totals'])
            nonzero = totals[totals > 0]
            inverse = float(np.max(1.0 / nonzero)) if nonzero.size else 1.0
            bound = config.deviation_factor * (1.0 + abs(ratio)) * inverse
        else:
            ratio, deviation = verify_detail_fidelity(self._inspected_signal(config, signals_before),
                                                      self._inspected_signal(config, signals_after),
                                                      f, config.level)

        passed = all(report.passed for report in audits.values()) and (bound is None or deviation <= bound)
        outcome = {'ratio': ratio, 'deviation': deviation, 'bound': bound, 'audits': audits, 'passed': passed}
        outcome['report'] = reports.render_verification(outcome)
        logger.info("Verification %s (ratio %.4f, deviation %.4f)", 'passed' if passed else 'failed',
                    ratio, deviation)
        return outcome
