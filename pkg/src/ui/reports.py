"""
Text reports, the machine-readable run record, and plot-ready series.
"""
import numpy as np
import pandas as pd
import yaml

from engine.wavelet_engine import level_table
from utils.file_io import write_atomic, write_text_atomic

RULE = "=" * 72


def _floats(values):
    return [float(v) for v in np.asarray(values, dtype=float)]


def _ints(values):
    return [int(v) for v in np.asarray(values)]


def format_vector(values, decimals=4):
    values = np.asarray(values)
    if np.issubdtype(values.dtype, np.integer):
        return "(" + ", ".join(str(int(v)) for v in values) + ")"
    return "(" + ", ".join(f"{float(v):.{decimals}f}" for v in values) + ")"


def _result_record(result):
    record = {
        "original": _ints(result.original) if np.all(result.original == np.round(result.original)) else _floats(result.original),
        "original_coeffs": _floats(result.original_coeffs),
        "new_coeffs": _floats(result.new_coeffs),
        "extrema": list(result.extrema),
        "new_approx": _floats(result.new_approx),
        "raw_masked": _floats(result.raw_masked),
        "offset": float(result.offset),
        "scale": float(result.scale),
        "masked_real": _floats(result.masked_real),
        "masked_int": _ints(result.masked_int),
        "detail_ratio": float(result.detail_ratio),
        "max_detail_deviation": float(result.max_detail_deviation),
    }
    if result.solved_concentration is not None:
        record["solved_concentration"] = _floats(result.solved_concentration)
    return record


def build_run_record(config, outcome):
    """Everything needed to replay a mask run without its config file."""
    record = {
        "name": config.name,
        "mode": config.mode,
        "wavelet": {"family": "daubechies", "order": config.wavelet_order, "level": config.level},
        "strategy": config.strategy.describe(),
        "extrema": None if config.extrema is None else list(config.extrema),
        "extremum_threshold": float(config.extremum_threshold),
        "offset_requested": config.offset,
        "rounding": config.rounding,
        "policy": config.policy if isinstance(config.policy, str) else list(config.policy),
        "seed": config.seed,
        "labels": list(outcome["labels"]),
        "inputs": {name: (_floats(v)) for name, v in outcome["inputs"].items()},
        "results": {side: _result_record(result) for side, result in outcome["results"].items()},
    }
    if outcome.get("microfile") is not None:
        microfile = outcome["microfile"]
        record["microfile"] = {
            "input": microfile.source_path,
            "output": str(config.output_path),
            "records": microfile.record_count,
            "redistribution_mode": config.redistribution_mode,
            "plans": {
                side: {"vital_moves": plan.vital_moves, "partner_moves": plan.partner_moves, "deltas": dict(plan.deltas)}
                for side, plan in outcome["plans"].items()
            },
            "audits": {side: report.as_dict() for side, report in outcome["audits"].items()},
        }
    return record


def write_run_record(record, path):
    write_text_atomic(path, yaml.safe_dump(record, sort_keys=False, default_flow_style=None, width=120))


def load_run_record(path):
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def render_mask_report(config, outcome):
    lines = [
        RULE,
        f"GROUP ANONYMITY RUN: {config.name} ({config.mode} mode)",
        RULE,
        f"Wavelet: db{config.wavelet_order}, level {config.level}",
        f"Strategy: {config.strategy.kind}",
        f"Rounding: {config.rounding}",
        f"Parameter values: {', '.join(outcome['labels'])}",
    ]
    for side, result in outcome["results"].items():
        lines += [
            "",
            f"[{side}]",
            f"  Original signal:        {format_vector(np.asarray(result.original))}",
            f"  Approximation coeffs:   {format_vector(result.original_coeffs)}",
            f"  Extremal coefficients:  {list(result.extrema)}",
            f"  New coeffs:             {format_vector(result.new_coeffs)}",
            f"  Masked signal (raw):    {format_vector(result.raw_masked)}",
            f"  Offset:                 {result.offset:g}",
            f"  Scale:                  {result.scale:.4f}",
            f"  Masked signal (real):   {format_vector(result.masked_real)}",
            f"  Masked signal (final):  {format_vector(result.masked_int)}",
            f"  Detail ratio:           {result.detail_ratio:.4f} (max deviation {result.max_detail_deviation:.3g})",
        ]
    if outcome.get("microfile") is not None:
        lines += ["", f"Microfile: {outcome['microfile'].record_count} records -> {config.output_path}"]
        for side, plan in outcome["plans"].items():
            lines.append(
                f"  {side}: {plan.vital_moves} vital moves, {plan.partner_moves} partner moves ({plan.mode})"
            )
        for side, report in outcome["audits"].items():
            lines.append(f"  audit {side}: {'PASS' if report.passed else 'FAIL'}")
            lines.extend(f"    - {failure}" for failure in report.failures)
    lines.append(RULE)
    return "\n".join(lines) + "\n"


def render_inspection(config, outcome):
    decomposition = outcome["decomposition"]
    lines = [
        RULE,
        f"SIGNAL INSPECTION: {config.name} ({outcome['flavor']} signal)",
        RULE,
        f"Wavelet: db{config.wavelet_order}, level {config.level}",
        f"Parameter values: {', '.join(outcome['labels'])}",
        f"Signal:  {format_vector(outcome['signal'])}",
        f"a_{decomposition.level}:     {format_vector(decomposition.approx_coeffs)}",
    ]
    for name, series in level_table(decomposition):
        lines.append(f"{name}:     {format_vector(series)}")
    lines.append(f"Extremal approximation coefficients: {outcome['extrema']}")
    lines.append(RULE)
    return "\n".join(lines) + "\n"


def render_verification(outcome):
    lines = [
        RULE,
        "VERIFICATION",
        RULE,
        f"Detail ratio:       {outcome['ratio']:.4f}",
        f"Max deviation:      {outcome['deviation']:.4f}",
    ]
    if outcome["bound"] is not None:
        lines.append(f"Deviation bound:    {outcome['bound']:.4f}")
    for side, report in outcome["audits"].items():
        lines.append(f"Audit {side}: {'PASS' if report.passed else 'FAIL'}"
                     f" ({report.edited_records if report.edited_records is not None else 'n/a'} records edited)")
        lines.extend(f"  - {failure}" for failure in report.failures)
    lines.append(f"Result: {'PASS' if outcome['passed'] else 'FAIL'}")
    lines.append(RULE)
    return "\n".join(lines) + "\n"


def decomposition_frame(labels, signal, decomposition):
    """Columns: parameter_value, signal, A_k, D_1..D_k."""
    frame = pd.DataFrame({"parameter_value": list(labels), "signal": _floats(signal)})
    for name, series in level_table(decomposition):
        frame[name] = _floats(series)
    return frame


def comparison_frame(labels, results):
    frame = pd.DataFrame({"parameter_value": list(labels)})
    for side, result in results.items():
        prefix = "" if len(results) == 1 else f"{side}_"
        frame[f"{prefix}original"] = _floats(result.original)
        frame[f"{prefix}masked_real"] = _floats(result.masked_real)
        frame[f"{prefix}masked_int"] = _ints(result.masked_int)
    return frame


def write_plot_series(frame, path):
    write_atomic(path, lambda tmp: frame.to_csv(tmp, index=False, lineterminator="\n", float_format="%.10g"))
