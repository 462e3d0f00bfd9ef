"""File formats: long-format panel CSV, TE CSV, scenario/grid JSON, reports.

Every writer embeds the tool version, the issuing command, and the effective
seed (as '#' comment lines in CSV, a "meta" object in JSON) and writes
atomically (temp file + rename). No timestamps, so identical runs produce
identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import asdict

import numpy as np

from . import __version__
from .assumption_tests import TestReport
from .errors import DataError, ValidationError
from .estimation import EstimationResult
from .power import GridSpec, PowerTable
from .types import ModelParams, PanelDataset, Scenario


def _meta_lines(meta: dict | None) -> list[str]:
    meta = dict(meta or {})
    meta.setdefault("version", __version__)
    return [f"# {key}: {meta[key]}" for key in meta]


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# panel CSV


def write_panel_csv(panel: PanelDataset, path: str, meta: dict | None = None) -> None:
    """Long format: one row per (unit, period); y is written on the raw scale."""
    p, q, r = panel.n_inputs, panel.n_spatial, panel.n_covariates
    header = (
        ["unit", "period", "y"]
        + [f"x{j + 1}" for j in range(p)]
        + [f"w{j + 1}" for j in range(q)]
        + [f"z{j + 1}" for j in range(r)]
    )
    buf = io.StringIO()
    for line in _meta_lines(meta):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    y = np.exp(panel.log_output)
    for i, unit in enumerate(panel.unit_ids):
        for t, period in enumerate(panel.period_ids):
            row = [str(unit), str(period), _fmt(y[i, t])]
            row += [_fmt(v) for v in np.exp(panel.log_inputs[i, t])]
            row += [_fmt(v) for v in panel.spatial[i, t]]
            row += [_fmt(v) for v in panel.covariates[i, t]]
            writer.writerow(row)
    _atomic_write(path, buf.getvalue())


_HEADER_RE = re.compile(r"^(x|w|z)(\d+)$")


def _parse_header(fields: list[str]) -> tuple[int, int, int]:
    if fields[:3] != ["unit", "period", "y"]:
        raise DataError(
            f"panel CSV must start with columns unit,period,y; got {fields[:3]}"
        )
    counts = {"x": 0, "w": 0, "z": 0}
    order = "xwz"
    seen_kind = 0
    for name in fields[3:]:
        match = _HEADER_RE.match(name)
        if not match:
            raise DataError(f"unknown column {name!r} in panel CSV header")
        kind, num = match.group(1), int(match.group(2))
        kind_pos = order.index(kind)
        if kind_pos < seen_kind:
            raise DataError(f"column {name!r} out of order; expected x*, then w*, then z*")
        seen_kind = kind_pos
        counts[kind] += 1
        if num != counts[kind]:
            raise DataError(
                f"column {name!r} out of order; expected {kind}{counts[kind]}"
            )
    if counts["x"] < 1 or counts["w"] < 1 or counts["z"] < 1:
        raise DataError(
            "panel CSV needs at least one x, one w, and one z column; "
            f"found P={counts['x']}, Q={counts['w']}, R={counts['z']}"
        )
    return counts["x"], counts["w"], counts["z"]


def read_panel_csv(path: str) -> PanelDataset:
    """Parse and validate a long-format panel CSV; y is converted to ln y."""
    rows: dict[tuple[str, str], list[float]] = {}
    units: list[str] = []
    periods: list[str] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = None
        p = q = r = 0
        for lineno, fields in enumerate(reader, start=1):
            if not fields or fields[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = fields
                p, q, r = _parse_header(fields)
                continue
            if len(fields) != 3 + p + q + r:
                raise DataError(
                    f"row {lineno}: expected {3 + p + q + r} fields, got {len(fields)}"
                )
            unit, period = fields[0], fields[1]
            try:
                values = [float(v) for v in fields[2:]]
            except ValueError as err:
                raise DataError(f"row {lineno}: malformed number: {err}") from err
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"row {lineno}: non-finite value")
            if values[0] <= 0:
                raise DataError(
                    f"row {lineno}: output must be positive to take logs, got y={values[0]!r}"
                )
            for j, x_val in enumerate(values[1 : 1 + p], start=1):
                if x_val <= 0:
                    raise DataError(
                        f"row {lineno}: input x{j} must be positive to take logs, "
                        f"got {x_val!r}"
                    )
            key = (unit, period)
            if key in rows:
                raise DataError(f"row {lineno}: duplicate cell (unit {unit}, period {period})")
            rows[key] = values
            if unit not in units:
                units.append(unit)
            if period not in periods:
                periods.append(period)
    if header is None:
        raise DataError(f"{path}: no header row found")

    for unit in units:
        for period in periods:
            if (unit, period) not in rows:
                raise DataError(
                    f"unbalanced panel: missing cell (unit {unit}, period {period})"
                )

    n, t = len(units), len(periods)
    log_output = np.empty((n, t))
    log_inputs = np.empty((n, t, p))
    spatial = np.empty((n, t, q))
    covariates = np.empty((n, t, r))
    for i, unit in enumerate(units):
        for j, period in enumerate(periods):
            vals = rows[(unit, period)]
            log_output[i, j] = math.log(vals[0])
            log_inputs[i, j] = np.log(vals[1 : 1 + p])
            spatial[i, j] = vals[1 + p : 1 + p + q]
            covariates[i, j] = vals[1 + p + q :]
    return PanelDataset(
        log_output=log_output,
        log_inputs=log_inputs,
        spatial=spatial,
        covariates=covariates,
        unit_ids=tuple(units),
        period_ids=tuple(periods),
    )


# ---------------------------------------------------------------------------
# TE CSV


def write_te_csv(
    te: np.ndarray, unit_ids, period_ids, path: str, meta: dict | None = None
) -> None:
    buf = io.StringIO()
    for line in _meta_lines(meta):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["unit", "period", "te"])
    for i, unit in enumerate(unit_ids):
        for t, period in enumerate(period_ids):
            writer.writerow([str(unit), str(period), _fmt(te[i, t])])
    _atomic_write(path, buf.getvalue())


def read_te_csv(path: str) -> tuple[np.ndarray, tuple, tuple]:
    """Read a TE CSV back into an (N, T) matrix plus its labels."""
    cells: dict[tuple[str, str], float] = {}
    units: list[str] = []
    periods: list[str] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = None
        for lineno, fields in enumerate(reader, start=1):
            if not fields or fields[0].lstrip().startswith("#"):
                continue
            if header is None:
                if fields != ["unit", "period", "te"]:
                    raise DataError(f"TE CSV must have header unit,period,te; got {fields}")
                header = fields
                continue
            if len(fields) != 3:
                raise DataError(f"row {lineno}: expected 3 fields, got {len(fields)}")
            try:
                value = float(fields[2])
            except ValueError as err:
                raise DataError(f"row {lineno}: malformed number: {err}") from err
            key = (fields[0], fields[1])
            if key in cells:
                raise DataError(f"row {lineno}: duplicate cell {key}")
            cells[key] = value
            if fields[0] not in units:
                units.append(fields[0])
            if fields[1] not in periods:
                periods.append(fields[1])
    if header is None:
        raise DataError(f"{path}: no header row found")
    te = np.empty((len(units), len(periods)))
    for i, unit in enumerate(units):
        for t, period in enumerate(periods):
            if (unit, period) not in cells:
                raise DataError(f"unbalanced TE matrix: missing cell (unit {unit}, period {period})")
            te[i, t] = cells[(unit, period)]
    return te, tuple(units), tuple(periods)


# ---------------------------------------------------------------------------
# scenario / grid JSON


def scenario_to_dict(scenario: Scenario) -> dict:
    out = asdict(scenario)
    out["base_params"] = asdict(scenario.base_params)
    return out


def scenario_from_dict(data: dict) -> Scenario:
    data = dict(data)
    params = data.pop("base_params", None)
    try:
        base = ModelParams(**params) if params is not None else ModelParams()
        return Scenario(base_params=base, **data)
    except TypeError as err:
        raise DataError(f"bad scenario JSON: {err}") from err


def read_scenario_json(path: str) -> Scenario:
    with open(path) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}: invalid JSON: {err}") from err
    if not isinstance(data, dict):
        raise DataError(f"{path}: scenario JSON must be an object")
    data.pop("meta", None)
    return scenario_from_dict(data)


def write_scenario_json(scenario: Scenario, path: str, meta: dict | None = None) -> None:
    payload: dict = {}
    if meta is not None:
        payload["meta"] = {"version": __version__, **meta}
    payload.update(scenario_to_dict(scenario))
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def grid_from_dict(data: dict) -> GridSpec:
    data = dict(data)
    data.pop("meta", None)
    params = data.pop("base_params", None)
    kwargs: dict = {}
    list_fields = {
        "test_kinds": str,
        "n_values": int,
        "t_values": int,
        "dominances": str,
        "fractions": float,
        "shifts": float,
    }
    for name, cast in list_fields.items():
        if name in data:
            kwargs[name] = tuple(cast(v) for v in data.pop(name))
    for name in ("boot_k", "alpha", "ar_order_p", "series_source", "te_source"):
        if name in data:
            kwargs[name] = data.pop(name)
    if data:
        raise DataError(f"unknown grid fields: {sorted(data)}")
    from .power import default_power_params

    base = ModelParams(**params) if params is not None else default_power_params()
    try:
        return GridSpec(base_params=base, **kwargs)
    except TypeError as err:
        raise DataError(f"bad grid JSON: {err}") from err


def read_grid_json(path: str) -> GridSpec:
    with open(path) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}: invalid JSON: {err}") from err
    if not isinstance(data, dict):
        raise DataError(f"{path}: grid JSON must be an object")
    return grid_from_dict(data)


# ---------------------------------------------------------------------------
# reports


def estimation_report_dict(result: EstimationResult, meta: dict | None = None) -> dict:
    frontier = result.frontier
    return {
        "meta": {"version": __version__, **(meta or {})},
        "beta0_hat": frontier.beta0_hat,
        "beta_hat": list(frontier.beta_hat),
        "rho_hat": frontier.rho_hat,
        "gamma_hat": list(result.gamma_hat),
        "phi_hat": list(result.phi_hat),
        "iterations": frontier.iterations,
        "converged": frontier.converged,
        "clamp_count": result.clamp_count,
        "clamp_fraction": result.clamp_fraction,
        "clamp_flagged": result.clamp_flagged,
    }


def test_report_dict(report: TestReport, meta: dict | None = None) -> dict:
    return {
        "meta": {"version": __version__, **(meta or {})},
        "test_kind": report.test_kind,
        "reference_value": report.reference_value,
        "n_failing": report.n_failing,
        "reject": report.reject,
        "decision_rule": report.decision_rule,
        "alpha": report.alpha,
        "blocks": [
            {
                "label": str(label),
                "estimate": est,
                "interval": [lo, hi],
                "excludes_reference": bool(
                    report.reference_value < lo or report.reference_value > hi
                ),
            }
            for label, est, (lo, hi) in zip(
                report.block_labels, report.per_block_estimate, report.per_block_interval
            )
        ],
    }


def write_json(payload: dict, path: str) -> None:
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def write_power_csv(table: PowerTable, path: str, meta: dict | None = None) -> None:
    lines = _meta_lines(meta) + table.csv_rows()
    _atomic_write(path, "\n".join(lines) + "\n")
