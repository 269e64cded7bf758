"""Text serialization for datasets, models, fit reports and verification reports.

Datasets are comma-separated with a header row; a column named ``label``
holds 1-based component labels. Models and reports are INI-style
key/value documents carrying ``schema_version = 1``. Every float is written
with 17 significant digits, so values survive a round trip exactly and
rewriting a document that was read back reproduces it byte for byte. All
writes go to a temporary file in the target directory that is then renamed
over the destination.
"""

from __future__ import annotations

import configparser
import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .bcd import FitReport, Termination
from .core import Dataset, GmmParams
from .errors import (
    EotMixError,
    InvariantViolation,
    ParseError,
    RaggedRow,
    SchemaVersionMismatch,
)
from .verify import CheckRecord, VerificationReport

SCHEMA_VERSION = "1"
LABEL_COLUMN = "label"


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _format_list(values) -> str:
    return ", ".join(format_float(v) for v in np.ravel(values))


def _parse_list(text: str, key: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros(0)
    try:
        return np.array([float(tok) for tok in text.split(",")])
    except ValueError as exc:
        raise ParseError(f"malformed number list: {exc}", column=key) from exc


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _ini_text(sections: dict[str, dict[str, str]]) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(sections)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _read_ini(path, section: str) -> configparser.SectionProxy:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    if not cp.has_section(section):
        raise ParseError(f"missing [{section}] section")
    sec = cp[section]
    version = sec.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION!r})"
        )
    return sec


def _require(sec: configparser.SectionProxy, key: str) -> str:
    if key not in sec:
        raise ParseError("missing key", column=key)
    return sec[key]


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def dataset_text(data: Dataset) -> str:
    d = data.dimension
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"x{k + 1}" for k in range(d)]
    if data.labels is not None:
        header.append(LABEL_COLUMN)
    writer.writerow(header)
    for i in range(data.n):
        row = [format_float(v) for v in data.points[i]]
        if data.labels is not None:
            row.append(str(int(data.labels[i])))
        writer.writerow(row)
    return buf.getvalue()


def write_dataset(data: Dataset, path) -> None:
    atomic_write_text(path, dataset_text(data))


def read_dataset(path) -> Dataset:
    """Read a comma-separated dataset with a header row.

    Raises:
        ParseError: empty file, missing header, or a cell that is not a
            number (the message names the 1-based data row and the column).
        RaggedRow: a row with the wrong number of cells.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("empty file, header row required")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header")
    label_idx = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
    feature_idx = [k for k in range(len(header)) if k != label_idx]
    if not feature_idx:
        raise ParseError("no feature columns")
    if len(rows) < 2:
        raise ParseError("no data rows")
    points = np.empty((len(rows) - 1, len(feature_idx)))
    labels = np.empty(len(rows) - 1, dtype=np.int64) if label_idx is not None else None
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise RaggedRow(f"expected {len(header)} cells, found {len(row)}", row=i)
        for out_k, k in enumerate(feature_idx):
            try:
                points[i - 1, out_k] = float(row[k])
            except ValueError:
                raise ParseError(f"not a number: {row[k]!r}", row=i, column=header[k]) from None
        if label_idx is not None:
            try:
                labels[i - 1] = int(row[label_idx])
            except ValueError:
                raise ParseError(
                    f"label is not an integer: {row[label_idx]!r}", row=i, column=LABEL_COLUMN
                ) from None
    try:
        return Dataset(points, labels)
    except EotMixError as exc:
        raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def _model_section(params: GmmParams) -> dict[str, str]:
    K, d = params.means.shape
    sec = {
        "schema_version": SCHEMA_VERSION,
        "components": str(K),
        "dimension": str(d),
        "weights": _format_list(params.weights.weights),
    }
    for j in range(K):
        sec[f"mean_{j + 1}"] = _format_list(params.means[j])
    for k in range(d):
        sec[f"covariance_{k + 1}"] = _format_list(params.covariance[k])
    return sec


def model_text(params: GmmParams) -> str:
    return _ini_text({"model": _model_section(params)})


def write_model(params: GmmParams, path) -> None:
    atomic_write_text(path, model_text(params))


def read_model(path) -> GmmParams:
    """Read a model document.

    Raises:
        SchemaVersionMismatch: unknown ``schema_version``.
        ParseError: missing keys or malformed numbers.
        InvariantViolation: values that do not form valid parameters
            (asymmetric or indefinite covariance, weights off the simplex).
    """
    sec = _read_ini(path, "model")
    try:
        K = int(_require(sec, "components"))
        d = int(_require(sec, "dimension"))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    weights = _parse_list(_require(sec, "weights"), "weights")
    means = np.array([_parse_list(_require(sec, f"mean_{j + 1}"), f"mean_{j + 1}") for j in range(K)])
    cov = np.array(
        [_parse_list(_require(sec, f"covariance_{k + 1}"), f"covariance_{k + 1}") for k in range(d)]
    )
    if weights.shape != (K,) or means.shape != (K, d) or cov.shape != (d, d):
        raise InvariantViolation("array sizes do not match components/dimension")
    try:
        return GmmParams(means, cov, weights)
    except (EotMixError, ValueError) as exc:
        raise InvariantViolation(str(exc)) from exc


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def fit_report_text(report: FitReport) -> str:
    return _ini_text(
        {
            "fit_report": {
                "schema_version": SCHEMA_VERSION,
                "sweeps_used": str(report.sweeps_used),
                "converged": str(report.converged).lower(),
                "termination_reason": report.termination_reason.value,
                "initial_nll": format_float(report.initial_nll),
                "nll_trajectory": _format_list(report.nll_trajectory),
                "eot_value_trajectory": _format_list(report.eot_value_trajectory),
            },
            "final_model": _model_section(report.final_params),
        }
    )


def write_fit_report(report: FitReport, path) -> None:
    atomic_write_text(path, fit_report_text(report))


def read_fit_report(path) -> FitReport:
    sec = _read_ini(path, "fit_report")
    cp = sec.parser
    if not cp.has_section("final_model"):
        raise ParseError("missing [final_model] section")
    m = cp["final_model"]
    K, d = int(m["components"]), int(m["dimension"])
    params = GmmParams(
        np.array([_parse_list(m[f"mean_{j + 1}"], "mean") for j in range(K)]),
        np.array([_parse_list(m[f"covariance_{k + 1}"], "covariance") for k in range(d)]),
        _parse_list(m["weights"], "weights"),
    )
    return FitReport(
        final_params=params,
        nll_trajectory=tuple(_parse_list(sec["nll_trajectory"], "nll_trajectory")),
        eot_value_trajectory=tuple(_parse_list(sec["eot_value_trajectory"], "eot_value_trajectory")),
        sweeps_used=int(sec["sweeps_used"]),
        converged=sec.getboolean("converged"),
        termination_reason=Termination(sec["termination_reason"]),
        initial_nll=float(sec["initial_nll"]),
    )


def verification_report_text(report: VerificationReport) -> str:
    sections = {
        "verification": {
            "schema_version": SCHEMA_VERSION,
            "seed": str(report.seed),
            "trials": str(report.trials),
            "passed": str(report.passed).lower(),
        }
    }
    for rec in report.checks:
        sec = {
            "instances_run": str(rec.instances_run),
            "max_residual": format_float(rec.max_residual),
            "tolerance": format_float(rec.tolerance),
            "passed": str(rec.passed).lower(),
        }
        for key, value in rec.observations.items():
            sec[f"observed_{key}"] = format_float(value)
        sections[f"check {rec.name}"] = sec
    return _ini_text(sections)


def write_verification_report(report: VerificationReport, path) -> None:
    atomic_write_text(path, verification_report_text(report))


def read_verification_report(path) -> VerificationReport:
    sec = _read_ini(path, "verification")
    cp = sec.parser
    checks = []
    for name in cp.sections():
        if not name.startswith("check "):
            continue
        s = cp[name]
        obs = {k[len("observed_"):]: float(v) for k, v in s.items() if k.startswith("observed_")}
        checks.append(
            CheckRecord(
                name=name[len("check "):],
                instances_run=int(s["instances_run"]),
                max_residual=float(s["max_residual"]),
                tolerance=float(s["tolerance"]),
                passed=s.getboolean("passed"),
                observations=obs,
            )
        )
    return VerificationReport(checks, int(sec["seed"]), int(sec["trials"]))
