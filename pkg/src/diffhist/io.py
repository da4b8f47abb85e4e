"""Reading samples and writing histograms, reports and traces.

Every write goes to a temporary file in the destination directory and is
then renamed into place, so a failed write never leaves a partial file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from contextlib import contextmanager
from typing import Optional, Tuple

from .benchmark import ErrorReport
from .core import (BinSpec, HistogramVector, Provenance, SampleBatch, ValidationError)
from .train import TrainTrace


@contextmanager
def atomic_writer(path: str, newline: Optional[str] = None):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline=newline) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_json(obj, path: str) -> None:
    with atomic_writer(path) as f:
        json.dump(obj, f, indent=2, allow_nan=False)
        f.write("\n")


def read_json(path: str):
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None


def read_config_document(path: str):
    """A JSON file, or the ``#`` header line of a sample file written by ``synth``."""
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    if first.startswith("#"):
        try:
            return json.loads(first[1:])
        except json.JSONDecodeError:
            raise ValidationError(f"{path}: header line is not a JSON config") from None
    return read_json(path)


def parse_samples(text: str, source: str = "<input>") -> SampleBatch:
    """One decimal value per line; line 1 may be a ``#`` header; blank lines are skipped."""
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if lineno == 1:
                continue
            raise ValidationError(f"{source}: line {lineno}: header allowed only on line 1")
        try:
            v = float(s)
        except ValueError:
            raise ValidationError(f"{source}: line {lineno}: not a number: {s!r}") from None
        if not math.isfinite(v):
            raise ValidationError(f"{source}: line {lineno}: non-finite value {s!r}")
        values.append(v)
    return SampleBatch(values, Provenance.FILE)


def read_samples(path: str) -> SampleBatch:
    with open(path, encoding="utf-8") as f:
        return parse_samples(f.read(), path)


def write_samples(batch: SampleBatch, path: str, header: Optional[dict] = None) -> None:
    with atomic_writer(path) as f:
        if header is not None:
            f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for v in batch.values.tolist():
            f.write(repr(v) + "\n")


def histogram_document(h: HistogramVector, bins: BinSpec, kernel: str,
                       config: Optional[dict] = None) -> dict:
    return {
        "bins": bins.to_dict(),
        "values": h.values.tolist(),
        "normalization": h.normalization.value,
        "kernel": kernel,
        "n_samples": h.n_samples,
        "config": config or {},
    }


def write_histogram(h: HistogramVector, bins: BinSpec, path: str, kernel: str = "",
                    config: Optional[dict] = None) -> None:
    write_json(histogram_document(h, bins, kernel or h.meta.get("kernel", ""), config), path)


def read_histogram(path: str) -> Tuple[HistogramVector, BinSpec, dict]:
    doc = read_json(path)
    try:
        bins = BinSpec.from_dict(doc["bins"])
        h = HistogramVector(doc["values"], doc["normalization"], int(doc["n_samples"]),
                            meta={"kernel": doc.get("kernel", "")})
    except (KeyError, TypeError) as e:
        raise ValidationError(f"{path}: not a histogram document ({e})") from None
    if len(h) != bins.n_bins:
        raise ValidationError(f"{path}: {len(h)} values for {bins.n_bins} bins")
    return h, bins, doc.get("config", {})


def write_report(report: ErrorReport, path: str) -> None:
    write_json(report.to_dict(), path)


def write_per_bin_csv(report: ErrorReport, path: str) -> None:
    fields = ["bin_index", "center", "oracle", "histlayer", "lbf", "rbf", "kde"]
    with atomic_writer(path, newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for row in report.per_bin_table():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def trace_csv_text(trace: TrainTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "loss", "grad_norm"])
    for step, loss, gnorm in trace.records():
        w.writerow([step, repr(loss), repr(gnorm)])
    return buf.getvalue()


def write_trace_csv(trace: TrainTrace, path: str) -> None:
    with atomic_writer(path, newline="") as f:
        f.write(trace_csv_text(trace))
