"""Trial records, JSONL/CSV persistence, Wilson intervals, and the
canonical configuration hash embedded in every output file.

Output schemas (version 1):
  * trial records: one JSON document per line, fields in fixed order
    (config_hash, seed, trial, n, sup_error_sot, sup_error_wot,
    sup_error_form, grid_errors);
  * summary tables: CSV with a leading ``# config_hash=... seed=...``
    comment line and header
    n,median_error,q10,q90,tail_freq,wilson_lo,wilson_hi.
"""

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1
_WILSON_Z95 = 1.959963984540054


@dataclass
class TrialRecord:
    """Per-trial measurement of the sup error over the time grid."""

    seed: int
    trial: int
    n: int
    sup_error_sot: float
    sup_error_wot: float | None = None
    sup_error_form: float | None = None
    grid_errors: list = field(default_factory=list)

    def to_json_dict(self, config_hash: str) -> dict:
        return {
            "config_hash": config_hash,
            "seed": self.seed,
            "trial": self.trial,
            "n": self.n,
            "sup_error_sot": self.sup_error_sot,
            "sup_error_wot": self.sup_error_wot,
            "sup_error_form": self.sup_error_form,
            "grid_errors": list(self.grid_errors),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrialRecord":
        return cls(seed=doc["seed"], trial=doc["trial"], n=doc["n"],
                   sup_error_sot=doc["sup_error_sot"],
                   sup_error_wot=doc.get("sup_error_wot"),
                   sup_error_form=doc.get("sup_error_form"),
                   grid_errors=list(doc.get("grid_errors", [])))


def config_hash(document) -> str:
    """Stable hash of a configuration document (canonical JSON, sha256)."""
    canon = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def wilson_interval(hits: int, trials: int, z: float = _WILSON_Z95) -> tuple:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not (0 <= hits <= trials):
        raise ValueError("hits must lie in [0, trials]")
    phat = hits / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def append_jsonl(records, path, config_hash_value: str) -> None:
    """Append records to a JSONL file, one document per line."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict(config_hash_value)) + "\n")


def read_jsonl(path):
    """Parse a JSONL record file; returns (records, config hashes seen)."""
    records, hashes = [], set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            hashes.add(doc.get("config_hash", ""))
            records.append(TrialRecord.from_json_dict(doc))
    return records, hashes


SUMMARY_HEADER = ("n", "median_error", "q10", "q90", "tail_freq", "wilson_lo", "wilson_hi")


def summary_rows(records, epsilon: float):
    """One summary row per n: quantiles of the sup error plus tail data."""
    by_n = {}
    for rec in sorted(records, key=lambda r: (r.n, r.trial)):
        by_n.setdefault(rec.n, []).append(rec.sup_error_sot)
    rows = []
    for n in sorted(by_n):
        errs = np.array(by_n[n])
        hits = int(np.sum(errs > epsilon))
        lo, hi = wilson_interval(hits, errs.size)
        rows.append((n, float(np.median(errs)),
                     float(np.quantile(errs, 0.1)), float(np.quantile(errs, 0.9)),
                     hits / errs.size, lo, hi))
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary_csv(rows, path, config_hash_value: str, seed: int) -> None:
    """Summary CSV with the fixed header; first line embeds hash and seed."""
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash_value} seed={seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_summary_csv(path):
    """Parse a summary CSV; returns (rows as dicts, config_hash, seed)."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        meta = {}
        if first.startswith("#"):
            for part in first[1:].split():
                if "=" in part:
                    key, val = part.split("=", 1)
                    meta[key] = val
            header_line = fh.readline()
        else:
            header_line = first + "\n"
        reader = csv.DictReader(io.StringIO(header_line + fh.read()))
        rows = [{k: (float(v) if k != "n" else int(v)) for k, v in row.items()}
                for row in reader]
    return rows, meta.get("config_hash", ""), int(meta.get("seed", -1))


def persist_results(records, directory, config_hash_value: str, seed: int,
                    epsilon: float, basename: str = "trials"):
    """Write the JSONL trial log and the CSV summary table for a run."""
    import os
    os.makedirs(directory, exist_ok=True)
    jsonl_path = os.path.join(directory, f"{basename}.jsonl")
    csv_path = os.path.join(directory, f"{basename}_summary.csv")
    append_jsonl(records, jsonl_path, config_hash_value)
    write_summary_csv(summary_rows(records, epsilon), csv_path, config_hash_value, seed)
    return jsonl_path, csv_path
