"""On-disk formats shared by the CLI stages.

All tables are plain CSV with a header row; the network file is a small
line-oriented text format (see :func:`write_net`).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from bnoprisk.aggregate import ExtractedDatabase
from bnoprisk.bnlearn import DagStructure, DiscreteBayesNet, Discretization
from bnoprisk.corrstats import CorrelationEstimate, CorrelationTarget, LossMatrix
from bnoprisk.synthgen import GeneratorReport
from bnoprisk.varengine import BinnedPdf, VarReport

NET_MAGIC = "BAYESNET 1"


class FormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


# -- loss series --------------------------------------------------------------

def write_series(series: LossMatrix, path) -> None:
    """One row per time step under a ``window, <labels...>`` header.

    A raw series is written as an extracted database with window 1, so
    aggregating it over a single step reproduces the file byte for byte.
    """
    write_database(ExtractedDatabase(1, series.values.T, list(series.process_labels)), path)


def read_series(path) -> LossMatrix:
    """Read a series file; a plain header of labels (no window column) is accepted too."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise FormatError(f"{path}: need a header and at least two time steps")
    header, body = rows[0], rows[1:]
    if header[:1] == ["window"]:
        header = header[1:]
        body = [r[1:] for r in body]
    try:
        values = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise FormatError(f"{path}: row width does not match header")
    return LossMatrix(values.T, header)


def write_report(report: GeneratorReport, path) -> None:
    lines = [
        f"final_objective = {_fmt(report.final_objective)}",
        f"initial_objective = {_fmt(report.initial_objective)}",
        f"accepted_swaps = {report.accepted_swaps}",
        f"proposals = {report.proposals}",
        f"halted_by = {report.halted_by}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def write_trace(report: GeneratorReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective"])
        for it, val in zip(report.trace_iterations, report.objective_trace):
            w.writerow([int(it), _fmt(val)])


def write_correlation(est: CorrelationEstimate, target: CorrelationTarget, path,
                      pairs=None) -> None:
    """Columns ``i, j, lag, c, C_target`` (process indices 1-based)."""
    n = est.c.shape[0]
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(n)]
    tv = target.values(est.max_lag)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "lag", "c", "C_target"])
        for i, j in pairs:
            for t in range(est.max_lag + 1):
                w.writerow([i + 1, j + 1, t, _fmt(est.c[i, j, t]), _fmt(tv[i, j, t])])


# -- extracted database -----------------------------------------------------

def write_database(db: ExtractedDatabase, path) -> None:
    """Header ``window, <labels...>``; each row repeats the window then the sums."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window"] + list(db.process_labels))
        for row in db.records:
            w.writerow([db.window] + [_fmt(v) for v in row])


def read_database(path) -> ExtractedDatabase:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["window"]:
        raise FormatError(f"{path}: missing 'window' header")
    if len(rows) < 2:
        raise FormatError(f"{path}: empty extracted database")
    labels = rows[0][1:]
    windows = {r[0] for r in rows[1:]}
    if len(windows) != 1:
        raise FormatError(f"{path}: inconsistent window column")
    try:
        records = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if records.ndim != 2 or records.shape[1] != len(labels):
        raise FormatError(f"{path}: row width does not match header")
    return ExtractedDatabase(int(windows.pop()), records, labels)


# -- network ------------------------------------------------------------------

def write_net(net: DiscreteBayesNet, path, disc: Discretization | None = None,
              window: int | None = None) -> None:
    """Text format::

        BAYESNET 1
        n_states 5
        nodes p1 p2 p3
        window 90                 (optional)
        maxima 1.0 2.0 3.0        (optional, per-node bin upper limits)
        edge p1 p2
        cpt p2 | p1
        1 : 0.2 0.2 0.2 0.2 0.2   (one line per parent configuration)
        ...
        end
    """
    labels = net.node_labels
    lines = [NET_MAGIC, f"n_states {net.n_states}", "nodes " + " ".join(labels)]
    if window is not None:
        lines.append(f"window {int(window)}")
    if disc is not None:
        lines.append("maxima " + " ".join(_fmt(m) for m in disc.maxima))
    for a, b in net.structure.sorted_edges():
        lines.append(f"edge {labels[a]} {labels[b]}")
    for i, cpt in enumerate(net.cpts):
        parents = net.structure.parents(i)
        lines.append(f"cpt {labels[i]} | " + " ".join(labels[p] for p in parents))
        flat = cpt.reshape(-1, net.n_states)
        for k, probs in enumerate(flat):
            combo = np.unravel_index(k, (net.n_states,) * len(parents)) if parents else ()
            key = " ".join(str(int(c) + 1) for c in combo)
            lines.append(f"{key} : " + " ".join(_fmt(p) for p in probs))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def read_net(path) -> tuple[DiscreteBayesNet, Discretization | None, int | None]:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != NET_MAGIC:
        raise FormatError(f"{path}: not a network file")
    n_states = None
    labels: list[str] = []
    maxima = None
    window = None
    edges = []
    cpt_rows: dict[str, list[list[float]]] = {}
    current = None
    for ln in lines[1:]:
        head, _, rest = ln.partition(" ")
        if head == "n_states":
            n_states = int(rest)
        elif head == "nodes":
            labels = rest.split()
        elif head == "window":
            window = int(rest)
        elif head == "maxima":
            maxima = np.array([float(v) for v in rest.split()])
        elif head == "edge":
            a, b = rest.split()
            edges.append((labels.index(a), labels.index(b)))
        elif head == "cpt":
            current = rest.split("|")[0].strip()
            cpt_rows[current] = []
        elif head == "end":
            break
        elif ":" in ln and current is not None:
            cpt_rows[current].append([float(v) for v in ln.split(":", 1)[1].split()])
        else:
            raise FormatError(f"{path}: cannot parse line {ln!r}")
    if n_states is None or not labels:
        raise FormatError(f"{path}: missing n_states or nodes")
    dag = DagStructure(len(labels), frozenset(edges))
    cpts = []
    for i, lbl in enumerate(labels):
        k = len(dag.parents(i))
        cpts.append(np.array(cpt_rows[lbl]).reshape((n_states,) * (k + 1)))
    net = DiscreteBayesNet(dag, cpts, n_states, labels)
    disc = Discretization(n_states, maxima) if maxima is not None else None
    return net, disc, window


def write_edges(structure: DagStructure, labels, path) -> None:
    """One ``parent child`` pair per line."""
    Path(path).write_text("".join(f"{labels[a]} {labels[b]}\n" for a, b in structure.sorted_edges()))


def read_edges(path, labels) -> DagStructure:
    edges = []
    for ln in Path(path).read_text().splitlines():
        if ln.strip():
            a, b = ln.split()
            edges.append((labels.index(a), labels.index(b)))
    return DagStructure(len(labels), frozenset(edges))


# -- VaR ----------------------------------------------------------------------

def write_var_report(report: VarReport, path) -> None:
    """Rows ``process, var, std`` plus a ``total`` row (std combined in quadrature)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["process", "var", "std"])
        for lbl, v, s in zip(report.process_labels, report.per_process_var, report.per_process_std):
            w.writerow([lbl, _fmt(v), _fmt(s)])
        w.writerow(["total", _fmt(report.total_var), _fmt(np.sqrt(np.sum(report.per_process_std ** 2)))])


def write_pdf(pdf: BinnedPdf, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value", "mass"])
        for k, (v, m) in enumerate(zip(pdf.values, pdf.mass), start=1):
            w.writerow([k, _fmt(v), _fmt(m)])
