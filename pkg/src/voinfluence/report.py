"""Table, plot-data, and file emission for influence reports.

All writers are deterministic: fixed float formatting, stable row order,
newline-terminated text.  Plot data is CSV ready for any plotting tool,
with the per-unit contour level equal to the product of the two axes
(prospective EVSI times EVOIR, i.e. the retrospective EVSI); an optional
self-contained SVG scatter is available for quick looks.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .glmm import ClinicObservation
from .linreg import RegressionData
from .loss import InfluenceRecord

__all__ = [
    "DataFormatError",
    "load_regression_csv",
    "load_clinics_csv",
    "linreg_table_csv",
    "linreg_table_text",
    "glmm_table_csv",
    "glmm_table_text",
    "plot_data_csv",
    "plot_svg",
    "parse_records_csv",
]


class DataFormatError(ValueError):
    """An input file does not match the documented layout."""


def _parse_float(text: str, path, line_no: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(
            f"{path}:{line_no}: cannot parse {col!r} value {text!r}") from None


def load_regression_csv(path, add_intercept: bool = True) -> RegressionData:
    """Read a regression dataset.

    Layout: header row, then one label column, predictor columns, and the
    response in the last column.  ``add_intercept`` prepends a column of
    ones.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}:1: file is empty") from None
        if len(header) < 3:
            raise DataFormatError(
                f"{path}:1: need at least label, one predictor, and a "
                "response column")
        labels, rows, ys = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}:{line_no}: expected {len(header)} fields, "
                    f"got {len(row)}")
            labels.append(row[0])
            rows.append([_parse_float(v, path, line_no, header[j + 1])
                         for j, v in enumerate(row[1:-1])])
            ys.append(_parse_float(row[-1], path, line_no, header[-1]))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    x = np.asarray(rows)
    if add_intercept:
        x = np.column_stack([np.ones(len(rows)), x])
    return RegressionData(x, np.asarray(ys), row_labels=labels)


def load_clinics_csv(path) -> list[ClinicObservation]:
    """Read clinic observations: columns region, site, year, tested,
    positive; long format, one row per site-year."""
    path = Path(path)
    required = ["region", "site", "year", "tested", "positive"]
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}:1: file is empty")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise DataFormatError(
                f"{path}:1: missing columns {', '.join(missing)}")
        obs = []
        for line_no, row in enumerate(reader, start=2):
            try:
                obs.append(ClinicObservation(
                    region=int(row["region"]), site=row["site"],
                    year=int(row["year"]), tested=int(row["tested"]),
                    positive=int(row["positive"])))
            except (TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from None
    if not obs:
        raise DataFormatError(f"{path}: no data rows")
    return obs


def _fmt(value, digits: int) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"


LINREG_COLUMNS = ["Label", "CooksD", "RetrospectiveEVSI", "ProspectiveEVSI",
                  "EVOIR", "CalibP"]
GLMM_COLUMNS = ["Clinic", "Region", "ProspectiveEVSI", "RetrospectiveEVSI",
                "EVOIR", "ProspectiveMCSE", "RetrospectiveMCSE"]


def _linreg_rows(records: list[InfluenceRecord], cooks: list[float],
                 precision: int = 3):
    rows = []
    for rec, cd in zip(records, cooks):
        rows.append([rec.unit_id, _fmt(cd, precision),
                     _fmt(rec.retrospective, precision),
                     _fmt(rec.prospective, precision),
                     _fmt(rec.evoir, 2), _fmt(rec.calib_p, 4)])
    return rows


def linreg_table_csv(records, cooks, precision: int = 3) -> str:
    return _csv_text(LINREG_COLUMNS, _linreg_rows(records, cooks, precision))


def linreg_table_text(records, cooks, precision: int = 3) -> str:
    return _aligned_text(LINREG_COLUMNS,
                         _linreg_rows(records, cooks, precision))


def _glmm_rows(records: list[InfluenceRecord], regions: dict[str, int],
               precision: int = 4):
    rows = []
    for rec in records:
        rows.append([rec.unit_id, str(regions.get(rec.unit_id, "")),
                     _fmt(rec.prospective, precision),
                     _fmt(rec.retrospective, precision),
                     _fmt(rec.evoir, 2),
                     _fmt(rec.pro_mcse, precision + 2),
                     _fmt(rec.retro_mcse, precision + 2)])
    return rows


def glmm_table_csv(records, regions, precision: int = 4) -> str:
    return _csv_text(GLMM_COLUMNS, _glmm_rows(records, regions, precision))


def glmm_table_text(records, regions, precision: int = 4) -> str:
    return _aligned_text(GLMM_COLUMNS, _glmm_rows(records, regions, precision))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _aligned_text(header, rows) -> str:
    widths = [max(len(str(h)), *(len(r[j]) for r in rows)) if rows
              else len(str(h)) for j, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(line.rstrip() for line in lines) + "\n"


def plot_data_csv(records: list[InfluenceRecord], n_flagged: int = 0,
                  n_contours: int = 5, grid_points: int = 50) -> str:
    """Scatter geometry: x = prospective EVSI, y = EVOIR, contour level =
    retrospective EVSI, plus hyperbolic level-set traces x*y = c.

    ``n_flagged`` marks that many highest-EVOIR units (0 disables).
    """
    live = [r for r in records if not r.degenerate]
    flagged: set[str] = set()
    if n_flagged and live:
        ranked = sorted(live, key=lambda r: -r.evoir)
        flagged = {r.unit_id for r in ranked[:n_flagged]}

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "label", "x_prospective", "y_evoir",
                     "level_retrospective", "flagged"])
    for r in records:
        if r.degenerate:
            writer.writerow(["point", r.unit_id, repr(r.prospective), "",
                             repr(r.retrospective), "0"])
        else:
            writer.writerow(["point", r.unit_id, repr(r.prospective),
                             repr(r.evoir), repr(r.retrospective),
                             "1" if r.unit_id in flagged else "0"])
    if live:
        xs = np.array([r.prospective for r in live])
        levels = np.array([r.retrospective for r in live])
        pos = levels[levels > 0]
        if pos.size:
            cs = np.quantile(pos, np.linspace(0.2, 1.0, n_contours))
            xgrid = np.linspace(xs.min(), xs.max(), grid_points)
            xgrid = xgrid[xgrid > 0]
            for c in cs:
                for x in xgrid:
                    writer.writerow(["contour", _fmt(c, 6), repr(float(x)),
                                     repr(float(c / x)), _fmt(c, 6), "0"])
    return buf.getvalue()


def parse_records_csv(text: str) -> list[dict]:
    """Re-parse an emitted table CSV into a list of row dicts (strings)."""
    return list(csv.DictReader(io.StringIO(text)))


def plot_svg(records: list[InfluenceRecord], width: int = 640,
             height: int = 480, n_flagged: int = 0) -> str:
    """Minimal self-contained SVG scatter of EVOIR against prospective EVSI."""
    live = [r for r in records if not r.degenerate]
    if not live:
        return ('<svg xmlns="http://www.w3.org/2000/svg" width="%d" '
                'height="%d"/>' % (width, height))
    xs = np.array([r.prospective for r in live])
    ys = np.array([r.evoir for r in live])
    flagged: set[str] = set()
    if n_flagged:
        ranked = sorted(live, key=lambda r: -r.evoir)
        flagged = {r.unit_id for r in ranked[:n_flagged]}
    pad = 50
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = 0.0, float(ys.max()) * 1.05
    xr = (x1 - x0) or 1.0
    yr = (y1 - y0) or 1.0

    def sx(v):
        return pad + (v - x0) / xr * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / yr * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" font-family="sans-serif" font-size="11">',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
             f'y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
             'stroke="black"/>',
             f'<line x1="{pad}" y1="{sy(1.0):.1f}" x2="{width - pad}" '
             f'y2="{sy(1.0):.1f}" stroke="gray" stroke-dasharray="4 3"/>',
             f'<text x="{width / 2:.0f}" y="{height - 12}" '
             'text-anchor="middle">prospective EVSI</text>',
             f'<text x="14" y="{height / 2:.0f}" text-anchor="middle" '
             f'transform="rotate(-90 14 {height / 2:.0f})">EVOIR</text>']
    for r in live:
        cx, cy = sx(r.prospective), sy(r.evoir)
        color = "red" if r.unit_id in flagged else "black"
        parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3.5" '
                     f'fill="{color}"/>')
        if r.unit_id in flagged or len(live) <= 20:
            parts.append(f'<text x="{cx + 5:.1f}" y="{cy - 4:.1f}" '
                         f'fill="{color}">{r.unit_id}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
