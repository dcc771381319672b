"""Reporting module for djr-verifier.

Verification results are emitted in three forms:
- a deterministic JSON document (schema ``djr-report/1``)
- flat CSV rows for sweeps and tower tables
- an HTML page rendered from a Jinja2 template

Main functions:
- write_json_report / write_csv_rows: machine-readable output
- build_html_report: render the HTML page from a report document
"""

from .html_report import ReportModel, build_html_report
from .writers import dump_json, write_csv_rows, write_json_report

__all__ = [
    "ReportModel",
    "build_html_report",
    "dump_json",
    "write_csv_rows",
    "write_json_report",
]
