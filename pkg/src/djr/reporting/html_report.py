from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from jinja2 import (
    ChoiceLoader,
    Environment,
    FileSystemLoader,
    PackageLoader,
    TemplateNotFound,
    select_autoescape,
)

from djr.measure import CertifiedMeasure
from djr.utils.rationals import format_fraction

logger = logging.getLogger(__name__)

TEMPLATE_NAME = "djr_report.html.j2"


@dataclass
class CheckRow:
    name: str

    ok: bool

    error: str | None = None

    summary: list[tuple[str, str]] = field(default_factory=list)

    @property
    def status_class(self) -> str:
        """CSS class for the verdict cell"""

        return "pass" if self.ok else "fail"


@dataclass
class TowerRow:
    label: str

    passed: bool

    measures: list[tuple[str, str]]

    verdicts: list[tuple[str, bool]]


@dataclass
class ReportModel:
    title: str

    a: int

    b: int

    passed: bool

    checks: list[CheckRow]

    towers: list[TowerRow]

    meta: dict[str, Any]

    @property
    def failed(self) -> list[str]:
        return [check.name for check in self.checks if not check.ok]


def _measure_text(data: dict) -> str:
    measure = CertifiedMeasure.from_json(data)
    return f"{format_fraction(measure.center)} ± {format_fraction(measure.radius, 3)}"


def _rational_text(pair: list[str]) -> str:
    return format_fraction(Fraction(int(pair[0]), int(pair[1])))


def _summarize(details: dict[str, Any]) -> list[tuple[str, str]]:
    """Scalar details only; nested structures stay in the JSON document"""

    return [
        (key, str(value))
        for key, value in sorted(details.items())
        if isinstance(value, (int, str)) or (isinstance(value, list) and not value)
    ]


def _tower_rows(details: dict[str, Any]) -> list[TowerRow]:
    rows = []

    for report in details.get("reports", []):
        label = f"q={report['q']}, N={report['N']}, M={report['M']}"

        measures = [
            ("μ(B*_N)", _measure_text(report["mu_base"])),
            ("μ(A*_N)", _measure_text(report["mu_A"])),
            ("A* return lhs", _measure_text(report["claim2"]["lhs"])),
            ("A* return bound", _rational_text(report["claim2"]["bound"])),
            ("coverage", _measure_text(report["coverage"]["measure"])),
            ("coverage bound", _rational_text(report["coverage"]["bound"])),
            ("coverage bound q(q-1)/2", _rational_text(report["coverage"]["safe_bound"])),
        ]

        vacuous = set(report.get("vacuous", []))
        coverage_label = "coverage (vacuous)" if "coverage" in vacuous else "coverage"
        printed_label = "coverage, printed coefficient"
        if "coverage_printed" in vacuous:
            printed_label += " (vacuous)"

        verdicts = [
            ("disjoint", report["disjoint_ok"]),
            ("A* return", report["claim2"]["ok"]),
            (coverage_label, report["coverage"]["ok"]),
            (printed_label, report["coverage"]["printed_ok"]),
            ("tau", report["tau_ok"]),
            ("base return", report["ineq2_ok"]),
            ("column cover", report["ineq3_ok"]),
            ("complement", report["complement_ok"]),
        ]

        rows.append(TowerRow(label, report["passed"], measures, verdicts))

    return rows


def build_model(document: dict[str, Any], title: str) -> ReportModel:
    """Build the view model from a ``djr-report/1`` document"""

    checks = []

    towers: list[TowerRow] = []

    for name, check in sorted(document["checks"].items()):
        details = check.get("details", {})

        checks.append(
            CheckRow(
                name=name,
                ok=check["ok"],
                error=check.get("error"),
                summary=_summarize(details),
            )
        )

        if name == "towers":
            towers = _tower_rows(details)

    return ReportModel(
        title=title,
        a=document["params"]["a"],
        b=document["params"]["b"],
        passed=document["passed"],
        checks=checks,
        towers=towers,
        meta=document.get("meta", {}),
    )


def _get_jinja_env() -> Environment:
    """

    Create a Jinja environment that works both when installed as a package

    and when running from a source checkout.

    """

    src_templates_dir = Path(__file__).resolve().parent.parent / "templates"

    loader = ChoiceLoader(
        [
            PackageLoader("djr", "templates"),
            FileSystemLoader(str(src_templates_dir)),
        ]
    )

    return Environment(
        loader=loader,
        autoescape=select_autoescape(["html", "xml", "j2"]),
        trim_blocks=True,
        lstrip_blocks=True,
    )


def build_html_report(
    document: dict[str, Any],
    output_html: Path,
    title: str = "Verification Report",
) -> Path:
    """Render a verification document as a single HTML page.

    Args:

        document: A ``djr-report/1`` dictionary, as produced by the pipeline

        output_html: Path where the HTML report will be saved

        title: Title for the report

    Returns:

        Path to the generated HTML report

    Raises:

        FileNotFoundError: If the template cannot be found

    """

    output_html.parent.mkdir(parents=True, exist_ok=True)

    model = build_model(document, title)

    env = _get_jinja_env()

    try:
        tpl = env.get_template(TEMPLATE_NAME)

    except TemplateNotFound as e:
        raise FileNotFoundError(f"Template not found: {e}") from e

    output_html.write_text(tpl.render(model=model), encoding="utf-8")

    logger.info("HTML report generated: %s", output_html)

    return output_html
