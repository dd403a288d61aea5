"""
Reporting - Toolkit Module
Markdown summaries of experiment and stability reports rendered from
jinja2 templates.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping

from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape

logger = logging.getLogger(__name__)

DEFAULT_TEMPLATES_DIR = Path(__file__).parent.parent / "templates"


def _sci(value: Any, digits: int = 3) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "yes" if value else "no"
    try:
        return f"{float(value):.{digits}e}"
    except (TypeError, ValueError):
        return str(value)


def _interval(pair: Any) -> str:
    lo, hi = pair
    return f"[{float(lo):.4g}, {float(hi):.4g}]"


class ReportGenerator:
    """Renders markdown summaries for saved results."""

    TEMPLATES = {
        "experiment": "reports/experiment_summary.md.j2",
        "stability": "reports/stability_summary.md.j2",
    }

    def __init__(self, templates_dir: str | Path = DEFAULT_TEMPLATES_DIR) -> None:
        self.templates_dir = Path(templates_dir)
        if not self.templates_dir.exists():
            raise ValueError(f"Templates directory not found: {templates_dir}")

        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            autoescape=select_autoescape(["html", "xml"]),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.env.filters["sci"] = _sci
        self.env.filters["interval"] = _interval

        for template_name in self.TEMPLATES.values():
            try:
                self.env.get_template(template_name)
            except Exception as e:
                raise ValueError(f"Report template not found: {template_name}") from e

    def _render(self, kind: str, context: Mapping[str, Any]) -> str:
        try:
            return self.env.get_template(self.TEMPLATES[kind]).render(**context)
        except Exception as e:
            logger.error("Rendering %s summary failed: %s", kind, e)
            raise

    def experiment_summary(self, report: Dict[str, Any]) -> str:
        """
        Render an experiment report

        Args:
            report: ExperimentReport.as_dict() output

        Returns:
            Markdown text
        """
        results = report.get("results", {})
        fits = {
            key: value
            for key, value in results.items()
            if key.endswith("Fit") or key == "fit"
        }
        return self._render(
            "experiment",
            {
                "kind": report["kind"],
                "parameters": report.get("parameters", {}),
                "per_size": results.get("perSize", results.get("table", [])),
                "fits": fits,
                "results": results,
                "timing": report.get("timing", {}),
            },
        )

    def stability_summary(self, report: Dict[str, Any]) -> str:
        """Render a StabilityReport.as_dict() output."""
        return self._render(
            "stability",
            {
                "report": report,
                "failed_rows": [row for row in report.get("rows", []) if "error" in row],
                "bulk": report.get("bulkIntervals", []),
            },
        )
