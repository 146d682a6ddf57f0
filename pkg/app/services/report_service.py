"""
Renderização dos achados validados em tabelas markdown.

Notação de célula por (atributo, expressão):
    "{referência}/{não significativos} → {significativos}"  valores "9.30/4.12"
    "{referência}/{todos}"                                    valor "0"
Os grupos aparecem na ordem em que estão gravados no achado (ordem do esquema).
Um valor validado 0 significa "não significativo", não "observado zero";
o rodapé repete essa ressalva.
"""

from collections import OrderedDict
from typing import Mapping, Optional, Sequence

from app.core.exceptions import DataValidationError
from app.models.schemas import BiasFinding, FindingsDocument
from app.utils.logger import get_logger

logger = get_logger(__name__)

ARROW = " → "
CAVEAT = (
    "A validated value of 0 means the disparity is not statistically significant; "
    "it does not indicate that the observed value is zero."
)
SOURCE_TITLES = {"dia": "Differential association (DiA)", "dip": "Performance disparity (DEO)"}


def parse_abbreviations(items: Sequence[str]) -> dict[str, str]:
    """['Female=F', 'Male=M'] → {'Female': 'F', 'Male': 'M'}."""
    out: dict[str, str] = {}
    for item in items:
        name, sep, short = item.partition("=")
        if not sep or not name or not short:
            raise DataValidationError(f"Abreviação inválida: '{item}' (use Nome=Abrev).")
        out[name] = short
    return out


def render_cell(
    finding: BiasFinding,
    abbrev: Optional[Mapping[str, str]] = None,
    highlight_above: Optional[float] = None,
) -> tuple[str, str]:
    """(texto dos grupos, texto dos valores) de um achado."""
    abbrev = abbrev or {}

    def name(group: str) -> str:
        return abbrev.get(group, group)

    not_significant = [e for e in finding.entries if e.validated == 0.0]
    significant = [e for e in finding.entries if e.validated != 0.0]

    left = "/".join([name(finding.reference_group), *(name(e.group) for e in not_significant)])
    if not significant:
        return left, "0"

    values = []
    for e in significant:
        text = f"{e.validated * 100:.2f}"
        if highlight_above is not None and e.validated * 100 > highlight_above:
            text = f"**{text}**"
        values.append(text)
    return left + ARROW + "/".join(name(e.group) for e in significant), "/".join(values)


def render_table(
    findings: Sequence[BiasFinding],
    abbrev: Optional[Mapping[str, str]] = None,
    highlight_above: Optional[float] = None,
) -> list[str]:
    lines = ["| Expression | Groups | Validated (%) |", "|---|---|---|"]
    for f in findings:
        cell, value = render_cell(f, abbrev, highlight_above)
        lines.append(f"| {f.expression} | {cell} | {value} |")
    return lines


def render_report(
    docs: Sequence[FindingsDocument],
    alpha: Optional[float] = None,
    abbrev: Optional[Mapping[str, str]] = None,
    highlight_above: Optional[float] = None,
    attributes: Optional[Sequence[str]] = None,
) -> str:
    """
    Relatório markdown: uma seção por (fonte, atributo), uma linha por expressão.

    attributes: se informado, todos precisam ter achados (relatório incompleto é erro).
    """
    if not docs:
        raise DataValidationError("Nenhum arquivo de achados para o relatório.")

    sections: "OrderedDict[tuple[str, str], list[BiasFinding]]" = OrderedDict()
    for doc in docs:
        for f in doc.findings:
            sections.setdefault((f.source.value, f.attribute), []).append(f)

    present = {attribute for _, attribute in sections}
    missing = [a for a in (attributes or ()) if a not in present]
    if missing:
        raise DataValidationError(f"Achados incompletos: sem resultados para o(s) atributo(s) {missing}.")

    if alpha is None:
        alphas = {doc.metadata.get("alpha") for doc in docs} - {None}
        alpha = alphas.pop() if len(alphas) == 1 else None

    lines = ["# Bias audit report", ""]
    for (source, attribute), findings in sections.items():
        lines.append(f"## {SOURCE_TITLES.get(source, source)}: {attribute}")
        lines.append("")
        lines.extend(render_table(findings, abbrev, highlight_above))
        lines.append("")

    drops = [d for doc in docs for d in doc.metadata.get("drops", [])]
    if drops:
        lines.append("## Dropped strata")
        lines.append("")
        for d in drops:
            group = f", group {d['group']} (n={d['n']})" if d.get("group") else ""
            lines.append(f"- {d['attribute']} / {d['expression']}{group}: {d['reason']}")
        lines.append("")

    tests = sum(len(f.entries) for doc in docs for f in doc.findings)
    digests = ", ".join(dict.fromkeys(doc.manifest_digest for doc in docs))
    alpha_text = f"{alpha:g}" if alpha is not None else "mixed"
    lines.extend([
        "---",
        "",
        f"Tests performed: {tests} (no multiple-comparison correction). "
        f"Significance level: alpha = {alpha_text}. Manifest: {digests}.",
        "",
        CAVEAT,
        "",
    ])
    logger.info(f"Relatório renderizado | seções={len(sections)} | testes={tests}")
    return "\n".join(lines)
