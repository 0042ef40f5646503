"""Differential-perceptual metric combinators and the prompt template harness.

Perceptual distances and embedding scores come from an external provider via
manifest files; this module implements only the arithmetic on top of them:

    C_style   = mean(L_erase_style) - mean(L_base_style)
    C_content = mean(L_erase_cont)  - mean(L_base_cont)
    H_o       = mean(C_style over instances) - mean(C_content over instances)

plus the fixed five-style / five-content prompt templates and triplet prompts.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

_MANIFEST_KEYS = {
    "source", "l_gene", "l_base_style", "l_erase_style",
    "l_base_cont", "l_erase_cont", "images",
}


@dataclass
class DistanceManifest:
    l_gene: float
    l_base_style: list[float]
    l_erase_style: list[float]
    l_base_cont: list[float]
    l_erase_cont: list[float]
    source: str = "external"
    images: dict = field(default_factory=dict)

    def __post_init__(self):
        pairs = (
            ("style", self.l_base_style, self.l_erase_style),
            ("cont", self.l_base_cont, self.l_erase_cont),
        )
        for name, base, erase in pairs:
            if len(base) != len(erase):
                raise ValidationError(
                    f"{name} base/erase lists differ in length "
                    f"({len(base)} vs {len(erase)})"
                )
            if len(base) < 1:
                raise ValidationError(f"{name} reference list is empty")
        for v in ([self.l_gene] + self.l_base_style + self.l_erase_style
                  + self.l_base_cont + self.l_erase_cont):
            if v < 0 or not np.isfinite(v):
                raise ValidationError(f"distances must be finite and >= 0, got {v}")


@dataclass
class DlpipsReport:
    l_gene: float
    c_style: float
    c_content: float
    h_o: float
    n_references: tuple[int, int]  # (style refs, content refs)
    source: str = "external"


def compute_dlpips(m: DistanceManifest) -> DlpipsReport:
    """Mean-difference combinators over one manifest; l_gene passes through."""
    c_style = float(np.mean(m.l_erase_style) - np.mean(m.l_base_style))
    c_content = float(np.mean(m.l_erase_cont) - np.mean(m.l_base_cont))
    return DlpipsReport(
        l_gene=float(m.l_gene),
        c_style=c_style,
        c_content=c_content,
        h_o=c_style - c_content,
        n_references=(len(m.l_base_style), len(m.l_base_cont)),
        source=m.source,
    )


def holistic_index(c_style_list, c_content_list) -> float:
    cs = np.asarray(c_style_list, dtype=np.float64)
    cc = np.asarray(c_content_list, dtype=np.float64)
    if cs.size == 0 or cc.size == 0:
        raise ValidationError("holistic_index needs nonempty lists")
    if cs.size != cc.size:
        raise ValidationError(f"instance counts differ: {cs.size} vs {cc.size}")
    return float(cs.mean() - cc.mean())


_STYLE_TEMPLATES = (
    "A work in the style of {style}",
    "A creation in the style of {style}",
    "Artwork in the style of {formal}",
    "Painting in the style of {style}",
    "An image with the artistic style of {style}",
)

_CONTENT_TEMPLATES = (
    "A {content}",
    "A picture of a {content}",
    "An image showing a {content}",
    "A photograph of a {content}",
    "A scene with a {content}",
)


@dataclass
class PromptSet:
    style_prompts: list[str]
    content_prompts: list[str]
    triplet_prompts: dict[str, str]

    def prompt_id_map(self) -> dict[str, str]:
        ids = {f"style_{i + 1}": p for i, p in enumerate(self.style_prompts)}
        ids.update({f"content_{i + 1}": p for i, p in enumerate(self.content_prompts)})
        return ids


def build_prompt_set(style_name: str, content_name: str, alt_content: str,
                     alt_style: str, style_formal_name: str | None = None) -> PromptSet:
    """Instantiate the fixed templates plus the anchor/positive/negative triplet.

    style_formal_name feeds the one template that uses an artist's full name
    (defaults to style_name).
    """
    for label, v in (("style_name", style_name), ("content_name", content_name),
                     ("alt_content", alt_content), ("alt_style", alt_style)):
        if not v:
            raise ValidationError(f"{label} must be nonempty")
    formal = style_formal_name or style_name

    style_prompts = [t.format(style=style_name, formal=formal) for t in _STYLE_TEMPLATES]
    content_prompts = [t.format(content=content_name) for t in _CONTENT_TEMPLATES]
    triplet = {
        "anchor": f"A {content_name} in the style of {style_name}",
        "positive": f"A {alt_content} in the style of {style_name}",
        "negative": f"A {content_name} in the style of {alt_style}",
    }

    c, s, f_ = content_name.casefold(), style_name.casefold(), formal.casefold()
    if c in s or c in f_:
        warnings.warn(
            f"style name {style_name!r} contains the content token {content_name!r}; "
            "template purity violated"
        )
    if s in c:
        warnings.warn(
            f"content name {content_name!r} contains the style name {style_name!r}; "
            "template purity violated"
        )
    return PromptSet(style_prompts, content_prompts, triplet)


def clip_score_summary(per_prompt_scores) -> tuple[float, float]:
    """Mean external embedding score per group: (style mean, content mean).

    prompt ids follow PromptSet.prompt_id_map: style_1..style_5, content_1..5.
    """
    style, content = [], []
    for pid, score in per_prompt_scores:
        if pid.startswith("style_"):
            style.append(float(score))
        elif pid.startswith("content_"):
            content.append(float(score))
        else:
            raise ValidationError(f"unknown prompt id {pid!r}")
    if not style or not content:
        raise ValidationError("both prompt groups need at least one score")
    return float(np.mean(style)), float(np.mean(content))


# ------------------------------------------------------------- JSON plumbing

def _manifest_from_dict(obj: dict) -> DistanceManifest:
    unknown = set(obj) - _MANIFEST_KEYS
    if unknown:
        raise ValidationError(f"unknown manifest keys: {sorted(unknown)}")
    try:
        return DistanceManifest(
            l_gene=float(obj["l_gene"]),
            l_base_style=[float(v) for v in obj["l_base_style"]],
            l_erase_style=[float(v) for v in obj["l_erase_style"]],
            l_base_cont=[float(v) for v in obj["l_base_cont"]],
            l_erase_cont=[float(v) for v in obj["l_erase_cont"]],
            source=str(obj.get("source", "external")),
            images=obj.get("images", {}),
        )
    except KeyError as e:
        raise ValidationError(f"manifest missing key {e.args[0]!r}") from e


def load_manifests(path) -> list[DistanceManifest]:
    """Read one manifest object or {"instances": [...]} from JSON."""
    try:
        with open(path, "rb") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise FormatError(f"{path}: cannot read manifest: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: bad JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    if "instances" in obj:
        rest = set(obj) - {"instances"}
        if rest:
            raise ValidationError(f"unknown manifest keys: {sorted(rest)}")
        if not obj["instances"]:
            raise ValidationError("manifest instance list is empty")
        return [_manifest_from_dict(inst) for inst in obj["instances"]]
    return [_manifest_from_dict(obj)]


def report_to_dict(r: DlpipsReport) -> dict:
    return {
        "source": r.source,
        "l_gene": r.l_gene,
        "c_style": r.c_style,
        "c_content": r.c_content,
        "h_o": r.h_o,
        "n_references": {"style": r.n_references[0], "content": r.n_references[1]},
    }


def report_table(reports: list[DlpipsReport]) -> str:
    """Aligned text table, one row per instance plus an aggregate line."""
    head = f"{'source':<16}{'C_style':>10}{'C_content':>12}{'H_o':>10}{'L_gene':>10}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(
            f"{r.source[:15]:<16}{r.c_style:>10.4f}{r.c_content:>12.4f}"
            f"{r.h_o:>10.4f}{r.l_gene:>10.4f}"
        )
    if len(reports) > 1:
        agg = holistic_index([r.c_style for r in reports],
                             [r.c_content for r in reports])
        lines.append("-" * len(head))
        lines.append(f"{'aggregate H_o':<16}{'':>10}{'':>12}{agg:>10.4f}{'':>10}")
    return "\n".join(lines) + "\n"
