"""Factor-graph templates: schemas, datasets and grounding."""
from importlib import resources

from .grounding import (GroundingResult, ground, hierarchical_symbols, hierarchy_depth,
                        hierarchy_flags, hw_template_bound, is_hierarchical)
from .schema import (Dataset, Schema, TemplateFactor, TemplateSemanticError, TemplateSyntaxError,
                     TemplateVariable, Term, parse_dataset, parse_template, read_dataset,
                     read_template, serialize_dataset, serialize_template)


def voting_schema() -> Schema:
    """The voting model as a template (shipped as ``data/voting.tpl``)."""
    text = resources.files("hwgibbs").joinpath("data/voting.tpl").read_text(encoding="utf-8")
    return parse_template(text)


__all__ = [
    "Dataset", "GroundingResult", "Schema", "TemplateFactor", "TemplateSemanticError",
    "TemplateSyntaxError", "TemplateVariable", "Term", "ground", "hierarchical_symbols",
    "hierarchy_depth", "hierarchy_flags", "hw_template_bound", "is_hierarchical",
    "parse_dataset", "parse_template", "read_dataset", "read_template", "serialize_dataset",
    "serialize_template", "voting_schema",
]
