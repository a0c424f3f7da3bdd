"""Label schema and per-label feature recipes.

Each eligibility criterion (label) carries its own recipe: which gazetteers
fire context windows, which trigger words do the same, how heavily the TF-IDF
and NER-keyword families are weighted, and whose context features it imports.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping

from .corpus import load_phrase_list
from .errors import ConfigError

LABEL_NAME_RE = re.compile(r"^[A-Z0-9-]+$")

DEFAULT_WINDOW = 5
DEFAULT_WEIGHT = 2.0


@dataclass(frozen=True)
class GazetteerRef:
    """A gazetteer file plus the window/weight its context features use."""

    file: str
    window: int = DEFAULT_WINDOW
    weight: float = DEFAULT_WEIGHT

    @property
    def name(self) -> str:
        stem = self.file.rsplit("/", 1)[-1]
        return stem[:-4] if stem.endswith(".txt") else stem


@dataclass(frozen=True)
class TriggerSet:
    """Trigger words whose surrounding tokens become context features."""

    words: tuple[str, ...]
    window: int = DEFAULT_WINDOW
    weight: float = DEFAULT_WEIGHT


@dataclass(frozen=True)
class LabelConfig:
    label: str
    tfidf_weight: float = 1.0
    kw_weight: float = 1.0
    gazetteers: tuple[GazetteerRef, ...] = ()
    triggers: tuple[TriggerSet, ...] = ()
    imports: tuple[str, ...] = ()
    use_doc_clf: bool = True
    # cue inventory for the synthetic-corpus generator; superset of the
    # gazetteer entries / trigger words that make this label learnable
    cues: tuple[str, ...] = ()


def _check_finite_nonneg(value: float, path: str) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
        raise ConfigError(f"{path}: must be a finite number >= 0, got {value!r}")


def validate_label_config(cfg: LabelConfig, labels: tuple[str, ...], path: str) -> None:
    _check_finite_nonneg(cfg.tfidf_weight, f"{path}.tfidf_weight")
    _check_finite_nonneg(cfg.kw_weight, f"{path}.kw_weight")
    for i, gaz in enumerate(cfg.gazetteers):
        if not isinstance(gaz.window, int) or gaz.window < 1:
            raise ConfigError(f"{path}.gazetteers[{i}].window: must be an integer >= 1")
        _check_finite_nonneg(gaz.weight, f"{path}.gazetteers[{i}].weight")
    for i, trig in enumerate(cfg.triggers):
        if not trig.words:
            raise ConfigError(f"{path}.triggers[{i}].words: must be non-empty")
        if not isinstance(trig.window, int) or trig.window < 1:
            raise ConfigError(f"{path}.triggers[{i}].window: must be an integer >= 1")
        _check_finite_nonneg(trig.weight, f"{path}.triggers[{i}].weight")
    for imported in cfg.imports:
        if imported not in labels:
            raise ConfigError(f"{path}.imports: {imported!r} is not a schema label")
        if imported == cfg.label:
            raise ConfigError(f"{path}.imports: a label cannot import itself")


@dataclass(frozen=True)
class LabelSchema:
    """Ordered label list plus one LabelConfig per label."""

    labels: tuple[str, ...]
    configs: Mapping[str, LabelConfig] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.labels:
            raise ConfigError("schema: label list is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("schema: label names must be unique")
        for name in self.labels:
            if not LABEL_NAME_RE.match(name):
                raise ConfigError(
                    f"schema: label {name!r} must match [A-Z0-9-]+ (uppercase)"
                )
        if set(self.configs) != set(self.labels):
            raise ConfigError("schema: configs must cover exactly the schema labels")
        for name in self.labels:
            validate_label_config(self.configs[name], self.labels, f"labels.{name}")

    def config_for(self, label: str) -> LabelConfig:
        return self.configs[label]


# ---------------------------------------------------------------------------
# default demo schema: the five named criteria, DIETSUPP, and seven filler
# labels to reach the thirteen-classifier layout


GAZETTEER_FILES = {
    "ADVANCED-CAD": "cad_conditions.txt",
    "ASP-FOR-MI": "antiplatelet_drugs.txt",
    "DIETSUPP": "diet_supplements.txt",
    "KETO-1YR": "ketone_terms.txt",
}

# extra planted-cue vocabulary for the seven filler labels
_FILLER_LABEL_CUES = {
    "LABEL-07": ("osteoporosis", "bisphosphonate", "bone density scan"),
    "LABEL-08": ("migraine", "triptan", "aura episodes"),
    "LABEL-09": ("asthma", "inhaled corticosteroid", "wheezing spells"),
    "LABEL-10": ("dialysis", "fistula access", "ultrafiltration"),
    "LABEL-11": ("glaucoma", "intraocular pressure", "visual field loss"),
    "LABEL-12": ("hypothyroidism", "levothyroxine", "tsh elevated"),
    "LABEL-13": ("anemia", "ferritin low", "transfusion history"),
}

DEFAULT_LABELS = (
    "ADVANCED-CAD",
    "ASP-FOR-MI",
    "CREATININE",
    "DIETSUPP",
    "HBA1C",
    "KETO-1YR",
) + tuple(sorted(_FILLER_LABEL_CUES))


def packaged_gazetteer_text(filename: str) -> str:
    return resources.files("cohortsel.data.gazetteers").joinpath(filename).read_text("utf-8")


def packaged_gazetteer_entries(filename: str) -> list[str]:
    entries = []
    for line in packaged_gazetteer_text(filename).splitlines():
        phrase = line.strip().lower()
        if phrase and not phrase.startswith("#"):
            entries.append(phrase)
    return entries


def default_schema(gazetteer_dir: str = "gazetteers") -> LabelSchema:
    """The shipped 13-label demo schema.

    Gazetteer paths are written relative to a pipeline config file as
    ``<gazetteer_dir>/<name>.txt``; the ``synth`` command materializes the
    packaged files at that location.
    """
    entries = {
        label: tuple(packaged_gazetteer_entries(fname))
        for label, fname in GAZETTEER_FILES.items()
    }

    def gaz(label: str, window: int, weight: float) -> GazetteerRef:
        return GazetteerRef(f"{gazetteer_dir}/{GAZETTEER_FILES[label]}", window, weight)

    configs: dict[str, LabelConfig] = {
        "ADVANCED-CAD": LabelConfig(
            label="ADVANCED-CAD",
            kw_weight=2.0,
            gazetteers=(gaz("ADVANCED-CAD", 5, 2.0),),
            cues=entries["ADVANCED-CAD"],
        ),
        "ASP-FOR-MI": LabelConfig(
            label="ASP-FOR-MI",
            kw_weight=2.0,
            gazetteers=(gaz("ASP-FOR-MI", 4, 2.0),),
            triggers=(TriggerSet(("aspirin",), window=5, weight=1.5),),
            imports=("CREATININE",),
            cues=entries["ASP-FOR-MI"],
        ),
        "CREATININE": LabelConfig(
            label="CREATININE",
            kw_weight=2.0,
            triggers=(TriggerSet(("creatinine",), window=4, weight=2.0),),
            cues=("creatinine",),
        ),
        "DIETSUPP": LabelConfig(
            label="DIETSUPP",
            kw_weight=2.0,
            gazetteers=(gaz("DIETSUPP", 5, 2.0),),
            cues=entries["DIETSUPP"],
        ),
        "HBA1C": LabelConfig(
            label="HBA1C",
            kw_weight=2.0,
            triggers=(TriggerSet(("hba1c", "a1c"), window=3, weight=2.0),),
            cues=("hba1c", "a1c"),
        ),
        "KETO-1YR": LabelConfig(
            label="KETO-1YR",
            kw_weight=2.0,
            gazetteers=(gaz("KETO-1YR", 5, 2.0),),
            triggers=(TriggerSet(("ketoacidosis", "dka"), window=6, weight=1.0),),
            cues=entries["KETO-1YR"],
        ),
    }
    for label, cues in _FILLER_LABEL_CUES.items():
        configs[label] = LabelConfig(label=label, kw_weight=2.0, cues=cues)
    return LabelSchema(labels=DEFAULT_LABELS, configs=configs)


def with_family_weights(schema: LabelSchema,
                        family_weights: Mapping[str, tuple[float, float]]) -> LabelSchema:
    """Return a schema whose (tfidf, kw) weights are replaced per label."""
    configs = dict(schema.configs)
    for label, (tfidf_w, kw_w) in family_weights.items():
        configs[label] = replace(configs[label], tfidf_weight=tfidf_w, kw_weight=kw_w)
    return LabelSchema(labels=schema.labels, configs=configs)
