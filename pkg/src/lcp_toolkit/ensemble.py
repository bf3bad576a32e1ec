"""Unweighted output averaging over independently trained models."""

import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from .corpus import Dataset
from .evaluation import PredictionSet, read_predictions
from .inference import group_by_route, predict_with_bundle
from .persistence import load_bundle, validate_routing
from .utils.errors import ConfigError, LCPError, NotFoundError, ValidationError
from .utils.validation import validate_file_exists

logger = logging.getLogger(__name__)


class EnsembleMember(BaseModel):
    """
    One model output: a prediction file, a checkpoint bundle, or a routing
    block mapping each domain to its own bundle.
    """

    model_config = ConfigDict(frozen=True)

    name: Optional[str] = None
    predictions: Optional[str] = None
    checkpoint: Optional[str] = None
    routing: Optional[Dict[str, str]] = None

    @field_validator("routing")
    @classmethod
    def validate_routing_block(
        cls, v: Optional[Dict[str, str]]
    ) -> Optional[Dict[str, str]]:
        return None if v is None else validate_routing(v)

    @model_validator(mode="after")
    def validate_single_source(self) -> "EnsembleMember":
        sources = (self.predictions, self.checkpoint, self.routing)
        if sum(source is not None for source in sources) != 1:
            raise ValidationError(
                "member",
                "give exactly one of predictions, checkpoint or routing",
                self.name,
            )
        return self

    @property
    def reference(self) -> str:
        if self.name:
            return self.name
        if self.predictions:
            return self.predictions
        if self.checkpoint:
            return self.checkpoint
        return json.dumps(self.routing, sort_keys=True)


class EnsembleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    members: List[EnsembleMember]

    @field_validator("members")
    @classmethod
    def validate_members(cls, v: List[EnsembleMember]) -> List[EnsembleMember]:
        if not v:
            raise ValidationError(
                "members", "an ensemble needs at least one member", 0
            )
        return v


def load_ensemble_spec(path: Union[str, Path]) -> EnsembleSpec:
    """
    Read an ensemble spec; relative member paths resolve against its directory.

    Raises:
        NotFoundError: If the file is missing
        ConfigError: If the file is not valid JSON
    """
    path = validate_file_exists(path, "Ensemble spec")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid ensemble spec {path}: {e}")

    def resolve(value: str) -> str:
        candidate = Path(value)
        return str(candidate if candidate.is_absolute() else path.parent / candidate)

    members = []
    for member in raw.get("members", []):
        member = dict(member)
        for key in ("predictions", "checkpoint"):
            if member.get(key):
                member[key] = resolve(member[key])
        if member.get("routing"):
            member["routing"] = {
                domain: resolve(p) for domain, p in member["routing"].items()
            }
        members.append(member)
    try:
        return EnsembleSpec(members=members)
    except PydanticValidationError as e:
        raise ConfigError(f"Invalid ensemble spec {path}: {e}")


def ensemble_average(member_preds: Sequence[PredictionSet]) -> PredictionSet:
    """
    Per-id arithmetic mean of the members, clamped to [0, 1].

    Sums are exactly rounded, so the result does not depend on member order.

    Raises:
        ValidationError: If there are no members or their id sets differ
    """
    if not member_preds:
        raise ValidationError("members", "an ensemble needs at least one member", 0)
    ids = member_preds[0].ids
    expected = set(ids)
    for index, member in enumerate(member_preds[1:], start=2):
        if set(member.ids) != expected:
            raise ValidationError(
                "members",
                f"member {index} covers a different id set than member 1",
                len(member),
            )

    count = len(member_preds)
    scores = {}
    for instance_id in ids:
        mean = math.fsum(m[instance_id] for m in member_preds) / count
        scores[instance_id] = min(max(mean, 0.0), 1.0)
    return PredictionSet(scores=scores)


def member_predictions(member: EnsembleMember, dataset: Dataset) -> PredictionSet:
    """Full prediction set of one member over `dataset`."""
    if member.predictions is not None:
        predictions = read_predictions(member.predictions)
        missing = [i for i in dataset.ids if i not in predictions]
        if missing:
            raise NotFoundError("Prediction", missing[0])
        return predictions.subset(dataset.ids)

    if member.checkpoint is not None:
        return predict_with_bundle(load_bundle(member.checkpoint), dataset)

    assert member.routing is not None
    bundles = {}
    for bundle_path in member.routing.values():
        if bundle_path not in bundles:
            bundles[bundle_path] = load_bundle(bundle_path)
    routing = {domain: bundles[p] for domain, p in member.routing.items()}
    scores: Dict[str, float] = {}
    for bundle, part in group_by_route(routing, dataset):
        scores.update(predict_with_bundle(bundle, part).scores)
    return PredictionSet(scores={i: scores[i] for i in dataset.ids})


def predict_ensemble(spec: EnsembleSpec, dataset: Dataset) -> PredictionSet:
    """
    Predict with every member, then average.

    Raises:
        LCPError: The first member failure, its message prefixed with the member
    """
    outputs = []
    for index, member in enumerate(spec.members, start=1):
        try:
            outputs.append(member_predictions(member, dataset))
        except LCPError as e:
            logger.error(
                f"Ensemble member {index} ({member.reference}) failed: {e.message}"
            )
            raise e.with_context(f"ensemble member {index} ({member.reference})")
    logger.info(
        f"Averaging {len(outputs)} ensemble member(s) over {len(dataset)} instances"
    )
    return ensemble_average(outputs)
